"""Diagnostics on propagated grids: transfer efficiency, dressed projections,
numeric-vs-analytic comparison and pulse reshaping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .characteristics import EntranceProfile, analytic_grid, horizon_time
from .core import SimulationConfig
from .dressed import projections, theta_series
from .errors import LambdaPropError
from .numeric import FieldGrid, StateGrid, propagate

COMPLETE = 0.99
PEAK_FLOOR = 0.05
TAIL_LIMIT = 0.05
# projections are only meaningful while the pulses are on
ACTIVE_FLOOR = 1e-3
SURGE_LEVEL = 0.99


@dataclass
class TransferSummary:
    eta: float
    final_p1: float
    final_p2: float
    final_p3: float
    peak_p2: float
    max_pd: float
    max_pb2: float
    sup_diff: float = math.nan
    horizon_tau: float = math.nan

    @property
    def complete(self) -> bool:
        return self.final_p3 >= COMPLETE


@dataclass
class Run:
    """A numeric run together with its derived series."""

    config: SimulationConfig
    fields: FieldGrid
    states: StateGrid
    _proj: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def compute(cls, config: SimulationConfig, **kwargs) -> "Run":
        fields, states = propagate(config, **kwargs)
        return cls(config, fields, states)

    @property
    def eta(self) -> np.ndarray:
        return self.fields.eta

    @property
    def tau(self) -> np.ndarray:
        return self.fields.tau

    @property
    def populations(self) -> np.ndarray:
        return self.states.populations

    @property
    def projections(self) -> np.ndarray:
        """(n_eta, n_tau, 3): P_b1, P_b2, P_d."""
        if self._proj is None:
            self._proj = projections(
                self.states.amplitudes, self.fields.omega_p, self.fields.omega_s, self.config.delta
            )
        return self._proj

    def slice_index(self, eta: float) -> int:
        return int(np.argmin(np.abs(self.eta - eta)))


def active_mask(omega_p, omega_s, floor=ACTIVE_FLOOR) -> np.ndarray:
    """Nodes where the generalised Rabi frequency exceeds ``floor`` of its peak."""
    om = np.hypot(np.abs(omega_p), np.abs(omega_s))
    peak = np.max(om, axis=-1, keepdims=True)
    return (om >= floor * peak) & (peak > 0)


def _as_run(source) -> Run:
    if isinstance(source, Run):
        return source
    return Run.compute(source)


def dressed_series(source) -> dict:
    """Dressed-state projections per eta slice.

    ``source`` is a config or a finished Run. Maxima are taken over the
    nodes where the pulses are on (see ``active_mask``).
    """
    run = _as_run(source)
    proj = run.projections
    act = active_mask(run.fields.omega_p, run.fields.omega_s)
    masked = np.where(act[..., None], proj, -np.inf)
    return {
        "eta": run.eta,
        "tau": run.tau,
        "pb1": proj[..., 0],
        "pb2": proj[..., 1],
        "pd": proj[..., 2],
        "max_pb2": np.max(masked[..., 1], axis=-1),
        "max_pd": np.max(masked[..., 2], axis=-1),
    }


def surge_time(pd, tau, active=None, level=SURGE_LEVEL) -> float:
    """First time the dark-state projection reaches ``level`` of its maximum."""
    pd = np.asarray(pd)
    if active is None:
        active = np.ones(pd.shape, dtype=bool)
    vals = np.where(active, pd, -np.inf)
    top = np.max(vals)
    if not np.isfinite(top) or top <= 0:
        return math.nan
    return float(np.asarray(tau)[np.argmax(vals >= level * top)])


def compare(source) -> tuple[list[TransferSummary], dict]:
    """Numeric vs analytic populations for every eta slice.

    Returns the per-slice summaries and the analytic grid (with ``p3`` set to
    nan beyond the horizon). Analytic-solver failures never propagate: an
    unusable configuration yields nan analytic fields and an ``error`` entry.
    """
    run = _as_run(source)
    pops = run.populations
    series = dressed_series(run)
    try:
        profile = EntranceProfile.from_config(run.config)
        ana = analytic_grid(profile, run.eta, run.tau)
        horizon = horizon_time(ana["status"], run.tau)
    except LambdaPropError as exc:
        nan = np.full(pops.shape[:2], np.nan)
        ana = {"p1": nan, "p2": nan, "p3": nan, "status": np.full(nan.shape, -1), "error": str(exc)}
        horizon = np.full(run.eta.shape, np.nan)
    out = []
    for n, eta in enumerate(run.eta):
        diff = np.abs(pops[n, :, 2] - ana["p3"][n])
        diff = diff[np.isfinite(diff)]
        out.append(
            TransferSummary(
                eta=float(eta),
                final_p1=float(pops[n, -1, 0]),
                final_p2=float(pops[n, -1, 1]),
                final_p3=float(pops[n, -1, 2]),
                peak_p2=float(np.max(pops[n, :, 1])),
                max_pd=float(series["max_pd"][n]),
                max_pb2=float(series["max_pb2"][n]),
                sup_diff=float(np.max(diff)) if diff.size else math.nan,
                horizon_tau=float(horizon[n]),
            )
        )
    return out, ana


def sup_difference(a, b, tau, tau_stop=math.inf) -> float:
    """max |a - b| over finite entries with tau < tau_stop."""
    d = np.abs(np.asarray(a) - np.asarray(b))
    keep = np.isfinite(d) & (np.asarray(tau) < tau_stop)
    return float(np.max(d[keep])) if np.any(keep) else math.nan


@dataclass
class ReshapingReport:
    eta: np.ndarray
    pump_peaks: np.ndarray
    stokes_peaks: np.ndarray
    pump_tail_fraction: np.ndarray
    pulse_order: list

    def rows(self):
        for k in range(self.eta.size):
            yield (float(self.eta[k]), int(self.pump_peaks[k]), int(self.stokes_peaks[k]),
                   float(self.pump_tail_fraction[k]), self.pulse_order[k])


def count_peaks(y, floor=PEAK_FLOOR) -> int:
    """Local maxima above ``floor`` of the global peak, with the same prominence."""
    y = np.asarray(y, dtype=float)
    top = float(np.max(y)) if y.size else 0.0
    if top <= 0:
        return 0
    peaks, _ = find_peaks(y, height=floor * top, prominence=floor * top)
    if peaks.size == 0:
        # a maximum sitting on the window edge still counts as one pulse
        return 1
    return int(peaks.size)


def pump_tail_fraction(omega_p, omega_s, tau) -> float:
    """Share of pump energy arriving after the Stokes trailing half-maximum."""
    ap2 = np.abs(omega_p) ** 2
    as_ = np.abs(omega_s)
    total = np.trapezoid(ap2, tau)
    if total <= 0 or np.max(as_) <= 0:
        return 0.0
    k = int(np.flatnonzero(as_ >= 0.5 * np.max(as_))[-1])
    return float(np.trapezoid(ap2[k:], tau[k:]) / total)


def detect_reshaping(fields: FieldGrid) -> ReshapingReport:
    n = fields.eta.size
    pp = np.zeros(n, dtype=int)
    sp = np.zeros(n, dtype=int)
    tail = np.zeros(n)
    order = []
    for k in range(n):
        pp[k] = count_peaks(np.abs(fields.omega_p[k]))
        sp[k] = count_peaks(np.abs(fields.omega_s[k]))
        tail[k] = pump_tail_fraction(fields.omega_p[k], fields.omega_s[k], fields.tau)
        order.append("broken" if (pp[k] > 1 or tail[k] > TAIL_LIMIT) else "intuitive")
    return ReshapingReport(fields.eta, pp, sp, tail, order)


def theta_trajectory(source, eta: float) -> tuple[np.ndarray, np.ndarray, float]:
    """(tau, theta(tau), final theta) at the slice nearest ``eta``.

    The final value is read at the last node where the pulses are still on;
    beyond that theta is a ratio of numerical noise.
    """
    run = _as_run(source)
    n = run.slice_index(eta)
    op, os_ = run.fields.omega_p[n], run.fields.omega_s[n]
    theta = theta_series(op, os_)
    act = active_mask(op, os_)
    final = float(theta[np.flatnonzero(act)[-1]]) if np.any(act) else float(theta[-1])
    return run.tau, theta, final
