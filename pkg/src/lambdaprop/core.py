"""Configuration, pulse envelopes and grids.

Everything is dimensionless: time in units of the Stokes duration T, Rabi
frequencies, detuning and loss rate in 1/T, and propagation distance in
units of 1/(qT), so the medium coupling q is 1 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import erf, erfc

from .errors import EdgeAmplitudeTooLarge, InvalidConfig

EDGE_THRESHOLD = 1e-6
DEFAULT_WINDOW = (-5.0, 6.0)
DEFAULT_N_TAU = 2201
DEFAULT_ETA_PER_UNIT = 10
SHAPES = ("gaussian", "constant", "tabulated")

_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)


def _erf_diff(x, y):
    """erf(y) - erf(x) without cancellation when both arguments share a sign."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pos = (x >= 0) & (y >= 0)
    neg = (x <= 0) & (y <= 0)
    out = erf(y) - erf(x)
    out = np.where(pos, erfc(x) - erfc(y), out)
    out = np.where(neg, erfc(-y) - erfc(-x), out)
    return out


@dataclass(frozen=True)
class PulseEnvelope:
    """One pulse at the medium entrance.

    Gaussian envelopes follow ``amplitude * exp(-((t - center)/width)**2)``
    with a constant phase. Tabulated envelopes interpolate ``samples``
    (pairs of time and complex value) linearly and vanish outside them.
    """

    shape: str
    amplitude: float = 0.0
    center: float = 0.0
    width: float = 1.0
    phase: float = 0.0
    samples: tuple = ()

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InvalidConfig(f"unknown pulse shape {self.shape!r}")
        if self.shape == "gaussian" and not self.width > 0:
            raise InvalidConfig("pulse width must be positive")
        if self.shape == "tabulated":
            t = self._table_t
            if t.size < 4:
                raise InvalidConfig("tabulated envelope needs at least 4 samples")
            if np.any(np.diff(t) <= 0):
                raise InvalidConfig("tabulated sample times must be increasing")
            _check_smooth(t, self._table_v)

    # tabulated helpers; samples are stored as a tuple so the dataclass stays hashable
    @cached_property
    def _table_t(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples], dtype=float)

    @cached_property
    def _table_v(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples], dtype=complex)

    @classmethod
    def tabulated(cls, t, values) -> "PulseEnvelope":
        t = np.asarray(t, dtype=float)
        values = np.asarray(values, dtype=complex)
        return cls("tabulated", samples=tuple(zip(t.tolist(), values.tolist())))

    @property
    def peak(self) -> float:
        if self.shape == "tabulated":
            return float(np.max(np.abs(self._table_v)))
        return abs(self.amplitude)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.shape == "gaussian":
            u = (t - self.center) / self.width
            return self.amplitude * np.exp(-u * u) * np.exp(1j * self.phase)
        if self.shape == "constant":
            return np.full(t.shape, self.amplitude * np.exp(1j * self.phase), dtype=complex)
        tt, vv = self._table_t, self._table_v
        re = np.interp(t, tt, vv.real, left=0.0, right=0.0)
        im = np.interp(t, tt, vv.imag, left=0.0, right=0.0)
        return re + 1j * im

    def phase_at(self, t) -> np.ndarray:
        """Carrier phase; for tables, held at the nearest nonzero sample."""
        t = np.asarray(t, dtype=float)
        if self.shape != "tabulated":
            return np.full(t.shape, float(self.phase))
        tt, vv = self._table_t, self._table_v
        nz = np.flatnonzero(np.abs(vv) > 0)
        if nz.size == 0:
            return np.zeros(t.shape)
        k = nz[np.clip(np.searchsorted(tt[nz], t) - 1, 0, nz.size - 1)]
        val = self(t)
        return np.where(np.abs(val) > 0, np.angle(val), np.angle(vv[k]))

    def support(self) -> tuple[float, float]:
        """Interval outside which the envelope is negligible (zero for tables)."""
        if self.shape == "gaussian":
            return self.center - 12 * self.width, self.center + 12 * self.width
        if self.shape == "constant":
            return -math.inf, math.inf
        return float(self._table_t[0]), float(self._table_t[-1])

    def log_abs(self, t) -> np.ndarray:
        """log |value|; finite far into Gaussian tails where the value underflows."""
        t = np.asarray(t, dtype=float)
        if self.shape == "gaussian":
            u = (t - self.center) / self.width
            with np.errstate(divide="ignore"):
                return np.log(abs(self.amplitude)) - u * u
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self(t)))

    def abs_derivative(self, t) -> np.ndarray:
        """d|value|/dt."""
        t = np.asarray(t, dtype=float)
        if self.shape == "gaussian":
            u = (t - self.center) / self.width
            return -2.0 * u / self.width * abs(self.amplitude) * np.exp(-u * u)
        if self.shape == "constant":
            return np.zeros(t.shape)
        h = 1e-6 * max(1.0, float(np.min(np.diff(self._table_t))))
        return (np.abs(self(t + h)) - np.abs(self(t - h))) / (2 * h)

    def energy_between(self, a, b) -> np.ndarray:
        """Integral of |value|**2 from a to b (a <= b not required)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.shape == "gaussian":
            s = math.sqrt(2.0) / self.width
            pref = self.amplitude**2 * self.width * _SQRT_HALF_PI / 2.0
            return pref * _erf_diff(s * (a - self.center), s * (b - self.center))
        if self.shape == "constant":
            return self.amplitude**2 * (b - a)
        return self._table_cumulative(b) - self._table_cumulative(a)

    def tail_energy(self, t) -> np.ndarray:
        """Integral of |value|**2 from t to +infinity."""
        t = np.asarray(t, dtype=float)
        if self.shape == "gaussian":
            s = math.sqrt(2.0) / self.width
            pref = self.amplitude**2 * self.width * _SQRT_HALF_PI / 2.0
            return pref * erfc(s * (t - self.center))
        if self.shape == "constant":
            return np.full(t.shape, math.inf if self.amplitude else 0.0)
        return self.total_energy - self._table_cumulative(t)

    @property
    def total_energy(self) -> float:
        if self.shape == "gaussian":
            return self.amplitude**2 * self.width * _SQRT_HALF_PI
        if self.shape == "constant":
            return math.inf if self.amplitude else 0.0
        return float(self._table_cumulative(self._table_t[-1]))

    def _table_cumulative(self, t):
        # exact integral of |linear interpolant|^2, segment by segment
        tt, vv = self._table_t, self._table_v
        h = np.diff(tt)
        u, w = vv[:-1], vv[1:]
        seg = h * (np.abs(u) ** 2 + np.real(np.conj(u) * w) + np.abs(w) ** 2) / 3.0
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        t = np.asarray(t, dtype=float)
        tc = np.clip(t, tt[0], tt[-1])
        k = np.clip(np.searchsorted(tt, tc, side="right") - 1, 0, len(h) - 1)
        s = (tc - tt[k]) / h[k]
        du = w[k] - u[k]
        part = h[k] * (
            np.abs(u[k]) ** 2 * s
            + np.real(np.conj(u[k]) * du) * s**2
            + np.abs(du) ** 2 * s**3 / 3.0
        )
        return cum[k] + part


def _check_smooth(t, v):
    # a slope discontinuity shows up as an isolated spike in the second difference
    d2 = np.abs(v[2:] - 2 * v[1:-1] + v[:-2])
    if d2.size < 3:
        return
    floor = 1e-8 * np.max(np.abs(v))
    neighbours = np.maximum(np.concatenate(([d2[1]], d2[:-1])), np.concatenate((d2[1:], [d2[-2]])))
    bad = d2 > 4.0 * neighbours + floor
    if np.any(bad):
        k = int(np.argmax(bad)) + 1
        raise InvalidConfig(f"tabulated envelope is not smooth near t={t[k]:.6g}")


@dataclass(frozen=True)
class SimulationConfig:
    omega_p_max: float
    omega_s_max: float
    delta: float
    tau_delay: float = 0.0
    t_p: float = 1.0
    t_s: float = 1.0
    gamma: float = 0.0
    phase_p: float = 0.0
    phase_s: float = 0.0
    length: float = 0.0
    n_tau: int = DEFAULT_N_TAU
    n_eta: int | None = None
    tau_window: tuple = DEFAULT_WINDOW
    shape: str = "gaussian"
    pump_table: str | None = None
    stokes_table: str | None = None

    def __post_init__(self):
        window = tuple(float(x) for x in self.tau_window)
        object.__setattr__(self, "tau_window", window)
        if self.n_eta is None:
            object.__setattr__(self, "n_eta", max(1, math.ceil(DEFAULT_ETA_PER_UNIT * self.length - 1e-9)))
        if not (self.t_p > 0 and self.t_s > 0):
            raise InvalidConfig("pulse durations t_p and t_s must be positive")
        if int(self.n_tau) != self.n_tau or self.n_tau < 2:
            raise InvalidConfig("n_tau must be an integer >= 2")
        if int(self.n_eta) != self.n_eta or self.n_eta < 1:
            raise InvalidConfig("n_eta must be an integer >= 1")
        if len(window) != 2 or not window[0] < window[1]:
            raise InvalidConfig("tau_window must be [tau_min, tau_max] with tau_min < tau_max")
        if self.length < 0:
            raise InvalidConfig("length must be non-negative")
        if self.gamma < 0:
            raise InvalidConfig("gamma must be non-negative")
        if self.shape not in SHAPES:
            raise InvalidConfig(f"shape must be one of {SHAPES}")
        if self.shape == "tabulated" and not (self.pump_table and self.stokes_table):
            raise InvalidConfig("tabulated shape needs pump_table and stokes_table")
        if self.shape != "constant":
            for name, env in zip(("pump", "stokes"), self.envelopes()):
                peak = env.peak
                edge = np.abs(env(np.array(window)))
                if peak > 0 and np.any(edge > EDGE_THRESHOLD * peak):
                    raise EdgeAmplitudeTooLarge(
                        f"{name} amplitude at the window edge exceeds {EDGE_THRESHOLD:g} of its peak"
                    )

    def envelopes(self) -> tuple[PulseEnvelope, PulseEnvelope]:
        """Pump and Stokes envelopes; pump centred at -tau_delay/2, Stokes at +tau_delay/2."""
        if self.shape == "tabulated":
            return (
                _load_table(self.pump_table, self.phase_p),
                _load_table(self.stokes_table, self.phase_s),
            )
        pump = PulseEnvelope(self.shape, self.omega_p_max, -self.tau_delay / 2, self.t_p, self.phase_p)
        stokes = PulseEnvelope(self.shape, self.omega_s_max, self.tau_delay / 2, self.t_s, self.phase_s)
        return pump, stokes

    @property
    def omega_max(self) -> float:
        """Largest single-pulse peak Rabi frequency."""
        return max(env.peak for env in self.envelopes())

    def replace(self, **changes) -> "SimulationConfig":
        if "length" in changes and "n_eta" not in changes:
            changes["n_eta"] = None
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def config_keys() -> tuple[str, ...]:
    return tuple(f.name for f in fields(SimulationConfig))


def _load_table(path, phase) -> PulseEnvelope:
    data = np.loadtxt(Path(path), delimiter=",", comments="#", ndmin=2)
    if data.shape[1] not in (2, 3):
        raise InvalidConfig(f"{path}: expected columns tau,re[,im]")
    values = data[:, 1] + (1j * data[:, 2] if data.shape[1] == 3 else 0)
    return PulseEnvelope.tabulated(data[:, 0], values * np.exp(1j * phase))


class Grid(NamedTuple):
    eta: np.ndarray
    tau: np.ndarray

    @property
    def dtau(self) -> float:
        return float(self.tau[1] - self.tau[0])

    @property
    def deta(self) -> float:
        return float(self.eta[1] - self.eta[0]) if self.eta.size > 1 else 0.0


def build_grid(config: SimulationConfig) -> Grid:
    """Uniform tau nodes over the window and eta nodes over [0, length].

    A zero-length medium gets the single node eta = 0.
    """
    if not isinstance(config, SimulationConfig):
        raise InvalidConfig("build_grid expects a SimulationConfig")
    tau = np.linspace(config.tau_window[0], config.tau_window[1], int(config.n_tau))
    if config.length == 0:
        eta = np.zeros(1)
    else:
        eta = np.linspace(0.0, config.length, int(config.n_eta) + 1)
    return Grid(eta, tau)


def entrance_fields(config: SimulationConfig, tau=None) -> tuple[np.ndarray, np.ndarray]:
    """Complex pump and Stokes Rabi frequencies at eta = 0."""
    if tau is None:
        tau = build_grid(config).tau
    pump, stokes = config.envelopes()
    return pump(tau), stokes(tau)


# Parameter sets used throughout the tests and docs.
SHORT_MEDIUM = dict(omega_p_max=108.6, omega_s_max=110.5, tau_delay=1.4, t_p=0.8, t_s=1.0, delta=50.0)
FAR_DETUNED = dict(omega_p_max=100.0, omega_s_max=100.0, tau_delay=1.3, delta=1000.0)
NEAR_DETUNED = dict(omega_p_max=100.0, omega_s_max=100.0, tau_delay=1.3, delta=50.0)
WEAK_PULSES = dict(omega_p_max=20.0, omega_s_max=20.0, tau_delay=1.0, delta=40.0)
