"""Full co-propagation of the pump/Stokes envelopes and the atomic amplitudes.

Running coordinates: eta is the distance into the medium and tau the
retarded time. At each eta slice the Schrodinger equation is integrated
along tau with classical RK4; the fields are then advanced in eta with a
Heun predictor-corrector step of

    d(Omega_p)/d(eta) = i a1* a2,    d(Omega_s)/d(eta) = i a3* a2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .core import SimulationConfig, build_grid, entrance_fields
from .errors import StepUnstable

NORM_LIMIT = 1e-4
# largest |lambda| * h per RK4 substep; keeps RK4 well inside its stability region
MAX_PHASE_STEP = 0.2
# tighter cap for the populated bright state: RK4 damps each mode by ~z^6/72 per step
SLOW_PHASE_STEP = 0.015


@dataclass
class FieldGrid:
    eta: np.ndarray
    tau: np.ndarray
    omega_p: np.ndarray  # (n_eta, n_tau) complex
    omega_s: np.ndarray

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.omega_p) ** 2 + np.abs(self.omega_s) ** 2


@dataclass
class StateGrid:
    eta: np.ndarray
    tau: np.ndarray
    amplitudes: np.ndarray  # (n_eta, n_tau, 3) complex

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@numba.njit(cache=True)
def _interp4(f, j0, x):
    # cubic Lagrange through f[j0..j0+3] at local coordinate x in [0, 3]
    l0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0
    l1 = x * (x - 2.0) * (x - 3.0) / 2.0
    l2 = -x * (x - 1.0) * (x - 3.0) / 2.0
    l3 = x * (x - 1.0) * (x - 2.0) / 6.0
    return l0 * f[j0] + l1 * f[j0 + 1] + l2 * f[j0 + 2] + l3 * f[j0 + 3]


@numba.njit(cache=True)
def _field_at(f, i, s):
    # field at tau_i + s * dtau, s in [0, 1]
    n = f.shape[0]
    if n < 4:
        return f[i] + s * (f[i + 1] - f[i])
    j0 = i - 1
    if j0 < 0:
        j0 = 0
    if j0 > n - 4:
        j0 = n - 4
    return _interp4(f, j0, (i - j0) + s)


@numba.njit(cache=True)
def _rhs(p, s, dc, y0, y1, y2):
    # -i H y
    h0 = -np.conj(p) * y1
    h1 = -p * y0 + dc * y1 - s * y2
    h2 = -np.conj(s) * y1
    return -1j * h0, -1j * h1, -1j * h2


@numba.njit(cache=True)
def _rk4_solve(ep, es, dtau, delta, gamma, a0, max_phase_step, slow_phase_step):
    n = ep.shape[0]
    out = np.empty((n, 3), dtype=np.complex128)
    out[0, 0] = a0[0]
    out[0, 1] = a0[1]
    out[0, 2] = a0[2]
    dc = delta - 0.5j * gamma
    y0, y1, y2 = a0[0], a0[1], a0[2]
    for i in range(n - 1):
        lo = max(i - 1, 0)
        hi = min(i + 3, n)
        om = 0.0
        for j in range(lo, hi):
            w = math.sqrt(abs(ep[j]) ** 2 + abs(es[j]) ** 2)
            if w > om:
                om = w
        root = math.sqrt(0.25 * delta * delta + om * om)
        rho = 0.5 * abs(delta) + root + 0.5 * gamma
        # |lambda_b1| = Omega tan(psi), written without cancellation
        slow = om * om / (0.5 * abs(delta) + root) if om > 0 else 0.0
        m = int(math.ceil(max(dtau * rho / max_phase_step, dtau * slow / slow_phase_step)))
        if m < 1:
            m = 1
        h = dtau / m
        for k in range(m):
            s0 = k / m
            sm = (k + 0.5) / m
            s1 = (k + 1.0) / m
            p0 = _field_at(ep, i, s0)
            q0 = _field_at(es, i, s0)
            pm = _field_at(ep, i, sm)
            qm = _field_at(es, i, sm)
            p1 = _field_at(ep, i, s1)
            q1 = _field_at(es, i, s1)
            k10, k11, k12 = _rhs(p0, q0, dc, y0, y1, y2)
            k20, k21, k22 = _rhs(pm, qm, dc, y0 + 0.5 * h * k10, y1 + 0.5 * h * k11, y2 + 0.5 * h * k12)
            k30, k31, k32 = _rhs(pm, qm, dc, y0 + 0.5 * h * k20, y1 + 0.5 * h * k21, y2 + 0.5 * h * k22)
            k40, k41, k42 = _rhs(p1, q1, dc, y0 + h * k30, y1 + h * k31, y2 + h * k32)
            y0 = y0 + h / 6.0 * (k10 + 2.0 * k20 + 2.0 * k30 + k40)
            y1 = y1 + h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
            y2 = y2 + h / 6.0 * (k12 + 2.0 * k22 + 2.0 * k32 + k42)
        out[i + 1, 0] = y0
        out[i + 1, 1] = y1
        out[i + 1, 2] = y2
    return out


def integrate_schrodinger(omega_p, omega_s, tau, delta, gamma=0.0, initial=None,
                          max_phase_step=MAX_PHASE_STEP, slow_phase_step=SLOW_PHASE_STEP) -> np.ndarray:
    """Amplitudes (n_tau, 3) along tau for fields sampled on ``tau``.

    Each grid interval is split into enough RK4 substeps that the fastest
    eigenfrequency advances at most ``max_phase_step`` radians per substep
    and the lower bright eigenvalue, which carries the population, at most
    ``slow_phase_step``. Fields between nodes come from local cubic
    interpolation.
    """
    tau = np.asarray(tau, dtype=float)
    ep = np.ascontiguousarray(omega_p, dtype=np.complex128)
    es = np.ascontiguousarray(omega_s, dtype=np.complex128)
    if ep.shape != tau.shape or es.shape != tau.shape:
        raise ValueError("fields must be sampled on the tau grid")
    a0 = np.array([1, 0, 0] if initial is None else initial, dtype=np.complex128)
    if hasattr(initial, "as_array"):
        a0 = initial.as_array()
    dtau = float(tau[1] - tau[0])
    amps = _rk4_solve(ep, es, dtau, float(delta), float(gamma), a0, float(max_phase_step),
                      float(min(slow_phase_step, max_phase_step)))
    _check_norm(amps, gamma, np.sum(np.abs(a0) ** 2))
    return amps


def _check_norm(amps, gamma, norm0):
    norm = np.sum(np.abs(amps) ** 2, axis=-1)
    if not np.all(np.isfinite(norm)):
        raise StepUnstable("amplitudes diverged")
    if gamma == 0:
        drift = float(np.max(np.abs(norm - norm0)))
    else:
        drift = float(max(np.max(np.diff(norm)), 0.0))
    if drift > NORM_LIMIT:
        raise StepUnstable(f"norm drift {drift:.3g} exceeds {NORM_LIMIT:g}; refine the tau grid")


def field_source(amps) -> tuple[np.ndarray, np.ndarray]:
    """eta-derivatives of (Omega_p, Omega_s) for given amplitudes."""
    a1, a2, a3 = amps[..., 0], amps[..., 1], amps[..., 2]
    return 1j * np.conj(a1) * a2, 1j * np.conj(a3) * a2


def step_fields(omega_p, omega_s, amps, deta, solve):
    """One Heun step in eta.

    ``solve(omega_p, omega_s)`` returns amplitudes for given fields. Returns
    the new fields and the amplitudes solved self-consistently with them.
    """
    sp0, ss0 = field_source(amps)
    pp = omega_p + deta * sp0
    ps = omega_s + deta * ss0
    amps_pred = solve(pp, ps)
    sp1, ss1 = field_source(amps_pred)
    new_p = omega_p + 0.5 * deta * (sp0 + sp1)
    new_s = omega_s + 0.5 * deta * (ss0 + ss1)
    return new_p, new_s, solve(new_p, new_s)


def propagate(config: SimulationConfig, max_phase_step=MAX_PHASE_STEP, callback=None):
    """March the entrance pulses through the medium.

    Returns (FieldGrid, StateGrid) over every eta node. ``callback(n, eta)``
    is called after each slice, if given.
    """
    grid = build_grid(config)
    tau = grid.tau
    ep, es = entrance_fields(config, tau)

    def solve(p, s):
        return integrate_schrodinger(p, s, tau, config.delta, config.gamma, max_phase_step=max_phase_step)

    n_eta = grid.eta.size
    fp = np.empty((n_eta, tau.size), dtype=complex)
    fs = np.empty_like(fp)
    amps = np.empty((n_eta, tau.size, 3), dtype=complex)
    fp[0], fs[0] = ep, es
    amps[0] = solve(ep, es)
    if callback:
        callback(0, grid.eta[0])
    for n in range(1, n_eta):
        deta = grid.eta[n] - grid.eta[n - 1]
        fp[n], fs[n], amps[n] = step_fields(fp[n - 1], fs[n - 1], amps[n - 1], deta, solve)
        if callback:
            callback(n, grid.eta[n])
    return FieldGrid(grid.eta, tau, fp, fs), StateGrid(grid.eta, tau, amps)


def conservation_residuals(fields: FieldGrid, states: StateGrid) -> dict:
    """Discrete residuals of the local energy balances, centred differences.

    Keys ``pump``, ``stokes`` and ``total`` hold
    d|Op|^2/deta - d|a1|^2/dtau, d|Os|^2/deta - d|a3|^2/dtau and
    d(Omega^2)/deta + d|a2|^2/dtau on the interior nodes; ``scale`` holds
    max |d(Omega^2)/deta| for normalisation.
    """
    eta, tau = fields.eta, fields.tau
    if eta.size < 3:
        raise ValueError("need at least three eta slices")
    pop = states.populations
    ip = np.abs(fields.omega_p) ** 2
    is_ = np.abs(fields.omega_s) ** 2
    dip = np.gradient(ip, eta, axis=0)
    dis = np.gradient(is_, eta, axis=0)
    dp = [np.gradient(pop[..., k], tau, axis=1) for k in range(3)]
    inner = (slice(1, -1), slice(1, -1))
    res = {
        "pump": (dip - dp[0])[inner],
        "stokes": (dis - dp[2])[inner],
        "total": (dip + dis + dp[1])[inner],
    }
    res["scale"] = float(np.max(np.abs((dip + dis)[inner])))
    return res
