"""First-order analytic solution by the method of characteristics.

The detuning angle psi is carried along characteristics labelled by the
entrance time zeta, and the field-ratio angle theta (and the relative phase)
along characteristics labelled by xi:

    zeta = tau - eta cos^3(2 psi0(zeta)) / Delta^2
    int_zeta^xi Omega0^2(t) dt = eta cos^4 psi0(zeta) (2 - cos 2 psi0(zeta))

with psi0, theta0, Omega0 taken at the medium entrance (q = 1).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core import PulseEnvelope, SimulationConfig
from .dressed import FIELD_FLOOR
from .errors import AdiabaticityHorizon, InvalidConfig, ShockDetected, ShockWarning

SHOCK_WARN = 0.05
OK, HORIZON, SHOCK = 0, 1, 2


class EntranceProfile:
    """Boundary data at eta = 0 built from the pump and Stokes envelopes."""

    def __init__(self, pump: PulseEnvelope, stokes: PulseEnvelope, delta: float):
        if not delta > 0:
            raise InvalidConfig(
                "the analytic solver needs delta > 0; for delta < 0 flip the sign of "
                "delta and exchange the roles of |b1> and |b2>"
            )
        self.pump = pump
        self.stokes = stokes
        self.delta = float(delta)

    @classmethod
    def from_config(cls, config: SimulationConfig) -> "EntranceProfile":
        pump, stokes = config.envelopes()
        return cls(pump, stokes, config.delta)

    def omega2(self, t):
        return np.abs(self.pump(t)) ** 2 + np.abs(self.stokes(t)) ** 2

    def omega(self, t):
        return np.sqrt(self.omega2(t))

    def energy(self, a, b):
        """Integral of Omega0^2 from a to b."""
        return self.pump.energy_between(a, b) + self.stokes.energy_between(a, b)

    def tail(self, t):
        """Integral of Omega0^2 from t to +infinity."""
        return self.pump.tail_energy(t) + self.stokes.tail_energy(t)

    @property
    def total_energy(self) -> float:
        return self.pump.total_energy + self.stokes.total_energy

    @property
    def omega_max(self) -> float:
        return max(self.pump.peak, self.stokes.peak)

    def support(self) -> tuple[float, float]:
        lo1, hi1 = self.pump.support()
        lo2, hi2 = self.stokes.support()
        return min(lo1, lo2), max(hi1, hi2)

    def psi0(self, t):
        return 0.5 * np.arctan2(2.0 * self.omega(t), self.delta)

    def dpsi0(self, t):
        t = np.asarray(t, dtype=float)
        ap, as_ = np.abs(self.pump(t)), np.abs(self.stokes(t))
        om = np.hypot(ap, as_)
        num = ap * self.pump.abs_derivative(t) + as_ * self.stokes.abs_derivative(t)
        with np.errstate(invalid="ignore", divide="ignore"):
            dom = np.where(om > 0, num / om, 0.0)
        return self.delta * dom / (self.delta**2 + 4.0 * om**2)

    def theta0(self, t):
        t = np.asarray(t, dtype=float)
        ap, as_ = np.abs(self.pump(t)), np.abs(self.stokes(t))
        theta = np.arctan2(ap, as_)
        weak = (ap < FIELD_FLOOR) & (as_ < FIELD_FLOOR)
        if np.any(weak):
            # below the floor use the log-amplitude ratio, which stays defined in Gaussian tails
            with np.errstate(invalid="ignore", over="ignore"):
                d = self.pump.log_abs(t) - self.stokes.log_abs(t)
                tail = np.arctan(np.exp(d))
            # tabulated tails with both fields exactly zero: freeze at the nearest defined side
            lo, hi = self.support()
            frozen = np.where(t <= lo, self.theta0(lo + 1e-12) if np.isfinite(lo) else np.pi / 2,
                              self.theta0(hi - 1e-12) if np.isfinite(hi) else 0.0)
            tail = np.where(np.isfinite(tail), tail, frozen)
            theta = np.where(weak, tail, theta)
        return theta

    def phi0(self, t):
        phi = self.pump.phase_at(t) - self.stokes.phase_at(t)
        phi = np.angle(np.exp(1j * phi))
        return np.where(phi <= -np.pi, phi + 2 * np.pi, phi)

    def stokes_phase(self, t):
        return self.stokes.phase_at(t)


@dataclass(frozen=True)
class CharacteristicPoint:
    eta: float
    tau: float
    zeta: float
    xi: float
    psi: float
    theta: float
    phi: float
    omega_p: complex
    omega_s: complex
    p1: float
    p2: float
    p3: float


@dataclass(frozen=True)
class LimitsReport:
    """Propagation limits for one configuration (lengths in 1/(qT), times in T).

    ``eta_max`` and ``tau_max`` are order-of-magnitude estimates: the
    underlying relations only hold up to a constant of order one.
    """

    eta_max: float
    tau_max: float
    tau_delay_medium: float
    tau_delay_small_angle: float
    shock_ratio: float
    shock_ratio_small_angle: float
    reshaping_ratio: float
    detuning_ratio: float
    stark_ratio: float
    loss_ratio: float

    def as_dict(self) -> dict:
        return {k: (v if math.isfinite(v) else None) for k, v in asdict(self).items()}


def _speed(psi, delta):
    return np.cos(2.0 * psi) ** 3 / delta**2


def _denominator(eta, zeta, profile):
    psi = profile.psi0(zeta)
    return 1.0 - (6.0 * eta / profile.delta**2) * profile.dpsi0(zeta) * np.cos(2 * psi) ** 2 * np.sin(2 * psi)


def _zeta(eta, tau, profile, tol=1e-12, max_fixed=60):
    """Vectorised solve; returns (zeta, denominator at the root)."""
    eta, tau = np.broadcast_arrays(np.asarray(eta, float), np.asarray(tau, float))
    eta = eta.astype(float)
    d2 = profile.delta**2
    zeta = tau - eta * _speed(profile.psi0(tau), profile.delta)
    done = np.zeros(eta.shape, dtype=bool)
    # damped fixed point; converges when the characteristics do not cross
    for _ in range(max_fixed):
        new = tau - eta * _speed(profile.psi0(zeta), profile.delta)
        step = new - zeta
        zeta = zeta + np.where(done, 0.0, 0.8 * step)
        done |= np.abs(step) <= tol * np.maximum(1.0, np.abs(tau))
        if np.all(done):
            break
    g = zeta - tau + eta * _speed(profile.psi0(zeta), profile.delta)
    bad = ~done | (np.abs(g) > 1e-10)
    if np.any(bad):
        # bisection on [tau - eta/Delta^2, tau], where g changes sign
        lo = (tau - eta / d2)[bad]
        hi = tau[bad].copy()
        e, t = eta[bad], tau[bad]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = mid - t + e * _speed(profile.psi0(mid), profile.delta)
            neg = gm < 0
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
            if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(t))):
                break
        zeta = zeta.copy()
        zeta[bad] = 0.5 * (lo + hi)
    return zeta, _denominator(eta, zeta, profile)


def _multiple_roots(eta, tau, profile, samples=65):
    # sign changes of g on the bracket beyond the one guaranteed root
    eta = np.atleast_1d(eta)
    tau = np.atleast_1d(tau)
    s = np.linspace(0.0, 1.0, samples)
    grid = (tau - eta / profile.delta**2)[:, None] + (eta / profile.delta**2)[:, None] * s[None, :]
    g = grid - tau[:, None] + eta[:, None] * _speed(profile.psi0(grid), profile.delta)
    changes = np.sum(np.diff(np.sign(g), axis=1) != 0, axis=1)
    return changes > 1


def solve_zeta(eta, tau, profile: EntranceProfile):
    """Nonlinear time carried by psi; raises ShockDetected on crossing characteristics."""
    if np.any(np.asarray(eta) < 0):
        raise ValueError("eta must be non-negative")
    zeta, den = _zeta(eta, tau, profile)
    eta_b, tau_b = np.broadcast_arrays(np.asarray(eta, float), np.asarray(tau, float))
    if np.any(den <= 0) or np.any(_multiple_roots(eta_b.ravel(), tau_b.ravel(), profile)):
        raise ShockDetected("characteristics for psi have crossed")
    if np.any(den < SHOCK_WARN):
        warnings.warn("characteristics for psi are close to crossing", ShockWarning, stacklevel=2)
    return float(zeta) if zeta.ndim == 0 else zeta


def _xi_rhs(eta, zeta, profile):
    psi = profile.psi0(zeta)
    return eta * np.cos(psi) ** 4 * (2.0 - np.cos(2.0 * psi))


def _xi(eta, zeta, profile, max_iter=200):
    """Vectorised solve; returns (xi, solvable mask). Unsolvable entries are nan."""
    eta, zeta = np.broadcast_arrays(np.asarray(eta, float), np.asarray(zeta, float))
    rhs = _xi_rhs(eta, zeta, profile)
    ok = profile.tail(zeta) >= rhs
    xi = np.full(eta.shape, np.nan)
    if not np.any(ok):
        return xi, ok
    z, r = zeta[ok], rhs[ok]
    lo = z.copy()
    step = np.full(z.shape, 0.05)
    hi = z + step
    for _ in range(200):
        short = profile.energy(z, hi) < r
        if not np.any(short):
            break
        step = np.where(short, 2 * step, step)
        hi = np.where(short, z + step, hi)
    x = np.where(r == 0, z, 0.5 * (lo + hi))
    for _ in range(max_iter):
        g = profile.energy(z, x) - r
        lo = np.where(g < 0, x, lo)
        hi = np.where(g > 0, x, hi)
        w = profile.omega2(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - g / w
        inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
        new = np.where(inside, newton, 0.5 * (lo + hi))
        new = np.where(r == 0, z, new)
        moved = np.abs(new - x)
        x = new
        if np.all((moved <= 1e-14 * np.maximum(1.0, np.abs(x))) | (hi - lo <= 1e-14 * np.maximum(1.0, np.abs(x)))):
            break
    xi[ok] = x
    return xi, ok


def solve_xi(eta, zeta, profile: EntranceProfile):
    """Nonlinear time carried by theta and the relative phase.

    Raises AdiabaticityHorizon when the pulse energy after ``zeta`` cannot
    cover the right-hand side, i.e. beyond the adiabaticity horizon.
    """
    xi, ok = _xi(eta, zeta, profile)
    if not np.all(ok):
        raise AdiabaticityHorizon("not enough pulse energy left after zeta")
    return float(xi) if xi.ndim == 0 else xi


def analytic_point(eta, tau, profile: EntranceProfile) -> CharacteristicPoint:
    zeta = solve_zeta(eta, tau, profile)
    xi = solve_xi(eta, zeta, profile)
    return _reconstruct(np.float64(eta), np.float64(tau), np.float64(zeta), np.float64(xi), profile, point=True)


def _reconstruct(eta, tau, zeta, xi, profile, point=False):
    psi = profile.psi0(zeta)
    theta = profile.theta0(xi)
    phi = profile.phi0(xi)
    omega = profile.omega(zeta)
    phase_s = profile.stokes_phase(xi)
    op = omega * np.sin(theta) * np.exp(1j * (phase_s + phi))
    os_ = omega * np.cos(theta) * np.exp(1j * phase_s)
    cp2 = np.cos(psi) ** 2
    out = dict(
        eta=eta, tau=tau, zeta=zeta, xi=xi, psi=psi, theta=theta, phi=phi,
        omega_p=op, omega_s=os_,
        p1=cp2 * np.sin(theta) ** 2, p2=np.sin(psi) ** 2, p3=cp2 * np.cos(theta) ** 2,
    )
    if point:
        return CharacteristicPoint(**{k: (complex(v) if np.iscomplexobj(v) else float(v)) for k, v in out.items()})
    return out


def analytic_grid(profile: EntranceProfile, eta, tau) -> dict:
    """Analytic solution on the outer product of ``eta`` and ``tau``.

    Never raises: points past the horizon or inside a shock are nan, and
    ``status`` holds OK, HORIZON or SHOCK per point.
    """
    eta = np.atleast_1d(np.asarray(eta, float))
    tau = np.atleast_1d(np.asarray(tau, float))
    E, T = np.meshgrid(eta, tau, indexing="ij")
    zeta, den = _zeta(E, T, profile)
    xi, ok = _xi(E, zeta, profile)
    status = np.where(ok, OK, HORIZON)
    crossed = _multiple_roots(E.ravel(), T.ravel(), profile).reshape(E.shape)
    status = np.where((den <= 0) | crossed, SHOCK, status)
    out = _reconstruct(E, T, zeta, xi, profile)
    bad = status != OK
    for key in ("xi", "theta", "phi", "omega_p", "omega_s", "p1", "p3"):
        out[key] = np.where(bad, np.nan, out[key])
    shock = status == SHOCK
    for key in ("zeta", "psi", "p2"):
        out[key] = np.where(shock, np.nan, out[key])
    out["status"] = status
    out["denominator"] = den
    return out


def horizon_time(status, tau) -> np.ndarray:
    """First tau at which each eta row stops being solvable (nan if never)."""
    status = np.atleast_2d(status)
    bad = status != OK
    first = np.argmax(bad, axis=1)
    return np.where(np.any(bad, axis=1), np.asarray(tau)[first], np.nan)


def stretch_factors(eta, tau, profile: EntranceProfile):
    """(d zeta/d tau, d xi/d tau, Omega0^2(zeta)/Omega0^2(xi)).

    The last entry is the factor by which the entrance theta and phase
    non-adiabatic couplings are amplified at (eta, tau).
    """
    zeta = solve_zeta(eta, tau, profile)
    xi = solve_xi(eta, zeta, profile)
    den = _denominator(eta, zeta, profile)
    if np.any(den <= 0):
        raise ShockDetected("characteristics for psi have crossed")
    dzeta = 1.0 / den
    with np.errstate(divide="ignore"):
        scale = profile.omega2(zeta) / profile.omega2(xi)
    dxi = scale * dzeta * den
    return dzeta, dxi, scale


def tau_max(eta, profile: EntranceProfile) -> float:
    """Latest tau for which pulse energy remains to carry theta over ``eta``.

    Root of tail(tau) = eta; +inf at eta = 0 and nan when eta exceeds the
    total pulse energy.
    """
    if eta <= 0:
        return math.inf
    total = profile.total_energy
    if not eta < total:
        return math.nan
    lo, hi = profile.support()
    if not math.isfinite(lo):
        return math.inf
    while profile.tail(hi) >= eta:
        hi += hi - lo
    return brentq(lambda t: float(profile.tail(t)) - eta, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500)


def limits(config: SimulationConfig, profile: EntranceProfile | None = None) -> LimitsReport:
    if profile is None:
        profile = EntranceProfile.from_config(config)
    L = config.length
    T = config.t_s
    delta = profile.delta
    lo, hi = config.tau_window
    zs = np.linspace(lo, hi, 8001)
    psi = profile.psi0(zs)
    k = int(np.argmax(psi))
    psi_peak = float(psi[k])
    shock = 6.0 * psi * np.tan(2 * psi) * (L / delta**2) * np.cos(2 * psi) ** 3 / T
    om_max = profile.omega_max
    with np.errstate(divide="ignore"):
        reshaping = L * T / (om_max * T) ** 2 if om_max > 0 else math.inf
    return LimitsReport(
        eta_max=profile.total_energy,
        tau_max=tau_max(L, profile),
        tau_delay_medium=L / delta**2 * math.cos(2 * psi_peak) ** 3,
        tau_delay_small_angle=L / delta**2,
        shock_ratio=float(np.max(shock)),
        shock_ratio_small_angle=12.0 * T * L * (om_max / delta) ** 2 / (delta * T) ** 2,
        reshaping_ratio=reshaping,
        detuning_ratio=abs(delta * T),
        stark_ratio=om_max**2 * T / abs(delta),
        loss_ratio=config.gamma * T * psi_peak**2,
    )


def general_characteristics(a, b, profile: EntranceProfile, eta, tau, da=None):
    """(zeta, xi) for psi_eta + a(psi) psi_tau = 0, theta_eta - b(psi) theta_tau = 0.

    Solved directly from the characteristic construction: zeta from
    zeta = tau - eta a(psi0(zeta)), then xi from

        s(xi) = int_zeta^xi exp(J(z')) / (a + b)(psi0(z')) dz' = eta,
        J(z') = int_{psi0(zeta)}^{psi0(z')} a'/(a + b) dpsi,

    integrated with an adaptive ODE solver. ``a`` and ``b`` take and return
    numpy arrays; ``da`` defaults to a centred difference of ``a``. Inputs
    may be arrays of matching shape.
    """
    if da is None:
        def da(p, h=1e-6):
            return (a(p + h) - a(p - h)) / (2 * h)

    def inv_sum(p):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            s = a(p) + b(p)
            return np.where(np.isfinite(s), 1.0 / s, 0.0)

    eta_arr, tau_arr = np.broadcast_arrays(np.asarray(eta, float), np.asarray(tau, float))
    lo, hi = profile.support()
    lo_w = lo if math.isfinite(lo) else float(np.min(tau_arr)) - 50.0
    hi_w = hi if math.isfinite(hi) else float(np.max(tau_arr)) + 50.0
    psi_range = np.linspace(0.0, float(np.max(profile.psi0(np.linspace(lo_w, hi_w, 4001)))) + 1e-3, 257)
    a_vals = a(psi_range)
    a_min, a_max = float(np.min(a_vals)), float(np.max(a_vals))

    # exponent as a function of psi: H(psi) = int_0^psi a'/(a+b)
    hsol = solve_ivp(lambda p, y: [float(da(np.array(p)) * inv_sum(np.array(p)))],
                     (0.0, psi_range[-1]), [0.0], method="DOP853", rtol=1e-13, atol=1e-15,
                     dense_output=True)
    H = hsol.sol

    def one(e, t):
        if e == 0:
            return t, t
        f = lambda z: z - t + e * float(a(np.array(profile.psi0(z))))  # noqa: E731
        z0, z1 = t - e * a_max, t - e * a_min
        if z0 == z1:
            zeta = z0
        else:
            zeta = brentq(f, z0 - 1e-12, z1 + 1e-12, xtol=1e-15, rtol=1e-15, maxiter=500)
        h0 = float(H(float(profile.psi0(zeta)))[0])

        def rhs(z, y):
            p = profile.psi0(z)
            return [math.exp(float(H(float(p))[0]) - h0) * float(inv_sum(np.array(p)))]

        def hit(z, y):
            return y[0] - e
        hit.terminal = True
        hit.direction = 1
        end = max(hi_w, zeta) + 1.0
        widths = [env.width for env in (profile.pump, profile.stokes) if env.shape == "gaussian"]
        max_step = 0.02 * min(widths) if widths else 0.01
        sol = solve_ivp(rhs, (zeta, end), [0.0], method="DOP853", rtol=1e-12, atol=1e-14 * max(e, 1.0),
                        events=hit, max_step=max_step)
        if sol.t_events[0].size == 0:
            raise AdiabaticityHorizon("s(xi) never reaches eta")
        return zeta, float(sol.t_events[0][0])

    flat = [one(float(e), float(t)) for e, t in zip(eta_arr.ravel(), tau_arr.ravel())]
    zeta = np.array([f[0] for f in flat]).reshape(eta_arr.shape)
    xi = np.array([f[1] for f in flat]).reshape(eta_arr.shape)
    if zeta.ndim == 0:
        return float(zeta), float(xi)
    return zeta, xi


def medium_speeds(delta):
    """(a, b) for the psi and theta transport speeds of the Lambda medium."""
    def a(psi):
        return np.cos(2 * psi) ** 3 / delta**2

    def b(psi):
        om = 0.5 * delta * np.tan(2 * psi)
        with np.errstate(divide="ignore"):
            return np.cos(psi) ** 2 / om**2

    return a, b
