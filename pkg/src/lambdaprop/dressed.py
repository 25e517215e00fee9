"""Single-atom Lambda system: Hamiltonian, dressed states and adiabaticity.

The basis is (|1>, |2>, |3>) with |2> the excited state. For Gamma > 0 the
excited-state energy picks up an imaginary part, Delta -> Delta - i Gamma/2,
which models decay out of the three-level system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAngles

FIELD_FLOOR = 1e-12


@dataclass(frozen=True)
class AtomicState:
    a1: complex
    a2: complex
    a3: complex

    @classmethod
    def ground(cls) -> "AtomicState":
        return cls(1.0 + 0j, 0j, 0j)

    @classmethod
    def from_array(cls, v) -> "AtomicState":
        return cls(complex(v[0]), complex(v[1]), complex(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3], dtype=complex)

    @property
    def norm2(self) -> float:
        return abs(self.a1) ** 2 + abs(self.a2) ** 2 + abs(self.a3) ** 2


@dataclass(frozen=True)
class DressedFrame:
    """Mixing angles, phases and eigenvalues at one point in time."""

    theta: float
    psi: float
    phi_rel: float
    lambda_b1: float
    lambda_b2: float
    lambda_d: float
    omega_gen: float
    phase_p: float = 0.0
    phase_s: float = 0.0

    @classmethod
    def from_fields(cls, omega_p, omega_s, delta, theta_prev=None) -> "DressedFrame":
        theta, psi, phi = mixing_angles(omega_p, omega_s, delta, theta_prev=theta_prev)
        omega = math.hypot(abs(omega_p), abs(omega_s))
        lb1, lb2 = _bright_eigenvalues(omega, delta)
        return cls(
            float(theta), float(psi), float(phi), float(lb1), float(lb2), 0.0, omega,
            float(np.angle(omega_p)), float(np.angle(omega_s)),
        )

    def vectors(self) -> np.ndarray:
        """Columns are |b1>, |b2>, |d> in the bare basis."""
        return dressed_vectors(self.theta, self.psi, self.phase_p, self.phase_s)


def hamiltonian(omega_p, omega_s, delta, gamma=0.0) -> np.ndarray:
    """RWA Hamiltonian at two-photon resonance."""
    op = complex(omega_p)
    os_ = complex(omega_s)
    return np.array(
        [
            [0.0, -op.conjugate(), 0.0],
            [-op, delta - 0.5j * gamma, -os_],
            [0.0, -os_.conjugate(), 0.0],
        ],
        dtype=complex,
    )


def _wrap(phi):
    phi = np.asarray(phi, dtype=float)
    return np.where(phi <= -np.pi, phi + 2 * np.pi, phi)


def mixing_angles(omega_p, omega_s, delta, theta_prev=None):
    """Return (theta, psi, phi_rel).

    tan(theta) = |omega_p/omega_s| and tan(2 psi) = 2 Omega / delta with
    Omega the generalised Rabi frequency. When both fields are below
    FIELD_FLOOR theta is 0/0; pass the value from the previous time step as
    ``theta_prev`` or DegenerateAngles is raised.
    """
    ap = np.abs(omega_p)
    as_ = np.abs(omega_s)
    omega = np.hypot(ap, as_)
    degenerate = (ap < FIELD_FLOOR) & (as_ < FIELD_FLOOR)
    if np.any(degenerate) and theta_prev is None:
        raise DegenerateAngles("both fields vanish; theta is undefined")
    if np.any((omega == 0) & (np.asarray(delta) == 0)):
        raise DegenerateAngles("psi is undefined for zero field and zero detuning")
    theta = np.arctan2(ap, as_)
    if theta_prev is not None:
        theta = np.where(degenerate, theta_prev, theta)
    psi = 0.5 * np.arctan2(2.0 * omega, delta)
    phi = _wrap(np.angle(omega_p * np.conj(omega_s)))
    if np.ndim(theta) == 0:
        return float(theta), float(psi), float(phi)
    return theta, psi, phi


def theta_series(omega_p, omega_s) -> np.ndarray:
    """theta along the last axis, frozen where both fields vanish.

    Degenerate leading samples take the first defined value.
    """
    ap = np.abs(omega_p)
    as_ = np.abs(omega_s)
    theta = np.arctan2(ap, as_)
    ok = (ap >= FIELD_FLOOR) | (as_ >= FIELD_FLOOR)
    if np.all(ok):
        return theta
    n = theta.shape[-1]
    idx = np.where(ok, np.arange(n), -1)
    idx = np.maximum.accumulate(idx, axis=-1)
    first = np.argmax(ok, axis=-1)[..., None]
    idx = np.where(idx < 0, first, idx)
    out = np.take_along_axis(theta, idx, axis=-1)
    # rows with no usable field at all: pump-first convention
    none = ~np.any(ok, axis=-1)
    if np.any(none):
        out[none] = np.pi / 2
    return out


def _bright_eigenvalues(omega, delta):
    omega = np.asarray(omega, dtype=float)
    delta = np.asarray(delta, dtype=float)
    r = np.sqrt(4.0 * omega**2 + delta**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        big_pos = 0.5 * (delta + r)
        big_neg = 0.5 * (delta - r)
        lb2 = np.where(delta >= 0, big_pos, np.where(big_neg != 0, -omega**2 / big_neg, 0.0))
        lb1 = np.where(delta >= 0, np.where(big_pos != 0, -omega**2 / big_pos, 0.0), big_neg)
    if lb1.ndim == 0:
        return float(lb1), float(lb2)
    return lb1, lb2


def dressed_vectors(theta, psi, phase_p=0.0, phase_s=0.0) -> np.ndarray:
    """Dressed states as columns (..., 3, 3): |b1>, |b2>, |d>."""
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    ep = np.exp(-1j * np.asarray(phase_p, dtype=float))
    es = np.exp(-1j * np.asarray(phase_s, dtype=float))
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(psi), np.cos(psi)
    shape = np.broadcast(theta, psi, ep, es).shape
    v = np.zeros(shape + (3, 3), dtype=complex)
    v[..., 0, 0] = cp * st * ep
    v[..., 1, 0] = sp
    v[..., 2, 0] = cp * ct * es
    v[..., 0, 1] = sp * st * ep
    v[..., 1, 1] = -cp
    v[..., 2, 1] = sp * ct * es
    v[..., 0, 2] = ct * ep
    v[..., 1, 2] = 0.0
    v[..., 2, 2] = -st * es
    return v


def eigensystem(omega_p, omega_s, delta, theta_prev=None):
    """Eigenvalues (lambda_b1, lambda_b2, lambda_d) and eigenvectors as columns.

    Built from the closed-form dressed states, so ordering and phases are fixed
    by the mixing angles rather than by a numerical eigensolver.
    """
    frame = DressedFrame.from_fields(omega_p, omega_s, delta, theta_prev=theta_prev)
    values = np.array([frame.lambda_b1, frame.lambda_b2, frame.lambda_d])
    return values, frame.vectors()


def project_dressed(state, frame: DressedFrame) -> tuple[float, float, float]:
    """Populations (P_b1, P_b2, P_d) of ``state`` in the dressed basis."""
    a = state.as_array() if isinstance(state, AtomicState) else np.asarray(state, dtype=complex)
    amps = frame.vectors().conj().T @ a
    p = np.abs(amps) ** 2
    return float(p[0]), float(p[1]), float(p[2])


def projections(amplitudes, omega_p, omega_s, delta) -> np.ndarray:
    """Dressed populations for amplitude arrays of shape (..., n_tau, 3).

    Returns an array (..., n_tau, 3) with columns P_b1, P_b2, P_d. Fields are
    sampled on the same nodes; theta is frozen where both fields vanish.
    """
    theta = theta_series(omega_p, omega_s)
    omega = np.hypot(np.abs(omega_p), np.abs(omega_s))
    psi = 0.5 * np.arctan2(2.0 * omega, delta)
    v = dressed_vectors(theta, psi, np.angle(omega_p), np.angle(omega_s))
    amps = np.einsum("...ij,...i->...j", v.conj(), np.asarray(amplitudes))
    return np.abs(amps) ** 2


def adiabaticity_metrics(omega_p, omega_s, d_omega_p, d_omega_s, delta, gamma=0.0, T=1.0) -> dict:
    """Dimensionless single-atom adiabaticity and loss figures of merit.

    ``eq4a_ratio`` and ``eq4b_ratio`` are the eigenvalue gaps divided by the
    corresponding non-adiabatic couplings, so adiabatic following needs both
    to be much larger than 1 (infinite for static fields). The remaining
    entries need to be large (``detuning_ratio``, ``stark_ratio``) or small
    (``loss_ratio``, ``loss_ratio_small_angle``).
    """
    op = complex(omega_p)
    os_ = complex(omega_s)
    dop = complex(d_omega_p)
    dos = complex(d_omega_s)
    ap, as_ = abs(op), abs(os_)
    omega = math.hypot(ap, as_)
    theta, psi, _ = mixing_angles(op, os_, delta)
    lb1, lb2 = _bright_eigenvalues(omega, delta)

    def mag_phase_rates(z, dz):
        if abs(z) == 0:
            return abs(dz), 0.0
        return (z.conjugate() * dz).real / abs(z), (z.conjugate() * dz).imag / abs(z) ** 2

    dap, dphip = mag_phase_rates(op, dop)
    das, dphis = mag_phase_rates(os_, dos)
    dtheta = (as_ * dap - ap * das) / omega**2 if omega > 0 else 0.0
    domega = (ap * dap + as_ * das) / omega if omega > 0 else 0.0
    dpsi = delta * domega / (delta**2 + 4 * omega**2)
    coupling_a = math.hypot(dtheta, (dphip - dphis) * math.cos(theta) * math.sin(theta)) * math.cos(psi)
    coupling_b = math.hypot(dpsi, 0.5 * (dphip * math.sin(theta) ** 2 + dphis * math.cos(theta) ** 2) * math.sin(2 * psi))
    gap_a = abs(lb1)
    gap_b = abs(lb1 - lb2)
    return {
        "detuning_ratio": abs(delta * T),
        "stark_ratio": omega**2 * T / abs(delta) if delta else math.inf,
        "loss_ratio": gamma * T * psi**2,
        "loss_ratio_small_angle": (omega / delta) ** 2 * gamma * T if delta else math.inf,
        "eq4a_ratio": gap_a / coupling_a if coupling_a > 0 else math.inf,
        "eq4b_ratio": gap_b / coupling_b if coupling_b > 0 else math.inf,
    }
