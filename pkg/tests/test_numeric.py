import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lambdaprop.core import FAR_DETUNED, SimulationConfig
from lambdaprop.errors import StepUnstable
from lambdaprop.numeric import (
    conservation_residuals,
    field_source,
    integrate_schrodinger,
    propagate,
)


@settings(max_examples=25, deadline=None)
@given(omega=st.floats(0.5, 50.0), delta=st.floats(-100.0, 100.0))
def test_two_level_rabi_closed_form(omega, delta):
    # pump only, constant: |1>-|2> Rabi flopping at the generalised frequency
    tau = np.linspace(0.0, 2.0, 4001)
    op, os_ = np.full(tau.size, omega, complex), np.zeros(tau.size, complex)
    a = integrate_schrodinger(op, os_, tau, delta)
    w = np.sqrt(omega**2 + delta**2 / 4)
    p2 = (omega / w) ** 2 * np.sin(w * tau) ** 2
    # RK4 global error ~ phase * (rho h)^4 / 120, a few 1e-6 at the top of the range
    assert np.max(np.abs(np.abs(a[:, 1]) ** 2 - p2)) < 1e-5
    assert np.max(np.abs(a[:, 2])) == 0.0


def test_resonant_rabi():
    tau = np.linspace(0.0, 3.0, 301)
    a = integrate_schrodinger(np.full(tau.size, 2.0, complex), np.zeros(tau.size, complex), tau, 0.0)
    assert np.allclose(np.abs(a[:, 0]) ** 2, np.cos(2.0 * tau) ** 2, atol=1e-8)


def test_norm_conserved_at_entrance():
    cfg = SimulationConfig(**FAR_DETUNED)
    f, s = propagate(cfg)
    norm = np.sum(s.populations, axis=-1)
    assert np.max(np.abs(norm - 1.0)) < 1e-8


def test_loss_reduces_norm_monotonically():
    cfg = SimulationConfig(**FAR_DETUNED, gamma=0.5)
    _, s = propagate(cfg)
    norm = np.sum(s.populations[0], axis=-1)
    assert np.all(np.diff(norm) <= 1e-12)
    assert norm[-1] < 1.0


def test_unstable_step_is_reported():
    tau = np.linspace(0.0, 1.0, 11)
    with pytest.raises(StepUnstable):
        integrate_schrodinger(np.full(11, 300.0, complex), np.zeros(11, complex), tau, 0.0, max_phase_step=40.0,
                              slow_phase_step=40.0)


def test_field_source_vanishes_without_excitation():
    a = np.array([[1, 0, 0], [0.6, 0, 0.8]], dtype=complex)
    sp, ss = field_source(a)
    assert np.all(sp == 0) and np.all(ss == 0)


def test_weak_pump_linear_dispersion():
    # far-detuned weak pump: a2 ~ Omega_p/Delta, so Omega_p(eta) ~ Omega_p(0) exp(i eta/Delta)
    cfg = SimulationConfig(omega_p_max=0.5, omega_s_max=0.0, delta=50.0, length=5.0)
    f, _ = propagate(cfg)
    k = np.argmax(np.abs(f.omega_p[0]))
    assert np.angle(f.omega_p[-1, k]) == pytest.approx(5.0 / 50.0, rel=2e-3)
    assert abs(f.omega_p[-1, k]) == pytest.approx(0.5, rel=1e-4)
    assert np.max(np.abs(f.omega_s)) == 0.0


def test_zero_length_returns_entrance_only():
    f, s = propagate(SimulationConfig(**FAR_DETUNED))
    assert f.omega_p.shape == (1, 2201)
    assert s.amplitudes.shape == (1, 2201, 3)


def test_heun_second_order_in_eta():
    base = dict(FAR_DETUNED, delta=100.0, length=2.0, n_tau=1101)
    finals = []
    for n_eta in (5, 10, 20):
        f, _ = propagate(SimulationConfig(**base, n_eta=n_eta))
        finals.append(f.omega_s[-1])
    e1 = np.max(np.abs(finals[0] - finals[1]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    assert 3.0 < e1 / e2 < 5.0


def test_conservation_residuals_small_and_shrinking():
    base = dict(FAR_DETUNED, length=2.0)
    res = []
    for n_tau, n_eta in ((1101, 4), (2201, 8)):
        f, s = propagate(SimulationConfig(**base, n_tau=n_tau, n_eta=n_eta))
        r = conservation_residuals(f, s)
        res.append(max(np.max(np.abs(r[k])) for k in ("pump", "stokes", "total")) / r["scale"])
    assert res[1] < res[0] / 3.0


def test_callback_sees_every_slice():
    seen = []
    propagate(SimulationConfig(**FAR_DETUNED, length=0.3, n_tau=801), callback=lambda n, e: seen.append(n))
    assert seen == [0, 1, 2, 3]
