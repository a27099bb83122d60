import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dabdyn.envelope import (
    ENVELOPE_STATE_NAMES,
    EnvelopeState,
    dc_power_balance,
    envelope_rhs,
    power_losses,
    steady_state_residual,
)
from dabdyn.exceptions import DomainError, SingularLoadError
from dabdyn.model import ConstantCurrent, ConstantPower, ConverterParams, load_params
from dabdyn.numerics import rk4_step
from dabdyn.optsolve import solve_operating_point
from dabdyn.simulate import load_for_voltage, periodic_state, run_switched, steady_metrics
from dabdyn.zvs import instantaneous_current

cplx = st.builds(complex, st.floats(-20, 20), st.floats(-20, 20))


def test_state_names_and_round_trip():
    xe = EnvelopeState.from_phasors(1.0, 100.0, 2 + 3j, -1 + 0.5j, 200.0)
    assert ENVELOPE_STATE_NAMES == ("Id", "Vc1", "Iq1", "Id1", "Iq2", "Id2", "Vc2")
    assert xe.I_qd1 == 2 + 3j and xe.I_qd2 == -1 + 0.5j
    assert EnvelopeState.from_array(xe.as_array()) == xe
    with pytest.raises(DomainError):
        EnvelopeState(0, 0, math.inf, 0, 0, 0, 0)


def test_output_capacitor_discharges_into_load(params):
    xe = EnvelopeState(0, 0, 0, 0, 0, 0, 0)
    d = envelope_rhs(xe, 0j, 0j, ConstantCurrent(2.0), params)
    assert d[6] == pytest.approx(-2.0 / params.C2)
    assert np.all(d[2:6] == 0)


def test_constant_power_load_needs_positive_voltage(params):
    xe = EnvelopeState(0, 100, 0, 0, 0, 0, 0)
    with pytest.raises(SingularLoadError):
        envelope_rhs(xe, 1 + 0j, 1 + 0j, ConstantPower(100.0), params)


def test_lossless_rotation_conserves_magnitude():
    p = ConverterParams(R1=0.0, R2=0.0)
    xe = EnvelopeState.from_phasors(0, 0, 1 + 0j, 0j, 0)
    d = envelope_rhs(xe, 0j, 0j, ConstantCurrent(0.0), p)
    dI1 = complex(d[2], d[3])
    # d|I|^2/dt = 2 Re(conj(I) dI/dt)
    assert (xe.I_qd1.conjugate() * dI1).real == pytest.approx(0.0, abs=1e-9)
    assert dI1 == pytest.approx(-1j * p.ws)


def test_lossless_integration_conserves_magnitudes():
    p = ConverterParams(R1=0.0, R2=0.0)
    load = ConstantCurrent(0.0)

    def rhs(t, x):
        d = envelope_rhs(x, 0j, 0j, load, p)
        d[[0, 1, 6]] = 0.0  # dc voltages and input current frozen at zero
        return d

    x = EnvelopeState.from_phasors(0, 0, 3 - 1j, 0.5 + 2j, 0).as_array()
    m1, m2 = abs(complex(x[2], x[3])), abs(complex(x[4], x[5]))
    dt = 1.0 / p.fs / 1000
    for k in range(5000):
        x = rk4_step(rhs, x, k * dt, dt)
    assert abs(complex(x[2], x[3])) == pytest.approx(m1, rel=1e-9)
    assert abs(complex(x[4], x[5])) == pytest.approx(m2, rel=1e-9)


@given(st.floats(-math.pi, math.pi), cplx, cplx, cplx, cplx,
       st.floats(0, 5), st.floats(80, 120), st.floats(150, 250))
def test_rotation_invariance(phi, S1, S2, I1, I2, Id, Vc1, Vc2):
    p = ConverterParams()
    load = ConstantCurrent(1.5)
    r = cmath.exp(1j * phi)
    a = envelope_rhs(EnvelopeState.from_phasors(Id, Vc1, I1, I2, Vc2), S1, S2, load, p)
    b = envelope_rhs(EnvelopeState.from_phasors(Id, Vc1, I1 * r, I2 * r, Vc2), S1 * r, S2 * r, load, p)
    scale = 1.0 + np.abs(a).max()
    for k in (0, 1, 6):
        assert b[k] == pytest.approx(a[k], abs=1e-9 * scale)
    assert complex(b[2], b[3]) == pytest.approx(complex(a[2], a[3]) * r, abs=1e-9 * scale)
    assert complex(b[4], b[5]) == pytest.approx(complex(a[4], a[5]) * r, abs=1e-9 * scale)


def _state_scale(op, p):
    xe = op.state
    I = max(abs(xe.I_qd1), abs(xe.I_qd2))
    return np.array([p.V1 / p.Ld, abs(xe.Id) / p.C1, p.V1 / p.L1, p.V1 / p.L1,
                     p.V1 / p.L1, p.V1 / p.L1, abs(op.Io) / p.C2]) + p.ws * I * np.array(
        [0, 0, 1, 1, 1, 1, 0])


def test_solved_point_is_fixed_point_with_input_drop():
    p = load_params().replace(resistive_input_drop=True)
    op = solve_operating_point(300.0, p, seed=0)
    d = envelope_rhs(op.state, *op.phasors, ConstantCurrent(op.Io), p)
    assert np.all(np.abs(d) < 1e-6 * _state_scale(op, p))


def test_solved_point_with_ideal_input_voltage(params, solved):
    # Vc1 = V1 leaves only the filter drop in the Id equation.
    op = solved(300.0)
    d = envelope_rhs(op.state, *op.phasors, ConstantCurrent(op.Io), params)
    assert d[0] == pytest.approx(-params.r * op.state.Id / params.Ld, rel=1e-9)
    assert np.all(np.abs(d[1:]) < 1e-6 * _state_scale(op, params)[1:])


def test_residual_examples(params, solved):
    op = solved(1000.0)
    res = steady_state_residual(op, params)
    assert res.input_voltage == 0.0
    assert res.max_norm() < 1e-6
    zero = solved(0.0)
    res0 = steady_state_residual(zero, params)
    assert res0.input_current == 0.0 and res0.output_current == 0.0
    assert res0.max_norm(scaled=False) == 0.0


def test_residual_below_tolerance_over_sweep(params, sweep):
    assert sweep.all_converged
    worst = max(steady_state_residual(op, params).max_norm() for op in sweep)
    assert worst < 1e-6


def test_power_balance_zero(params, solved):
    assert dc_power_balance(solved(0.0), params) == (0.0, 0.0)


def test_power_balance_identity_with_input_drop():
    p = load_params().replace(resistive_input_drop=True)
    for P in (1000.0, -1000.0, 400.0):
        op = solve_operating_point(P, p, seed=0)
        Pin, Pout = dc_power_balance(op, p)
        copper, filt = power_losses(op, p)
        assert Pin - Pout == pytest.approx(copper + filt, rel=1e-2)


def test_power_balance_with_ideal_input_voltage(params, solved):
    # With Vc1 = V1 the filter loss is not drawn from the source; the
    # balance closes on the copper loss alone.
    op = solved(1000.0)
    Pin, Pout = dc_power_balance(op, params)
    copper, _ = power_losses(op, params)
    assert Pin > Pout
    assert Pin - Pout == pytest.approx(copper, rel=1e-2)


def test_power_balance_reverse_flow(params, solved):
    op = solved(-1000.0)
    Pin, Pout = dc_power_balance(op, params)
    assert Pin < 0
    assert not abs(Pin) > abs(Pout)


def test_reconstruction_matches_switched_fundamental(params, solved):
    # The load is set so that the switched orbit averages Vc2_ref, the
    # voltage the first-harmonic solution assumes.
    op = solved(500.0)
    load = load_for_voltage(op.control, params)
    x0 = periodic_state(op.control, load, params)
    w = run_switched(op.control, load, params, cycles=1, x0=x0)
    n = w.steps_per_cycle
    theta = np.arange(n) * 2 * math.pi / n
    m = steady_metrics(w, params)
    fha = instantaneous_current(op.I_qd1, theta - math.pi / 2)
    sim = instantaneous_current(m.I_qd1_hat, theta - math.pi / 2)
    assert np.max(np.abs(fha - sim)) < 0.10 * np.max(np.abs(sim))
