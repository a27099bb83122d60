import math
import warnings

import numpy as np
import pytest

from dabdyn.envelope import envelope_rhs
from dabdyn.exceptions import DegeneratePolynomialError, DomainError
from dabdyn.model import ConstantCurrent, ConstantPower, ConverterParams
from dabdyn.numerics import eigenvalues, jacobian_fd, quadratic_roots_complex
from dabdyn.stability import (
    EIGEN_COLUMNS,
    PUBLISHED_CV_TARGETS,
    calibrate_passives,
    classify_modes,
    cpl_crossing_power,
    eigen_report,
    eigen_table,
    hurwitz_complex,
    hurwitz_real,
    linearize_envelope,
    write_eigen_csv,
    zero_dynamics_coefficients,
    zero_dynamics_matrices,
    zero_dynamics_verdicts,
)
from dabdyn.tables import read_csv

POWERS = (300.0, 700.0, 1000.0)


@pytest.fixture(scope="module")
def cv_table(params):
    return eigen_table(POWERS, "cv", params, seed=0)


@pytest.fixture(scope="module")
def cpl_table(params):
    return eigen_table(POWERS, "cpl", params, seed=0)


def _fd_jacobian(op, mode, p):
    load = ConstantCurrent(op.Io) if mode == "cv" else ConstantPower(op.Io * op.state.Vc2)
    return jacobian_fd(lambda x: envelope_rhs(x, *op.phasors, load, p), op.state.as_array())


# -- linearization -------------------------------------------------------------

def test_rotation_terms(params, solved):
    J = linearize_envelope(solved(700.0), "cv", params)
    w = params.ws
    assert J[2, 3] == w and J[3, 2] == -w
    assert J[4, 5] == w and J[5, 4] == -w


def test_cv_and_cpl_differ_in_one_entry(params, solved):
    op = solved(700.0)
    a = linearize_envelope(op, "cv", params)
    b = linearize_envelope(op, "cpl", params)
    diff = np.argwhere(a != b)
    assert diff.tolist() == [[6, 6]]
    P = op.Io * op.state.Vc2
    assert b[6, 6] - a[6, 6] == pytest.approx(P / (params.C2 * op.state.Vc2 ** 2))


@pytest.mark.parametrize("mode", ["cv", "cpl"])
def test_jacobian_matches_finite_differences(params, solved, mode):
    op = solved(700.0)
    J = linearize_envelope(op, mode, params)
    Jfd = _fd_jacobian(op, mode, params)
    big = np.abs(J) > 1e-8 * np.abs(J).max()
    assert np.all(np.abs(J - Jfd)[big] <= 1e-4 * np.abs(J)[big])
    assert np.all(np.abs(Jfd[~big]) <= 1e-4 * np.abs(J).max())


def test_spectrum_matches_finite_difference_spectrum(params, cv_table, solved):
    for rep in cv_table:
        lam_fd = eigenvalues(_fd_jacobian(solved(rep.P), "cv", params))
        for z in rep.spectrum:
            assert np.min(np.abs(lam_fd - z)) <= 1e-3 * abs(z)


def test_bad_mode(params, solved):
    with pytest.raises(DomainError):
        linearize_envelope(solved(300.0), "cc", params)


# -- eigenvalue tables ---------------------------------------------------------

def test_cv_structure(params, cv_table):
    for rep in cv_table:
        assert rep.spectrum.size == 7
        assert rep.stable and np.all(rep.spectrum.real < 0)
        assert rep.dominant == rep.spectrum[0]
        lam = rep.spectrum
        assert sorted(lam, key=lambda z: (z.real, z.imag)) == pytest.approx(
            sorted(lam.conjugate(), key=lambda z: (z.real, z.imag)))
        assert sorted(rep.labels) == sorted(("leakage",) * 2 + ("magnetizing",) * 2
                                            + ("input_filter",) * 2 + ("dc_link",))
        mag = rep.by_label("magnetizing")
        assert np.abs(np.abs(mag.imag) - params.ws).max() < 5e-3 * params.ws


def test_leakage_mode_matches_zero_dynamics(params, cv_table):
    _, (a0, a1, b1, a2, b2) = zero_dynamics_coefficients(params)
    roots = quadratic_roots_complex(a0, complex(a1, b1), complex(a2, b2))
    fast = min(z.real for z in roots)
    assert fast == pytest.approx(-4.686e4, rel=0.02)
    for rep in cv_table:
        assert rep.by_label("leakage")[0].real == pytest.approx(fast, rel=0.02)


def test_cv_targets_after_calibration(cv_table):
    for rep in cv_table:
        filt, dc = PUBLISHED_CV_TARGETS[rep.P]
        lc = rep.by_label("input_filter")
        lc = lc[np.argmax(lc.imag)]
        assert lc.real == pytest.approx(filt.real, rel=0.2)
        assert lc.imag == pytest.approx(filt.imag, rel=0.2)
        assert rep.by_label("dc_link")[0].real == pytest.approx(dc, rel=0.2)


def test_cpl_destabilizes_dc_link(cpl_table):
    dc = [rep.by_label("dc_link")[0].real for rep in cpl_table]
    assert dc[0] < 0
    assert abs(dc[1]) <= 15.0
    assert dc[2] > 0
    assert not cpl_table[2].stable


def test_cpl_crossing_between_table_powers(params):
    P = cpl_crossing_power(params)
    assert 300.0 < P < 1000.0


def test_failed_rows_are_flagged(params):
    reps = eigen_table([300.0, 5000.0], "cv", params)
    assert reps[0].stable and not reps[0].error
    assert reps[1].error and not reps[1].stable
    assert np.all(np.isnan(reps[1].spectrum.real))


def test_classify_modes_fallback(params):
    assert classify_modes(np.array([-1.0, -2.0]), params) == ("other", "other")


def test_eigen_csv(tmp_path, cv_table):
    path = tmp_path / "eig_cv.csv"
    write_eigen_csv(path, cv_table)
    cols, rows = read_csv(path)
    assert tuple(cols) == EIGEN_COLUMNS
    assert [r["P_W"] for r in rows] == list(POWERS)
    assert all(r["stable"] is True for r in rows)
    for r, rep in zip(rows, cv_table):
        got = np.array([complex(r[f"re_{k}"], r[f"im_{k}"]) for k in range(1, 8)])
        assert np.array_equal(got, rep.table_spectrum)


# -- calibration ---------------------------------------------------------------

def test_calibration_reproduces_defaults(params):
    fit = calibrate_passives(params)
    assert fit.r == pytest.approx(params.r, rel=0.01)
    assert fit.C1 == pytest.approx(params.C1, rel=0.01)
    assert fit.C2 == pytest.approx(params.C2, rel=0.01)
    assert np.max(np.abs(fit.residuals)) < 0.2


# -- zero dynamics -------------------------------------------------------------

def test_zero_dynamics_matrices(params):
    A, Ac, pole = zero_dynamics_matrices(params)
    assert pole == pytest.approx(-params.r / params.Ld)
    tr = (params.L1 * params.R1 + params.L1 * params.R2) / params.h
    assert np.trace(A) == pytest.approx(tr)
    assert tr < 0
    lam = eigenvalues(Ac)
    assert np.sum(lam.real) == pytest.approx(tr, rel=1e-9)
    assert sorted(lam.real) == pytest.approx([-4.686e4, -50.0], rel=0.07)
    assert np.allclose(lam.imag, -params.ws)


def test_hurwitz_table_values(params):
    v = zero_dynamics_verdicts(params)
    assert v["real"].stable and v["complex"].stable
    assert v["filter_stable"]
    assert v["L1_sq_minus_Lm_sq"] > 0


def test_hurwitz_unstable_when_magnetizing_exceeds_self_inductance():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        p = ConverterParams(L1=4.0e-3, L2=4.5e-3, Lm=4.1e-3)
    v = zero_dynamics_verdicts(p)
    assert not v["real"].stable
    assert not v["complex"].stable


def test_hurwitz_complex_reduces_to_real():
    rng = np.random.default_rng(1)
    for _ in range(200):
        a1, a2 = rng.normal(size=2)
        assert hurwitz_complex(1.0, a1, 0.0, a2, 0.0).stable == hurwitz_real(a1, a2).stable


def test_hurwitz_degenerate():
    with pytest.raises(DegeneratePolynomialError):
        hurwitz_real(1.0, 1.0, 0.0)
    with pytest.raises(DegeneratePolynomialError):
        hurwitz_complex(0.0, 1.0, 0.0, 1.0, 0.0)


def test_hurwitz_determinant_layout():
    a0, a1, b1, a2, b2 = 1.0, 2.0, 0.5, 3.0, -1.5
    M = np.array([[a1, 0, -b2], [a0, a2, -b1], [0, b2, a1]])
    assert hurwitz_complex(a0, a1, b1, a2, b2).delta2 == pytest.approx(np.linalg.det(M))


def test_hurwitz_complex_matches_root_oracle():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        a1, b1, a2, b2 = rng.normal(size=4) * rng.choice([0.1, 1, 10], size=4)
        v = hurwitz_complex(1.0, a1, b1, a2, b2)
        roots = quadratic_roots_complex(1.0, complex(a1, b1), complex(a2, b2))
        assert v.stable == all(z.real < 0 for z in roots)


def _random_params(rng):
    L1, L2 = rng.uniform(1e-4, 1e-2, size=2)
    # magnetizing inductance on both sides of L1 but below sqrt(L1 L2) or above
    Lm = L1 * rng.uniform(0.5, 1.5)
    if abs(Lm ** 2 - L1 * L2) < 1e-12 * L1 * L2:
        Lm *= 1.01
    R1, R2 = rng.uniform(0.01, 2.0, size=2)
    fs = rng.uniform(1e3, 1e5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return ConverterParams(L1=L1, L2=L2, Lm=Lm, R1=R1, R2=R2, fs=fs)


def test_hurwitz_verdicts_match_eigen_oracle_on_random_parameters():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        p = _random_params(rng)
        A, Ac, _ = zero_dynamics_matrices(p)
        v = zero_dynamics_verdicts(p)
        assert v["real"].stable == bool(np.all(eigenvalues(A).real < 0))
        assert v["complex"].stable == bool(np.all(eigenvalues(Ac).real < 0))
        assert np.sign(v["complex"].delta2) == np.sign(p.L1 ** 2 - p.Lm ** 2)


def test_delta2_closed_form():
    rng = np.random.default_rng(4)
    for _ in range(200):
        p = _random_params(rng)
        v = zero_dynamics_verdicts(p)["complex"]
        T = (p.L1 * p.R1 + p.L1 * p.R2) / p.h
        D = p.R1 * p.R2 * (p.L1 ** 2 - p.Lm ** 2) / p.h ** 2
        closed = p.R1 * p.R2 * p.L1 ** 2 / p.h ** 4 * (p.R1 + p.R2) ** 2 * (p.L1 ** 2 - p.Lm ** 2)
        assert v.delta2 == pytest.approx(T * T * D, rel=1e-6)
        assert v.delta2 == pytest.approx(closed, rel=1e-6)
