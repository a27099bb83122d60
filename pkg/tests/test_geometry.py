import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dabdyn.geometry import (
    AffineField,
    AffineSystem,
    bracket_field,
    controllability_matrix,
    geometry_report,
    lie_bracket,
    observability_matrix,
    relative_degree,
    representative_state,
    zero_dynamics_states,
)
from dabdyn.model import ConstantCurrent, full_order_rhs
from dabdyn.numerics import jacobian_fd

seeds = st.integers(0, 10**6)


def random_field(rng, n=5):
    return AffineField(rng.normal(size=(n, n)), rng.normal(size=n))


@pytest.fixture(scope="module")
def system(params, solved):
    op = solved(300.0)
    return AffineSystem.from_params(params, op.Io), representative_state(op)


# -- brackets ------------------------------------------------------------------

@given(seeds)
def test_bracket_with_itself_vanishes(seed):
    rng = np.random.default_rng(seed)
    f = random_field(rng)
    assert np.allclose(lie_bracket(f, f, rng.normal(size=5)), 0.0, atol=1e-12)


def test_constant_fields_commute():
    a = AffineField(np.zeros((5, 5)), np.arange(5.0))
    b = AffineField(np.zeros((5, 5)), np.ones(5))
    assert np.array_equal(lie_bracket(a, b, np.ones(5)), np.zeros(5))


@given(seeds, st.floats(-10, 10))
def test_bracket_bilinear(seed, a):
    rng = np.random.default_rng(seed)
    f, g = random_field(rng), random_field(rng)
    x = rng.normal(size=5)
    assert np.allclose(lie_bracket(f, a * g, x), a * lie_bracket(f, g, x), atol=1e-9)


@given(seeds)
def test_exact_bracket_field_matches_pointwise(seed):
    rng = np.random.default_rng(seed)
    v, w = random_field(rng), random_field(rng)
    x = rng.normal(size=5)
    assert np.allclose(bracket_field(v, w)(x), lie_bracket(v, w, x), atol=1e-10)


@given(seeds)
@settings(max_examples=50)
def test_jacobi_identity(seed):
    rng = np.random.default_rng(seed)
    u, v, w = random_field(rng), random_field(rng), random_field(rng)
    x = rng.normal(size=5)
    b = bracket_field
    total = b(u, b(v, w))(x) + b(v, b(w, u))(x) + b(w, b(u, v))(x)
    scale = 1 + np.abs(b(u, b(v, w))(x)).max()
    assert np.abs(total).max() < 1e-8 * scale


def test_field_jacobians_match_fd(system):
    sys_, x0 = system
    for fld in (sys_.drift,) + sys_.controls:
        assert np.allclose(fld.jacobian(x0), jacobian_fd(fld, x0), atol=1e-6 * (1 + np.abs(fld.M).max()))


def test_affine_system_matches_switched_model(params, system):
    sys_, x0 = system
    Io = -sys_.drift.c[4] * params.C2
    for s1 in (-1, 0, 1):
        for s2 in (-1, 0, 1):
            assert np.allclose(sys_.rhs(x0, (s1, s2)),
                               full_order_rhs(x0, s1, s2, ConstantCurrent(Io), params))


# -- controllability -----------------------------------------------------------

def test_controllable_at_operating_point(system):
    sys_, x0 = system
    res = controllability_matrix(x0, sys_)
    assert res.matrix.shape == (5, 10)
    assert res.rank == 5 and res.controllable
    assert res.rank_by_depth == sorted(res.rank_by_depth)
    assert res.singular_values.size == 5


def test_origin_is_rank_deficient(system):
    sys_, _ = system
    res = controllability_matrix(np.zeros(5), sys_)
    assert res.rank < 5


def test_rank_invariant_under_scaling_and_relabeling(system):
    sys_, x0 = system
    base = controllability_matrix(x0, sys_).rank
    assert controllability_matrix(2 * x0, sys_).rank == base
    assert controllability_matrix(x0, sys_.swapped()).rank == base


# -- observability -------------------------------------------------------------

def test_observability(system):
    sys_, x0 = system
    res = observability_matrix(x0, sys_)
    assert res.max_rank == 3
    assert not res.fully_observable
    assert np.array_equal(res.matrix[0], np.eye(5)[1])
    assert np.array_equal(res.matrix[5], np.eye(5)[4])


def test_observability_never_exceeds_three(params):
    sys_ = AffineSystem.from_params(params, 2.0)
    rng = np.random.default_rng(5)
    ranks = [observability_matrix(rng.normal(scale=[5, 100, 10, 10, 200]), sys_).max_rank
             for _ in range(100)]
    assert max(ranks) <= 3, [r for r in ranks if r > 3]


# -- relative degree -----------------------------------------------------------

def test_relative_degree(system):
    sys_, x0 = system
    rd = relative_degree(sys_, x0)
    assert rd.degrees == (1, 1)
    assert rd.total == 2 and rd.zero_dim == 3
    assert zero_dynamics_states(sys_, rd) == ("Id", "I1", "I2")


def test_relative_degree_flags_vanishing_current(system):
    sys_, x0 = system
    x = x0.copy()
    x[2] = 0.0
    rd = relative_degree(sys_, x)
    assert rd.ill_defined[0] and rd.degrees[0] is None
    assert rd.total is None and zero_dynamics_states(sys_, rd) is None
    assert rd.degrees[1] == 1


def test_report(params, solved):
    rep = geometry_report(solved(700.0), params)
    assert rep["controllability"]["rank"] == 5
    assert rep["observability"]["max_rank"] == 3
    assert rep["relative_degree"]["degrees"] == [1, 1]
    assert rep["zero_dynamics"] == {"dimension": 3, "states": ["Id", "I1", "I2"]}
    assert rep["angle_rad"] == pytest.approx(math.pi / 4)
