import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factories import lv2d, lv4d, random_diagonal_params
from splitlv import AnalyticJacobianUnavailable, KUndefinedError, NonDiagonalGammaError, State
from splitlv.geometry import (
    flow1_jacobian,
    flow2_jacobian,
    k_matrix,
    phase_area_experiment,
    random_trials,
    step_jacobian,
    symplectic_residual,
    triangle_area,
)
from splitlv.integrators import Scheme, flow2

coord = st.floats(-100.0, 100.0)
point = st.tuples(coord, coord)
STARTS = [State([1.0], [7.0]), State([2.0], [1.0]), State([5.0], [3.0])]


def _states(rng, d, n):
    return [State(np.exp(rng.uniform(-1.5, 1.5, d)), np.exp(rng.uniform(-1.5, 1.5, d))) for _ in range(n)]


def test_k_matrix_examples():
    np.testing.assert_array_equal(k_matrix(State([1.0], [1.0])), [[0.0, -1.0], [1.0, 0.0]])
    with pytest.raises(KUndefinedError, match="K undefined"):
        k_matrix(State([0.0], [1.0]))


def test_k_matrix_exactly_skew():
    rng = np.random.default_rng(0)
    for z in _states(rng, 3, 100):
        k = k_matrix(z)
        assert not np.any(k + k.T)


def test_subflow_block_structure(p4, z4):
    dW = np.array([0.1, -0.3, 0.2])
    j1 = flow1_jacobian(p4, z4, 0.1, dW)
    np.testing.assert_array_equal(j1[:2, :2], np.eye(2))
    np.testing.assert_array_equal(j1[:2, 2:], np.zeros((2, 2)))
    j2 = flow2_jacobian(p4, z4, 0.1, dW)
    np.testing.assert_array_equal(j2[2:, 2:], np.eye(2))
    np.testing.assert_array_equal(j2[2:, :2], np.zeros((2, 2)))


@pytest.mark.parametrize("scheme", ["lie", "strang"])
def test_zero_step_jacobian_is_identity(scheme, p4, z4):
    z = np.zeros(3)
    incs = (z, z) if scheme == "strang" else z
    np.testing.assert_array_equal(step_jacobian(p4, z4, 0.0, incs, scheme), np.eye(4))


def test_chain_rule_lie_trotter(p4, z4):
    dW = np.array([0.2, 0.1, -0.4])
    mid = flow2(p4, z4, 0.05, dW)
    expected = flow1_jacobian(p4, mid, 0.05, dW) @ flow2_jacobian(p4, z4, 0.05, dW)
    assert step_jacobian(p4, z4, 0.05, dW, "lie").tobytes() == expected.tobytes()


@pytest.mark.parametrize("params", [lv2d(), lv4d(sigma2=np.full((2, 3), 0.2))])
@pytest.mark.parametrize("scheme", ["lie", "strang"])
def test_analytic_matches_finite_difference(params, scheme):
    rng = np.random.default_rng(11)
    h = 2.0**-6
    for z in _states(rng, params.d, 20):
        a, b = rng.standard_normal((2, params.m)) * np.sqrt(h / 2)
        incs = (a, b) if scheme == "strang" else a + b
        ja = step_jacobian(params, z, h, incs, scheme)
        jf = step_jacobian(params, z, h, incs, scheme, mode="finite_difference")
        assert np.max(np.abs(ja - jf)) <= 1e-5 * (1 + np.max(np.abs(ja)))


def test_em_has_no_analytic_jacobian(p2, z2):
    with pytest.raises(AnalyticJacobianUnavailable):
        step_jacobian(p2, z2, 0.1, [0.0], "em")
    assert step_jacobian(p2, z2, 0.1, [0.0], "em", mode="fd").shape == (2, 2)
    with pytest.raises(ValueError):
        step_jacobian(p2, z2, 0.1, [0.0], "lie", mode="spectral")


@pytest.mark.parametrize("scheme", [Scheme.LIE_TROTTER, Scheme.STRANG])
def test_splitting_preserves_symplectic_form(scheme):
    rng = np.random.default_rng(4)
    for _ in range(20):
        p = random_diagonal_params(rng)
        z = _states(rng, p.d, 1)[0]
        h = 2.0 ** -int(rng.integers(4, 11))
        a, b = rng.standard_normal((2, p.m)) * np.sqrt(h / 2)
        incs = (a, b) if scheme is Scheme.STRANG else a + b
        chk = symplectic_residual(p, z, h, incs, scheme)
        assert chk.relative_residual <= 1e-8
        assert chk.residual_norm >= 0 and np.all(np.isfinite(chk.jacobian))


def test_em_breaks_symplectic_form(p2):
    rows = [r for r in random_trials(p2, ["em"], 100, seed=0)]
    rel = np.array([r[3] for r in rows])
    assert np.sum(rel > 1e-3) >= 90


def test_residual_refuses_non_diagonal_gamma(z4):
    p = lv4d(gamma2=[[7.0, 0.5], [0.0, 4.0]])
    with pytest.raises(NonDiagonalGammaError, match="requires diagonal gamma"):
        symplectic_residual(p, z4, 0.1, np.zeros(3), "lie")


def test_random_trials_layout(p2):
    rows = list(random_trials(p2, ["strang", "lie", "em"], 5, seed=3))
    assert len(rows) == 15
    for trial, scheme, h, rel in rows:
        if scheme is Scheme.EULER_MARUYAMA:
            assert h == 2.0**-4
        else:
            assert 2.0**-10 <= h <= 2.0**-4
    assert rows == list(random_trials(p2, ["strang", "lie", "em"], 5, seed=3))


def test_triangle_examples():
    assert triangle_area((0, 0), (1, 1), (2, 2)) == 0.0
    assert triangle_area((0, 0), (1, 0), (0, 1)) == 0.5


@settings(max_examples=100, deadline=None)
@given(point, point, point, st.permutations(range(3)), st.tuples(coord, coord))
def test_triangle_invariances(a, b, c, perm, shift):
    pts = [a, b, c]
    s = triangle_area(*pts)
    assert s >= 0
    assert triangle_area(*[pts[i] for i in perm]) == pytest.approx(s, rel=1e-9, abs=1e-9)
    moved = [(x + shift[0], y + shift[1]) for x, y in pts]
    assert triangle_area(*moved) == pytest.approx(s, rel=1e-9, abs=1e-6)


def test_phase_area_self_comparison(p2):
    series = phase_area_experiment(p2, STARTS, ["strang"], 2.0**-6, 2.0**-6, 1.0, seed=1)
    assert not np.any(series.abs_error[Scheme.STRANG])
    assert series.areas[Scheme.STRANG][0] == 10.0
    assert series.mean_abs_error("strang", 0.0, 1.0) == 0.0


def test_phase_area_zero_noise_is_deterministic():
    p = lv2d(sigma1=[[0.0]])
    a = phase_area_experiment(p, STARTS, ["strang", "lie", "em"], 2.0**-6, 2.0**-8, 2.0, seed=1)
    b = phase_area_experiment(p, STARTS, ["strang", "lie", "em"], 2.0**-6, 2.0**-8, 2.0, seed=99)
    for s in a.areas:
        np.testing.assert_array_equal(a.areas[s], b.areas[s])
    np.testing.assert_array_equal(a.reference_areas, b.reference_areas)


def test_phase_area_grid(p2):
    series = phase_area_experiment(p2, STARTS, ["lie"], 2.0**-6, 2.0**-8, 10.0, seed=2)
    assert series.times[0] == 0.0 and series.times[-1] == 10.0
    assert len(series.times) == 641 == len(series.reference_areas) == len(series.areas[Scheme.LIE_TROTTER])


def test_phase_area_preconditions(p2, p4):
    with pytest.raises(ValueError):
        phase_area_experiment(p4, STARTS, ["lie"], 2.0**-6, 2.0**-8, 1.0, seed=0)
    with pytest.raises(ValueError):
        phase_area_experiment(p2, STARTS[:2], ["lie"], 2.0**-6, 2.0**-8, 1.0, seed=0)
    with pytest.raises(ValueError):
        phase_area_experiment(p2, STARTS, ["lie"], 2.0**-8, 2.0**-6, 1.0, seed=0)
