import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lieorbits import expr as ex
from lieorbits import wedge
from lieorbits.approxexp import ChartIndex
from lieorbits.fields import build_bracket_family, builtin, parse_config

HEIS = build_bracket_family(builtin("heisenberg"))
EX5 = build_bracket_family(builtin("example5"))
GRUSHIN = build_bracket_family(builtin("grushin"))


def test_heisenberg_minor():
    I = [HEIS.index(w) for w in [(1,), (2,), (1, 2)]]
    assert wedge.minor(HEIS, I, (0, 1, 2), (0, 0, 0)) == pytest.approx(1.0)


def test_repeated_rows_or_columns_vanish():
    V = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    assert wedge._det_rows(V, (0, 0)) == 0.0
    W = np.column_stack([V[:, 0], V[:, 0]])
    assert wedge._det_rows(W, (0, 1)) == 0.0


def test_example5_x3_vanishes_on_plane():
    I = [EX5.index((1,)), EX5.index((3,))]
    for K in wedge.index_sets(2, 3):
        assert wedge.minor(EX5, I, K, (0.4, 0.2, 0.0)) == 0.0


def test_lambda_matches_minors_and_scales():
    x = (0.3, -0.2, 0.45)
    lam1 = wedge.lambda_vector(EX5, x, 1.0, 2)
    lamr = wedge.lambda_vector(EX5, x, 0.3, 2)
    for a, J in enumerate(lam1.J):
        w = 0.3 ** sum(EX5.lengths[j] for j in J)
        for b, K in enumerate(lam1.K):
            assert lam1.entries[a, b] == pytest.approx(wedge.minor(EX5, J, K, x), abs=1e-14)
            assert lamr.entries[a, b] == pytest.approx(w * lam1.entries[a, b], abs=1e-15)


def test_lambda_above_rank_vanishes():
    lam = wedge.lambda_vector(EX5, (0.3, 0.7, 0.0), 1.0, 3)
    assert lam.norm < 1e-12


def test_lambda_full_rank_heisenberg():
    assert wedge.lambda_vector(HEIS, (0, 0, 0), 1.0, 3).norm > 0


def test_lambda_rejects_bad_p():
    with pytest.raises(ValueError):
        wedge.lambda_vector(HEIS, (0, 0, 0), 1.0, 4)


@pytest.mark.parametrize("x, rank", [((0, 0, 0.5), 3), ((0.3, 0.7, 0), 2), ((0, 0, -2.0), 3)])
def test_example5_ranks(x, rank):
    assert wedge.orbit_rank(EX5, x).rank == rank


def test_zero_fields_rank_zero():
    fam = build_bracket_family(parse_config("dim = 2\nfield = 0, 0\n"))
    assert wedge.orbit_rank(fam, (0.1, 0.2)).rank == 0


def test_ambiguity_flag():
    G = np.diag([1.0, 1e-8])
    assert wedge.orbit_rank(HEIS, (0, 0, 0), G=G).ambiguous


def test_select_maximal_heisenberg():
    frame = wedge.select_maximal(HEIS, (0, 0, 0), 1.0)
    assert frame.I.indices == (0, 1, 3)
    assert frame.eta == 1.0


def test_select_maximal_prefers_short_words_for_small_r():
    frame = wedge.select_maximal(GRUSHIN, (1.0, 0.0), 0.01)
    assert [GRUSHIN.words[i] for i in frame.I.indices] == [(1,), (2,)]


def test_select_maximal_single_field():
    fam = build_bracket_family(parse_config("dim = 2\nfield = 1, 0\n"))
    assert wedge.select_maximal(fam, (0, 0), 1.0).I.indices == (0,)


def test_select_maximal_rank_zero():
    fam = build_bracket_family(parse_config("dim = 1\nfield = 0\n"))
    with pytest.raises(ValueError):
        wedge.select_maximal(fam, (0.0,), 1.0)


def test_frame_eta():
    I = ChartIndex.from_words(HEIS, [(1,), (2,), (1, 2)])
    assert wedge.frame_eta(HEIS, I, (0.2, 0.1, 0), 1.0) == pytest.approx(1.0)


def test_cramer_trivial_cases():
    V = np.eye(3)
    np.testing.assert_allclose(wedge.cramer_solve(V, np.array([1.0, 0, 0])).xi, [1, 0, 0])
    U = np.array([[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]])
    np.testing.assert_allclose(wedge.cramer_solve(U, U[:, 1]).xi, [0, 1], atol=1e-14)


def test_cramer_singular_frame():
    with pytest.raises(np.linalg.LinAlgError):
        wedge.cramer_solve(np.zeros((3, 2)), np.ones(3))


def test_solve_in_frame():
    I = ChartIndex.from_words(EX5, [(1,), (1, 2)])
    x = (0.2, 0.1, 0.0)
    W = 2 * EX5.value(0, x) - 3 * EX5.value(EX5.index((1, 2)), x)
    np.testing.assert_allclose(wedge.solve_in_frame(EX5, I, x, W).xi, [2, -3], atol=1e-13)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2 ** 31 - 1))
def test_cramer_matches_least_squares(p, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(p, 6))
    V = rng.normal(size=(n, p))
    if np.linalg.cond(V) > 1e3:
        return
    W = V @ rng.normal(size=p)
    sol = wedge.cramer_solve(V, W)
    np.testing.assert_allclose(sol.xi, np.linalg.lstsq(V, W, rcond=None)[0], atol=1e-8)
    assert sol.residual <= 1e-10 * max(1.0, np.linalg.norm(W))


def test_appendix_linear_full_rank_is_divergence():
    f = [ex.parse(t, 3) for t in ("2*x1 + x2", "x3 - x2", "x1 + 4*x3")]
    U = np.array([[1.0, 0.5, 0.0], [0.2, 1.0, -1.0], [0.0, 0.3, 2.0]])
    lhs, rhs = wedge.appendix_identity(U, f, (0, 1, 2), (0.1, 0.2, 0.3))
    div = 2 - 1 + 4
    assert lhs == pytest.approx(rhs)
    assert rhs == pytest.approx(div * np.linalg.det(U))


def test_appendix_constant_field():
    f = [ex.Const(1.0), ex.Const(-2.0)]
    U = np.array([[1.0], [3.0]])
    assert wedge.appendix_identity(U, f, (1,), (0.0, 0.0)) == (0.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_appendix_random_quadratic(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    p = int(rng.integers(1, n + 1))
    grad = rng.normal(size=(n, n)) + rng.normal(size=(n, n)) * 0.3
    U = rng.normal(size=(n, p))
    K = sorted(rng.choice(n, p, replace=False).tolist())
    lhs, rhs = wedge.appendix_identity(U, [], K, np.zeros(n), grad=grad)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2 ** 31 - 1))
def test_cofactor_identity(p, seed):
    V = np.random.default_rng(seed).normal(size=(p, p))
    assert wedge.cofactor_identity(V) <= 1e-10 * max(1.0, np.abs(V).max() ** p)


def test_span_residual():
    x = (0.3, 0.7, 0.0)
    assert wedge.span_residual(EX5, x, np.array([1.0, 2.0, 0.0])) < 1e-12
    assert wedge.span_residual(EX5, x, np.array([0.0, 0.0, 1.0])) == pytest.approx(1.0)
    assert wedge.span_residual(EX5, x, np.zeros(3)) == 0.0


def test_wedge_norm():
    V = np.array([[3.0, 0.0], [0.0, 2.0], [0.0, 0.0]])
    assert wedge.wedge_norm(V) == pytest.approx(6.0)
