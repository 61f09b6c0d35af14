import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lieorbits.approxexp import (ChartIndex, chart_norm, commutator_path, e_jacobian, e_map,
                                 e_map_word, exp_ap, exp_ap_derivative, exp_ap_word, step_count)
from lieorbits.fields import build_bracket_family, builtin
from lieorbits.flows import FlowStep, run_word

HEIS = build_bracket_family(builtin("heisenberg"))
EXPF = build_bracket_family(builtin("expfield"))
EX5 = build_bracket_family(builtin("example5"))


def test_step_counts():
    assert [step_count(k) for k in range(1, 5)] == [1, 4, 10, 22]


def test_commutator_path_shapes():
    assert commutator_path((2,), 0.3).steps == (FlowStep(1, 1, 0.3),)
    two = commutator_path((1, 2), 0.3)
    assert [(s.field, s.sign) for s in two.steps] == [(0, 1), (1, 1), (0, -1), (1, -1)]
    assert all(s.t == 0.3 for s in two.steps)
    assert len(commutator_path((1, 2, 1), 0.1)) == 10


def test_negative_tau_rejected():
    with pytest.raises(ValueError):
        commutator_path((1, 2), -0.1)


def test_negative_time_is_inverse_path():
    assert exp_ap_word((1, 2), -0.04) == commutator_path((1, 2), 0.2).inverse()


@pytest.mark.parametrize("t", [1e-3, 1e-2, 1e-1])
def test_heisenberg_exact(t):
    np.testing.assert_allclose(exp_ap(HEIS, (1, 2), t, (0, 0, 0)), [0, 0, t], atol=1e-8)


@pytest.mark.parametrize("t", [1e-4, 1e-3, 1e-2, 0.1])
def test_expfield_closed_form(t):
    want = [0.0, math.sqrt(t) * (math.exp(math.sqrt(t)) - 1)]
    np.testing.assert_allclose(exp_ap(EXPF, (1, 2), t, (0, 0)), want, atol=1e-10)


def test_zero_time():
    np.testing.assert_array_equal(exp_ap(EX5, (1, 3), 0.0, (0.1, 0.2, 0.3)), [0.1, 0.2, 0.3])


def test_chart_index_validation():
    with pytest.raises(ValueError):
        ChartIndex((1, 0), (1, 1))
    with pytest.raises(ValueError):
        ChartIndex((), ())
    with pytest.raises(ValueError):
        ChartIndex.of(HEIS, (0, 1, 3, 4))
    I = ChartIndex.from_words(HEIS, [(1, 2), (1,)])
    assert I.indices == (0, 3) and I.lengths == (1, 2)


def test_chart_norm():
    assert chart_norm((0.1, -0.04), (1, 2)) == pytest.approx(0.2)
    assert chart_norm((0.0, 0.0), (1, 2)) == 0.0


def test_e_map_zero_and_single():
    I = ChartIndex.from_words(EX5, [(1,), (1, 2)])
    x = (0.1, 0.2, 0.0)
    np.testing.assert_array_equal(e_map(EX5, I, x, 1.0, (0.0, 0.0)), x)
    J = ChartIndex.from_words(EX5, [(1, 3)])
    np.testing.assert_allclose(e_map(EX5, J, (0.1, 0.2, 0.5), 1.0, (0.02,)),
                               exp_ap(EX5, (1, 3), 0.02, (0.1, 0.2, 0.5)), atol=1e-15)


def test_last_chart_factor_acts_first():
    I = ChartIndex.from_words(HEIS, [(1,), (2,)])
    wd = e_map_word(HEIS, I, 1.0, (0.3, 0.5))
    assert [s.field for s in wd.steps] == [1, 0]
    # X2 runs first (z stays 0), then X1 with x2 = 0.5 gives z = -0.5 * 0.3 / 2
    np.testing.assert_allclose(e_map(HEIS, I, (0, 0, 0), 1.0, (0.3, 0.5)), [0.3, 0.5, -0.075],
                               atol=1e-14)


def test_scale_tilde_convention():
    I = ChartIndex.from_words(EX5, [(1,), (1, 2)])
    x = (0.1, 0.2, 0.3)
    h = (0.05, -0.01)
    r = 0.5
    scaled = [r ** d * v for d, v in zip(I.lengths, h)]
    np.testing.assert_allclose(e_map(EX5, I, x, r, h), e_map(EX5, I, x, 1.0, scaled), atol=1e-15)


def test_heisenberg_bracket_chart_column():
    I = ChartIndex.from_words(HEIS, [(1, 2)])
    col = e_jacobian(HEIS, I, (0, 0, 0), 1.0, (0.01,)).matrix[:, 0]
    np.testing.assert_allclose(col, [0, 0, 1], atol=1e-6)


def test_column_at_origin_is_scaled_field():
    I = ChartIndex.from_words(HEIS, [(1,), (2,), (1, 2)])
    x = (0.1, -0.2, 0.3)
    r = 0.7
    jac = e_jacobian(HEIS, I, x, r, (0.0, 0.0, 0.0))
    for k, (i, d) in enumerate(zip(I.indices, I.lengths)):
        np.testing.assert_allclose(jac.matrix[:, k], r ** d * HEIS.value(i, x), atol=1e-5)
    assert set(jac.one_sided) == {0, 1, 2}


nonzero = st.floats(1e-3, 0.05) | st.floats(-0.05, -1e-3)


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.3, 0.3), nonzero, st.floats(0.2, 1.0))
def test_chain_rule_matches_finite_differences(h1, h2, r):
    I = ChartIndex.from_words(EXPF, [(1,), (1, 2)])
    x = (0.1, -0.2)
    fd = e_jacobian(EXPF, I, x, r, (h1, h2), mode="fd").matrix
    chain = e_jacobian(EXPF, I, x, r, (h1, h2), mode="chain").matrix
    np.testing.assert_allclose(chain, fd, atol=1e-4)


def test_chain_rule_at_origin():
    # a length-2 coordinate enters as t + O(t^(3/2)), so one-sided differences carry an
    # O(sqrt(step)) bias there while the chain rule returns the field exactly
    I = ChartIndex.from_words(EXPF, [(1,), (1, 2)])
    x = (0.1, -0.2)
    fd = e_jacobian(EXPF, I, x, 1.0, (0.0, 0.0), mode="fd").matrix
    chain = e_jacobian(EXPF, I, x, 1.0, (0.0, 0.0), mode="chain").matrix
    np.testing.assert_allclose(chain[:, 1], EXPF.value(EXPF.index((1, 2)), x), atol=1e-12)
    np.testing.assert_allclose(chain, fd, atol=10 * math.sqrt(1e-6))


def test_exp_ap_derivative_at_zero_is_field():
    _, M, d = exp_ap_derivative(EX5, (1, 2), 0.0, (0.3, 0.1, 0.4))
    np.testing.assert_array_equal(M, np.eye(3))
    np.testing.assert_allclose(d, EX5.value(EX5.index((1, 2)), (0.3, 0.1, 0.4)))


def test_chart_is_lipschitz_on_samples():
    I = ChartIndex.from_words(HEIS, [(1,), (2,), (1, 2)])
    rng = np.random.default_rng(5)
    ratios = []
    for _ in range(30):
        x, xs = rng.uniform(-0.3, 0.3, 3), rng.uniform(-0.3, 0.3, 3)
        h, hs = rng.uniform(-0.1, 0.1, 3), rng.uniform(-0.1, 0.1, 3)
        num = np.linalg.norm(e_map(HEIS, I, x, 1.0, h) - e_map(HEIS, I, xs, 1.0, hs))
        den = chart_norm(h - hs, I.lengths) + np.linalg.norm(x - xs)
        ratios.append(num / den)
    assert max(ratios) < 10


def test_run_word_of_exp_ap_word():
    wd = exp_ap_word((1, 2), 0.09)
    assert wd.total_time == pytest.approx(4 * 0.3)
    np.testing.assert_allclose(run_word(HEIS, wd, (0, 0, 0)), [0, 0, 0.09], atol=1e-13)
