import math

import numpy as np
import pytest

from lieorbits import distance
from lieorbits.fields import build_bracket_family, builtin, parse_config
from lieorbits.flows import run_word

HEIS = build_bracket_family(builtin("heisenberg"))
EX5 = build_bracket_family(builtin("example5"))
LINE = build_bracket_family(parse_config("dim = 1\nfield = 1\nbox = -2:2\n"))

SMALL = distance.BeamSearch(beam=4, max_len=4)


def test_identical_points():
    est = distance.estimate(HEIS, (0.1, 0.2, 0.3), (0.1, 0.2, 0.3))
    assert est.lower == est.upper == 0.0
    assert len(est.witness) == 0


def test_line_is_exact():
    est = distance.estimate(LINE, (0.0,), (0.7,), SMALL, bounds=(1.0, 0.0))
    tol = 1e-4 * LINE.family.box_diagonal
    assert est.lower == pytest.approx(0.7 - tol)
    assert est.lower <= est.upper <= 0.7 * (1 + 2e-3)
    assert not est.heuristic_lower


@pytest.mark.parametrize("eps", [1e-3, 1e-2, 1e-1])
def test_heisenberg_vertical_bound(eps):
    est = distance.estimate(HEIS, (0, 0, 0), (0, 0, eps), SMALL)
    assert est.upper <= 4 * math.sqrt(eps)
    assert est.lower <= est.upper
    assert est.heuristic_lower


def test_witness_reaches_target():
    y = np.array([0.0, 0.0, 0.05])
    est = distance.d_upper(HEIS, (0, 0, 0), y, SMALL)
    assert est.witness.total_time <= 1 + 1e-12
    assert all(s.r == pytest.approx(est.upper) for s in est.witness.steps)
    end = run_word(HEIS, est.witness, (0, 0, 0))
    assert np.linalg.norm(end - y) <= 1e-4 * HEIS.family.box_diagonal


def test_other_orbit_is_unreachable():
    est = distance.d_upper(EX5, (0, 0, 0.5), (0, 0, -0.5), distance.BeamSearch(beam=2, max_len=3))
    assert est.upper == math.inf
    assert "not reached" in est.diagnostics


def test_larger_beam_never_worse():
    x, y = (0.0, 0.0, 0.0), (0.3, -0.2, 0.1)
    b2 = distance.d_upper(HEIS, x, y, distance.BeamSearch(beam=2, max_len=4)).upper
    b4 = distance.d_upper(HEIS, x, y, distance.BeamSearch(beam=4, max_len=4)).upper
    assert b4 <= b2


def test_triangle_spot_check():
    rng = np.random.default_rng(1)
    slack = 3 * 1e-4 * HEIS.family.box_diagonal
    for _ in range(2):
        x, y, z = (rng.uniform(-0.2, 0.2, 3) for _ in range(3))
        dxz = distance.d_upper(HEIS, x, z, SMALL).upper
        dxy = distance.d_upper(HEIS, x, y, SMALL).upper
        dyz = distance.d_upper(HEIS, y, z, SMALL).upper
        assert dxz <= dxy + dyz + slack


def test_points_outside_box():
    with pytest.raises(ValueError):
        distance.d_upper(HEIS, (0, 0, 0), (0, 0, 2.0))


def test_lower_bound_formula():
    low, heuristic = distance.d_lower(HEIS, (0, 0, 0), (0, 0, 0.1), bounds=(2.0, 1.0))
    assert low == pytest.approx(0.1 / (2 * math.e))
    assert not heuristic
    assert distance.d_lower(HEIS, (0, 0, 0), (0, 0, 0)) == (0.0, False)


def test_sampled_bounds_cover_corners():
    F, L = distance.field_bounds(HEIS)
    assert F == pytest.approx(math.sqrt(1.25))
    assert L == pytest.approx(0.5)


def test_ball_sample_trivial_cases():
    assert distance.ball_sample(HEIS, (0, 0, 0), 0.1, 0) == ([], 0)
    pts, _ = distance.ball_sample(HEIS, (0.1, 0.2, 0.3), 0.0, 5)
    for p in pts:
        np.testing.assert_allclose(p, [0.1, 0.2, 0.3])


def test_ball_sample_ball_box_shape():
    r = 0.1
    pts, _ = distance.ball_sample(HEIS, (0, 0, 0), r, 100, seed=3)
    assert len(pts) == 100
    pts = np.array(pts)
    assert np.max(np.abs(pts[:, :2])) <= r * math.sqrt(1.25) + 1e-12
    assert np.max(np.abs(pts[:, 2])) <= r ** 2  # ball-box: vertical extent ~ r^2


def test_estimate_serializes():
    est = distance.estimate(HEIS, (0, 0, 0), (0, 0, 0.01), SMALL)
    data = est.to_dict(HEIS)
    assert set(data) >= {"lower", "upper", "witness", "iterations"}
    assert data["witness"] and "field" in data["witness"][0]
