"""Closed-form oracles for the three-orbit example and the composite reproduction run.

Coordinates are (x, y, t) with a(t) = 1 + t^3 sin(1/t) and fields
X1 = a d_x, X2 = x a d_y, X3 = t d_t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import verify
from .approxexp import ChartIndex
from .brackets import ad
from .fields import BracketFamily, build_bracket_family, builtin
from .flows import IntegratorConfig

__all__ = ["a", "da", "t_dt_t_da", "bracket_oracles", "relation_oracles", "SubCheck",
           "CompositeReport", "run_composite", "ORBIT_STARTS"]


def a(t: float) -> float:
    return 1.0 if t == 0 else 1 + t ** 3 * math.sin(1 / t)


def da(t: float) -> float:
    return 0.0 if t == 0 else 3 * t ** 2 * math.sin(1 / t) - t * math.cos(1 / t)


def t_dt_t_da(t: float) -> float:
    """t d/dt (t a'(t)) = 9t^3 sin(1/t) - 5t^2 cos(1/t) - t sin(1/t)."""
    if t == 0:
        return 0.0
    s, c = math.sin(1 / t), math.cos(1 / t)
    return 9 * t ** 3 * s - 5 * t ** 2 * c - t * s


def bracket_oracles(p) -> dict[tuple, np.ndarray]:
    """[X1,X2] = a^2 d_y, [X1,X3] = -t a' d_x, [X2,X3] = -t a' x d_y."""
    x, _, t = p
    return {
        (1, 2): np.array([0.0, a(t) ** 2, 0.0]),
        (1, 3): np.array([-t * da(t), 0.0, 0.0]),
        (2, 3): np.array([0.0, -t * da(t) * x, 0.0]),
    }


# (Z letter, target word, basis word, coefficient as a function of t)
relation_oracles = (
    (3, (1, 2), (1, 2), lambda t: 2 * t * da(t) / a(t)),
    (3, (1, 3), (1,), lambda t: -t_dt_t_da(t) / a(t)),
    (3, (2, 3), (2,), lambda t: -t_dt_t_da(t) / a(t)),
)

ORBIT_STARTS = (((0.0, 0.0, 1.0), 3), ((0.3, 0.7, 0.0), 2), ((0.0, 0.0, -1.0), 3))


@dataclass
class SubCheck:
    name: str
    passed: bool
    detail: str
    data: dict = field(default_factory=dict)


@dataclass
class CompositeReport:
    checks: list[SubCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"pass": self.passed,
                "checks": [{"name": c.name, "pass": c.passed, "detail": c.detail, **c.data}
                           for c in self.checks]}


def _random_points(rng: np.random.Generator, count: int, lo: float = 0.05, hi: float = 0.9):
    pts = []
    for _ in range(count):
        t = rng.uniform(lo, hi) * rng.choice((-1, 1))
        x, y = rng.uniform(-1, 1, size=2)
        pts.append((float(x), float(y), float(t)))
    return pts


def check_brackets(fam: BracketFamily, rng, count: int = 100, tol: float = 1e-9) -> SubCheck:
    worst = 0.0
    for p in _random_points(rng, count):
        for word, want in bracket_oracles(p).items():
            worst = max(worst, float(np.max(np.abs(fam.value(fam.index(word), p) - want))))
    return SubCheck("brackets", worst <= tol, f"max error {worst:.3e} over {count} points (tol {tol:g})",
                    {"max_error": worst})


def check_relations(fam: BracketFamily, rng, count: int = 20, tol: float = 1e-6,
                    res_tol: float = 1e-8) -> SubCheck:
    """Recover each nonzero ad relation in its one-word basis and compare coefficients."""
    worst_c = worst_r = 0.0
    for p in _random_points(rng, count):
        if abs(p[0]) < 1e-3:
            continue
        for z, target, basis, coef in relation_oracles:
            v = ad(fam, z - 1, fam.index(target), p).value
            j = fam.index(basis)
            got, res = verify.recover_coefficients(fam, list(v), {j: list(fam.value(j, p))})
            worst_c = max(worst_c, abs(got[j] - coef(p[2])))
            worst_r = max(worst_r, res)
    ok = worst_c <= tol and worst_r <= res_tol
    return SubCheck("involutivity-relations", ok,
                    f"max coefficient error {worst_c:.3e} (tol {tol:g}), max residual "
                    f"{worst_r:.3e} (tol {res_tol:g})",
                    {"max_coefficient_error": worst_c, "max_residual": worst_r})


def check_orbits(fam: BracketFamily, seed: int, words: int = 200,
                 cfg: IntegratorConfig = IntegratorConfig()) -> SubCheck:
    ranks, ok, notes = [], True, []
    for start, expected in ORBIT_STARTS:
        try:
            rep = verify.check_rank_constancy(fam, start, words, seed=seed, cfg=cfg)
        except verify.CheckAbort as exc:
            ok = False
            notes.append(f"{start}: aborted ({exc})")
            ranks.append(None)
            continue
        rank = rep.extra["rank"]
        ranks.append(rank)
        good = rep.passed and rank == expected
        ok &= good
        notes.append(f"{start}: rank {rank} (expected {expected}), "
                     f"{rep.extra['violations']} violations")
    return SubCheck("rank-constancy", ok, "; ".join(notes), {"ranks": ranks})


def check_plane_tangency(fam: BracketFamily, cfg: IntegratorConfig = IntegratorConfig(),
                         point=(0.1, 0.2, 0.0), radius: float = 0.2) -> SubCheck:
    try:
        I = ChartIndex.from_words(fam, [(1,), (1, 2)])
        rep = verify.check_tangency(fam, I, point, 1.0, verify.chart_grid(I, radius, 5), cfg)
    except (verify.CheckAbort, np.linalg.LinAlgError) as exc:
        return SubCheck("tangency", False, f"aborted: {exc}")
    return SubCheck("tangency", rep.passed, rep.diagnostics.split(";")[0])


def run_composite(fam: BracketFamily | None = None, seed: int = 0,
                  cfg: IntegratorConfig = IntegratorConfig()) -> CompositeReport:
    fam = build_bracket_family(builtin("example5")) if fam is None else fam
    if fam.n != 3 or fam.m != 3 or fam.s < 2:
        return CompositeReport([SubCheck("shape", False, "needs three fields in R^3 and step >= 2")])
    rng = np.random.default_rng(seed)
    return CompositeReport([
        check_brackets(fam, rng),
        check_relations(fam, rng),
        check_orbits(fam, seed, cfg=cfg),
        check_plane_tangency(fam, cfg),
    ])
