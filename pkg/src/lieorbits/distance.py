"""Interval estimates of the control distance generated by a field family.

d(x, y) is the infimum of r such that y = e^{t_1 r Z_1} ... e^{t_mu r Z_mu} x with
Z_j in +-H and sum |t_j| <= 1.  The upper bound comes from an explicit witness word,
the lower bound from a displacement inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .approxexp import commutator_path, step_count
from .fields import BracketFamily
from .flows import FlowError, FlowStep, FlowWord, IntegratorConfig, run_word

__all__ = [
    "BeamSearch",
    "DistanceEstimate",
    "d_upper",
    "d_lower",
    "field_bounds",
    "estimate",
    "ball_sample",
]


@dataclass(frozen=True)
class BeamSearch:
    """Search budget for the upper bound.

    Durations are dyadic fractions 2^-k (k = 0..grid) of the remaining time budget.
    Widths 1, 2, 4, ... up to ``beam`` are all tried and the best result kept, so a
    larger power-of-two beam never returns a larger bound.
    """

    beam: int = 8
    grid: int = 6
    max_len: int = 6
    r_max: float = 64.0
    rel_precision: float = 1e-3
    refine_iters: int = 8

    def widths(self) -> list[int]:
        out, w = [], 1
        while w < self.beam:
            out.append(w)
            w *= 2
        return out + [self.beam]


@dataclass
class DistanceEstimate:
    lower: float
    upper: float
    witness: FlowWord
    iterations: int
    diagnostics: str = ""
    heuristic_lower: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self, fam: BracketFamily) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper if math.isfinite(self.upper) else "inf",
            "witness": self.witness.to_json(fam),
            "iterations": self.iterations,
            "heuristic_lower": self.heuristic_lower,
            "diagnostics": self.diagnostics,
        }


def _run(fam, wd, x, cfg):
    try:
        y = run_word(fam, wd, x, cfg)
    except FlowError:
        return None
    return y if np.all(np.isfinite(y)) else None


def _commutator_children(fam: BracketFamily, x: np.ndarray, y: np.ndarray, r: float,
                         budget: float, cfg: IntegratorConfig, iters: int):
    """Bracket-motivated moves: exp_ap(t X_w) at scale r with t tuned toward y.

    t starts at the projection of y - x on r^l g_w(x) and is corrected by
    t <- t + <y - e(t), g> / |g|^2; |t| is capped so the path fits in ``budget``.
    """
    for j, w in enumerate(fam.words):
        if fam.zero_flags[j]:
            continue
        ell = len(w)
        g = r ** ell * fam.value(j, x)
        g2 = float(g @ g)
        if g2 == 0:
            continue
        tau_cap = budget / step_count(ell)
        t_cap = tau_cap ** ell
        t = float(np.clip((y - x) @ g / g2, -t_cap, t_cap))
        best = None
        for _ in range(iters):
            tau = abs(t) ** (1.0 / ell)
            path = commutator_path(w, tau, r)
            wd = path if t >= 0 else path.inverse()
            e = _run(fam, wd, x, cfg)
            if e is None:
                break
            dist = float(np.linalg.norm(e - y))
            if best is None or dist < best[2]:
                best = (wd, e, dist)
            t_new = float(np.clip(t + (y - e) @ g / g2, -t_cap, t_cap))
            if abs(t_new - t) <= 1e-15 * max(1.0, abs(t)):
                break
            t = t_new
        if best is not None:
            yield best[0], best[1]


def _reach(fam: BracketFamily, x: np.ndarray, y: np.ndarray, r: float, width: int,
           search: BeamSearch, reach_tol: float, cfg: IntegratorConfig):
    """Beam search at scale r; returns (witness, distance) with the best word found."""
    # state: (distance, used time, word, endpoint)
    start = (float(np.linalg.norm(x - y)), 0.0, FlowWord(), x)
    beam = [start]
    best = start
    for wd, e in _commutator_children(fam, x, y, r, 1.0, cfg, search.refine_iters):
        cand = (float(np.linalg.norm(e - y)), wd.total_time, wd, e)
        beam.append(cand)
        best = min(best, cand, key=lambda c: c[0])
    beam = sorted(beam, key=lambda c: c[0])[:width]
    if best[0] <= reach_tol:
        return best
    for _ in range(search.max_len):
        children = []
        for dist, used, wd, p in beam:
            left = 1.0 - used
            if left <= 1e-12:
                continue
            for j in range(fam.m):
                f = r * fam.value(j, p)
                f2 = float(f @ f)
                durations = {left * 2.0 ** -k for k in range(search.grid + 1)}
                if f2 > 0:
                    durations.add(min(left, abs(float((y - p) @ f)) / f2))
                for sign in (1, -1):
                    for t in durations:
                        if t <= 0:
                            continue
                        step = FlowWord((FlowStep(j, sign, t, r),))
                        e = _run(fam, step, p, cfg)
                        if e is not None:
                            children.append((float(np.linalg.norm(e - y)), used + t, wd + step, e))
            for cw, e in _commutator_children(fam, p, y, r, left, cfg, search.refine_iters):
                children.append((float(np.linalg.norm(e - y)), used + cw.total_time, wd + cw, e))
        if not children:
            break
        children.sort(key=lambda c: (c[0], c[1]))
        beam = children[:width]
        if beam[0][0] < best[0]:
            best = beam[0]
        if best[0] <= reach_tol:
            break
    return best


def _bisect(fam, x, y, width, search, reach_tol, cfg):
    """Smallest reachable scale for one beam width, by doubling then bisection."""
    iterations = 0
    r_hi, witness = 1.0, None
    while True:
        iterations += 1
        dist, _, wd, _ = _reach(fam, x, y, r_hi, width, search, reach_tol, cfg)
        if dist <= reach_tol:
            witness = wd
            break
        if r_hi >= search.r_max:
            return math.inf, FlowWord(), iterations
        r_hi = min(2 * r_hi, search.r_max)
    r_lo = 0.0
    # a reachable r_hi found at the first probe may still be far above the optimum
    while r_hi - r_lo > search.rel_precision * r_hi:
        mid = 0.5 * (r_lo + r_hi)
        iterations += 1
        dist, _, wd, _ = _reach(fam, x, y, mid, width, search, reach_tol, cfg)
        if dist <= reach_tol:
            r_hi, witness = mid, wd
        else:
            r_lo = mid
    return r_hi, witness, iterations


def d_upper(fam: BracketFamily, x: Sequence[float], y: Sequence[float],
            search: BeamSearch = BeamSearch(), cfg: IntegratorConfig = IntegratorConfig(),
            reach_tol: float | None = None) -> DistanceEstimate:
    """Upper bound on d(x, y) from an explicit witness word (``+inf`` if none was found)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (fam.family.in_box(x) and fam.family.in_box(y)):
        raise ValueError("x and y must lie in the box")
    reach_tol = 1e-4 * fam.family.box_diagonal if reach_tol is None else reach_tol
    if np.array_equal(x, y):
        return DistanceEstimate(0.0, 0.0, FlowWord(), 0, "identical points")
    best_r, best_w, total = math.inf, FlowWord(), 0
    per_width = {}
    for width in search.widths():
        r, wd, it = _bisect(fam, x, y, width, search, reach_tol, cfg)
        total += it
        per_width[width] = r
        if r < best_r:
            best_r, best_w = r, wd
    if math.isfinite(best_r):
        diag = f"reached within {reach_tol:.3g} at scale {best_r:.6g}"
    else:
        diag = (f"not reached within budget (r <= {search.r_max:g}, beam {search.beam}, "
                f"length {search.max_len}); y may lie on another orbit")
    return DistanceEstimate(0.0, best_r, best_w, total, diag, extra={"per_width": per_width})


def field_bounds(fam: BracketFamily, per_axis: int = 9) -> tuple[float, float]:
    """Sampled sup |f_j| and sup |Df_j| (operator norm) over a box grid, corners included.

    These are estimates from samples, not certified bounds.
    """
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in fam.family.box]
    mesh = np.meshgrid(*axes, indexing="ij")
    F = L = 0.0
    for p in zip(*(m.ravel() for m in mesh)):
        for j in range(fam.m):
            F = max(F, float(np.linalg.norm(fam.value(j, p))))
            L = max(L, float(np.linalg.norm(fam.jacobian(j, p), 2)))
    return F, L


def d_lower(fam: BracketFamily, x: Sequence[float], y: Sequence[float],
            bounds: tuple[float, float] | None = None, slack: float = 0.0) -> tuple[float, bool]:
    """|y - x| / (F e^L); returns (lower, heuristic) where heuristic marks sampled bounds.

    ``slack`` is subtracted from the displacement so the bound also covers every point
    within that distance of y (the reach tolerance of the matching upper bound).
    """
    disp = float(np.linalg.norm(np.asarray(y, dtype=float) - np.asarray(x, dtype=float)))
    disp = max(disp - slack, 0.0)
    if disp == 0:
        return 0.0, False
    heuristic = bounds is None
    F, L = field_bounds(fam) if bounds is None else bounds
    if F == 0:
        return math.inf, heuristic
    return disp / (F * math.exp(L)), heuristic


def estimate(fam: BracketFamily, x: Sequence[float], y: Sequence[float],
             search: BeamSearch = BeamSearch(), bounds: tuple[float, float] | None = None,
             cfg: IntegratorConfig = IntegratorConfig()) -> DistanceEstimate:
    reach_tol = 1e-4 * fam.family.box_diagonal
    est = d_upper(fam, x, y, search, cfg, reach_tol)
    lower, heuristic = d_lower(fam, x, y, bounds, reach_tol)
    # sampled F and L are not certified; never let them contradict the constructive bound
    est.lower = min(lower, est.upper)
    est.heuristic_lower = heuristic
    return est


def ball_sample(fam: BracketFamily, x: Sequence[float], r: float, N: int, seed: int = 0,
                cfg: IntegratorConfig = IntegratorConfig(), max_steps: int = 4,
                max_discards: int | None = None) -> tuple[list[np.ndarray], int]:
    """N endpoints of random words at scale r with total time <= 1, and the discard count."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    max_discards = 20 * N if max_discards is None else max_discards
    points, discarded = [], 0
    while len(points) < N:
        k = int(rng.integers(1, max_steps + 1))
        times = rng.dirichlet(np.ones(k)) * rng.uniform(0, 1)
        steps = tuple(FlowStep(int(rng.integers(0, fam.m)), int(rng.choice((1, -1))), float(t), r)
                      for t in times)
        e = _run(fam, FlowWord(steps), x, cfg)
        if e is None or not fam.family.in_box(e):
            discarded += 1
            if discarded > max_discards:
                break
            continue
        points.append(e)
    return points, discarded
