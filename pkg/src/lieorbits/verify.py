"""Numerical checks of the structural claims, each producing a VerificationReport.

Every check here is a necessary-condition test with explicit tolerances: passing
does not certify regularity or involutivity hypotheses, which are not decidable
from finitely many samples.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import mpmath
import numpy as np

from . import wedge
from .approxexp import ChartIndex, chart_norm, e_jacobian, e_map, exp_ap
from .brackets import DISAGREEMENT_TOL, FD_STEP
from .fields import BracketFamily, Word
from .flows import (FlowError, FlowStep, FlowWord, IntegratorConfig, _flow_tuple,
                    run_word, run_word_jacobian, trajectory)

__all__ = [
    "SCHEMA_VERSION",
    "CheckAbort",
    "InsufficientData",
    "OrderFit",
    "ExactToTolerance",
    "VerificationReport",
    "fit_order",
    "noise_floor",
    "check_first_order",
    "check_tangency",
    "check_rank_constancy",
    "check_involutivity",
    "recover_coefficients",
    "check_gronwall",
    "check_pushforward",
    "check_determinant_derivative",
    "chart_grid",
    "truncate_word",
]

SCHEMA_VERSION = 1
CAVEAT = "necessary-condition test only; hypotheses are not certified"


class CheckAbort(RuntimeError):
    """A check could not run to a verdict (rank ambiguity, sampling budget exhausted)."""


class InsufficientData(ValueError):
    """Fewer than four samples above the noise floor, but not all below it."""


@dataclass(frozen=True)
class OrderFit:
    abscissa: tuple[float, ...]  # log step sizes, strictly decreasing
    ordinate: tuple[float, ...]  # log residuals
    slope: float
    intercept: float
    r2: float


@dataclass(frozen=True)
class ExactToTolerance:
    """All residuals sit below the noise floor: nothing to fit."""

    floor: float
    count: int


def noise_floor(cfg: IntegratorConfig) -> float:
    return 100.0 * cfg.tol


def fit_order(samples: Sequence[tuple[float, float]], floor: float = 1e-9) -> OrderFit | ExactToTolerance:
    """Least-squares line through (log step, log residual), skipping residuals <= floor."""
    kept = sorted(((float(h), float(e)) for h, e in samples if e > floor and h > 0), reverse=True)
    if not kept:
        return ExactToTolerance(floor, len(samples))
    if len(kept) < 4:
        raise InsufficientData(f"only {len(kept)} residuals above the noise floor {floor:g}")
    xs = np.log([h for h, _ in kept])
    ys = np.log([e for _, e in kept])
    if np.any(np.diff(xs) >= 0):
        raise InsufficientData("step sizes must be distinct")
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return OrderFit(tuple(xs), tuple(ys), float(slope), float(intercept), r2)


def _jsonable(v: Any) -> Any:
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, np.ndarray):
        return [_jsonable(u) for u in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(u) for k, u in v.items()}
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class VerificationReport:
    check: str
    columns: tuple[str, ...]  # descriptor keys, in CSV order
    samples: list[tuple[dict, float]]
    threshold: float
    passed: bool
    diagnostics: str
    fitted: OrderFit | ExactToTolerance | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)

    def to_dict(self, manifest: dict | None = None) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "check": self.check,
            "pass": self.passed,
            "threshold": self.threshold,
            "diagnostics": self.diagnostics,
            "fitted": None,
            "columns": list(self.columns),
            "samples": [{"input": _jsonable(d), "value": _jsonable(v)} for d, v in self.samples],
            "extra": _jsonable(self.extra),
        }
        if isinstance(self.fitted, OrderFit):
            out["fitted"] = {"slope": self.fitted.slope, "intercept": self.fitted.intercept,
                             "r2": self.fitted.r2}
        elif isinstance(self.fitted, ExactToTolerance):
            out["fitted"] = {"exact_to_tolerance": True, "floor": self.fitted.floor}
        if manifest is not None:
            out["manifest"] = manifest
        return out

    def to_json(self, manifest: dict | None = None) -> str:
        return json.dumps(self.to_dict(manifest), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["check", "sample", *self.columns, "value"])
        for i, (desc, value) in enumerate(self.samples):
            cells = []
            for c in self.columns:
                v = _jsonable(desc.get(c, ""))
                cells.append(";".join(str(u) for u in v) if isinstance(v, list) else v)
            writer.writerow([self.check, i, *cells, _jsonable(value)])
        return buf.getvalue()

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.check}: {self.diagnostics}"


def _pt(x) -> list[float]:
    return [float(v) for v in x]


# ---------------------------------------------------------------- first-order law

def check_first_order(fam: BracketFamily, word: Word, x: Sequence[float],
                      t_range: tuple[float, float] = (1e-4, 1e-2), n_samples: int = 10,
                      cfg: IntegratorConfig = IntegratorConfig()) -> VerificationReport:
    """Residual |exp_ap(t X_w) x - x - t g_w(x)| over log-spaced t, fitted in log-log."""
    word = tuple(word)
    ell = len(word)
    x = np.asarray(x, dtype=float)
    g = fam.value(fam.index(word), x)
    ts = np.geomspace(t_range[1], t_range[0], n_samples)
    samples = []
    for t in ts:
        res = float(np.linalg.norm(exp_ap(fam, word, float(t), x, cfg) - x - t * g))
        samples.append(({"t": float(t)}, res))
    floor = noise_floor(cfg)
    threshold = 1 + 1 / ell - 0.1
    fit = fit_order([(d["t"], v) for d, v in samples], floor)
    if isinstance(fit, ExactToTolerance):
        passed = True
        diag = f"residuals at noise floor ({floor:g}) for all t: exact to tolerance"
    else:
        passed = fit.slope >= threshold
        diag = f"slope {fit.slope:.4f} (R^2 {fit.r2:.4f}) vs required >= {threshold:.3f}"
    return VerificationReport("first-order", ("t",), samples, threshold, passed,
                              f"{diag}; {CAVEAT}", fit, {"word": list(word), "point": _pt(x)})


# ---------------------------------------------------------------- tangency

def chart_grid(I: ChartIndex, radius: float, per_axis: int = 5) -> list[np.ndarray]:
    """Tensor grid of h with ||h||_I <= radius (h_k ranges over +-radius^{d_k})."""
    axes = [np.linspace(-radius ** d, radius ** d, per_axis) for d in I.lengths]
    mesh = np.meshgrid(*axes, indexing="ij")
    return [np.array(v) for v in zip(*(m.ravel() for m in mesh))]


def check_tangency(fam: BracketFamily, I: ChartIndex, x: Sequence[float], r: float,
                   h_grid: Sequence[Sequence[float]], cfg: IntegratorConfig = IntegratorConfig(),
                   tol: float = 1e-3, fd_step: float = 1e-6,
                   rank_tol: float = wedge.RANK_TOL) -> VerificationReport:
    """Columns of dE/dh must lie in P_{E(h)}: normalized orthogonal residual <= tol."""
    x = np.asarray(x, dtype=float)
    base = wedge.orbit_rank(fam, x, rank_tol)
    images = [e_map(fam, I, x, r, h, cfg) for h in h_grid]
    for h, y in zip(h_grid, images):
        rk = wedge.orbit_rank(fam, y, rank_tol)
        if rk.rank != base.rank or rk.ambiguous:
            raise CheckAbort(f"orbit rank not constant on the chart image: rank {rk.rank} at "
                             f"h={_pt(h)} vs {base.rank} at x (ambiguous={rk.ambiguous})")
    samples = []
    deviations: dict[float, float] = {}
    for h, y in zip(h_grid, images):
        jac = e_jacobian(fam, I, x, r, h, cfg, mode="fd", fd_step=fd_step).matrix
        norm = chart_norm(h, I.lengths)
        for k in range(I.p):
            col = jac[:, k]
            res = wedge.span_residual(fam, y, col, rank_tol)
            samples.append(({"h": _pt(h), "k": k, "h_norm": norm}, res))
            lead = r ** I.lengths[k] * fam.value(I.indices[k], y)
            if norm > 0:
                dev = float(np.linalg.norm(col - lead))
                deviations[norm] = max(deviations.get(norm, 0.0), dev)
    worst = max(v for _, v in samples)
    extra: dict = {"rank": base.rank, "frame": [list(fam.words[i]) for i in I.indices]}
    try:
        fit = fit_order(sorted(deviations.items()), noise_floor(cfg) + fd_step)
        if isinstance(fit, OrderFit):
            extra["correction_fit"] = {"slope": fit.slope, "r2": fit.r2, "expected": 1.0}
        else:
            extra["correction_fit"] = "exact to tolerance"
    except InsufficientData as exc:
        extra["correction_fit"] = f"not fitted: {exc}"
    diag = f"max normalized orthogonal residual {worst:.3e} (tol {tol:g}); {CAVEAT}"
    return VerificationReport("tangency", ("h", "k", "h_norm"), samples, tol, worst <= tol,
                              diag, None, extra)


# ---------------------------------------------------------------- rank constancy

def _random_word(rng: np.random.Generator, m: int, max_steps: int, max_time: float,
                 r: float = 1.0) -> FlowWord:
    length = int(rng.integers(1, max_steps + 1))
    steps = []
    for _ in range(length):
        j = int(rng.integers(0, m))
        t = float(rng.uniform(-max_time, max_time))
        steps.append(FlowStep(j, 1 if t >= 0 else -1, abs(t), r))
    return FlowWord(tuple(steps))


def check_rank_constancy(fam: BracketFamily, x0: Sequence[float], n_words: int = 200,
                         max_steps: int = 4, max_time: float = 0.5, seed: int = 0,
                         tol: float = wedge.RANK_TOL, cfg: IntegratorConfig = IntegratorConfig(),
                         max_discards: int | None = None) -> VerificationReport:
    """Orbit rank at the endpoints of random flow words from x0 must equal the rank at x0."""
    rng = np.random.default_rng(seed)
    x0 = np.asarray(x0, dtype=float)
    start = wedge.orbit_rank(fam, x0, tol)
    max_discards = 20 * n_words if max_discards is None else max_discards
    samples, discarded, ambiguous, violations = [], 0, 0, 0
    while len(samples) < n_words:
        wd = _random_word(rng, fam.m, max_steps, max_time)
        try:
            y = run_word(fam, wd, x0, cfg)
        except FlowError:
            y = None
        if y is None or not fam.family.in_box(y):
            discarded += 1
            if discarded > max_discards:
                raise CheckAbort(f"sampling budget exhausted: {discarded} words left the box")
            continue
        rk = wedge.orbit_rank(fam, y, tol)
        ambiguous += rk.ambiguous
        violations += rk.rank != start.rank
        samples.append(({"word": len(samples), "endpoint": _pt(y)}, float(rk.rank)))
    diag = (f"rank at x0 = {start.rank}; {violations} of {n_words} endpoints differ; "
            f"{discarded} words discarded (left box); {ambiguous} ambiguous ranks; {CAVEAT}")
    return VerificationReport("rank", ("word", "endpoint"), samples, float(start.rank),
                              violations == 0, diag, None,
                              {"rank": start.rank, "discarded": discarded, "ambiguous": ambiguous,
                               "violations": violations})


# ---------------------------------------------------------------- involutivity

def _ad_values(fam: BracketFamily, z: int, sign: int, ks: Sequence[int], y: tuple,
               backend: str) -> list[list]:
    """Symbolic ad_Z Y_k(y) for each k, as plain lists in the requested backend."""
    n = fam.n
    fz = [sign * v for v in fam.field_fn(z, backend)(y)]
    Jz = fam.jac_fn(z, backend)(y)
    out = []
    for k in ks:
        gk = fam.field_fn(k, backend)(y)
        Jk = fam.jac_fn(k, backend)(y)
        out.append([sum(Jk[b * n + c] * fz[c] for c in range(n))
                    - sign * sum(Jz[b * n + c] * gk[c] for c in range(n)) for b in range(n)])
    return out


def _basis_columns(fam: BracketFamily, y: tuple, backend: str, words: Sequence[int]):
    flat = fam.all_fn(backend)(y)
    n = fam.n
    return {j: list(flat[j * n:(j + 1) * n]) for j in words}


def recover_coefficients(fam: BracketFamily, target: Sequence, columns: dict[int, Sequence]):
    """Minimum-norm least squares target ~ sum_u b_u Y_u over pointwise-distinct columns.

    Columns that vanish or repeat an earlier column up to sign are dropped.  Inputs may be
    mpmath numbers; each coordinate row is divided by its largest magnitude before the float
    solve.  Row scaling leaves the solution set of a consistent system unchanged, so the
    minimum-norm coefficients survive values far below the double-precision range.
    Returns (coefficients by column index, relative residual in the scaled rows).
    """
    keys = list(columns)
    coeffs = {j: 0.0 for j in keys}
    kept, raw = [], []
    for j in keys:
        cscale = max((abs(v) for v in columns[j]), default=0)
        if cscale == 0:
            continue
        col = list(columns[j])
        if any(max(abs(a - sgn * b) for a, b in zip(col, u)) <= 1e-12 * cscale
               for u in raw for sgn in (1, -1)):
            continue
        kept.append(j)
        raw.append(col)
    if all(v == 0 for v in target):
        return coeffs, 0.0
    if not kept:
        return coeffs, 1.0
    n = len(target)
    rows = []
    for i in range(n):
        rs = max([abs(target[i])] + [abs(columns[j][i]) for j in kept])
        rows.append(rs if rs != 0 else 1)
    y = np.array([float(target[i] / rows[i]) for i in range(n)])
    A = np.array([[float(columns[j][i] / rows[i]) for j in kept] for i in range(n)])
    b, *_ = np.linalg.lstsq(A, y, rcond=None)
    for j, v in zip(kept, b):
        coeffs[j] = float(v)
    res = float(np.linalg.norm(A @ b - y))
    return coeffs, res / float(np.linalg.norm(y))


def _inset_grid(box, margin: float, per_axis: int) -> list[tuple]:
    axes = []
    for lo, hi in box:
        a, b = lo + margin, hi - margin
        if a > b:
            raise ValueError(f"margin {margin} empties the box")
        axes.append(np.linspace(a, b, per_axis))
    mesh = np.meshgrid(*axes, indexing="ij")
    return [tuple(float(v) for v in p) for p in zip(*(m.ravel() for m in mesh))]


def check_involutivity(fam: BracketFamily, s: int | None = None,
                       margins: Sequence[float] = (0.1, 0.01), per_axis: int = 3,
                       t0: float = 0.05, n_t: int = 3, tol: float = 1e-8,
                       divergence_ratio: float = 1e3, fd_step: float = FD_STEP,
                       cfg: IntegratorConfig = IntegratorConfig()) -> VerificationReport:
    """For Z in +-H and |w| = s, fit ad_Z X_w along e^{tZ}-trajectories in the bracket span.

    Points sit on a grid inside the box inset by each margin.  The empirical C0 (max |b|)
    is reported per margin; growth between the coarsest and finest margin by more than
    ``divergence_ratio`` is reported as an unbounded-coefficient (class A_s) violation.
    Points where flow and symbolic ad disagree (non-differentiability loci) are excluded.
    """
    s = fam.s if s is None else s
    top = [j for j, w in enumerate(fam.words) if len(w) == s]
    basis = [j for j in range(fam.q) if not fam.zero_flags[j]]
    box = fam.family.box
    margins = sorted(margins, reverse=True)
    samples, c0_by_margin = [], {}
    flagged = 0
    worst_res = 0.0
    ts = np.linspace(-t0, t0, n_t)
    for margin in margins:
        c0 = 0.0
        inner = [(lo + margin, hi - margin) for lo, hi in box]
        inside = lambda y: all(a <= v <= b for v, (a, b) in zip(y, inner))  # noqa: E731
        for x in _inset_grid(box, margin, per_axis):
            for z in range(fam.m):
                for sign in (1, -1):
                    for t in ts:
                        try:
                            y = _flow_tuple(fam, z, float(t), x, cfg, sign, 1.0)
                        except FlowError:
                            continue
                        if not inside(y):
                            continue
                        # flow-mode ad for the a.e. flag: Z# g by central differences
                        yp = fam.all_fn()(_flow_tuple(fam, z, fd_step, y, cfg, sign, 1.0))
                        ym = fam.all_fn()(_flow_tuple(fam, z, -fd_step, y, cfg, sign, 1.0))
                        sym = _ad_values(fam, z, sign, top, y, "float")
                        cols = _basis_columns(fam, y, "float", basis)
                        fz_jac = fam.jacobian(z, y)
                        n = fam.n
                        need_mp = any(all(v == 0 for v in cols[j]) for j in basis)
                        if need_mp:
                            ymp = tuple(mpmath.mpf(v) for v in y)
                            sym_t = _ad_values(fam, z, sign, top, ymp, "mp")
                            cols_t = _basis_columns(fam, ymp, "mp", basis)
                        else:
                            sym_t, cols_t = sym, cols
                        for a, k in enumerate(top):
                            zsharp = (np.array(yp[k * n:(k + 1) * n]) - np.array(ym[k * n:(k + 1) * n])) / (2 * fd_step)
                            flow_ad = zsharp - sign * (fz_jac @ fam.value(k, y))
                            if np.max(np.abs(flow_ad - np.array(sym[a], dtype=float))) > DISAGREEMENT_TOL:
                                flagged += 1
                                continue
                            coeffs, res = recover_coefficients(fam, sym_t[a], cols_t)
                            bmax = max(abs(v) for v in coeffs.values())
                            c0 = max(c0, bmax)
                            worst_res = max(worst_res, res)
                            samples.append(({"margin": margin, "Z": sign * (z + 1),
                                             "word": list(fam.words[k]), "point": _pt(y),
                                             "residual": res}, bmax))
        c0_by_margin[margin] = c0
    if not samples:
        raise CheckAbort("no admissible sample points")
    coarse, fine = c0_by_margin[margins[0]], c0_by_margin[margins[-1]]
    ratio = fine / coarse if coarse > 0 else (math.inf if fine > 0 else 1.0)
    diverging = len(margins) > 1 and ratio > divergence_ratio
    passed = worst_res <= tol and not diverging and math.isfinite(max(c0_by_margin.values()))
    diag = (f"empirical C0 by margin {({m: float(f'{c:.6g}') for m, c in c0_by_margin.items()})}; "
            f"growth ratio {ratio:.4g} (limit {divergence_ratio:g}); max residual {worst_res:.3e} "
            f"(tol {tol:g}); {flagged} mode-disagreeing points excluded")
    if diverging:
        diag += "; C0 diverges toward the box margin: bounded-coefficient involutivity violated"
    diag += f"; {CAVEAT}"
    return VerificationReport("involutivity", ("margin", "Z", "word", "point", "residual"),
                              samples, tol, passed, diag, None,
                              {"C0": max(c0_by_margin.values()), "C0_by_margin": c0_by_margin,
                               "ratio": ratio, "flagged": flagged, "max_residual": worst_res})


# ---------------------------------------------------------------- Gronwall

def check_gronwall(fam: BracketFamily, x: Sequence[float], r: float, wd: FlowWord, p: int,
                   cfg: IntegratorConfig = IntegratorConfig(), zero_tol: float = 1e-9,
                   per_step: int = 8) -> VerificationReport:
    """Smallest C with |Lambda_p(g(t)) - Lambda_p(x)| <= |Lambda_p(x)| (e^{Ct} - 1) along the word."""
    if wd.total_time > 1 + 1e-12:
        raise ValueError("total duration of the word must be <= 1")
    path = trajectory(fam, wd, x, cfg, per_step)
    lam0 = wedge.lambda_vector(fam, path[0][1], r, p)
    base = lam0.norm
    samples = []
    c_min = 0.0
    zero_case = base <= zero_tol
    stayed_zero = True
    for t, y in path:
        lam = wedge.lambda_vector(fam, y, r, p)
        diff = float(np.linalg.norm(lam.entries - lam0.entries))
        samples.append(({"t": t, "point": _pt(y), "lambda_norm": lam.norm}, diff))
        if zero_case:
            stayed_zero &= lam.norm <= zero_tol
        elif t > 0:
            c_min = max(c_min, math.log1p(diff / base) / t)
    if zero_case:
        passed = stayed_zero
        diag = (f"|Lambda_{p}(x)| = {base:.3e} <= {zero_tol:g}: zero set "
                f"{'preserved' if stayed_zero else 'LEFT'} along the path")
        c_min = 0.0 if stayed_zero else math.inf
    else:
        passed = math.isfinite(c_min)
        diag = f"minimal Gronwall constant C = {c_min:.4g}"
    return VerificationReport("gronwall", ("t", "point", "lambda_norm"), samples, zero_tol, passed,
                              f"{diag}; {CAVEAT}", None, {"C": c_min, "lambda0": base})


# ---------------------------------------------------------------- pushforward

def truncate_word(wd: FlowWord, elapsed: float) -> FlowWord:
    """The prefix of ``wd`` running for total time ``elapsed``."""
    steps, left = [], elapsed
    for s in wd.steps:
        if left <= 0:
            break
        take = min(s.t, left)
        steps.append(FlowStep(s.field, s.sign, take, s.r))
        left -= take
    return FlowWord(tuple(steps))


def check_pushforward(fam: BracketFamily, I: ChartIndex, x: Sequence[float], r: float,
                      wd: FlowWord, cfg: IntegratorConfig = IntegratorConfig(),
                      tol: float = 1e-6, n_prefix: int = 7,
                      rank_tol: float = wedge.RANK_TOL) -> VerificationReport:
    """Pull every r^{l_h} Y_h back from the endpoint of each prefix of ``wd`` to x.

    The pulled-back vectors must lie in P_x; their frame coefficients (Cramer) minus the
    coefficients at time 0 give theta, and C = max |theta| eta / T is fitted.
    """
    x = np.asarray(x, dtype=float)
    U = np.column_stack([r ** d * fam.value(i, x) for i, d in zip(I.indices, I.lengths)])
    try:
        wedge.cramer_solve(U, U[:, 0])
    except np.linalg.LinAlgError:
        raise CheckAbort("singular frame at x") from None
    eta = wedge.frame_eta(fam, I, x, r)
    total = wd.total_time
    samples = []
    theta: dict[str, list] = {}
    base_coeffs = {}
    c_fit = 0.0
    worst = 0.0
    for T in np.linspace(0.0, total, n_prefix):
        y, M = run_word_jacobian(fam, truncate_word(wd, float(T)), x, cfg)
        Minv = np.linalg.inv(M)
        for h in range(fam.q):
            v = Minv @ (r ** fam.lengths[h] * fam.value(h, y))
            res = wedge.span_residual(fam, x, v, rank_tol)
            xi = wedge.cramer_solve(U, v).xi
            key = ",".join(map(str, fam.words[h]))
            if h not in base_coeffs:
                base_coeffs[h] = xi
            th = xi - base_coeffs[h]
            theta.setdefault(key, []).append([float(T), *th.tolist()])
            worst = max(worst, res)
            samples.append(({"T": float(T), "field": list(fam.words[h]), "theta": th.tolist()},
                            res))
            if h in I.indices and T > 0:
                c_fit = max(c_fit, float(np.max(np.abs(th))) * eta / T)
    passed = worst <= tol and math.isfinite(c_fit)
    diag = (f"max orthogonal residual {worst:.3e} (tol {tol:g}); eta {eta:.4g}; "
            f"fitted C = {c_fit:.4g}; {CAVEAT}")
    return VerificationReport("pushforward", ("T", "field", "theta"), samples, tol, passed, diag,
                              None, {"theta": theta, "C": c_fit, "eta": eta,
                                     "frame": [list(fam.words[i]) for i in I.indices]})


# ---------------------------------------------------------------- determinant derivative

def _tilde_minor(fam: BracketFamily, J: Sequence[int], K: Sequence[int], y, r: float) -> float:
    V = np.column_stack([r ** fam.lengths[j] * fam.value(j, y) for j in J])
    return wedge._det_rows(V, K)


def det_derivative_terms(fam: BracketFamily, J: Sequence[int], K: Sequence[int], y, r: float,
                         z: int, sign: int = 1) -> dict[str, float]:
    """Terms (A), (B), (C) of d/dt r^{l(J)} Y_J^K(e^{t rZ} y) at t = 0, with symbolic brackets.

    Brackets of length-s entries are evaluated symbolically too (smooth fixtures); they are
    reported under (B).
    """
    n = fam.n
    s = fam.s
    fz = sign * r * fam.value(z, y)
    Dfz = sign * r * fam.jacobian(z, y)
    V = np.column_stack([r ** fam.lengths[j] * fam.value(j, y) for j in J])
    A = B = 0.0
    for a, j in enumerate(J):
        rl = r ** fam.lengths[j]
        bracket = rl * (fam.jacobian(j, y) @ fz) - Dfz @ (rl * fam.value(j, y))
        W = V.copy()
        W[:, a] = bracket
        term = wedge._det_rows(W, K)
        if fam.lengths[j] <= s - 1:
            A += term
        else:
            B += term
    C = 0.0
    K = list(K)
    for b in range(len(K)):
        for g in range(n):
            coeff = Dfz[K[b], g]
            if coeff != 0:
                C += coeff * wedge._det_rows(V, K[:b] + [g] + K[b + 1:])
    return {"A": A, "B": B, "C": C}


def check_determinant_derivative(fam: BracketFamily, J: Sequence[int], K: Sequence[int],
                                 x: Sequence[float], r: float, z: int, sign: int = 1,
                                 times: Sequence[float] = (0.0, 0.1, 0.2, 0.3),
                                 fd_h: float = 1e-4, tol: float = 1e-5,
                                 cfg: IntegratorConfig = IntegratorConfig()) -> VerificationReport:
    """Finite-difference d/dt of a weighted minor along e^{t rZ} against (A)+(B)+(C)."""
    samples = []
    worst = 0.0
    x = tuple(float(v) for v in x)
    for t in times:
        y = _flow_tuple(fam, z, float(t), x, cfg, sign, r)
        yp = _flow_tuple(fam, z, fd_h, y, cfg, sign, r)
        ym = _flow_tuple(fam, z, -fd_h, y, cfg, sign, r)
        lhs = (_tilde_minor(fam, J, K, yp, r) - _tilde_minor(fam, J, K, ym, r)) / (2 * fd_h)
        terms = det_derivative_terms(fam, J, K, y, r, z, sign)
        rhs = terms["A"] + terms["B"] + terms["C"]
        gap = abs(lhs - rhs)
        worst = max(worst, gap)
        samples.append(({"t": float(t), "lhs": lhs, "rhs": rhs, **terms}, gap))
    diag = f"max |FD - (A)+(B)+(C)| = {worst:.3e} (tol {tol:g}); {CAVEAT}"
    return VerificationReport("det-derivative", ("t", "lhs", "rhs", "A", "B", "C"), samples, tol,
                              worst <= tol, diag, None,
                              {"J": [list(fam.words[j]) for j in J], "K": [k + 1 for k in K]})
