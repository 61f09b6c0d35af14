"""Wedge determinants of bracket frames: minors, Lambda_p, rank, maximal frames, Cramer."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import expr as ex
from .approxexp import ChartIndex
from .expr import Expression
from .fields import BracketFamily

__all__ = [
    "RANK_TOL",
    "RankResult",
    "LambdaVector",
    "MaximalFrame",
    "CramerSolution",
    "index_sets",
    "minor",
    "wedge_norm",
    "lambda_vector",
    "orbit_rank",
    "select_maximal",
    "cramer_solve",
    "solve_in_frame",
    "frame_eta",
    "appendix_identity",
    "cofactor_identity",
    "span_residual",
]

RANK_TOL = 1e-8


@lru_cache(maxsize=None)
def index_sets(p: int, mu: int) -> tuple[tuple[int, ...], ...]:
    """All strictly increasing p-tuples from range(mu), lexicographic."""
    return tuple(itertools.combinations(range(mu), p))


def _det_rows(V: np.ndarray, rows: Sequence[int]) -> float:
    """dx^rows(V_1..V_p) for columns of V; repeated rows give 0."""
    if len(set(rows)) < len(rows):
        return 0.0
    return float(np.linalg.det(V[list(rows), :]))


def minor(fam: BracketFamily, I: Sequence[int], K: Sequence[int], x: Sequence[float]) -> float:
    """Y_I^K(x) = det(g_{i_a}^{k_b}); indices 0-based."""
    G = np.column_stack([fam.value(i, x) for i in I])
    return _det_rows(G, K)


def wedge_norm(V: np.ndarray) -> float:
    """|V_1 ^ ... ^ V_p| = sqrt(det(V^T V)) for the columns of V."""
    gram = V.T @ V
    return float(np.sqrt(max(np.linalg.det(gram), 0.0)))


@dataclass(frozen=True)
class LambdaVector:
    p: int
    r: float
    J: tuple[tuple[int, ...], ...]
    K: tuple[tuple[int, ...], ...]
    entries: np.ndarray  # shape (len(J), len(K))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))


def lambda_vector(fam: BracketFamily, x: Sequence[float], r: float, p: int,
                  G: np.ndarray | None = None) -> LambdaVector:
    """All r^{l(J)} Y_J^K(x) for J in I(p, q), K in I(p, n)."""
    if not 1 <= p <= min(fam.n, fam.q):
        raise ValueError(f"p must lie in 1..{min(fam.n, fam.q)}")
    G = fam.matrix(x) if G is None else G
    Js, Ks = index_sets(p, fam.q), index_sets(p, fam.n)
    J_arr = np.array(Js)
    K_arr = np.array(Ks)
    # blocks[a, b] = G[K_b][:, J_a]
    blocks = G[K_arr[None, :, :, None], J_arr[:, None, None, :]]
    minors = np.linalg.det(blocks)
    lengths = np.array(fam.lengths)
    weights = float(r) ** lengths[J_arr].sum(axis=1)
    return LambdaVector(p, r, Js, Ks, minors * weights[:, None])


@dataclass(frozen=True)
class RankResult:
    rank: int
    singular_values: np.ndarray
    ambiguous: bool

    def __int__(self) -> int:
        return self.rank


def orbit_rank(fam: BracketFamily, x: Sequence[float], tol: float = RANK_TOL,
               G: np.ndarray | None = None) -> RankResult:
    """Numerical dim span{g_j(x)}: singular values above tol * sigma_max."""
    G = fam.matrix(x) if G is None else G
    sv = np.linalg.svd(G, compute_uv=False)
    smax = sv[0] if sv.size else 0.0
    if smax == 0:
        return RankResult(0, sv, False)
    rank = int(np.sum(sv > tol * smax))
    ambiguous = bool(np.any((sv > 0.1 * tol * smax) & (sv < 10 * tol * smax)))
    return RankResult(rank, sv, ambiguous)


def span_residual(fam: BracketFamily, x: Sequence[float], v: np.ndarray,
                  tol: float = RANK_TOL) -> float:
    """|component of v orthogonal to P_x| / |v| (0 for v = 0)."""
    G = fam.matrix(x)
    norm = float(np.linalg.norm(v))
    if norm == 0:
        return 0.0
    U, sv, _ = np.linalg.svd(G, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        return 1.0
    basis = U[:, sv > tol * sv[0]]
    orth = v - basis @ (basis.T @ v)
    return float(np.linalg.norm(orth) / norm)


@dataclass(frozen=True)
class MaximalFrame:
    I: ChartIndex
    r: float
    eta: float  # |Y_I| r^l(I) / max_J |Y_J| r^l(J)
    volume: float  # |Y_I(x)| r^l(I)


def select_maximal(fam: BracketFamily, x: Sequence[float], r: float,
                   tol: float = RANK_TOL) -> MaximalFrame:
    """Argmax over I in I(p_x, q) of |Y_I(x)| r^l(I); ties go to the lexicographically first I."""
    G = fam.matrix(x)
    p = orbit_rank(fam, x, tol, G).rank
    if p == 0:
        raise ValueError("rank-0 point: no frame to select")
    best, best_vol = None, -1.0
    lengths = fam.lengths
    for I in index_sets(p, fam.q):
        vol = wedge_norm(G[:, I]) * r ** sum(lengths[i] for i in I)
        # relative slack so float noise between equal volumes counts as a tie
        if vol > best_vol * (1 + 1e-12) and vol > 0:
            best, best_vol = I, vol
    return MaximalFrame(ChartIndex.of(fam, best), r, 1.0, best_vol)


def frame_eta(fam: BracketFamily, I: ChartIndex, x: Sequence[float], r: float) -> float:
    """eta achieved by I: its weighted volume over the best weighted volume of the same size."""
    G = fam.matrix(x)
    lengths = fam.lengths
    vols = [wedge_norm(G[:, J]) * r ** sum(lengths[j] for j in J) for J in index_sets(I.p, fam.q)]
    best = max(vols)
    mine = wedge_norm(G[:, I.indices]) * r ** sum(I.lengths)
    return mine / best if best > 0 else 0.0


@dataclass(frozen=True)
class CramerSolution:
    xi: np.ndarray
    residual: float  # |sum xi_k V_k - W|


def _wedge_components(V: np.ndarray) -> np.ndarray:
    """Coordinates of V_1 ^ ... ^ V_p in the basis e_K, K in I(p, n)."""
    n, p = V.shape
    return np.array([np.linalg.det(V[list(K), :]) for K in index_sets(p, n)])


def cramer_solve(V: np.ndarray, W: np.ndarray) -> CramerSolution:
    """Solve sum_k xi_k V_k = W by xi_k = <V_I, iota^k(W) V_I> / |V_I|^2.

    ``V`` holds the frame vectors as columns.  Inner products are taken literally in the
    basis e_K of the p-th exterior power.
    """
    V = np.asarray(V, dtype=float)
    W = np.asarray(W, dtype=float)
    VI = _wedge_components(V)
    norm2 = float(VI @ VI)
    if norm2 == 0:
        raise np.linalg.LinAlgError("singular frame")
    p = V.shape[1]
    xi = np.empty(p)
    for k in range(p):
        Vk = V.copy()
        Vk[:, k] = W
        xi[k] = float(VI @ _wedge_components(Vk)) / norm2
    return CramerSolution(xi, float(np.linalg.norm(V @ xi - W)))


def solve_in_frame(fam: BracketFamily, I: ChartIndex, x: Sequence[float], W: np.ndarray,
                   r: float = 1.0) -> CramerSolution:
    """Coefficients of W in the frame r^{d_k} Y_{i_k}(x)."""
    V = np.column_stack([r ** d * fam.value(i, x) for i, d in zip(I.indices, I.lengths)])
    return cramer_solve(V, W)


def appendix_identity(U: np.ndarray, f: Sequence[Expression], K: Sequence[int],
                      x: Sequence[float], grad: np.ndarray | None = None) -> tuple[float, float]:
    """Both sides of the derivative-of-determinant identity for constant U_1..U_p.

    lhs = sum_a dx^K(U_1, .., (U_a . grad) f, .., U_p)
    rhs = sum_{g, b} d_g f^{k_b} dx^{(k_1, .., g, .., k_p)}(U_1..U_p)

    ``K`` is 0-based.  ``grad[b, g] = d f^b / d x_g`` may be passed precomputed.
    """
    U = np.asarray(U, dtype=float)
    n, p = U.shape
    if grad is None:
        fn = ex.compile_vector([ex.differentiate(c, g + 1) for c in f for g in range(n)])
        grad = np.array(fn(tuple(float(v) for v in x))).reshape(n, n)
    K = list(K)
    lhs = 0.0
    for a in range(p):
        V = U.copy()
        V[:, a] = grad @ U[:, a]
        lhs += _det_rows(V, K)
    rhs = 0.0
    for b in range(p):
        for g in range(n):
            coeff = grad[K[b], g]
            if coeff == 0:
                continue
            rows = K[:b] + [g] + K[b + 1:]
            rhs += coeff * _det_rows(U, rows)
    return lhs, rhs


def cofactor_identity(V: np.ndarray) -> float:
    """max |sum_mu V_mu^s cof(V)_mu^r - det(V) delta_sr| with cof(V)_a^b = det(V, column a -> e_b)."""
    V = np.asarray(V, dtype=float)
    p = V.shape[0]
    cof = np.empty((p, p))
    for a in range(p):
        for b in range(p):
            Va = V.copy()
            Va[:, a] = 0.0
            Va[b, a] = 1.0
            cof[a, b] = np.linalg.det(Va)
    # V[s, mu] is component s of column mu
    lhs = V @ cof
    return float(np.max(np.abs(lhs - np.linalg.det(V) * np.eye(p))))
