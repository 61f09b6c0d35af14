"""Commutator machinery: permutation expansion, flow Lie derivatives, and ad_Z."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .expr import Expression
from .fields import BracketFamily, Word
from .flows import IntegratorConfig, _flow_tuple

__all__ = [
    "PermutationExpansion",
    "pi_expansion",
    "permutation_sum_field",
    "lie_sharp",
    "ad",
    "AdResult",
    "FD_STEP",
    "FD_STEP_NESTED",
    "DISAGREEMENT_TOL",
]

FD_STEP = 1e-5
FD_STEP_NESTED = 1e-3
DISAGREEMENT_TOL = 1e-3


@dataclass(frozen=True)
class PermutationExpansion:
    """Signed operator words of a nested commutator; permutations are 1-based position tuples."""

    length: int
    terms: tuple[tuple[tuple[int, ...], int], ...]


@lru_cache(maxsize=None)
def pi_expansion(length: int) -> PermutationExpansion:
    """Expand [A_1,[A_2,...,[A_{l-1},A_l]]] into its 2^(l-1) signed products."""
    if length < 1:
        raise ValueError("length must be >= 1")
    if length == 1:
        return PermutationExpansion(1, (((1,), 1),))
    tail = [(tuple(i + 1 for i in perm), sgn) for perm, sgn in pi_expansion(length - 1).terms]
    terms = [((1,) + perm, sgn) for perm, sgn in tail]
    terms += [(perm + (1,), -sgn) for perm, sgn in tail]
    return PermutationExpansion(length, tuple(terms))


def _apply_field(f: Sequence[Expression], v: Sequence[Expression], n: int) -> list[Expression]:
    """(f . grad) v, componentwise."""
    out = []
    for comp in v:
        acc = ex.ZERO
        for g in range(n):
            acc = ex.add(acc, ex.mul(f[g], ex.differentiate(comp, g + 1)))
        out.append(acc)
    return out


def permutation_sum_field(fam: BracketFamily, word: Word) -> list[Expression]:
    """f_w = sum_sigma pi(sigma) X_{w_sigma1} ... X_{w_sigma(l-1)} f_{w_sigma_l}, built symbolically.

    Independent of the nested recursion used by :func:`fields.build_bracket_family`.
    """
    H = fam.family
    total = [ex.ZERO] * H.n
    for perm, sgn in pi_expansion(len(word)).terms:
        letters = [word[p - 1] for p in perm]
        v = list(H.coeffs[letters[-1] - 1])
        for letter in reversed(letters[:-1]):
            v = _apply_field(H.coeffs[letter - 1], v, H.n)
        total = [ex.add(a, b) if sgn > 0 else ex.sub(a, b) for a, b in zip(total, v)]
    return total


def lie_sharp(fam: BracketFamily, z: int, g: Expression | Callable, x: Sequence[float],
              fd_step: float = FD_STEP, sign: int = 1, r: float = 1.0,
              cfg: IntegratorConfig = IntegratorConfig()):
    """Central difference (g(e^{hZ}x) - g(e^{-hZ}x)) / 2h along the flow of Z = sign r^l Y_z.

    ``g`` is an Expression, or a callable on points returning a scalar or an array.
    """
    if isinstance(g, Expression):
        fn = ex.compile_vector([g])
        evaluate = lambda y: fn(y)[0]  # noqa: E731
    else:
        evaluate = g
    x = tuple(float(v) for v in x)
    fwd = _flow_tuple(fam, z, fd_step, x, cfg, sign, r)
    bwd = _flow_tuple(fam, z, -fd_step, x, cfg, sign, r)
    return (np.asarray(evaluate(fwd), dtype=float) - np.asarray(evaluate(bwd), dtype=float)) / (
        2.0 * fd_step)


@dataclass(frozen=True)
class AdResult:
    value: np.ndarray
    mode: str
    disagreement: float | None = None  # |symbolic - flow| when both were computed
    flagged: bool = False  # modes disagree: likely a non-differentiability locus


def ad(fam: BracketFamily, z: int, k: int, x: Sequence[float], mode: str = "symbolic",
       sign: int = 1, fd_step: float = FD_STEP, check: bool = False,
       cfg: IntegratorConfig = IntegratorConfig()) -> AdResult:
    """ad_Z Y_k (x) = Z# g_k - (Y_k . grad) f_Z for Z = sign * X_{z+1}.

    ``mode="symbolic"`` takes Z# g_k = (f_Z . grad) g_k; ``mode="flow"`` differentiates g_k
    along the integrated flow.  With ``check=True`` both are computed and points where they
    differ by more than DISAGREEMENT_TOL are flagged.
    """
    x = tuple(float(v) for v in x)
    fz = sign * fam.value(z, x)
    gk = fam.value(k, x)
    y_fz = sign * (fam.jacobian(z, x) @ gk)
    sym = flo = None
    if mode == "symbolic" or check:
        sym = fam.jacobian(k, x) @ fz - y_fz
    if mode == "flow" or check:
        zsharp = lie_sharp(fam, z, lambda y: fam.field_fn(k)(y), x, fd_step, sign, 1.0, cfg)
        flo = zsharp - y_fz
    if mode not in ("symbolic", "flow"):
        raise ValueError(f"unknown mode {mode!r}")
    value = sym if mode == "symbolic" else flo
    if check:
        gap = float(np.max(np.abs(sym - flo)))
        return AdResult(value, mode, gap, gap > DISAGREEMENT_TOL)
    return AdResult(value, mode)
