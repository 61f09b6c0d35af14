"""Vector-field families, the bracket family up to a given step, and builtin fixtures."""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from . import expr as ex
from .expr import Expression

__all__ = [
    "ConfigError",
    "FieldFamily",
    "BracketFamily",
    "Word",
    "parse_config",
    "load_family",
    "builtin",
    "BUILTINS",
    "build_bracket_family",
    "parse_word",
]

Word = tuple  # letters in 1..m


class ConfigError(ValueError):
    """Invalid configuration text; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class FieldFamily:
    """The family H = {X_1..X_m}; ``coeffs[j][b]`` is the b-th component of f_j."""

    n: int
    coeffs: tuple[tuple[Expression, ...], ...]
    box: tuple[tuple[float, float], ...]
    s: int = 1
    name: str = "custom"
    guarded: bool = False

    @property
    def m(self) -> int:
        return len(self.coeffs)

    @cached_property
    def grads(self) -> tuple[tuple[tuple[Expression, ...], ...], ...]:
        """grads[j][b][g] = d f_j^b / d x_g (symbolic)."""
        return tuple(
            tuple(tuple(ex.differentiate(c, g + 1) for g in range(self.n)) for c in fj)
            for fj in self.coeffs
        )

    @property
    def box_diagonal(self) -> float:
        return math.sqrt(sum((hi - lo) ** 2 for lo, hi in self.box))

    def in_box(self, x: Sequence[float]) -> bool:
        return all(lo <= v <= hi for v, (lo, hi) in zip(x, self.box))


def _split_top(text: str, sep: str = ",") -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def parse_config(text: str, name: str = "custom") -> FieldFamily:
    """Parse the plain-text family format (``dim``, ``s``, ``def``, ``field``, ``box``)."""
    n = None
    s = 1
    defs: dict[str, Expression] = {}
    fields: list[tuple[Expression, ...]] = []
    box = None
    guarded = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"(def\s+([A-Za-z_]\w*)|[A-Za-z_]\w*)\s*=\s*(.*)", line)
        if not m:
            raise ConfigError(f"cannot parse {line!r}", lineno)
        key, defname, value = m.group(1), m.group(2), m.group(3)
        try:
            if defname:
                if n is None:
                    raise ConfigError("'dim' must precede definitions", lineno)
                if re.fullmatch(r"x\d+", defname) or defname in ex.UNARY_FUNCS + ("ifeq0",):
                    raise ConfigError(f"reserved name {defname!r}", lineno)
                defs[defname] = ex.parse(value, n, defs)
                guarded |= "ifeq0" in value
            elif key == "dim":
                n = int(value)
                if n < 1:
                    raise ConfigError("dim must be positive", lineno)
            elif key == "s":
                s = int(value)
                if s < 1:
                    raise ConfigError("s must be positive", lineno)
            elif key == "field":
                if n is None:
                    raise ConfigError("'dim' must precede fields", lineno)
                parts = _split_top(value)
                if len(parts) != n:
                    raise ConfigError(f"field needs {n} components, got {len(parts)}", lineno)
                fields.append(tuple(ex.parse(p, n, defs) for p in parts))
                guarded |= "ifeq0" in value
            elif key == "box":
                if n is None:
                    raise ConfigError("'dim' must precede box", lineno)
                parts = _split_top(value)
                if len(parts) != n:
                    raise ConfigError(f"box needs {n} intervals", lineno)
                bounds = []
                for p in parts:
                    lo, hi = (float(v) for v in p.split(":"))
                    if not lo < hi:
                        raise ConfigError(f"empty interval {p.strip()!r}", lineno)
                    bounds.append((lo, hi))
                box = tuple(bounds)
            else:
                raise ConfigError(f"unknown key {key!r}", lineno)
        except ex.ParseDiagnostic as exc:
            col = raw.find(value) + exc.offset
            raise ConfigError(f"column {col + 1}: {exc.message}", lineno) from None
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), lineno) from None
    if n is None:
        raise ConfigError("missing 'dim'")
    if not fields:
        raise ConfigError("no fields declared")
    if box is None:
        box = tuple((-1.0, 1.0) for _ in range(n))
    return FieldFamily(n=n, coeffs=tuple(fields), box=box, s=s, name=name, guarded=guarded)


BUILTINS: dict[str, str] = {
    "heisenberg": """
        dim = 3
        s = 2
        box = -1:1, -1:1, -1:1
        field = 1, 0, -x2/2
        field = 0, 1, x1/2
    """,
    "grushin": """
        dim = 2
        s = 2
        box = -1:1, -1:1
        field = 1, 0
        field = 0, x1
    """,
    "expfield": """
        dim = 2
        s = 2
        box = -1:1, -1:1
        field = 1, 0
        field = 0, exp(x1)
    """,
    # coordinates (x, y, t) = (x1, x2, x3); a(0) = 1 is the continuity limit
    "example5": """
        dim = 3
        s = 2
        box = -4:4, -4:4, -4:4
        def a = ifeq0(x3, 1, 1 + x3^3*sin(1/x3))
        field = a, 0, 0
        field = 0, x1*a, 0
        field = 0, 0, x3
    """,
    "pathological": """
        dim = 2
        s = 2
        box = 0:1, -1:1
        field = 1, 0
        field = 0, ifeq0(x1, 0, exp(-1/x1^2))
    """,
}


def builtin(name: str) -> FieldFamily:
    try:
        text = BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown builtin family {name!r}; choose from {sorted(BUILTINS)}") from None
    return parse_config(text, name=name)


def load_family(source: str | Path) -> FieldFamily:
    """Load a builtin by name or a config file by path."""
    if isinstance(source, str) and source in BUILTINS:
        return builtin(source)
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"no such config file or builtin: {source}")
    return parse_config(path.read_text(), name=path.stem)


def parse_word(text: str, m: int) -> Word:
    """Parse ``"1,2"`` (or ``"12"`` when m < 10) into a word over 1..m."""
    text = text.strip()
    try:
        letters = tuple(int(v) for v in text.split(",")) if "," in text or m >= 10 else tuple(
            int(c) for c in text)
    except ValueError:
        raise ConfigError(f"malformed word {text!r}") from None
    if not letters or any(not 1 <= c <= m for c in letters):
        raise ConfigError(f"word {text!r} has letters outside 1..{m}")
    return letters


# ---------------------------------------------------------------- bracket family

def _directional(f: Sequence[Expression], grads: Sequence[Sequence[Expression]]) -> list[Expression]:
    """Components of (f . grad) v given grads[b][g] = d v^b / d x_g."""
    out = []
    for row in grads:
        acc = ex.ZERO
        for g, fg in enumerate(f):
            acc = ex.add(acc, ex.mul(fg, row[g]))
        out.append(acc)
    return out


@dataclass
class BracketFamily:
    """All words of length 1..s (by length, then lexicographic) and their coefficients g_w.

    Entry ``j`` has word ``words[j]``, length ``lengths[j]`` and coefficient
    vector ``coeffs[j]``; the first ``m`` entries are the fields of H verbatim.
    Indices are 0-based.
    """

    family: FieldFamily
    s: int
    words: tuple[Word, ...]
    coeffs: tuple[tuple[Expression, ...], ...]
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.family.n

    @property
    def m(self) -> int:
        return self.family.m

    @property
    def q(self) -> int:
        return len(self.words)

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(len(w) for w in self.words)

    @property
    def zero_flags(self) -> tuple[bool, ...]:
        return tuple(all(ex._is_const(c, 0) for c in g) for g in self.coeffs)

    @property
    def box(self):
        return self.family.box

    def index(self, word: Word) -> int:
        try:
            return self.words.index(tuple(word))
        except ValueError:
            raise KeyError(f"word {word} not in bracket family of step {self.s}") from None

    def grads(self, j: int) -> tuple[tuple[Expression, ...], ...]:
        """grads(j)[b][g] = d g_j^b / d x_g, computed on first use."""
        key = ("grad", j)
        if key not in self._cache:
            if j < self.m:
                self._cache[key] = self.family.grads[j]
            else:
                self._cache[key] = tuple(
                    tuple(ex.differentiate(c, g + 1) for g in range(self.n)) for c in self.coeffs[j])
        return self._cache[key]

    def field_fn(self, j: int, backend: str = "float"):
        key = ("f", j, backend)
        if key not in self._cache:
            self._cache[key] = ex.compile_vector(self.coeffs[j], backend)
        return self._cache[key]

    def jac_fn(self, j: int, backend: str = "float"):
        """Compiled ``x -> flat tuple`` of the n x n Jacobian of g_j, row-major."""
        key = ("J", j, backend)
        if key not in self._cache:
            flat = [c for row in self.grads(j) for c in row]
            self._cache[key] = ex.compile_vector(flat, backend)
        return self._cache[key]

    def all_fn(self, backend: str = "float"):
        """Compiled ``x -> flat tuple`` of every g_j, entry-major (q*n values)."""
        key = ("all", backend)
        if key not in self._cache:
            flat = [c for g in self.coeffs for c in g]
            self._cache[key] = ex.compile_vector(flat, backend)
        return self._cache[key]

    def value(self, j: int, x: Sequence[float]) -> np.ndarray:
        return np.array(self.field_fn(j)(tuple(x)), dtype=float)

    def jacobian(self, j: int, x: Sequence[float]) -> np.ndarray:
        return np.array(self.jac_fn(j)(tuple(x)), dtype=float).reshape(self.n, self.n)

    def matrix(self, x: Sequence[float]) -> np.ndarray:
        """The n x q matrix whose columns are g_1(x)..g_q(x)."""
        flat = np.array(self.all_fn()(tuple(x)), dtype=float)
        return flat.reshape(self.q, self.n).T


def build_bracket_family(H: FieldFamily, s: int | None = None) -> BracketFamily:
    """Symbolic g_w for all words of length <= s via f_{jw'} = X_j f_{w'} - X_{w'} f_j."""
    s = H.s if s is None else s
    if s < 1:
        raise ValueError("step must be >= 1")
    words: list[Word] = []
    coeffs: list[tuple[Expression, ...]] = []
    table: dict[Word, tuple[Expression, ...]] = {}
    grads: dict[Word, tuple[tuple[Expression, ...], ...]] = {}
    for j in range(H.m):
        w = (j + 1,)
        table[w] = H.coeffs[j]
        grads[w] = H.grads[j]
    for ell in range(1, s + 1):
        for w in itertools.product(range(1, H.m + 1), repeat=ell):
            if ell > 1:
                head, tail = (w[0],), w[1:]
                f_head, f_tail = table[head], table[tail]
                if tail not in grads:
                    grads[tail] = tuple(
                        tuple(ex.differentiate(c, g + 1) for g in range(H.n)) for c in f_tail)
                first = _directional(f_head, grads[tail])
                second = _directional(f_tail, grads[head])
                table[w] = tuple(ex.sub(a, b) for a, b in zip(first, second))
            words.append(w)
            coeffs.append(table[w])
    return BracketFamily(family=H, s=s, words=tuple(words), coeffs=tuple(coeffs))
