"""Exponential flows e^{tZ}x by fixed-step RK4, flow words, and flow Jacobians."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .fields import BracketFamily

__all__ = [
    "FlowError",
    "IntegratorConfig",
    "FlowStep",
    "FlowWord",
    "flow",
    "run_word",
    "flow_jacobian",
    "run_word_jacobian",
    "trajectory",
]


class FlowError(RuntimeError):
    """The integrated state left the working region (abort radius exceeded)."""


@dataclass(frozen=True)
class IntegratorConfig:
    substeps_per_unit: int = 256
    state_bound: float | None = None  # None: 10x the family's box diagonal
    tol: float = 1e-11  # nominal per-flow accuracy; noise floors are 100x this

    def __post_init__(self):
        if self.substeps_per_unit < 1:
            raise ValueError("substeps_per_unit must be >= 1")

    def bound(self, fam: BracketFamily) -> float:
        if self.state_bound is not None:
            return self.state_bound
        return 10.0 * fam.family.box_diagonal


@dataclass(frozen=True)
class FlowStep:
    """One factor e^{t Z} with Z = sign * scale**len(field) * Y_field."""

    field: int  # 0-based index into the bracket family
    sign: int = 1
    t: float = 0.0
    r: float = 1.0

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if not math.isfinite(self.t) or self.t < 0:
            raise ValueError("duration must be finite and >= 0")

    def inverse(self) -> "FlowStep":
        return FlowStep(self.field, -self.sign, self.t, self.r)


@dataclass(frozen=True)
class FlowWord:
    """Steps executed in order: ``steps[0]`` acts first on the point."""

    steps: tuple[FlowStep, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[FlowStep]:
        return iter(self.steps)

    def __add__(self, other: "FlowWord") -> "FlowWord":
        return FlowWord(self.steps + other.steps)

    def inverse(self) -> "FlowWord":
        return FlowWord(tuple(s.inverse() for s in reversed(self.steps)))

    @property
    def total_time(self) -> float:
        return sum(s.t for s in self.steps)

    def to_json(self, fam: BracketFamily) -> list[dict]:
        return [{"field": list(fam.words[s.field]), "sign": s.sign, "t": s.t, "r": s.r}
                for s in self.steps]

    @classmethod
    def from_json(cls, data: Sequence[dict], fam: BracketFamily) -> "FlowWord":
        return cls(tuple(FlowStep(fam.index(tuple(d["field"])), int(d["sign"]),
                                  float(d["t"]), float(d.get("r", 1.0))) for d in data))


def _coefficient(fam: BracketFamily, step_field: int, sign: int, r: float) -> float:
    return sign * r ** fam.lengths[step_field]


def _nsub(t: float, cfg: IntegratorConfig) -> int:
    return max(1, math.ceil(abs(t) * cfg.substeps_per_unit))


def flow(fam: BracketFamily, j: int, t: float, x: Sequence[float],
         cfg: IntegratorConfig = IntegratorConfig(), sign: int = 1, r: float = 1.0) -> np.ndarray:
    """e^{t Z} x for Z = sign * r**len_j * Y_j; ``t`` may be negative."""
    return np.array(_flow_tuple(fam, j, t, tuple(float(v) for v in x), cfg, sign, r))


def _flow_tuple(fam, j, t, x, cfg, sign, r):
    if t == 0:
        return x
    f = fam.field_fn(j)
    c = _coefficient(fam, j, sign, r)
    nsub = _nsub(t, cfg)
    h = t / nsub
    ch, ch2, ch6 = c * h, 0.5 * c * h, c * h / 6.0
    bound2 = cfg.bound(fam) ** 2
    n = len(x)
    rng = range(n)
    for _ in range(nsub):
        k1 = f(x)
        k2 = f(tuple(x[i] + ch2 * k1[i] for i in rng))
        k3 = f(tuple(x[i] + ch2 * k2[i] for i in rng))
        k4 = f(tuple(x[i] + ch * k3[i] for i in rng))
        x = tuple(x[i] + ch6 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) for i in rng)
        if sum(v * v for v in x) > bound2:
            raise FlowError(f"left working region (|x| > {math.sqrt(bound2):.3g})")
    return x


def run_word(fam: BracketFamily, wd: FlowWord, x: Sequence[float],
             cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    y = tuple(float(v) for v in x)
    for s in wd.steps:
        y = _flow_tuple(fam, s.field, s.t, y, cfg, s.sign, s.r)
    return np.array(y)


def trajectory(fam: BracketFamily, wd: FlowWord, x: Sequence[float],
               cfg: IntegratorConfig = IntegratorConfig(), per_step: int = 8):
    """Sample ``per_step`` points inside each step; yields ``(elapsed time, point)`` pairs."""
    y = tuple(float(v) for v in x)
    elapsed = 0.0
    out = [(0.0, np.array(y))]
    for s in wd.steps:
        if s.t == 0:
            continue
        dt = s.t / per_step
        for _ in range(per_step):
            y = _flow_tuple(fam, s.field, dt, y, cfg, s.sign, s.r)
            elapsed += dt
            out.append((elapsed, np.array(y)))
    return out


def flow_jacobian(fam: BracketFamily, j: int, t: float, x: Sequence[float],
                  cfg: IntegratorConfig = IntegratorConfig(), sign: int = 1,
                  r: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint and d(e^{tZ}x)/dx by RK4 on the variational system M' = (Df o state) M."""
    n = fam.n
    y = np.array(x, dtype=float)
    M = np.eye(n)
    if t == 0:
        return y, M
    f, J = fam.field_fn(j), fam.jac_fn(j)
    c = _coefficient(fam, j, sign, r)
    nsub = _nsub(t, cfg)
    h = t / nsub
    bound = cfg.bound(fam)

    def rhs(state, mat):
        tup = tuple(state)
        return (c * np.array(f(tup)),
                c * np.array(J(tup)).reshape(n, n) @ mat)

    for _ in range(nsub):
        k1, m1 = rhs(y, M)
        k2, m2 = rhs(y + 0.5 * h * k1, M + 0.5 * h * m1)
        k3, m3 = rhs(y + 0.5 * h * k2, M + 0.5 * h * m2)
        k4, m4 = rhs(y + h * k3, M + h * m3)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        M = M + h / 6.0 * (m1 + 2 * m2 + 2 * m3 + m4)
        if np.linalg.norm(y) > bound:
            raise FlowError(f"left working region (|x| > {bound:.3g})")
    return y, M


def run_word_jacobian(fam: BracketFamily, wd: FlowWord, x: Sequence[float],
                      cfg: IntegratorConfig = IntegratorConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint and Jacobian of the whole word (later steps multiply on the left)."""
    y = np.array(x, dtype=float)
    M = np.eye(fam.n)
    for s in wd.steps:
        y, Ms = flow_jacobian(fam, s.field, s.sign * s.t, y, cfg, 1, s.r)
        M = Ms @ M
    return y, M
