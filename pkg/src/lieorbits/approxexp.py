"""Commutator flow words C_tau, approximate exponentials, and almost-exponential charts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fields import BracketFamily, Word
from .flows import FlowStep, FlowWord, IntegratorConfig, flow_jacobian, run_word

__all__ = [
    "ChartIndex",
    "ChartJacobian",
    "chart_norm",
    "step_count",
    "commutator_path",
    "exp_ap_word",
    "exp_ap",
    "e_map_word",
    "e_map",
    "e_jacobian",
    "exp_ap_derivative",
]


@dataclass(frozen=True)
class ChartIndex:
    """Strictly increasing 0-based indices into a bracket family."""

    indices: tuple[int, ...]
    lengths: tuple[int, ...]

    def __post_init__(self):
        if not self.indices:
            raise ValueError("a chart needs at least one bracket")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("chart indices must be strictly increasing")

    @property
    def p(self) -> int:
        return len(self.indices)

    @classmethod
    def of(cls, fam: BracketFamily, indices: Sequence[int]) -> "ChartIndex":
        idx = tuple(int(i) for i in indices)
        if len(idx) > min(fam.n, fam.q):
            raise ValueError("chart dimension exceeds min(n, q)")
        return cls(idx, tuple(fam.lengths[i] for i in idx))

    @classmethod
    def from_words(cls, fam: BracketFamily, words: Sequence[Word]) -> "ChartIndex":
        return cls.of(fam, sorted(fam.index(tuple(w)) for w in words))


def chart_norm(h: Sequence[float], lengths: Sequence[int]) -> float:
    """||h||_I = max_k |h_k|^(1/d_k)."""
    return max((abs(v) ** (1.0 / d) for v, d in zip(h, lengths)), default=0.0)


def step_count(length: int) -> int:
    """Number of flows in C_tau for a word of the given length: 1, 4, 10, 22, ..."""
    return 1 if length == 1 else 2 * step_count(length - 1) + 2


def commutator_path(word: Word, tau: float, r: float = 1.0) -> FlowWord:
    """C_tau(X_{w1},...,X_{wl}) as a flow word over the base fields, in execution order.

    C_tau(w) = C_tau(tail)^-1 e^{-tau X_{w1}} C_tau(tail) e^{tau X_{w1}}, so the
    execution order is +w1, C(tail), -w1, C(tail)^-1.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    head = word[0] - 1
    if len(word) == 1:
        return FlowWord((FlowStep(head, 1, tau, r),))
    tail = commutator_path(word[1:], tau, r)
    return (FlowWord((FlowStep(head, 1, tau, r),)) + tail
            + FlowWord((FlowStep(head, -1, tau, r),)) + tail.inverse())


def exp_ap_word(word: Word, t: float, r: float = 1.0) -> FlowWord:
    """exp_ap(t X_w): C_{t^(1/l)} for t >= 0, the inverse of C_{|t|^(1/l)} for t < 0."""
    tau = abs(t) ** (1.0 / len(word))
    path = commutator_path(word, tau, r)
    return path if t >= 0 else path.inverse()


def exp_ap(fam: BracketFamily, word: Word, t: float, x: Sequence[float],
           cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    return run_word(fam, exp_ap_word(word, t), x, cfg)


def _scaled_times(fam: BracketFamily, I: ChartIndex, r: float, h: Sequence[float]) -> list[float]:
    # tilde convention: exp_ap(h_k r^{d_k} Y) is exp_ap of the product t_k = r^{d_k} h_k
    return [r ** d * float(hk) for d, hk in zip(I.lengths, h)]


def e_map_word(fam: BracketFamily, I: ChartIndex, r: float, h: Sequence[float]) -> FlowWord:
    """Flow word of E_{I,x,r}(h) = exp_ap(h_1 U_1) ... exp_ap(h_p U_p) x; the h_p factor acts first."""
    if len(h) != I.p:
        raise ValueError("h must have one entry per chart bracket")
    times = _scaled_times(fam, I, r, h)
    wd = FlowWord()
    for k in reversed(range(I.p)):
        wd = wd + exp_ap_word(fam.words[I.indices[k]], times[k])
    return wd


def e_map(fam: BracketFamily, I: ChartIndex, x: Sequence[float], r: float, h: Sequence[float],
          cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    return run_word(fam, e_map_word(fam, I, r, h), x, cfg)


def exp_ap_derivative(fam: BracketFamily, word: Word, t: float, z: Sequence[float],
                      cfg: IntegratorConfig = IntegratorConfig()):
    """Endpoint, point Jacobian and t-derivative of exp_ap(t X_w) z.

    All steps share the duration tau = |t|^(1/l); d/dtau of the endpoint sums each step's
    field pushed forward through the later steps.  At t = 0 the derivative is g_w(z).
    """
    ell = len(word)
    wd = exp_ap_word(word, t)
    y = np.array(z, dtype=float)
    jacs, pushed = [], []
    for s in wd.steps:
        y, M = flow_jacobian(fam, s.field, s.sign * s.t, y, cfg, 1, s.r)
        jacs.append(M)
        pushed.append(s.sign * s.r * fam.value(s.field, y))
    total = np.eye(fam.n)
    dtau = np.zeros(fam.n)
    for M, v in zip(reversed(jacs), reversed(pushed)):
        dtau += total @ v
        total = total @ M
    if t == 0:
        return y, total, fam.value(fam.index(word), z)
    tau = abs(t) ** (1.0 / ell)
    dt = np.sign(t) * tau ** (1 - ell) / ell
    return y, total, dtau * dt


@dataclass
class ChartJacobian:
    matrix: np.ndarray  # n x p, column k = dE/dh_k
    one_sided: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


def e_jacobian(fam: BracketFamily, I: ChartIndex, x: Sequence[float], r: float,
               h: Sequence[float], cfg: IntegratorConfig = IntegratorConfig(),
               mode: str = "fd", fd_step: float = 1e-6) -> ChartJacobian:
    """dE/dh by central differences (``mode="fd"``) or by the chain rule (``mode="chain"``).

    In FD mode a coordinate with |h_k| <= fd_step is differenced one-sidedly from both
    signs; both columns are kept in ``one_sided`` and the matrix holds their mean.
    """
    h = np.asarray(h, dtype=float)
    n, p = fam.n, I.p
    out = np.zeros((n, p))
    one_sided = {}
    if mode == "fd":
        base = None
        for k in range(p):
            e = np.zeros(p)
            e[k] = fd_step
            plus = e_map(fam, I, x, r, h + e, cfg)
            minus = e_map(fam, I, x, r, h - e, cfg)
            if abs(h[k]) > fd_step:
                out[:, k] = (plus - minus) / (2 * fd_step)
            else:
                if base is None:
                    base = e_map(fam, I, x, r, h, cfg)
                fwd = (plus - base) / fd_step
                bwd = (base - minus) / fd_step
                one_sided[k] = (fwd, bwd)
                out[:, k] = 0.5 * (fwd + bwd)
        return ChartJacobian(out, one_sided)
    if mode != "chain":
        raise ValueError(f"unknown mode {mode!r}")
    times = _scaled_times(fam, I, r, h)
    z = np.array(x, dtype=float)
    jacs, derivs = [None] * p, [None] * p
    for k in reversed(range(p)):
        word = fam.words[I.indices[k]]
        z, J, dt = exp_ap_derivative(fam, word, times[k], z, cfg)
        jacs[k] = J
        derivs[k] = dt * r ** I.lengths[k]
    lead = np.eye(n)
    for k in range(p):
        out[:, k] = lead @ derivs[k]
        lead = lead @ jacs[k]
    return ChartJacobian(out)
