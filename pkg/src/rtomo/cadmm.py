"""Consensus ADMM imaging across APC clusters.

Local images ``r^i`` fit their own cluster's data, the global image ``g``
carries the l1 prior, and the (unscaled) duals ``sigma^i`` enforce
``r^i = g``. One outer iteration is bulk-synchronous:

1. ``r``-update: per cluster, solve the Hermitian positive definite system
   ``(mu conj(theta) A^H A theta + beta I) r = mu conj(theta) A^H y - sigma + beta g``
   by warm-started CG (clusters are independent and may run in parallel);
2. ``g``-update: minimize ``||g||_1 + h(g)`` with
   ``h(g) = mean_i[beta/2 ||r^i - g||^2 - Re<sigma^i, g>]`` by FISTA;
3. dual ascent ``sigma^i += beta (r^i - g)``.

Iteration stops when both ``||sum_i (r^i - g)||`` and ``||g_t - g_{t-1}||``
drop below ``eps``, or after ``t_max`` iterations.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import MeasurementSet
from .jsc import DataFidelity, estimate_phase
from .operator import ClusterOperator, GramOperator
from .solvers import (CgConfig, FistaConfig, NonFiniteError, cg_solve, fista, l1_norm,
                      real_dot, soft_threshold)

G_UPDATE_MODES = ("fista", "closed_form")


@dataclass(frozen=True)
class CadmmConfig:
    mu: float = 100.0
    beta: float = 50.0
    eps: float = 0.01
    t_max: int = 100
    cg: CgConfig = field(default_factory=lambda: CgConfig(max_iters=100, rel_tol=1e-6))
    fista: FistaConfig = field(default_factory=lambda: FistaConfig(max_iters=1000, rel_tol=1e-14))
    g_update_mode: str = "fista"

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu!r}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps!r}")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.g_update_mode not in G_UPDATE_MODES:
            raise ValueError(f"g_update_mode must be one of {G_UPDATE_MODES}")


@dataclass(frozen=True)
class IterationRecord:
    t: int
    primal: float
    dual: float
    objective: float
    cg_iters: int
    fista_iters: int
    cluster_gap: float  # sum_i ||r^i - g||, diagnostic only


LOG_HEADER = "# t, ||eta_pri||, ||eta_dual||, objective, cg_iters_total, fista_iters, sum_i||r_i-g|| (diagnostic)"


@dataclass
class SolverReport:
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def primal(self) -> list[float]:
        return [r.primal for r in self.records]

    @property
    def dual(self) -> list[float]:
        return [r.dual for r in self.records]

    def to_log(self) -> str:
        lines = [LOG_HEADER]
        for r in self.records:
            lines.append(f"{r.t}, {r.primal!r}, {r.dual!r}, {r.objective!r}, "
                         f"{r.cg_iters}, {r.fista_iters}, {r.cluster_gap!r}")
        lines.append(f"# converged: {'yes' if self.converged else 'no'}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_log(cls, text: str) -> "SolverReport":
        rep = cls()
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("# converged:"):
                rep.converged = line.split(":", 1)[1].strip() == "yes"
            if not line or line.startswith("#"):
                continue
            f = [s.strip() for s in line.split(",")]
            rep.records.append(IterationRecord(int(f[0]), float(f[1]), float(f[2]), float(f[3]),
                                               int(f[4]), int(f[5]), float(f[6])))
        return rep


@dataclass
class CadmmState:
    r: list[np.ndarray]
    g: np.ndarray
    sigma: list[np.ndarray]
    t: int = 0
    g_prev: np.ndarray | None = None
    report: SolverReport = field(default_factory=SolverReport)


def _check_inputs(ops, ys):
    if not ops or len(ops) != len(ys):
        raise ValueError("need matching, nonempty operator and measurement lists")
    grid = ops[0].grid
    for op, y in zip(ops, ys):
        if op.grid != grid:
            raise ValueError("all cluster operators must share one grid")
        if y.geometry != op.geometry:
            raise ValueError("measurement set and operator describe different clusters")


def init_state(ops: list[ClusterOperator], ys: list[MeasurementSet]
               ) -> tuple[CadmmState, list[np.ndarray]]:
    """Back-projection magnitudes as local images, back-projection phases as
    ``theta``, zero duals and a zero global image."""
    _check_inputs(ops, ys)
    L = ops[0].grid.size
    r, thetas = [], []
    for op, y in zip(ops, ys):
        r.append(np.abs(op.adjoint(y.samples)).astype(np.complex128))
        thetas.append(estimate_phase(op, y))
    state = CadmmState(r=r, g=np.zeros(L, dtype=np.complex128),
                       sigma=[np.zeros(L, dtype=np.complex128) for _ in ops])
    return state, thetas


def make_terms(ops, ys, thetas, mu: float) -> list[DataFidelity]:
    return [DataFidelity(op, y, th, mu) for op, y, th in zip(ops, ys, thetas)]


def _map(fn, n: int, threads: int) -> list:
    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=min(threads, n)) as pool:
            return list(pool.map(fn, range(n)))
    return [fn(i) for i in range(n)]


def update_r(state: CadmmState, terms: list[DataFidelity], cfg: CadmmConfig,
             threads: int = 1) -> tuple[list[np.ndarray], int]:
    """New local images and the total number of CG iterations spent."""
    def one(i):
        term = terms[i]
        G = GramOperator(term.op, term.theta, cfg.mu, cfg.beta)
        rhs = cfg.mu * term.rhs - state.sigma[i] + cfg.beta * state.g
        res = cg_solve(G, rhs, cfg.cg, x0=state.r[i])
        return res.x, res.iterations

    out = _map(one, len(terms), threads)
    return [o[0] for o in out], sum(o[1] for o in out)


def update_g(r: list[np.ndarray], sigma: list[np.ndarray], cfg: CadmmConfig,
             g0: np.ndarray | None = None) -> tuple[np.ndarray, int]:
    """New global image and the number of FISTA iterations spent (0 in
    ``closed_form`` mode)."""
    r_bar = np.mean(np.stack(r), axis=0)
    s_bar = np.mean(np.stack(sigma), axis=0)
    if not (np.all(np.isfinite(r_bar)) and np.all(np.isfinite(s_bar))):
        raise NonFiniteError("non-finite local image or dual variable")
    beta = cfg.beta
    if cfg.g_update_mode == "closed_form":
        return soft_threshold(r_bar + s_bar / beta, 1.0 / beta), 0

    # h(g) up to an additive constant, evaluated as beta/2 ||g - center||^2:
    # nonnegative and free of cancellation, so the relative objective-change
    # stopping test is meaningful
    center = r_bar + s_bar / beta

    def f_val(g):
        d = g - center
        return 0.5 * beta * real_dot(d, d)

    def f_grad(g):
        return beta * (g - r_bar) - s_bar

    start = np.zeros_like(r_bar) if g0 is None else g0
    g, rep = fista(f_val, f_grad, l1_norm, soft_threshold, start, cfg.fista)
    return g, rep.iterations


def update_sigma(sigma: list[np.ndarray], r: list[np.ndarray], g: np.ndarray,
                 beta: float) -> list[np.ndarray]:
    return [s + beta * (ri - g) for s, ri in zip(sigma, r)]


def residuals(state: CadmmState) -> tuple[float, float]:
    """``(||sum_i (r^i - g)||, ||g - g_prev||)``.

    The primal residual sums the consensus gaps before taking the norm, so
    gaps of opposite sign in different clusters cancel.
    """
    gap = np.sum(np.stack([ri - state.g for ri in state.r]), axis=0)
    g_prev = np.zeros_like(state.g) if state.g_prev is None else state.g_prev
    return float(np.linalg.norm(gap)), float(np.linalg.norm(state.g - g_prev))


def augmented_lagrangian(terms: list[DataFidelity], r: list[np.ndarray], g: np.ndarray,
                         sigma: list[np.ndarray], beta: float) -> float:
    """Centralized augmented Lagrangian (the l1 term on ``g`` counted once per
    cluster)."""
    g_l1 = l1_norm(g)
    total = 0.0
    for term, ri, si in zip(terms, r, sigma):
        d = ri - g
        total += term.value(ri) + g_l1 + real_dot(si, d) + 0.5 * beta * real_dot(d, d)
    return total


def step(state: CadmmState, terms: list[DataFidelity], cfg: CadmmConfig,
         threads: int = 1) -> CadmmState:
    """One outer iteration; returns the new state with its record appended."""
    r, cg_iters = update_r(state, terms, cfg, threads)
    g, fista_iters = update_g(r, state.sigma, cfg, g0=state.g)
    sigma = update_sigma(state.sigma, r, g, cfg.beta)
    new = CadmmState(r=r, g=g, sigma=sigma, t=state.t + 1, g_prev=state.g, report=state.report)
    primal, dual = residuals(new)
    objective = augmented_lagrangian(terms, r, g, sigma, cfg.beta)
    if not math.isfinite(objective):
        raise NonFiniteError(f"non-finite augmented Lagrangian at t={new.t}")
    gap = float(sum(np.linalg.norm(ri - g) for ri in r))
    new.report.records.append(IterationRecord(new.t, primal, dual, objective, cg_iters,
                                              fista_iters, gap))
    return new


@dataclass
class CadmmResult:
    g: np.ndarray
    r: list[np.ndarray]
    report: SolverReport
    thetas: list[np.ndarray]
    state: CadmmState

    @property
    def image(self) -> np.ndarray:
        return np.abs(self.g)


def run(ops: list[ClusterOperator], ys: list[MeasurementSet], cfg: CadmmConfig = CadmmConfig(),
        threads: int = 1, callback=None) -> CadmmResult:
    """Run consensus ADMM to convergence or ``t_max``.

    Not converging by ``t_max`` is reported through
    ``result.report.converged``; subsolver failures propagate.
    """
    state, thetas = init_state(ops, ys)
    terms = make_terms(ops, ys, thetas, cfg.mu)
    while state.t < cfg.t_max:
        state = step(state, terms, cfg, threads)
        rec = state.report.records[-1]
        if callback is not None:
            callback(state)
        if rec.primal < cfg.eps and rec.dual < cfg.eps:
            state.report.converged = True
            break
    return CadmmResult(state.g, state.r, state.report, thetas, state)
