"""Proximal and Krylov kernels on complex vectors.

Inner products are Hermitian; wherever a real scalar is needed (objective
values, line-search tests, CG curvature) the real part is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

_EPS = np.finfo(np.float64).eps


class NonFiniteError(FloatingPointError):
    """A solver produced or received a NaN/inf value."""


class CgBreakdown(ArithmeticError):
    """Nonpositive curvature along a CG search direction: the operator is not
    Hermitian positive definite."""


@dataclass(frozen=True)
class FistaConfig:
    L0: float = 1.0
    eta: float = 2.0
    max_iters: int = 500
    rel_tol: float = 1e-8

    def __post_init__(self):
        if not self.L0 > 0:
            raise ValueError("FISTA needs L0 > 0")
        if not self.eta > 1:
            raise ValueError("FISTA needs eta > 1")
        if self.max_iters < 1:
            raise ValueError("FISTA needs max_iters >= 1")
        if not self.rel_tol >= 0:
            raise ValueError("FISTA needs rel_tol >= 0")


@dataclass(frozen=True)
class CgConfig:
    max_iters: int = 200
    rel_tol: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("CG needs max_iters >= 1")
        if not self.rel_tol > 0:
            raise ValueError("CG needs rel_tol > 0")


def real_dot(u: np.ndarray, v: np.ndarray) -> float:
    """``Re <u, v>`` with the conjugate on the first argument."""
    return float(np.vdot(u, v).real)


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    """Proximal map of ``tau*||.||_1`` for complex ``v``: shrink each
    magnitude by ``tau`` and keep the phase."""
    if not tau >= 0:
        raise ValueError(f"threshold must be nonnegative, got {tau!r}")
    v = np.asarray(v)
    mag = np.abs(v)
    scale = np.maximum(mag - tau, 0.0)
    out = np.zeros_like(v, dtype=np.result_type(v, np.float64))
    nz = mag > 0
    out[nz] = v[nz] * (scale[nz] / mag[nz])
    return out


def l1_norm(v: np.ndarray) -> float:
    return float(np.abs(v).sum())


class CgResult(NamedTuple):
    x: np.ndarray
    iterations: int
    residual: float


def cg_solve(G: Callable[[np.ndarray], np.ndarray], b: np.ndarray, cfg: CgConfig = CgConfig(),
             x0: np.ndarray | None = None) -> CgResult:
    """Solve ``G x = b`` for Hermitian positive definite ``G`` by conjugate
    gradients.

    Stops once ``||b - G x|| <= rel_tol*||b||`` (recursively updated
    residual) or after ``max_iters`` applications of ``G``; running out of
    iterations is reported through ``iterations``, not raised.
    """
    b = np.asarray(b, dtype=np.complex128)
    if not np.all(np.isfinite(b)):
        raise NonFiniteError("right-hand side has non-finite entries")
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return CgResult(np.zeros_like(b), 0, 0.0)
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = np.array(x0, dtype=np.complex128)
        r = b - G(x)
    p = r.copy()
    rs = real_dot(r, r)
    target = cfg.rel_tol * bnorm
    it = 0
    while math.sqrt(rs) > target and it < cfg.max_iters:
        Gp = G(p)
        it += 1
        curv = real_dot(p, Gp)
        if not math.isfinite(curv):
            raise NonFiniteError("non-finite curvature in CG")
        if curv <= 0.0:
            raise CgBreakdown(f"curvature {curv:.3e} <= 0 at CG iteration {it}")
        alpha = rs / curv
        x += alpha * p
        r -= alpha * Gp
        rs_new = real_dot(r, r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return CgResult(x, it, math.sqrt(rs))


@dataclass
class FistaReport:
    iterations: int = 0
    objective: list[float] = field(default_factory=list)
    lipschitz: float = 0.0
    backtracks: int = 0
    converged: bool = False


def fista(f_val: Callable, f_grad: Callable, g_val: Callable, prox: Callable,
          x0: np.ndarray, cfg: FistaConfig = FistaConfig()) -> tuple[np.ndarray, FistaReport]:
    """Minimize ``F = f + g`` by monotone FISTA with backtracking.

    Parameters
    ----------
    f_val, f_grad : callable
        Value and gradient of the smooth part ``f``.
    g_val : callable
        Value of the nonsmooth part ``g``.
    prox : callable
        ``prox(v, step)`` returns ``argmin_x g(x) + ||x - v||^2 / (2*step)``.
    x0 : ndarray
        Starting point.
    cfg : FistaConfig
        ``L0`` and ``eta`` drive the backtracking search for a local
        Lipschitz constant; iteration stops when an accepted step lowers
        ``F`` by at most ``rel_tol*|F|``.

    Returns
    -------
    x : ndarray
        Final iterate; ``F(x) <= F(x0)`` always holds since rejected
        momentum steps keep the previous iterate.
    report : FistaReport
    """
    x = np.array(x0, dtype=np.complex128)
    F = _finite(f_val(x) + g_val(x))
    report = FistaReport(objective=[F])
    y, x_prev, t, L = x.copy(), x.copy(), 1.0, cfg.L0
    for _ in range(cfg.max_iters):
        fy = _finite(f_val(y))
        grad = f_grad(y)
        while True:
            z = prox(y - grad / L, 1.0 / L)
            d = z - y
            fz = _finite(f_val(z))
            quad = fy + real_dot(d, grad) + 0.5 * L * real_dot(d, d)
            # round-off slack only; the test is otherwise exact
            if fz <= quad + 16 * _EPS * (abs(fy) + abs(fz)):
                break
            L *= cfg.eta
            report.backtracks += 1
        Fz = _finite(fz + g_val(z))
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        x_prev = x
        accepted = Fz <= F
        if accepted:
            decrease = F - Fz
            x, F = z, Fz
        y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev)
        t = t_next
        report.iterations += 1
        report.objective.append(F)
        if accepted and decrease <= cfg.rel_tol * abs(F):
            report.converged = True
            break
    report.lipschitz = L
    return x, report


def _finite(v: float) -> float:
    v = float(v)
    if not math.isfinite(v):
        raise NonFiniteError("non-finite objective value")
    return v
