"""Joint sparsity-based composite (JSC) imaging.

Every cluster is imaged on its own by l1-regularized least squares with a
fixed back-projection phase estimate, and the magnitude images are fused
by a pixel-wise maximum.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import MeasurementSet, check_image
from .operator import ClusterOperator
from .solvers import FistaConfig, FistaReport, fista, l1_norm, real_dot, soft_threshold


@dataclass(frozen=True)
class JscConfig:
    mu: float = 100.0
    fista: FistaConfig = field(default_factory=FistaConfig)

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu!r}")


def _check_pair(op: ClusterOperator, y: MeasurementSet) -> None:
    if y.geometry != op.geometry:
        raise ValueError("measurement set and operator describe different clusters")


def estimate_phase(op: ClusterOperator, y: MeasurementSet) -> np.ndarray:
    """Unit-modulus phase of the back-projection ``A^H y``; pixels where the
    back-projection is exactly zero get phase 1."""
    _check_pair(op, y)
    bp = op.adjoint(y.samples)
    mag = np.abs(bp)
    theta = np.ones_like(bp)
    nz = mag > 0
    theta[nz] = bp[nz] / mag[nz]
    return theta


class DataFidelity:
    """``(mu/2)*||y - A diag(theta) r||^2`` evaluated through ``A^H A``.

    The expansion ``||y||^2 - 2 Re<u, A^H y> + <u, A^H A u>`` with
    ``u = theta*r`` avoids the direct forward product in inner loops. The
    last normal-operator product is cached so a value and a gradient at the
    same point cost one ``A^H A`` application.
    """

    def __init__(self, op: ClusterOperator, y: MeasurementSet, theta: np.ndarray, mu: float):
        _check_pair(op, y)
        self.op = op
        self.theta = check_image(op.grid, theta, "theta")
        self.mu = float(mu)
        self.y_norm2 = real_dot(y.samples, y.samples)
        self.backprojection = op.adjoint(y.samples)
        # right-hand side term conj(theta) * A^H y
        self.rhs = self.theta.conj() * self.backprojection
        self._cache = (None, None)

    def _normal(self, u: np.ndarray) -> np.ndarray:
        key, val = self._cache
        if key is not None and np.array_equal(key, u):
            return val
        val = self.op.normal(u)
        self._cache = (u.copy(), val)
        return val

    def value(self, r: np.ndarray) -> float:
        u = self.theta * r
        resid2 = (self.y_norm2 - 2.0 * real_dot(u, self.backprojection)
                  + real_dot(u, self._normal(u)))
        return 0.5 * self.mu * max(resid2, 0.0)

    def grad(self, r: np.ndarray) -> np.ndarray:
        u = self.theta * r
        return self.mu * (self.theta.conj() * self._normal(u) - self.rhs)


def solve_local(op: ClusterOperator, y: MeasurementSet, theta: np.ndarray,
                cfg: JscConfig = JscConfig(), x0: np.ndarray | None = None
                ) -> tuple[np.ndarray, FistaReport]:
    """Approximate minimizer of ``(mu/2)||y - A theta r||^2 + ||r||_1``."""
    data = DataFidelity(op, y, theta, cfg.mu)
    start = np.zeros(op.grid.size, dtype=np.complex128) if x0 is None else x0
    return fista(data.value, data.grad, l1_norm, soft_threshold, start, cfg.fista)


def fuse_max(images) -> np.ndarray:
    """Pixel-wise maximum of nonnegative magnitude images."""
    images = [np.asarray(im, dtype=np.float64) for im in images]
    if not images:
        raise ValueError("fuse_max needs at least one image")
    shape = images[0].shape
    for im in images:
        if im.shape != shape:
            raise ValueError(f"image shape {im.shape} differs from {shape}")
        if np.any(im < 0):
            raise ValueError("fuse_max expects nonnegative magnitudes")
    return np.maximum.reduce(images)


@dataclass
class JscResult:
    image: np.ndarray
    local: list[np.ndarray]
    thetas: list[np.ndarray]
    reports: list[FistaReport]

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.reports)


def run_jsc(ops: list[ClusterOperator], ys: list[MeasurementSet],
            cfg: JscConfig = JscConfig(), threads: int = 1) -> JscResult:
    """Solve every cluster independently, then fuse the magnitudes."""
    if not ops or len(ops) != len(ys):
        raise ValueError("need matching, nonempty operator and measurement lists")

    def one(i):
        theta = estimate_phase(ops[i], ys[i])
        r, rep = solve_local(ops[i], ys[i], theta, cfg)
        return r, theta, rep

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, range(len(ops))))
    else:
        out = [one(i) for i in range(len(ops))]
    local = [o[0] for o in out]
    return JscResult(fuse_max([np.abs(r) for r in local]), local,
                     [o[1] for o in out], [o[2] for o in out])
