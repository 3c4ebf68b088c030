"""Per-cluster measurement operator and its adjoint.

Each cluster maps a length-L ground image ``r`` to ``N*K`` samples

    y[m*K + k] = sum_l r[l] * exp(+1j * omega[k] * (x_l cos(theta_m) + y_l sin(theta_m)))

The forward and adjoint products are evaluated directly, a block of
azimuths at a time. The normal operator ``A^H A`` is shift-invariant on a
uniform grid, so it is applied as a 2D convolution with a precomputed
kernel through a zero-padded FFT. That is exact, not an approximation.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .geometry import ClusterGeometry, SceneGrid, check_image

DENSE_MAX_PIXELS = 4096
UNIT_MODULUS_TOL = 1e-9

# complex entries materialized per block in the direct products
_BLOCK_ELEMENTS = 1 << 21


class ClusterOperator:
    """Measurement operator ``A^i`` of one cluster on a fixed grid.

    Parameters
    ----------
    geometry : ClusterGeometry
        Azimuths, elevation and waveform of the cluster.
    grid : SceneGrid
        Imaging grid.
    mode : {'matrix_free', 'dense'}
        ``'dense'`` stores the full ``(N*K, L)`` matrix and is meant as a
        test oracle; it is refused for grids above ``DENSE_MAX_PIXELS``.
    """

    def __init__(self, geometry: ClusterGeometry, grid: SceneGrid, mode: str = "matrix_free"):
        if mode not in ("matrix_free", "dense"):
            raise ValueError(f"unknown operator mode {mode!r}")
        if mode == "dense" and grid.size > DENSE_MAX_PIXELS:
            raise ValueError(f"dense mode limited to L <= {DENSE_MAX_PIXELS}, got {grid.size}")
        self.geometry = geometry
        self.grid = grid
        self.mode = mode
        self._x, self._y = grid.coords()
        self._matrix = self._rows(0, geometry.n_azimuths) if mode == "dense" else None

    @property
    def shape(self) -> tuple[int, int]:
        return (self.geometry.n_samples, self.grid.size)

    @property
    def matrix(self) -> np.ndarray:
        """Explicit matrix (built on demand in matrix-free mode)."""
        if self._matrix is not None:
            return self._matrix
        return self._rows(0, self.geometry.n_azimuths)

    def _rows(self, m0: int, m1: int) -> np.ndarray:
        th = self.geometry.azimuths[m0:m1]
        proj = np.cos(th)[:, None] * self._x[None, :] + np.sin(th)[:, None] * self._y[None, :]
        phase = self.geometry.omega[None, :, None] * proj[:, None, :]
        return np.exp(1j * phase).reshape(-1, self.grid.size)

    def _blocks(self):
        per = max(1, _BLOCK_ELEMENTS // (self.geometry.waveform.K * self.grid.size))
        n = self.geometry.n_azimuths
        for m0 in range(0, n, per):
            yield m0, min(n, m0 + per)

    def forward(self, r: np.ndarray) -> np.ndarray:
        r = check_image(self.grid, r)
        if self._matrix is not None:
            return self._matrix @ r
        K = self.geometry.waveform.K
        out = np.empty(self.geometry.n_samples, dtype=np.complex128)
        for m0, m1 in self._blocks():
            out[m0 * K:m1 * K] = self._rows(m0, m1) @ r
        return out

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if y.shape != (self.geometry.n_samples,):
            raise ValueError(f"measurement vector has shape {y.shape}, "
                             f"expected ({self.geometry.n_samples},)")
        y = y.astype(np.complex128, copy=False)
        if self._matrix is not None:
            return self._matrix.conj().T @ y
        K = self.geometry.waveform.K
        out = np.zeros(self.grid.size, dtype=np.complex128)
        for m0, m1 in self._blocks():
            out += y[m0 * K:m1 * K] @ self._rows(m0, m1).conj()
        return out

    def normal(self, r: np.ndarray) -> np.ndarray:
        """``A^H A r``."""
        r = check_image(self.grid, r)
        if self._matrix is not None:
            return self._matrix.conj().T @ (self._matrix @ r)
        ny, nx = self.grid.shape
        padded = np.zeros((2 * ny, 2 * nx), dtype=np.complex128)
        padded[:ny, :nx] = r.reshape(ny, nx)
        out = np.fft.ifft2(np.fft.fft2(padded) * self._normal_spectrum)
        return out[:ny, :nx].ravel()

    @cached_property
    def _normal_spectrum(self) -> np.ndarray:
        return np.fft.fft2(normal_kernel(self.geometry, self.grid))


def normal_kernel(geometry: ClusterGeometry, grid: SceneGrid) -> np.ndarray:
    """Convolution kernel of ``A^H A`` in circulant-embedded layout.

    Entry ``[dj, di]`` (indices taken modulo ``2*ny``, ``2*nx``) holds
    ``sum_{m,k} exp(-1j*omega_k*(di*dx*cos(theta_m) + dj*dy*sin(theta_m)))``
    for pixel offsets ``|di| < nx``, ``|dj| < ny``; the unused wrap row and
    column are zero.
    """
    ny, nx = grid.shape

    def offsets(n):
        d = np.concatenate([np.arange(n), [0], np.arange(-(n - 1), 0)]).astype(np.float64)
        valid = np.ones(2 * n, dtype=bool)
        valid[n] = False
        return d, valid

    di, vx = offsets(nx)
    dj, vy = offsets(ny)
    DX = (dj[:, None] * 0 + di[None, :]) * grid.dx
    DY = (dj[:, None] + di[None, :] * 0) * grid.dy
    th = geometry.azimuths
    proj = np.cos(th)[:, None, None] * DX[None] + np.sin(th)[:, None, None] * DY[None]
    kern = _frequency_sum(geometry.omega, proj).sum(axis=0)
    kern[~vy, :] = 0.0
    kern[:, ~vx] = 0.0
    return kern


def _frequency_sum(omega: np.ndarray, p: np.ndarray) -> np.ndarray:
    """``sum_k exp(-1j*omega_k*p)`` for linearly spaced ``omega``, via the
    Dirichlet closed form."""
    K = omega.size
    if K == 1:
        return np.exp(-1j * omega[0] * p)
    step = (omega[-1] - omega[0]) / (K - 1)
    center = 0.5 * (omega[0] + omega[-1])
    half = 0.5 * step * p
    s = np.sin(half)
    near = np.abs(s) < 1e-7
    ratio = np.empty_like(p)
    ratio[~near] = np.sin(K * half[~near]) / s[~near]
    # limit at half = n*pi is K*cos(K*half)/cos(half)
    ratio[near] = K * np.cos(K * half[near]) / np.cos(half[near])
    return np.exp(-1j * center * p) * ratio


def apply_forward(op: ClusterOperator, r: np.ndarray) -> np.ndarray:
    return op.forward(r)


def apply_adjoint(op: ClusterOperator, y: np.ndarray) -> np.ndarray:
    return op.adjoint(y)


class GramOperator:
    """``r -> mu * conj(theta) * A^H A (theta * r) + beta * r``.

    Hermitian positive definite for ``mu, beta > 0`` and unit-modulus
    ``theta``; arguments are validated once at construction.
    """

    def __init__(self, op: ClusterOperator, theta: np.ndarray, mu: float, beta: float):
        if not mu > 0:
            raise ValueError(f"mu must be positive, got {mu!r}")
        if not beta > 0:
            raise ValueError(f"beta must be positive, got {beta!r}")
        theta = check_image(op.grid, theta, "theta")
        if np.max(np.abs(np.abs(theta) - 1.0), initial=0.0) > UNIT_MODULUS_TOL:
            raise ValueError("theta entries must have unit modulus")
        self.op = op
        self.theta = theta
        self.mu = float(mu)
        self.beta = float(beta)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = check_image(self.op.grid, r)
        return self.mu * self.theta.conj() * self.op.normal(self.theta * r) + self.beta * r


def apply_gram(op: ClusterOperator, theta: np.ndarray, mu: float, beta: float,
               r: np.ndarray) -> np.ndarray:
    return GramOperator(op, theta, mu, beta)(r)
