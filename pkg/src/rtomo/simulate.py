"""Synthetic multi-cluster measurements of 3D point scatterers.

A scatterer at height ``z`` contributes the phase

    (4*pi*f_k/c) * (cos(phi)*(x cos(theta) + y sin(theta)) + z*sin(phi))

which a 2D ground-plane imager can only explain by a ground point shifted
by ``z*tan(phi)`` along the look direction ``(cos(theta_c), sin(theta_c))``,
i.e. toward the sensor. The shift depends on elevation, which is what makes
layover spatially variant across clusters.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import ClusterGeometry, MeasurementSet

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PointScatterer:
    x: float
    y: float
    z: float = 0.0
    amplitude: float = 1.0
    phase: float = 0.0
    window: tuple[float, float] | None = None
    """Azimuth interval ``[a, b]`` (radians, counter-clockwise from ``a``)
    outside of which the scatterer is invisible. ``None`` means isotropic."""

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError(f"scatterer amplitude must be >= 0, got {self.amplitude!r}")
        if self.window is not None:
            a, b = self.window
            object.__setattr__(self, "window", (float(a) % TWO_PI, float(b) % TWO_PI))

    def visible(self, azimuths: np.ndarray) -> np.ndarray:
        """Boolean mask of the azimuths inside the scattering window."""
        if self.window is None:
            return np.ones(azimuths.shape, dtype=bool)
        a, b = self.window
        width = (b - a) % TWO_PI
        return (np.asarray(azimuths) - a) % TWO_PI <= width

    def ground_shift(self, elevation: float, look: float) -> tuple[float, float]:
        """Apparent ground position seen by a cluster at ``elevation`` looking
        along azimuth ``look``."""
        d = self.z * math.tan(elevation)
        return (self.x + d * math.cos(look), self.y + d * math.sin(look))


@dataclass(frozen=True)
class SimulationSpec:
    scatterers: tuple[PointScatterer, ...]
    clusters: tuple[ClusterGeometry, ...]
    noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        object.__setattr__(self, "clusters", tuple(self.clusters))
        if not self.scatterers:
            raise ValueError("simulation needs at least one scatterer")
        if not self.clusters:
            raise ValueError("simulation needs at least one cluster")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")


def cluster_rng(seed: int, index: int) -> np.random.Generator:
    """Independent, reproducible noise stream for cluster ``index``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def simulate_cluster(geometry: ClusterGeometry, scatterers, noise_sigma: float = 0.0,
                     rng: np.random.Generator | None = None) -> MeasurementSet:
    k = 4.0 * np.pi * geometry.waveform.frequencies / geometry.waveform.c
    th = geometry.azimuths
    cos_e, sin_e = math.cos(geometry.elevation), math.sin(geometry.elevation)
    y = np.zeros((th.size, k.size), dtype=np.complex128)
    for s in scatterers:
        path = cos_e * (s.x * np.cos(th) + s.y * np.sin(th)) + s.z * sin_e
        refl = s.amplitude * np.exp(1j * s.phase) * s.visible(th)
        y += refl[:, None] * np.exp(1j * k[None, :] * path[:, None])
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("noise requested without a random generator")
        # circular complex Gaussian, E|n|^2 = noise_sigma^2
        n = rng.standard_normal((2,) + y.shape) * (noise_sigma / math.sqrt(2.0))
        y += n[0] + 1j * n[1]
    return MeasurementSet(geometry, y.ravel())


def simulate(spec: SimulationSpec, threads: int = 1) -> list[MeasurementSet]:
    """Measurements of every cluster in ``spec``.

    Output is bit-identical for any ``threads`` because each cluster draws
    from its own seeded stream.
    """
    def one(i):
        return simulate_cluster(spec.clusters[i], spec.scatterers, spec.noise_sigma,
                                cluster_rng(spec.rng_seed, i))

    idx = range(len(spec.clusters))
    if threads <= 1:
        return [one(i) for i in idx]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, idx))
