"""Scene grids, waveforms and APC cluster geometry.

All angles are radians. Pixels are laid out row-major with x varying
fastest: pixel ``l = j*nx + i`` sits at the center of cell ``(i, j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299792458.0


@dataclass(frozen=True)
class SceneGrid:
    """Uniform rectangular imaging grid of ``L = nx*ny`` pixels."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid needs nx, ny >= 1, got {self.nx}x{self.ny}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("grid extent must satisfy x_max > x_min and y_max > y_min")

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape ``(ny, nx)`` of an image reshaped from the flat vector."""
        return (self.ny, self.nx)

    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.ny) + 0.5) * self.dy

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat arrays ``(x_l, y_l)`` of all pixel centers, length L."""
        xx, yy = np.meshgrid(self.x_centers(), self.y_centers())
        return xx.ravel(), yy.ravel()

    def nearest_pixel(self, x: float, y: float) -> int:
        """Index of the pixel whose cell contains ``(x, y)`` (clipped to the grid)."""
        i = int(np.clip(math.floor((x - self.x_min) / self.dx), 0, self.nx - 1))
        j = int(np.clip(math.floor((y - self.y_min) / self.dy), 0, self.ny - 1))
        return j * self.nx + i

    def to_dict(self) -> dict:
        return {
            "x_min_m": self.x_min, "x_max_m": self.x_max,
            "y_min_m": self.y_min, "y_max_m": self.y_max,
            "nx": self.nx, "ny": self.ny,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneGrid":
        return cls(float(d["x_min_m"]), float(d["x_max_m"]), float(d["y_min_m"]),
                   float(d["y_max_m"]), int(d["nx"]), int(d["ny"]))


def grid_pixel_coords(grid: SceneGrid, l: int) -> tuple[float, float]:
    """Center ``(x, y)`` in meters of pixel ``l``."""
    if not 0 <= l < grid.size:
        raise IndexError(f"pixel index {l} outside [0, {grid.size})")
    j, i = divmod(l, grid.nx)
    return (grid.x_min + (i + 0.5) * grid.dx, grid.y_min + (j + 0.5) * grid.dy)


@dataclass(frozen=True)
class WaveformConfig:
    """Stepped/dechirped waveform: K beat frequencies spread over the band."""

    f_center: float
    bandwidth: float
    K: int
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("waveform needs K >= 1")
        if self.bandwidth < 0:
            raise ValueError("bandwidth must be nonnegative")
        if self.K > 1 and self.bandwidth == 0:
            raise ValueError("K > 1 needs a positive bandwidth")
        if self.c <= 0:
            raise ValueError("propagation speed must be positive")

    @property
    def frequencies(self) -> np.ndarray:
        if self.K == 1:
            return np.array([float(self.f_center)])
        return np.linspace(self.f_center - self.bandwidth / 2,
                           self.f_center + self.bandwidth / 2, self.K)

    def to_dict(self) -> dict:
        return {"f_center_Hz": self.f_center, "bandwidth_Hz": self.bandwidth,
                "num_freqs": self.K, "c_m_per_s": self.c}

    @classmethod
    def from_dict(cls, d: dict) -> "WaveformConfig":
        return cls(float(d["f_center_Hz"]), float(d["bandwidth_Hz"]), int(d["num_freqs"]),
                   float(d.get("c_m_per_s", SPEED_OF_LIGHT)))


def wavenumbers(waveform: WaveformConfig, elevation: float) -> np.ndarray:
    """Ground-projected wavenumbers ``4*pi*f_k*cos(elevation)/c`` in rad/m."""
    return 4.0 * np.pi * waveform.frequencies * np.cos(elevation) / waveform.c


@dataclass(frozen=True, eq=False)
class ClusterGeometry:
    """One APC cluster: a fixed elevation and a short run of azimuths."""

    elevation: float
    azimuths: np.ndarray
    waveform: WaveformConfig
    omega: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.elevation < np.pi / 2:
            raise ValueError(f"elevation {self.elevation!r} rad outside [0, pi/2)")
        az = np.array(self.azimuths, dtype=np.float64).ravel()
        if az.size < 1:
            raise ValueError("cluster needs at least one azimuth sample")
        if not np.all(np.isfinite(az)):
            raise ValueError("azimuths must be finite")
        az.setflags(write=False)
        omega = wavenumbers(self.waveform, self.elevation)
        omega.setflags(write=False)
        object.__setattr__(self, "azimuths", az)
        object.__setattr__(self, "omega", omega)

    @property
    def n_azimuths(self) -> int:
        return self.azimuths.size

    @property
    def n_samples(self) -> int:
        return self.azimuths.size * self.waveform.K

    @property
    def center_azimuth(self) -> float:
        """Mean look direction, averaged on the unit circle."""
        return float(np.arctan2(np.sin(self.azimuths).mean(), np.cos(self.azimuths).mean()))

    def __eq__(self, other):
        if not isinstance(other, ClusterGeometry):
            return NotImplemented
        return (self.elevation == other.elevation and self.waveform == other.waveform
                and np.array_equal(self.azimuths, other.azimuths))

    __hash__ = None


def make_cluster(elevation: float, azimuth_start: float, azimuth_extent: float,
                 n: int, waveform: WaveformConfig) -> ClusterGeometry:
    """Cluster with ``n`` azimuths uniformly spaced over the left-closed
    interval ``[azimuth_start, azimuth_start + azimuth_extent)``."""
    if n < 1:
        raise ValueError("cluster needs n >= 1 azimuths")
    if not 0.0 <= elevation < np.pi / 2:
        raise ValueError(f"elevation {elevation!r} rad outside [0, pi/2)")
    azimuths = azimuth_start + azimuth_extent * np.arange(n) / n
    return ClusterGeometry(elevation, azimuths, waveform)


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Stacked measurements of one cluster.

    ``samples[m*K + k]`` is the sample at azimuth ``m`` and frequency ``k``.
    """

    geometry: ClusterGeometry
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.complex128).ravel()
        if s.size != self.geometry.n_samples:
            raise ValueError(f"expected {self.geometry.n_samples} samples, got {s.size}")
        if not np.all(np.isfinite(s)):
            raise ValueError("measurement samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __eq__(self, other):
        if not isinstance(other, MeasurementSet):
            return NotImplemented
        return self.geometry == other.geometry and np.array_equal(self.samples, other.samples)

    __hash__ = None


def check_image(grid: SceneGrid, r: np.ndarray, name: str = "image") -> np.ndarray:
    """Validate a length-L image vector and return it as complex128."""
    r = np.asarray(r)
    if r.shape != (grid.size,):
        raise ValueError(f"{name} has shape {r.shape}, expected ({grid.size},)")
    return r.astype(np.complex128, copy=False)
