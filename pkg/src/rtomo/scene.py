"""JSON scene specifications.

Units live in the field names (``_deg``, ``_m``, ``_Hz``). A scene looks
like::

    {
      "waveform": {"f_center_Hz": 5e9, "bandwidth_Hz": 2e9, "num_freqs": 80},
      "clusters": {"elevations_deg": [30, 60], "num_azimuth_clusters": 8,
                   "azimuth_extent_deg": 18, "azimuths_per_cluster": 72},
      "scatterers": [{"x_m": 0.0, "y_m": 0.0, "z_m": 1.0, "amplitude": 0.002}],
      "noise_sigma": 0.0,
      "seed": 0,
      "grid": {"x_min_m": -2, "x_max_m": 2, "y_min_m": -2, "y_max_m": 2, "nx": 40, "ny": 40}
    }

``clusters`` is either that layout object (cluster ``j`` of each
elevation starts at ``azimuth_offset_deg + j*azimuth_step_deg``; the step
defaults to ``360/num_azimuth_clusters``) or an explicit list of
``{"elevation_deg", "azimuth_start_deg", "azimuth_extent_deg", "num_azimuths"}``
objects. Scatterers take optional ``phase_deg`` and ``window_deg``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .geometry import SceneGrid, WaveformConfig, make_cluster
from .simulate import PointScatterer, SimulationSpec

DEG = math.pi / 180.0


class SceneSpecError(ValueError):
    """Scene specification could not be parsed; the message names the field
    (or JSON line/column) at fault."""


@dataclass(frozen=True)
class Scene:
    spec: SimulationSpec
    grid: SceneGrid | None

    @property
    def ground_truth(self) -> list[tuple[float, float]]:
        """Ground-plane positions of the scatterers with ``z == 0``."""
        return [(s.x, s.y) for s in self.spec.scatterers if s.z == 0.0]


class _Fields:
    def __init__(self, obj, path):
        if not isinstance(obj, dict):
            raise SceneSpecError(f"{path}: expected an object")
        self.obj, self.path = obj, path

    def get(self, key, kind=float, default=...):
        where = f"{self.path}.{key}" if self.path else key
        if key not in self.obj:
            if default is ...:
                raise SceneSpecError(f"{where}: missing required field")
            return default
        val = self.obj[key]
        try:
            if kind is int:
                if isinstance(val, bool) or not float(val).is_integer():
                    raise ValueError
                return int(val)
            if kind is float:
                if isinstance(val, bool):
                    raise ValueError
                out = float(val)
                if not math.isfinite(out):
                    raise ValueError
                return out
            if kind is list:
                if not isinstance(val, list):
                    raise ValueError
                return val
        except (TypeError, ValueError):
            raise SceneSpecError(f"{where}: expected {kind.__name__}, got {val!r}") from None
        return val


def _wrap(where, fn, *args):
    try:
        return fn(*args)
    except SceneSpecError:
        raise
    except ValueError as exc:
        raise SceneSpecError(f"{where}: {exc}") from None


def parse_grid(obj, path="grid") -> SceneGrid:
    f = _Fields(obj, path)
    return _wrap(path, SceneGrid, f.get("x_min_m"), f.get("x_max_m"), f.get("y_min_m"),
                 f.get("y_max_m"), f.get("nx", int), f.get("ny", int))


def parse_grid_string(text: str) -> SceneGrid:
    """``<nx>x<ny>:<xmin>,<xmax>,<ymin>,<ymax>`` (meters)."""
    try:
        dims, ext = text.split(":")
        nx, ny = (int(v) for v in dims.lower().split("x"))
        x0, x1, y0, y1 = (float(v) for v in ext.split(","))
    except ValueError:
        raise SceneSpecError(f"grid {text!r} is not <nx>x<ny>:<xmin>,<xmax>,<ymin>,<ymax>") from None
    return _wrap("--grid", SceneGrid, x0, x1, y0, y1, nx, ny)


def _parse_clusters(obj, waveform):
    if isinstance(obj, list):
        out = []
        for i, c in enumerate(obj):
            path = f"clusters[{i}]"
            f = _Fields(c, path)
            out.append(_wrap(path, make_cluster, f.get("elevation_deg") * DEG,
                             f.get("azimuth_start_deg") * DEG,
                             f.get("azimuth_extent_deg") * DEG, f.get("num_azimuths", int),
                             waveform))
        return out
    f = _Fields(obj, "clusters")
    elevations = f.get("elevations_deg", list)
    n_theta = f.get("num_azimuth_clusters", int)
    if n_theta < 1:
        raise SceneSpecError("clusters.num_azimuth_clusters: must be >= 1")
    extent = f.get("azimuth_extent_deg")
    step = f.get("azimuth_step_deg", float, 360.0 / n_theta)
    offset = f.get("azimuth_offset_deg", float, 0.0)
    n_az = f.get("azimuths_per_cluster", int)
    out = []
    for k, e in enumerate(elevations):
        if isinstance(e, bool) or not isinstance(e, (int, float)):
            raise SceneSpecError(f"clusters.elevations_deg[{k}]: expected float, got {e!r}")
        for j in range(n_theta):
            out.append(_wrap(f"clusters (elevation {e} deg, cluster {j})", make_cluster,
                             e * DEG, (offset + j * step) * DEG, extent * DEG, n_az, waveform))
    return out


def _parse_scatterer(obj, i):
    path = f"scatterers[{i}]"
    f = _Fields(obj, path)
    window = f.get("window_deg", list, None)
    if window is not None:
        if len(window) != 2 or not all(isinstance(w, (int, float)) for w in window):
            raise SceneSpecError(f"{path}.window_deg: expected [start, end] in degrees")
        window = (window[0] * DEG, window[1] * DEG)
    return _wrap(path, PointScatterer, f.get("x_m"), f.get("y_m"), f.get("z_m", float, 0.0),
                 f.get("amplitude", float, 1.0), f.get("phase_deg", float, 0.0) * DEG, window)


def parse_scene(obj) -> Scene:
    top = _Fields(obj, "")
    wf_fields = _Fields(top.get("waveform", dict), "waveform")
    waveform = _wrap("waveform", WaveformConfig, wf_fields.get("f_center_Hz"),
                     wf_fields.get("bandwidth_Hz"), wf_fields.get("num_freqs", int),
                     wf_fields.get("c_m_per_s", float, 299792458.0))
    clusters = _parse_clusters(top.get("clusters", object), waveform)
    scat_list = top.get("scatterers", list)
    if not scat_list:
        raise SceneSpecError("scatterers: at least one scatterer is required")
    scatterers = [_parse_scatterer(s, i) for i, s in enumerate(scat_list)]
    noise = top.get("noise_sigma", float, 0.0)
    seed = top.get("seed", int, 0)
    grid = parse_grid(obj["grid"]) if obj.get("grid") is not None else None
    spec = _wrap("scene", SimulationSpec, scatterers, clusters, noise, seed)
    return Scene(spec, grid)


def loads_scene(text: str) -> Scene:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneSpecError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: "
                             f"{exc.msg}") from None
    return parse_scene(obj)


def load_scene(path) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return loads_scene(fh.read())
