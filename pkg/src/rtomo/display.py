"""dB-scaled 16-bit graymaps and image-quality metrics."""

from __future__ import annotations

import math

import numpy as np

from .geometry import SceneGrid

DEFAULT_FLOOR_DB = -35.0
# stands in for -inf (no artifact energy at all)
ARTIFACT_FLOOR_DB = -300.0


def to_db_levels(image: np.ndarray, floor_db: float = DEFAULT_FLOOR_DB) -> np.ndarray:
    """Map magnitudes to 16-bit levels.

    ``v -> clamp(20*log10(v/v_max), floor_db, 0)`` is mapped linearly so
    that ``floor_db`` becomes 0 and 0 dB becomes 65535 (rounded to
    nearest). An all-zero image maps to all zeros.
    """
    if not floor_db < 0:
        raise ValueError(f"display floor must be negative, got {floor_db!r}")
    image = np.abs(np.asarray(image, dtype=np.float64))
    vmax = image.max(initial=0.0)
    if vmax == 0:
        return np.zeros(image.shape, dtype=np.uint16)
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(image / vmax)
    db = np.clip(db, floor_db, 0.0)
    return np.rint((db - floor_db) / -floor_db * 65535.0).astype(np.uint16)


def encode_pgm(grid: SceneGrid, image: np.ndarray, floor_db: float = DEFAULT_FLOOR_DB) -> bytes:
    """Binary 16-bit PGM (P5, big-endian samples). The first row written is
    the highest ``y`` so the picture shows the usual map orientation."""
    levels = to_db_levels(image, floor_db).reshape(grid.shape)[::-1]
    header = f"P5\n{grid.nx} {grid.ny}\n65535\n".encode("ascii")
    return header + levels.astype(">u2").tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    """Levels of a 16-bit P5 file, as an ``(ny, nx)`` array in file row order."""
    parts = data.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise ValueError("not a P5 graymap")
    nx, ny = (int(v) for v in parts[1].split())
    if int(parts[2]) != 65535:
        raise ValueError("expected a 16-bit graymap")
    return np.frombuffer(parts[3], dtype=">u2", count=nx * ny).reshape(ny, nx).astype(np.uint16)


def ratio_db(num: float, den: float) -> float:
    if den <= 0:
        return -ARTIFACT_FLOOR_DB if num > 0 else 0.0
    if num <= 0:
        return ARTIFACT_FLOOR_DB
    return max(ARTIFACT_FLOOR_DB, 20.0 * math.log10(num / den))


def image_metrics(grid: SceneGrid, image: np.ndarray, truth, radius: float) -> dict:
    """Peak location and artifact-to-signal ratio of a magnitude image.

    The signal level is the largest image value at the pixels nearest to
    the ``truth`` ground positions. The artifact level is the largest value
    at pixels farther than ``radius`` from every truth position.
    """
    image = np.abs(np.asarray(image, dtype=np.float64))
    if image.shape != (grid.size,):
        raise ValueError(f"image has shape {image.shape}, expected ({grid.size},)")
    truth = list(truth)
    if not truth:
        raise ValueError("need at least one ground-truth position")
    xs, ys = grid.coords()
    outside = np.ones(grid.size, dtype=bool)
    for tx, ty in truth:
        outside &= np.hypot(xs - tx, ys - ty) > radius
    signal = max(float(image[grid.nearest_pixel(tx, ty)]) for tx, ty in truth)
    artifact = float(image[outside].max(initial=0.0))
    peak = int(np.argmax(image))
    return {
        "peak_index": peak,
        "peak_xy_m": [float(xs[peak]), float(ys[peak])],
        "peak_value": float(image[peak]),
        "signal": signal,
        "artifact": artifact,
        "artifact_to_signal_db": ratio_db(artifact, signal),
    }
