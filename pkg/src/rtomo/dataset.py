"""RTOMO1 dataset container and raw image dumps.

Dataset layout (little-endian)::

    b"RTOMO1\\0\\0"            8-byte magic
    u32                       header length in bytes
    header                    UTF-8 JSON
    payload                   per cluster, N_i*K (f64 real, f64 imag) pairs

The JSON header carries ``format_version`` (1), an optional imaging
``grid`` and, per cluster, the elevation, the azimuth list, the waveform
and ``num_samples``. Floats are written with ``repr`` precision, so a
read after a write gives back bit-identical geometry.

Raw images use the same framing with magic ``b"RTIMG1\\0\\0"``, a header
holding the grid, and ``L`` little-endian f64 magnitudes in pixel order.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .geometry import ClusterGeometry, MeasurementSet, SceneGrid, WaveformConfig

DATASET_MAGIC = b"RTOMO1\x00\x00"
IMAGE_MAGIC = b"RTIMG1\x00\x00"
FORMAT_VERSION = 1

_C16 = np.dtype("<c16")
_F8 = np.dtype("<f8")


class FormatError(ValueError):
    """File does not follow the container layout (bad magic or header)."""


class TruncatedDataError(FormatError):
    """Payload is shorter than the header declares."""


class VersionMismatchError(FormatError):
    """Header declares an unsupported ``format_version``."""


def _frame(magic: bytes, header: dict) -> bytes:
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    return magic + struct.pack("<I", len(blob)) + blob


def _unframe(data: bytes, magic: bytes) -> tuple[dict, memoryview]:
    if bytes(data[:len(magic)]) != magic[:len(data)] or len(data) == 0:
        raise FormatError(f"bad magic, expected {magic!r}")
    if len(data) < len(magic) + 4:
        raise TruncatedDataError("file ends inside the fixed-size prefix")
    (hlen,) = struct.unpack_from("<I", data, len(magic))
    start = len(magic) + 4
    if len(data) < start + hlen:
        raise TruncatedDataError("file ends inside the JSON header")
    try:
        header = json.loads(bytes(data[start:start + hlen]).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"malformed header: {exc}") from None
    if not isinstance(header, dict):
        raise FormatError("header is not a JSON object")
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"format_version {version!r} not supported "
                                   f"(expected {FORMAT_VERSION})")
    return header, memoryview(data)[start + hlen:]


def _write_atomic(path, data: bytes) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def encode_dataset(sets: list[MeasurementSet], grid: SceneGrid | None = None) -> bytes:
    if not sets:
        raise ValueError("dataset needs at least one cluster")
    header = {
        "format_version": FORMAT_VERSION,
        "grid": grid.to_dict() if grid is not None else None,
        "clusters": [
            {
                "elevation_rad": s.geometry.elevation,
                "azimuths_rad": s.geometry.azimuths.tolist(),
                "waveform": s.geometry.waveform.to_dict(),
                "num_samples": s.geometry.n_samples,
            }
            for s in sets
        ],
    }
    payload = b"".join(s.samples.astype(_C16, copy=False).tobytes() for s in sets)
    return _frame(DATASET_MAGIC, header) + payload


def decode_dataset(data: bytes) -> tuple[list[MeasurementSet], SceneGrid | None]:
    header, payload = _unframe(data, DATASET_MAGIC)
    try:
        grid = SceneGrid.from_dict(header["grid"]) if header.get("grid") else None
        geoms = [
            ClusterGeometry(float(c["elevation_rad"]), np.array(c["azimuths_rad"], dtype=float),
                            WaveformConfig.from_dict(c["waveform"]))
            for c in header["clusters"]
        ]
        counts = [int(c["num_samples"]) for c in header["clusters"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed header: {exc!r}") from None
    if not geoms:
        raise FormatError("dataset declares no clusters")
    for g, n in zip(geoms, counts):
        if g.n_samples != n:
            raise FormatError(f"num_samples {n} disagrees with geometry ({g.n_samples})")
    need = sum(counts) * _C16.itemsize
    if len(payload) < need:
        raise TruncatedDataError(f"payload has {len(payload)} bytes, header declares {need}")
    if len(payload) > need:
        raise FormatError(f"{len(payload) - need} trailing bytes after payload")
    sets, offset = [], 0
    for g, n in zip(geoms, counts):
        samples = np.frombuffer(payload, dtype=_C16, count=n, offset=offset)
        sets.append(MeasurementSet(g, samples.astype(np.complex128)))
        offset += n * _C16.itemsize
    return sets, grid


def write_dataset(path, sets: list[MeasurementSet], grid: SceneGrid | None = None) -> None:
    _write_atomic(path, encode_dataset(sets, grid))


def read_dataset(path) -> list[MeasurementSet]:
    return read_dataset_with_grid(path)[0]


def read_dataset_with_grid(path) -> tuple[list[MeasurementSet], SceneGrid | None]:
    with open(path, "rb") as fh:
        return decode_dataset(fh.read())


def encode_image(grid: SceneGrid, image: np.ndarray) -> bytes:
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (grid.size,):
        raise ValueError(f"image has shape {image.shape}, expected ({grid.size},)")
    header = {"format_version": FORMAT_VERSION, "grid": grid.to_dict()}
    return _frame(IMAGE_MAGIC, header) + image.astype(_F8, copy=False).tobytes()


def decode_image(data: bytes) -> tuple[SceneGrid, np.ndarray]:
    header, payload = _unframe(data, IMAGE_MAGIC)
    try:
        grid = SceneGrid.from_dict(header["grid"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed header: {exc!r}") from None
    need = grid.size * _F8.itemsize
    if len(payload) < need:
        raise TruncatedDataError(f"payload has {len(payload)} bytes, header declares {need}")
    if len(payload) > need:
        raise FormatError(f"{len(payload) - need} trailing bytes after payload")
    return grid, np.frombuffer(payload, dtype=_F8).astype(np.float64)


def write_image(path, grid: SceneGrid, image: np.ndarray) -> None:
    _write_atomic(path, encode_image(grid, image))


def read_image(path) -> tuple[SceneGrid, np.ndarray]:
    with open(path, "rb") as fh:
        return decode_image(fh.read())
