"""Hyperspectral cube model, HSIC file I/O, synthetic data and box downsampling.

The cube is stored band-sequential: ``data[b, y, x]`` with ``y`` in
``[0, height)`` and ``x`` in ``[0, width)``, so each band plane flattens in
row-major pixel order.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"HSIC"
HEADER = struct.Struct("<4sIII")
PAYLOAD_DTYPE = np.dtype("<f4")
FILE_MODE = 0o644


class CubeFormatError(ValueError):
    """Raised when an HSIC file cannot be decoded."""


@dataclass(frozen=True)
class HsiCube:
    """A W x H x N radiance cube held as an ``(N, H, W)`` float64 array."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 3:
            raise ValueError(f"cube data must be 3-D (bands, height, width), got shape {arr.shape}")
        n, h, w = arr.shape
        if w < 1 or h < 1:
            raise ValueError(f"cube needs width >= 1 and height >= 1, got {w}x{h}")
        if n < 2:
            raise ValueError(f"cube needs at least 2 bands, got {n}")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise ValueError(f"non-finite value at band {bad[0]}, row {bad[1]}, col {bad[2]}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    def unfold(self) -> np.ndarray:
        """N x (W*H) matrix, one band per row."""
        return self.data.reshape(self.bands, self.n_pixels)

    @classmethod
    def from_unfolded(cls, mat: np.ndarray, width: int, height: int) -> "HsiCube":
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[1] != width * height:
            raise ValueError(f"unfolded matrix of shape {mat.shape} does not fit a {width}x{height} plane")
        return cls(mat.reshape(mat.shape[0], height, width))

    def __eq__(self, other):
        if not isinstance(other, HsiCube):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None


@dataclass(frozen=True)
class BandVector:
    band_index: int
    values: np.ndarray

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class DownsampleOperator:
    """Non-overlapping ``factor x factor`` box average."""

    factor: int

    def __post_init__(self):
        if int(self.factor) != self.factor or self.factor < 1:
            raise ValueError(f"downsample factor must be an integer >= 1, got {self.factor!r}")


@dataclass(frozen=True)
class SyntheticSpec:
    width: int
    height: int
    cluster_sizes: Sequence[int]
    intra_cluster_corr: float = 0.95
    noise_sigma: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cluster_sizes", tuple(int(c) for c in self.cluster_sizes))
        if not self.cluster_sizes or sum(self.cluster_sizes) < 2:
            raise ValueError("cluster_sizes must be non-empty and sum to at least 2 bands")
        if any(c < 1 for c in self.cluster_sizes):
            raise ValueError(f"every cluster needs at least one band, got {self.cluster_sizes}")
        if not 0.0 < self.intra_cluster_corr <= 1.0:
            raise ValueError(f"intra_cluster_corr must lie in (0, 1], got {self.intra_cluster_corr}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"width and height must be >= 1, got {self.width}x{self.height}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def labels(self) -> list[int]:
        """Planted cluster id of every band, in band order."""
        return [c for c, size in enumerate(self.cluster_sizes) for _ in range(size)]

    def planted_groups(self) -> list[list[int]]:
        out, start = [], 0
        for size in self.cluster_sizes:
            out.append(list(range(start, start + size)))
            start += size
        return out


def _encode(cube: HsiCube) -> bytes:
    payload = cube.data.astype(PAYLOAD_DTYPE)
    if not np.all(np.isfinite(payload)):
        raise ValueError("cube values overflow 32-bit float storage")
    return HEADER.pack(MAGIC, cube.width, cube.height, cube.bands) + payload.tobytes(order="C")


def decode_cube(raw: bytes, source: str = "<bytes>") -> HsiCube:
    if len(raw) < HEADER.size:
        raise CubeFormatError(f"{source}: truncated header, {len(raw)} bytes at offset 0 (need {HEADER.size})")
    magic, w, h, n = HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CubeFormatError(f"{source}: bad magic {magic!r} at offset 0, expected {MAGIC.decode()!r}")
    if w < 1 or h < 1 or n < 2:
        raise CubeFormatError(f"{source}: invalid dimensions W={w} H={h} N={n} at offset 4")
    expected = w * h * n * PAYLOAD_DTYPE.itemsize
    payload = raw[HEADER.size:]
    if len(payload) < expected:
        raise CubeFormatError(
            f"{source}: truncated payload, file ends at byte offset {len(raw)} but header "
            f"W={w} H={h} N={n} requires {HEADER.size + expected} bytes"
        )
    if len(payload) > expected:
        raise CubeFormatError(
            f"{source}: {len(payload) - expected} trailing bytes after payload at offset {HEADER.size + expected}"
        )
    values = np.frombuffer(payload, dtype=PAYLOAD_DTYPE)
    finite = np.isfinite(values)
    if not finite.all():
        first = int(np.argmin(finite))
        raise CubeFormatError(
            f"{source}: non-finite value {values[first]} at byte offset {HEADER.size + first * PAYLOAD_DTYPE.itemsize}"
        )
    return HsiCube(values.astype(np.float64).reshape(n, h, w))


def load_cube(path) -> HsiCube:
    path = Path(path)
    raw = path.read_bytes()
    return decode_cube(raw, str(path))


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via a temp file in the target directory, then rename into place."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.chmod(tmp, FILE_MODE)
        os.replace(tmp, path)
    except BaseException as exc:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        if isinstance(exc, OSError):
            raise OSError(f"cannot write {path}: {exc}") from exc
        raise


def save_cube(cube: HsiCube, path) -> None:
    atomic_write_bytes(path, _encode(cube))


def band_vector(cube: HsiCube, i: int) -> BandVector:
    if not 0 <= i < cube.bands:
        raise IndexError(f"band index {i} out of range [0, {cube.bands})")
    return BandVector(int(i), cube.data[i].reshape(-1))


def downsample(cube: HsiCube, op: DownsampleOperator) -> HsiCube:
    f = op.factor
    if cube.width % f or cube.height % f:
        raise ValueError(
            f"downsample factor {f} must divide both width {cube.width} and height {cube.height}"
        )
    n, h, w = cube.data.shape
    blocks = cube.data.reshape(n, h // f, f, w // f, f)
    return HsiCube(blocks.mean(axis=(2, 4)))


def gen_synthetic(spec: SyntheticSpec) -> HsiCube:
    """Planted-cluster cube.

    Each band of cluster ``c`` is ``rho * latent_c + sqrt(1 - rho^2) * own + sigma * noise``
    with all planes i.i.d. standard normal, so the expected intra-cluster
    correlation is ``rho^2 / (1 + sigma^2)`` and cross-cluster correlation is 0.
    Values are rounded to float32 so the cube survives an HSIC round trip unchanged.
    """
    rng = np.random.default_rng(spec.seed)
    rho = float(spec.intra_cluster_corr)
    own_scale = np.sqrt(max(0.0, 1.0 - rho * rho))
    shape = (spec.height, spec.width)
    planes = []
    for size in spec.cluster_sizes:
        latent = rng.standard_normal(shape)
        for _ in range(size):
            own = rng.standard_normal(shape)
            noise = rng.standard_normal(shape)
            planes.append(rho * latent + own_scale * own + spec.noise_sigma * noise)
    data = np.stack(planes).astype(np.float32).astype(np.float64)
    return HsiCube(data)
