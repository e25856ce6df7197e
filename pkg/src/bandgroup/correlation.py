"""Inter-band correlation, the PSD kernel built from it, and the Z = B M factorization."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .hsi_core import HsiCube, atomic_write_bytes

# a band whose std is below this fraction of its peak magnitude counts as constant
DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class CorrelationMatrix:
    entries: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    degenerate_bands: frozenset = field(default_factory=frozenset)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def off_diagonal(self) -> np.ndarray:
        return self.entries[~np.eye(self.n, dtype=bool)]


@dataclass(frozen=True)
class DppKernel:
    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SpectralBasis:
    basis: np.ndarray

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class CoefficientMatrix:
    coeffs: np.ndarray
    width: int
    height: int


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def correlation_matrix(cube: HsiCube) -> CorrelationMatrix:
    """Pearson correlation between every pair of bands.

    Zero-variance bands are flagged; their row and column are 0 except for a
    unit diagonal.
    """
    x = cube.unfold()
    n, p = x.shape
    means = x.mean(axis=1)
    centered = x - means[:, None]
    stds = np.sqrt(np.einsum("ij,ij->i", centered, centered) / p)
    scale = np.abs(x).max(axis=1)
    degenerate = stds <= DEGENERATE_RTOL * np.maximum(scale, np.finfo(float).tiny)

    safe = np.where(degenerate, 1.0, stds)
    z = centered / safe[:, None]
    z[degenerate] = 0.0
    r = (z @ z.T) / p
    iu = np.triu_indices(n, 1)
    upper = np.clip(r[iu], -1.0, 1.0)
    r = np.zeros((n, n))
    r[iu] = upper
    r = r + r.T
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(
        _readonly(r), _readonly(means), _readonly(stds),
        frozenset(int(i) for i in np.flatnonzero(degenerate)),
    )


def to_kernel(corr: CorrelationMatrix) -> DppKernel:
    """Clamp negative eigenvalues of R to zero.

    R is returned unchanged when it is already PSD.
    """
    r = corr.entries
    lam, vec = np.linalg.eigh(r)
    if lam.min() >= 0.0:
        return DppKernel(_readonly(r.copy()))
    lam = np.maximum(lam, 0.0)
    k = (vec * lam) @ vec.T
    return DppKernel(_readonly((k + k.T) / 2.0))


def factorize(cube: HsiCube, rank: int) -> tuple[SpectralBasis, CoefficientMatrix]:
    """Rank-``rank`` truncated SVD of the band x pixel unfolding."""
    if not 1 <= rank <= cube.bands:
        raise ValueError(f"rank must lie in [1, {cube.bands}], got {rank}")
    x = cube.unfold()
    u, _, _ = np.linalg.svd(x, full_matrices=False)
    b = u[:, :rank]
    m = b.T @ x
    return SpectralBasis(_readonly(b)), CoefficientMatrix(_readonly(m), cube.width, cube.height)


def reconstruct(basis: SpectralBasis, coeffs: CoefficientMatrix) -> HsiCube:
    b, m = basis.basis, coeffs.coeffs
    if b.shape[1] != m.shape[0]:
        raise ValueError(f"basis rank {b.shape[1]} does not match coefficient rows {m.shape[0]}")
    if m.shape[1] != coeffs.width * coeffs.height:
        raise ValueError(
            f"coefficient columns {m.shape[1]} do not match {coeffs.width}x{coeffs.height} pixels"
        )
    return HsiCube.from_unfolded(b @ m, coeffs.width, coeffs.height)


def relative_error(cube: HsiCube, approx: HsiCube) -> float:
    ref = np.linalg.norm(cube.data)
    return float(np.linalg.norm(cube.data - approx.data) / ref) if ref > 0 else 0.0


def heatmap_pixels(corr: CorrelationMatrix) -> np.ndarray:
    # half-up rounding: R = 0 maps to 128
    return np.floor(255.0 * (corr.entries + 1.0) / 2.0 + 0.5).clip(0, 255).astype(np.uint8)


def heatmap_bytes(corr: CorrelationMatrix) -> bytes:
    n = corr.n
    return f"P5\n{n} {n}\n255\n".encode("ascii") + heatmap_pixels(corr).tobytes()


def heatmap(corr: CorrelationMatrix, path) -> None:
    """Write R as an 8-bit binary PGM, -1 black and +1 white."""
    atomic_write_bytes(path, heatmap_bytes(corr))


def matrix_csv(mat: np.ndarray) -> bytes:
    buf = io.StringIO()
    for row in np.asarray(mat):
        buf.write(",".join("nan" if math.isnan(v) else "%.17g" % v for v in row))
        buf.write("\n")
    return buf.getvalue().encode("ascii")


def write_correlation_csv(corr: CorrelationMatrix, path) -> None:
    atomic_write_bytes(path, matrix_csv(corr.entries))


def read_matrix_csv(path) -> np.ndarray:
    rows = [line.split(",") for line in open(path).read().splitlines() if line]
    return np.array([[float(v) for v in row] for row in rows])
