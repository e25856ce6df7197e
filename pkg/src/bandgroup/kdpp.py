"""Exact k-DPP sampling over a band kernel.

A draw has two phases. First a set of ``k`` eigenvectors is chosen, visiting
eigenvalues from the last to the first and keeping eigenvector ``n`` with
probability ``lam_n * e_{r-1}^{n-1} / e_r^n``, where ``r`` is the number still
to pick and ``e_k^n`` is the k-th elementary symmetric polynomial of the first
``n`` eigenvalues. Then items are drawn from the elementary DPP spanned by the
chosen eigenvectors, one coordinate at a time.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``; the identifier
:data:`RNG_ALGORITHM` is recorded next to every serialized draw.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .correlation import DppKernel

RNG_ALGORITHM = "numpy.PCG64"
ASYMMETRY_TOL = 1e-10
NEGATIVE_EIG_TOL = 1e-8
ZERO_EIG_TOL = 1e-10
DEGENERATE_PROB = 1e-12
ENUMERATION_LIMIT = 20


class KernelRankError(ValueError):
    """The kernel has fewer than k positive eigenvalues, so no k-subset has mass."""


class SamplingDegeneracyError(ArithmeticError):
    """Item sampling ran out of probability mass (ill-conditioned eigenvectors)."""


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray  # ascending, clamped to >= 0
    eigenvectors: np.ndarray  # columns

    @property
    def n(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class SymmetricPolyTable:
    """``table[k, n] = e_k(lam_1 .. lam_n)``."""

    table: np.ndarray

    @property
    def max_order(self) -> int:
        return self.table.shape[0] - 1

    def e(self, k: int, n: int | None = None) -> float:
        return float(self.table[k, self.table.shape[1] - 1 if n is None else n])


@dataclass(frozen=True)
class BandSubset:
    indices: tuple

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise ValueError(f"band subset has repeated indices: {idx}")
        if idx and idx[0] < 0:
            raise ValueError(f"band subset has negative index: {idx}")
        object.__setattr__(self, "indices", idx)

    @property
    def k(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class SubsetPmf:
    probs: dict  # sorted index tuple -> probability
    normalizer: float
    esym_normalizer: float

    def __getitem__(self, subset):
        return self.probs[tuple(sorted(subset))]


def _as_matrix(kernel) -> np.ndarray:
    return np.asarray(kernel.entries if isinstance(kernel, DppKernel) else kernel, dtype=np.float64)


def kernel_digest(kernel) -> str:
    mat = np.ascontiguousarray(_as_matrix(kernel), dtype="<f8")
    h = hashlib.sha256()
    h.update(np.asarray(mat.shape, dtype="<u8").tobytes())
    h.update(mat.tobytes())
    return h.hexdigest()


def eigendecompose(kernel) -> EigenDecomposition:
    mat = _as_matrix(kernel)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"kernel must be square, got shape {mat.shape}")
    asym = float(np.max(np.abs(mat - mat.T))) if mat.size else 0.0
    if asym > ASYMMETRY_TOL:
        raise ValueError(f"kernel is not symmetric: max |L - L^T| = {asym:.3g}")
    lam, vec = np.linalg.eigh(mat)
    if lam.size and lam[0] < -NEGATIVE_EIG_TOL:
        raise ValueError(f"kernel is not PSD: min eigenvalue {lam[0]:.3g} < -{NEGATIVE_EIG_TOL:g}")
    lam = np.where(lam < ZERO_EIG_TOL, 0.0, lam)
    return EigenDecomposition(lam, vec)


def elementary_symmetric(eigenvalues, max_order: int) -> SymmetricPolyTable:
    lam = np.asarray(eigenvalues, dtype=np.float64)
    n = lam.size
    if max_order > n:
        raise ValueError(f"max order {max_order} exceeds the number of eigenvalues {n}")
    if max_order < 0:
        raise ValueError(f"max order must be >= 0, got {max_order}")
    if np.any(lam < 0):
        raise ValueError("elementary symmetric polynomials need non-negative eigenvalues")
    e = np.zeros((max_order + 1, n + 1))
    e[0, :] = 1.0
    for j in range(1, n + 1):
        e[1:, j] = e[1:, j - 1] + lam[j - 1] * e[:-1, j - 1]
    return SymmetricPolyTable(e)


def sample_eigenvector_set(eig: EigenDecomposition, k: int, rng, table=None) -> list[int]:
    """Choose ``k`` eigenvector indices; see the module docstring for the rule."""
    n = eig.n
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    if table is None:
        table = elementary_symmetric(eig.eigenvalues, k)
    e = table.table
    if k > 0 and e[k, n] <= 0.0:
        raise KernelRankError(
            f"kernel rank below k={k}: only {int(np.count_nonzero(eig.eigenvalues))} positive eigenvalues"
        )
    lam = eig.eigenvalues
    chosen = []
    r = k
    for m in range(n, 0, -1):
        if r == 0:
            break
        if r == m:
            # e_r^{r-1} = 0 forces every remaining eigenvector in
            chosen.extend(range(m - 1, -1, -1))
            break
        p = lam[m - 1] * e[r - 1, m - 1] / e[r, m]
        if rng.random() < p:
            chosen.append(m - 1)
            r -= 1
    return sorted(chosen)


def sample_items(eig: EigenDecomposition, chosen, rng) -> BandSubset:
    """Draw one item per chosen eigenvector from the elementary DPP they span."""
    chosen = list(chosen)
    if not chosen:
        raise ValueError("need at least one eigenvector to sample items")
    if min(chosen) < 0 or max(chosen) >= eig.n:
        raise ValueError(f"eigenvector indices {chosen} out of range [0, {eig.n})")
    v = eig.eigenvectors[:, chosen]
    items = []
    while v.shape[1] > 0:
        probs = np.einsum("ij,ij->i", v, v) / v.shape[1]
        if probs.max() < DEGENERATE_PROB:
            raise SamplingDegeneracyError(
                f"all item probabilities below {DEGENERATE_PROB:g} with {v.shape[1]} eigenvectors left"
            )
        cdf = np.cumsum(probs)
        i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        i = min(i, len(probs) - 1)
        items.append(i)
        if v.shape[1] == 1:
            break
        # project the span onto {x : x_i = 0} and drop one dimension
        j = int(np.argmax(np.abs(v[i])))
        pivot = v[:, j]
        v = np.delete(v, j, axis=1)
        v = v - np.outer(pivot, v[i] / pivot[i])
        v, _ = np.linalg.qr(v)
    return BandSubset(items)


class KdppSampler:
    """Reusable sampler: decomposes the kernel once, then draws many subsets."""

    def __init__(self, kernel, k: int):
        self.kernel = _as_matrix(kernel)
        n = self.kernel.shape[0]
        if not 1 <= k <= n:
            raise ValueError(f"k must lie in [1, {n}], got {k}")
        self.k = k
        self.eig = eigendecompose(self.kernel)
        self.table = elementary_symmetric(self.eig.eigenvalues, k)
        if self.table.e(k) <= 0.0:
            raise KernelRankError(
                f"kernel rank below k={k}: only {int(np.count_nonzero(self.eig.eigenvalues))} positive eigenvalues"
            )

    def draw(self, rng) -> BandSubset:
        chosen = sample_eigenvector_set(self.eig, self.k, rng, self.table)
        return sample_items(self.eig, chosen, rng)

    def draws(self, count: int, seed: int) -> Counter:
        rng = np.random.default_rng(seed)
        return Counter(self.draw(rng).indices for _ in range(count))

    def inclusion_marginals(self) -> np.ndarray:
        """P(i in Y) for every item i, from the eigendecomposition."""
        lam = self.eig.eigenvalues
        n, k = len(lam), self.k
        weights = np.empty(n)
        for m in range(n):
            rest = np.delete(lam, m)
            weights[m] = lam[m] * elementary_symmetric(rest, k - 1).e(k - 1) / self.table.e(k)
        return (self.eig.eigenvectors ** 2) @ weights


def sample_kdpp(kernel, k: int, seed: int) -> BandSubset:
    return KdppSampler(kernel, k).draw(np.random.default_rng(seed))


def exact_kdpp_pmf(kernel, k: int) -> SubsetPmf:
    """Enumerate ``det(L_Y) / sum_{|Y'|=k} det(L_Y')`` over every k-subset.

    The normalizer is cross-checked against ``e_k`` of the eigenvalues. (The
    unconstrained DPP would instead normalize by ``det(L + I)``, the sum of
    ``det(L_Y)`` over subsets of every size.)
    """
    mat = _as_matrix(kernel)
    n = mat.shape[0]
    if n > ENUMERATION_LIMIT:
        raise ValueError(f"exact enumeration limited to N <= {ENUMERATION_LIMIT}, got N={n}")
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    dets = {}
    for subset in itertools.combinations(range(n), k):
        idx = list(subset)
        d = float(np.linalg.det(mat[np.ix_(idx, idx)])) if k else 1.0
        dets[subset] = max(d, 0.0)
    total = math.fsum(dets.values())
    esym = elementary_symmetric(eigendecompose(mat).eigenvalues, k).e(k)
    if total <= 0.0:
        raise KernelRankError(f"every {k}-subset has zero determinant")
    if abs(total - esym) > 1e-8 * max(total, esym) + 1e-12:
        raise ArithmeticError(
            f"subset-determinant sum {total!r} disagrees with e_k(lambda) = {esym!r}"
        )
    return SubsetPmf({s: d / total for s, d in dets.items()}, total, esym)


def total_variation(pmf: SubsetPmf, counts: Counter) -> float:
    n = sum(counts.values())
    keys = set(pmf.probs) | set(counts)
    return 0.5 * sum(abs(pmf.probs.get(s, 0.0) - counts.get(s, 0) / n) for s in keys)
