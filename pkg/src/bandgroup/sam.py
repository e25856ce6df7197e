"""Spectral angle between bands and SAM-based resolution of overlapping groups."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .correlation import CorrelationMatrix, matrix_csv
from .hsi_core import BandVector, HsiCube, atomic_write_bytes
from .kdpp import BandSubset

DEFAULT_TAU = 0.9
TIE_TOL = 1e-12


@dataclass(frozen=True)
class SamMatrix:
    rows: tuple  # representative band indices
    values: np.ndarray  # len(rows) x N, NaN where rows[i] == j

    def to_csv(self) -> bytes:
        return matrix_csv(self.values)


@dataclass(frozen=True)
class GroupAssignment:
    groups: dict  # representative -> sorted tuple of members
    tau: float
    overlapping: frozenset

    def label_of(self) -> dict:
        return {b: rep for rep, members in self.groups.items() for b in members}

    def to_json_dict(self, seed=None) -> dict:
        return {
            "tau": self.tau,
            "groups": {str(rep): list(members) for rep, members in sorted(self.groups.items())},
            "overlapping": sorted(self.overlapping),
            "seed": seed,
        }


def _values(v, name):
    arr = np.asarray(v.values if isinstance(v, BandVector) else v, dtype=np.float64).ravel()
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ValueError(f"{name} has zero norm; spectral angle undefined")
    return arr, norm


def _angle(a, na, b, nb):
    # half-angle form of arccos(a.b / |a||b|); keeps full precision near 0 and pi
    x = a * nb
    y = b * na
    return 2.0 * np.arctan2(np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1))


def sam(v1, v2) -> float:
    """Spectral angle in radians, in ``[0, pi]``."""
    a, na = _values(v1, "v1")
    b, nb = _values(v2, "v2")
    if a.shape != b.shape:
        raise ValueError(f"vector lengths differ: {a.size} vs {b.size}")
    return float(_angle(a, na, b, nb))


def _check_reps(reps, n):
    reps = tuple(sorted(int(r) for r in reps))
    if not reps:
        raise ValueError("need at least one representative band")
    if reps[0] < 0 or reps[-1] >= n or len(set(reps)) != len(reps):
        raise ValueError(f"representatives {reps} must be distinct indices in [0, {n})")
    return reps


def sam_matrix(cube: HsiCube, diverse_set) -> SamMatrix:
    """Angle from each representative band to every band, NaN on its own column."""
    rows = tuple(int(r) for r in (diverse_set.indices if isinstance(diverse_set, BandSubset) else diverse_set))
    _check_reps(rows, cube.bands)
    x = cube.unfold()
    norms = np.linalg.norm(x, axis=1)
    out = np.empty((len(rows), cube.bands))
    for i, r in enumerate(rows):
        if norms[r] == 0.0:
            raise ValueError(f"band {r} has zero norm; spectral angle undefined")
        cols = [j for j in range(cube.bands) if j != r]
        zero = [j for j in cols if norms[j] == 0.0]
        if zero:
            raise ValueError(f"band {zero[0]} has zero norm; spectral angle undefined")
        out[i, cols] = _angle(x[r], norms[r], x[cols], norms[cols, None])
        out[i, r] = np.nan
    out.flags.writeable = False
    return SamMatrix(rows, out)


def write_sam_csv(mat: SamMatrix, path) -> None:
    atomic_write_bytes(path, mat.to_csv())


def _check_tau(tau):
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")


def detect_overlaps(corr: CorrelationMatrix, reps, tau: float) -> frozenset:
    """Non-representative bands with ``|R| >= tau`` to at least two representatives."""
    _check_tau(tau)
    reps = _check_reps(reps.indices if isinstance(reps, BandSubset) else reps, corr.n)
    strong = np.abs(corr.entries[:, reps]) >= tau
    counts = strong.sum(axis=1)
    rep_set = set(reps)
    return frozenset(int(b) for b in np.flatnonzero(counts >= 2) if b not in rep_set)


def _pick(scores, reps, best):
    """Index of the best score, ties within TIE_TOL going to the smallest rep."""
    target = best(scores)
    for rep, s in zip(reps, scores):
        if abs(s - target) <= TIE_TOL:
            return rep
    raise AssertionError("unreachable")


def assign_groups(cube: HsiCube, corr: CorrelationMatrix, reps, tau: float = DEFAULT_TAU) -> GroupAssignment:
    """Partition every band into the group of one representative.

    A band overlapping several representatives goes to the one with the lowest
    spectral angle; any other band goes to the representative it is most
    strongly correlated with (by ``|R|``).
    """
    if corr.n != cube.bands:
        raise ValueError(f"correlation matrix covers {corr.n} bands, cube has {cube.bands}")
    reps = _check_reps(reps.indices if isinstance(reps, BandSubset) else reps, cube.bands)
    overlapping = detect_overlaps(corr, reps, tau)
    abs_r = np.abs(corr.entries)
    x = cube.unfold()
    norms = np.linalg.norm(x, axis=1)
    groups = {r: [r] for r in reps}
    rep_set = set(reps)
    for b in range(cube.bands):
        if b in rep_set:
            continue
        if b in overlapping:
            for idx in [b, *reps]:
                if norms[idx] == 0.0:
                    raise ValueError(f"band {idx} has zero norm; spectral angle undefined")
            angles = [float(_angle(x[b], norms[b], x[r], norms[r])) for r in reps]
            owner = _pick(angles, reps, min)
        else:
            owner = _pick([float(abs_r[b, r]) for r in reps], reps, max)
        groups[owner].append(b)
    return GroupAssignment({r: tuple(sorted(m)) for r, m in groups.items()}, float(tau), overlapping)


def write_groups_json(assignment: GroupAssignment, path, seed=None) -> None:
    payload = json.dumps(assignment.to_json_dict(seed), indent=2, sort_keys=False) + "\n"
    atomic_write_bytes(path, payload.encode("utf-8"))
