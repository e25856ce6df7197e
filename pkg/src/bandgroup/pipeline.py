"""End-to-end grouping run: correlation -> kernel -> k-DPP -> SAM -> groups."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import correlation as corrmod
from .hsi_core import FILE_MODE, HsiCube, decode_cube
from .kdpp import RNG_ALGORITHM, BandSubset, KdppSampler, kernel_digest
from .sam import DEFAULT_TAU, GroupAssignment, assign_groups, sam_matrix

log = logging.getLogger(__name__)

FORMAT_VERSION = "bandgroup/1"
DEFAULT_BASIS_RANK = 8
ARTIFACTS = ("report.json", "groups.json", "corr.csv", "corr.pgm", "sam.csv")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass(frozen=True)
class PipelineConfig:
    input: str
    k: int
    outputs: str
    tau: float = DEFAULT_TAU
    seed: int = 0
    basis_rank: int | None = DEFAULT_BASIS_RANK

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.basis_rank is not None and self.basis_rank < 1:
            raise ValueError(f"basis_rank must be >= 1, got {self.basis_rank}")


@dataclass
class GroupingReport:
    config: PipelineConfig
    correlation: dict
    subset: BandSubset
    inclusion_marginals: list
    groups: GroupAssignment
    factorization: dict | None
    kernel_sha256: str
    input_sha256: str | None = None
    timings: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        # timings stay out of the serialized report so reruns are byte-identical
        cfg = asdict(self.config)
        del cfg["input"], cfg["outputs"]
        return {
            "format": FORMAT_VERSION,
            "config": cfg,
            "input_sha256": self.input_sha256,
            "rng": RNG_ALGORITHM,
            "kernel_sha256": self.kernel_sha256,
            "correlation": self.correlation,
            "subset": {
                "indices": list(self.subset.indices),
                "inclusion_probability": {str(i): self.inclusion_marginals[i] for i in self.subset.indices},
            },
            "inclusion_marginals": self.inclusion_marginals,
            "groups": self.groups.to_json_dict(self.config.seed),
            "factorization": self.factorization,
        }


class _Stages:
    def __init__(self):
        self.timings = {}

    def run(self, name, fn, *args):
        t0 = time.perf_counter()
        try:
            out = fn(*args)
        except PipelineError:
            raise
        except (ValueError, ArithmeticError, OSError) as exc:
            raise PipelineError(name, str(exc)) from exc
        self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0
        log.debug("stage %s done after %.3fs", name, self.timings[name])
        return out


def _correlation_summary(corr, kernel_eigs) -> dict:
    off = corr.off_diagonal()
    return {
        "min_off_diagonal": float(off.min()),
        "max_off_diagonal": float(off.max()),
        "min_eigenvalue": float(kernel_eigs.min()),
        "degenerate_bands": sorted(corr.degenerate_bands),
    }


def _factorization_summary(cube: HsiCube, rank: int) -> dict:
    basis, coeffs = corrmod.factorize(cube, rank)
    approx = corrmod.reconstruct(basis, coeffs)
    return {"rank": rank, "relative_error": corrmod.relative_error(cube, approx)}


def compute_report(cube: HsiCube, config: PipelineConfig, input_sha256: str | None = None):
    """Run every stage in memory; returns the report plus the artifact payloads."""
    stages = _Stages()
    if config.k > cube.bands:
        raise PipelineError("config", f"k={config.k} exceeds the cube's {cube.bands} bands")
    corr = stages.run("correlate", corrmod.correlation_matrix, cube)
    pre_eigs = np.linalg.eigvalsh(corr.entries)
    kernel = stages.run("kernel", corrmod.to_kernel, corr)
    sampler = stages.run("sample", KdppSampler, kernel, config.k)
    subset = stages.run("sample", lambda: sampler.draw(np.random.default_rng(config.seed)))
    marginals = stages.run("sample", sampler.inclusion_marginals)
    sams = stages.run("sam", sam_matrix, cube, subset)
    groups = stages.run("group", assign_groups, cube, corr, subset, config.tau)
    fact = None
    if config.basis_rank is not None:
        rank = min(config.basis_rank, cube.bands)
        fact = stages.run("factorize", _factorization_summary, cube, rank)
    report = GroupingReport(
        config=config,
        correlation=_correlation_summary(corr, pre_eigs),
        subset=subset,
        inclusion_marginals=[float(v) for v in marginals],
        groups=groups,
        factorization=fact,
        kernel_sha256=kernel_digest(kernel),
        input_sha256=input_sha256,
        timings=stages.timings,
    )
    artifacts = {
        "report.json": _json_bytes(report.to_json_dict()),
        "groups.json": _json_bytes(groups.to_json_dict(config.seed)),
        "corr.csv": corrmod.matrix_csv(corr.entries),
        "corr.pgm": corrmod.heatmap_bytes(corr),
        "sam.csv": sams.to_csv(),
    }
    return report, artifacts


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2) + "\n").encode("utf-8")


def write_artifacts(outdir, artifacts: dict) -> None:
    """Write all artifacts to temp names, then rename; nothing is left on failure."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    staged, placed = [], []
    try:
        for name, payload in artifacts.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=outdir)
            staged.append((tmp, outdir / name))
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.chmod(tmp, FILE_MODE)
        for tmp, final in staged:
            os.replace(tmp, final)
            placed.append(final)
    except BaseException:
        for p in [tmp for tmp, _ in staged] + placed:
            try:
                os.unlink(p)
            except FileNotFoundError:
                pass
        raise


def run_group_pipeline(config: PipelineConfig) -> GroupingReport:
    stages = _Stages()
    raw = stages.run("load", lambda: Path(config.input).read_bytes())
    cube = stages.run("load", decode_cube, raw, str(config.input))
    report, artifacts = compute_report(cube, config, hashlib.sha256(raw).hexdigest())
    report.timings = {"load": stages.timings["load"], **report.timings}
    try:
        write_artifacts(config.outputs, artifacts)
    except OSError as exc:
        raise PipelineError("write", str(exc)) from exc
    return report
