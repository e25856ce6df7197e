"""Command line entry point.

Exit status: 0 success, 1 usage error, 2 data or computation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import correlation as corrmod
from .hsi_core import DownsampleOperator, SyntheticSpec, atomic_write_bytes, downsample, gen_synthetic, load_cube, save_cube
from .kdpp import RNG_ALGORITHM, KdppSampler, exact_kdpp_pmf, kernel_digest
from .pipeline import DEFAULT_BASIS_RANK, PipelineConfig, PipelineError, run_group_pipeline
from .sam import DEFAULT_TAU, sam_matrix, write_sam_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {value}")
    return value


def _unit_interval(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _json_out(obj, path):
    payload = (json.dumps(obj, indent=2) + "\n").encode("utf-8")
    if path is None:
        sys.stdout.write(payload.decode("utf-8"))
    else:
        atomic_write_bytes(path, payload)


def _kernel_for(path):
    cube = load_cube(path)
    return cube, corrmod.to_kernel(corrmod.correlation_matrix(cube))


def cmd_gen(args):
    spec = SyntheticSpec(
        width=args.width, height=args.height, cluster_sizes=args.clusters,
        intra_cluster_corr=args.rho, noise_sigma=args.noise, seed=args.seed,
    )
    save_cube(gen_synthetic(spec), args.out)


def cmd_downsample(args):
    save_cube(downsample(load_cube(args.input), DownsampleOperator(args.factor)), args.out)


def cmd_correlate(args):
    corr = corrmod.correlation_matrix(load_cube(args.input))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corrmod.write_correlation_csv(corr, out / "corr.csv")
    corrmod.heatmap(corr, out / "corr.pgm")


def cmd_sample(args):
    _, kernel = _kernel_for(args.input)
    sampler = KdppSampler(kernel, args.k)
    meta = {"k": args.k, "seed": args.seed, "rng": RNG_ALGORITHM, "kernel_sha256": kernel_digest(kernel)}
    if args.draws is None:
        subset = sampler.draw(np.random.default_rng(args.seed))
        _json_out({"indices": list(subset.indices), **meta}, args.out)
    else:
        counts = sampler.draws(args.draws, args.seed)
        rows = [{"subset": list(s), "count": c} for s, c in sorted(counts.items())]
        _json_out({**meta, "draws": args.draws, "counts": rows}, args.out)


def cmd_group(args):
    config = PipelineConfig(
        input=args.input, k=args.k, outputs=args.out, tau=args.tau,
        seed=args.seed, basis_rank=args.basis_rank,
    )
    report = run_group_pipeline(config)
    for stage, secs in report.timings.items():
        logging.getLogger("bandgroup").info("%-10s %.3fs", stage, secs)


def cmd_sam(args):
    cube = load_cube(args.input)
    if args.subset is not None:
        reps = json.loads(Path(args.subset).read_text())["indices"]
    else:
        reps = args.reps
    write_sam_csv(sam_matrix(cube, reps), args.out)


def cmd_pmf(args):
    _, kernel = _kernel_for(args.input)
    pmf = exact_kdpp_pmf(kernel, args.k)
    rows = [{"subset": list(s), "probability": p} for s, p in sorted(pmf.probs.items())]
    _json_out({
        "k": args.k, "n": kernel.n, "kernel_sha256": kernel_digest(kernel),
        "normalizer": pmf.normalizer, "esym_normalizer": pmf.esym_normalizer, "pmf": rows,
    }, args.out)


def build_parser():
    p = _Parser(prog="bandgroup", description="Diverse hyperspectral band grouping with k-DPP sampling and SAM.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic planted-cluster cube")
    g.add_argument("--width", type=_positive_int, default=32)
    g.add_argument("--height", type=_positive_int, default=32)
    g.add_argument("--clusters", type=_int_list, required=True, help="band counts per cluster, e.g. 3,3")
    g.add_argument("--rho", type=float, default=0.95)
    g.add_argument("--noise", type=float, default=0.01)
    g.add_argument("--seed", type=_seed, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    d = sub.add_parser("downsample", help="box-average a cube by an integer factor")
    d.add_argument("--input", required=True)
    d.add_argument("--factor", type=_positive_int, required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_downsample)

    c = sub.add_parser("correlate", help="write corr.csv and corr.pgm")
    c.add_argument("--input", required=True)
    c.add_argument("--out", required=True, help="output directory")
    c.set_defaults(func=cmd_correlate)

    s = sub.add_parser("sample", help="draw a k-DPP band subset")
    s.add_argument("--input", required=True)
    s.add_argument("--k", type=_positive_int, required=True)
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--draws", type=_positive_int, default=None, help="tally this many draws instead of one")
    s.add_argument("--out", default=None, help="JSON file (default stdout)")
    s.set_defaults(func=cmd_sample)

    gr = sub.add_parser("group", help="run the full grouping pipeline")
    gr.add_argument("--input", required=True)
    gr.add_argument("--k", type=_positive_int, required=True)
    gr.add_argument("--seed", type=_seed, default=0)
    gr.add_argument("--tau", type=_unit_interval, default=DEFAULT_TAU)
    gr.add_argument("--basis-rank", type=_positive_int, default=DEFAULT_BASIS_RANK)
    gr.add_argument("--out", required=True, help="output directory")
    gr.set_defaults(func=cmd_group)

    sm = sub.add_parser("sam", help="write the representative x band SAM matrix")
    sm.add_argument("--input", required=True)
    src = sm.add_mutually_exclusive_group(required=True)
    src.add_argument("--subset", help="subset JSON written by `sample`")
    src.add_argument("--reps", type=_int_list, help="comma-separated band indices")
    sm.add_argument("--out", required=True)
    sm.set_defaults(func=cmd_sam)

    pm = sub.add_parser("pmf", help="exact k-DPP distribution by enumeration (N <= 20)")
    pm.add_argument("--input", required=True)
    pm.add_argument("--k", type=_positive_int, required=True)
    pm.add_argument("--out", default=None)
    pm.set_defaults(func=cmd_pmf)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except PipelineError as exc:
        print(f"bandgroup {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, ArithmeticError, OSError, KeyError) as exc:
        print(f"bandgroup {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
