"""Command line entry point.

Every subcommand reads a JSON config (flat keys of
:class:`~graphsampling.bench.ExperimentConfig`) and writes CSV plus a
JSON-lines metadata file under ``--out``. Failures exit nonzero with a JSON
object on stderr.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from .errors import GraphSamplingError


def _config(args):
    cfg = bench.ExperimentConfig.from_json(args.config) if args.config else bench.ExperimentConfig()
    if args.seed is not None:
        cfg.seed_base = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    return cfg


def cmd_sample(args):
    cfg = _config(args)
    method, model, n, s = cfg.methods[0], cfg.graph_model[0], cfg.n_list[0], cfg.s_list[0]
    inst = bench._make_instance(cfg, 0, model, n, 0, method in bench.NEEDS_ORACLE)
    res, _ = bench.run_method(method, inst, s, cfg, bench._method_seed(cfg, 0, inst.n, 0, s, method))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    res.to_csv(out / "samples.csv")
    res.append_metadata(out / "samples_meta.jsonl")
    return out / "samples.csv"


def cmd_snr_sweep(args):
    cfg = _config(args)
    report = bench.run_snr_sweep(cfg, threads=args.threads)
    if args.external:
        report.merge_external(bench.ingest_external_baseline(args.external))
    return report.write(cfg.output_dir, "snr_sweep")


def cmd_timing_sweep(args):
    cfg = _config(args)
    if args.threads > 1:
        logging.getLogger(__name__).warning("timing sweeps run serially; ignoring --threads")
    return bench.run_timing_sweep(cfg).write(cfg.output_dir, "timing_sweep")


def cmd_classify(args):
    cfg = _config(args)
    rows = bench.run_classification(cfg, points_csv=args.points)
    path = Path(cfg.output_dir) / "classification.csv"
    bench.write_rows(path, rows, bench.CLASSIFICATION_COLUMNS)
    return path


def cmd_diag_energy(args):
    cfg = _config(args)
    rows = bench.run_diag_energy(cfg)
    path = Path(cfg.output_dir) / "diag_energy.csv"
    bench.write_rows(path, rows, bench.DIAG_COLUMNS)
    return path


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, help="seed base (overrides seed_base)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for trials")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="graphsampling", description="Graph signal sampling experiments")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common], help="one graph, one method").set_defaults(func=cmd_sample)
    sp = sub.add_parser("snr-sweep", parents=[common], help="SNR against sample count")
    sp.add_argument("--external", help="CSV of external baseline rows to merge")
    sp.set_defaults(func=cmd_snr_sweep)
    sub.add_parser("timing-sweep", parents=[common], help="round-robin timing").set_defaults(func=cmd_timing_sweep)
    cp = sub.add_parser("classify", parents=[common], help="one-vs-all classification")
    cp.add_argument("--points", required=True, help="CSV of coordinates with a trailing label column")
    cp.set_defaults(func=cmd_classify)
    sub.add_parser("diag-energy", parents=[common], help="Gram diagonal energy of AVM prefixes").set_defaults(
        func=cmd_diag_energy)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        path = args.func(args)
    except (GraphSamplingError, OSError) as exc:
        err = {"error": getattr(exc, "code", "io-error"), "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
