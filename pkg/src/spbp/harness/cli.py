"""Command line entry point: ``spbp <subcommand>``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from ..gnn import GcnnModel, OptimizerConfig
from .config import load_config
from .experiments import FIGURES, ResultTable, capacity_sweep, emit_plot_data, run_matrix
from .instances import TrainingSettings, instance_keys, make_instance, make_network, save_instance
from .mobility import run_mobility
from .training import loss_progress, train_model
from .verify import CHECKS, run_checks

log = logging.getLogger("spbp")

DEFAULT_LAMBDAS = (1.0, 2.0, 4.0, 7.0, 10.0)
TRAINING_SCALES = {
    "desk": TrainingSettings(),
    "paper": TrainingSettings(sizes=(20, 30, 40, 50, 60), count=5000, networks_per_size=20),
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML experiment file")
    p.add_argument("--section", help="section of the TOML file to use")
    p.add_argument("--seed", type=int, help="root seed")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", help="output directory")
    p.add_argument("--model", help="GCNN model file (JSON)")
    p.add_argument("--scale", choices=("desk", "paper"), help="instance-count preset")
    p.add_argument("-v", "--verbose", action="store_true")


def _cfg(args, **extra):
    return load_config(args.config, args.section, args.scale, seed=args.seed, model=args.model,
                       out=args.out, **extra)


def _progress(k, total):
    if k == total or k % max(total // 20, 1) == 0:
        print(f"  {k}/{total} instances", file=sys.stderr, flush=True)


def _model(path):
    return GcnnModel.load(path) if path else None


def cmd_generate(args) -> int:
    cfg = _cfg(args)
    out = cfg.out
    count = 0
    for size in cfg.sizes:
        for key in instance_keys(cfg, size):
            inst = make_instance(cfg, key, network=make_network(cfg, size, key.topology))
            save_instance(inst, os.path.join(out, "instances", key.label))
            count += 1
    print(f"wrote {count} instances to {os.path.join(out, 'instances')}")
    return 0


def cmd_train(args) -> int:
    settings = TRAINING_SCALES[args.scale or "desk"]
    if args.seed is not None:
        settings = TrainingSettings(**{**settings.__dict__, "seed": args.seed})
    if args.instances:
        settings = TrainingSettings(**{**settings.__dict__, "count": args.instances})
    epochs = args.epochs or (5 if args.scale == "paper" else 1)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    model_path = args.model or os.path.join(out, "gcnn.json")
    model, history, losses = train_model(settings, epochs, OptimizerConfig(),
                                         log_path=os.path.join(out, "training_log.csv"))
    model.save(model_path)
    window = min(50, len(losses) // 2)
    ok = window > 0
    if ok:
        first, last = loss_progress(losses, window)
        ok = last < first
        print(f"median loss first {window}: {first:.5f}  last {window}: {last:.5f}")
    print(f"model saved to {model_path}; {len(losses)} updates, "
          f"{sum('error' in h for h in history)} failed instances")
    return 0 if ok else 1


def _finish_table(table: ResultTable, out: str, name: str) -> int:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, f"{name}_summary.json"), "w") as fh:
        json.dump(table.summary(), fh, indent=1)
    print(table.format())
    return 0 if not table.failures and table.ok_rows() else 1


def cmd_run(args) -> int:
    kw = {}
    if args.algorithms:
        kw["algorithms"] = tuple(args.algorithms.split(","))
    cfg = _cfg(args, **kw)
    os.makedirs(cfg.out, exist_ok=True)
    table = run_matrix(cfg, _model(cfg.model), args.workers,
                       os.path.join(cfg.out, f"{cfg.name}.jsonl"), _progress)
    return _finish_table(table, cfg.out, cfg.name)


def cmd_capacity(args) -> int:
    cfg = _cfg(args)
    lambdas = cfg.sweep_values if cfg.sweep == "lambda" else DEFAULT_LAMBDAS
    os.makedirs(cfg.out, exist_ok=True)
    res = capacity_sweep(cfg, lambdas, _model(cfg.model), args.workers,
                         os.path.join(cfg.out, f"{cfg.name}-capacity.jsonl"), _progress)
    for alg, (lam, cap) in res.peaks.items():
        print(f"{alg:<24} peak throughput {cap:.2f} at lambda={lam:g}")
    return _finish_table(res.table, cfg.out, f"{cfg.name}-capacity")


def cmd_mobility(args) -> int:
    cfg = _cfg(args)
    os.makedirs(cfg.out, exist_ok=True)
    table = run_mobility(cfg, _model(cfg.model), os.path.join(cfg.out, f"{cfg.name}-mobility.jsonl"),
                         _progress)
    return _finish_table(table, cfg.out, f"{cfg.name}-mobility")


def cmd_verify(args) -> int:
    names = args.checks.split(",") if args.checks else None
    reports = run_checks(names, rng_seed=args.seed or 0)
    for name, rep in reports.items():
        print(f"{'PASS' if rep['passed'] else 'FAIL'}  {name}: {rep['detail']}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "verify.json"), "w") as fh:
            json.dump(reports, fh, indent=1, default=str)
    return 0 if all(r["passed"] for r in reports.values()) else 1


def cmd_plotdata(args) -> int:
    table = ResultTable.load_jsonl(args.results)
    path = emit_plot_data(table, args.figure, args.out or ".")
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spbp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in [
        ("generate", cmd_generate, "write a test instance corpus"),
        ("train", cmd_train, "train the duty-cycle GCNN"),
        ("run", cmd_run, "run an algorithm comparison matrix"),
        ("capacity", cmd_capacity, "throughput against constant arrival rate"),
        ("mobility", cmd_mobility, "episodes under node mobility"),
        ("verify", cmd_verify, "run the correctness checks"),
        ("plotdata", cmd_plotdata, "emit per-figure CSV from stored results"),
    ]:
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.set_defaults(func=fn)
        if name == "train":
            p.add_argument("--epochs", type=int)
            p.add_argument("--instances", type=int, help="number of training instances")
        elif name == "run":
            p.add_argument("--algorithms", help="comma separated algorithm ids")
        elif name == "verify":
            p.add_argument("--checks", help=f"comma separated subset of {','.join(CHECKS)}")
        elif name == "plotdata":
            p.add_argument("results", help="JSONL result file")
            p.add_argument("--figure", required=True, choices=sorted(FIGURES))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
