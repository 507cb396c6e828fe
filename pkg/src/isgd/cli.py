"""Command-line entry point: ``isgd train | batch-dynamics | batch-model``.

All outputs are UTF-8 CSV with LF line endings.  Floats are written in
Python's shortest round-trip form, booleans as 0/1 and missing values as
empty fields.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import data, experiments, nn, optim
from .config import ExperimentConfig
from .errors import DivergenceError
from .timemodel import SystemModel, optimal_batch, time_curve

log = logging.getLogger("isgd")

TRAIN_COLUMNS = ["iteration", "epoch", "batch", "loss", "avg_loss", "sigma", "limit",
                 "undertrained", "sub_iters", "passes", "lr", "train_error", "test_accuracy"]
SUBPROBLEM_COLUMNS = ["iteration", "batch", "entry_loss", "limit", "iterations", "final_loss"]
SUMMARY_COLUMNS = ["seed", "run", "main_iterations", "total_passes", "subproblems",
                   "mid_sigma", "final_avg_loss", "target_avg_loss", "passes_to_target",
                   "final_test_accuracy"]
DYNAMICS_COLUMNS = ["epoch", "batch", "loss"]
MODEL_COLUMNS = ["n_b", "time_seconds"]
ARGMIN_COLUMNS = ["system", "c1", "c2", "n_b", "time_seconds"]

EXIT_OK, EXIT_ERROR, EXIT_DIVERGED = 0, 1, 2


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path_or_file, header, rows):
    def _write(f):
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="") as f:
            _write(f)


def _record_rows(report):
    for r in report.records:
        yield [getattr(r, c) for c in TRAIN_COLUMNS]


def _subproblem_rows(report):
    for s in report.subproblems:
        yield [getattr(s, c) for c in SUBPROBLEM_COLUMNS]


def load_data(cfg: ExperimentConfig, seed: int):
    if cfg.dataset == "mnist":
        train = data.load_mnist_idx(cfg.mnist_train_images, cfg.mnist_train_labels)
        test = None
        if cfg.mnist_test_images:
            test = data.load_mnist_idx(cfg.mnist_test_images, cfg.mnist_test_labels)
        return train, test
    dseed = seed if cfg.data_seed is None else cfg.data_seed
    return data.synth_train_test(cfg.classes, cfg.per_class, cfg.dim, cfg.spread, dseed,
                                 cfg.test_per_class)


def cmd_train(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.dump(), encoding="utf-8")
    opt = cfg.optimizer()
    summary = []
    for seed in cfg.seeds:
        train, test = load_data(cfg, seed)
        spec = nn.NetworkSpec((train.dim, *cfg.hidden, train.n_classes), cfg.activation,
                              cfg.weight_decay)
        reports = {}
        for name, inconsistent in (("sgd", False), ("isgd", True)):
            run_cfg = replace(opt, inconsistent=inconsistent)
            try:
                rep = optim.train(train, spec, run_cfg, cfg.epochs, cfg.batch_size,
                                  workers=cfg.workers, seed=seed, shuffle=cfg.shuffle,
                                  test=test, eval_every=cfg.eval_every)
            except DivergenceError as exc:
                if exc.report is not None:
                    write_csv(out / f"{name}_seed{seed}.csv", TRAIN_COLUMNS, _record_rows(exc.report))
                print(f"error: {name} run with seed {seed} diverged: "
                      f"{exc.report.diverged if exc.report else exc}", file=sys.stderr)
                return EXIT_DIVERGED
            write_csv(out / f"{name}_seed{seed}.csv", TRAIN_COLUMNS, _record_rows(rep))
            if inconsistent:
                write_csv(out / f"subproblems_seed{seed}.csv", SUBPROBLEM_COLUMNS,
                          _subproblem_rows(rep))
            reports[name] = rep
        pair = experiments.PairedRun(seed, reports["sgd"], reports["isgd"])
        effort = experiments.effort_to_target(pair)
        for name, rep in reports.items():
            accs = [e[2] for e in rep.evaluations if e[2] is not None]
            summary.append([seed, name, rep.main_iterations, rep.total_passes, len(rep.subproblems),
                            experiments.middle_third_sigma(rep), rep.records[-1].avg_loss,
                            effort.target,
                            effort.sgd_passes if name == "sgd" else effort.isgd_passes,
                            accs[-1] if accs else None])
        log.info("seed %d: mid sigma sgd %.5f isgd %.5f, passes-to-target ratio %.3f", seed,
                 experiments.middle_third_sigma(pair.sgd),
                 experiments.middle_third_sigma(pair.isgd), effort.ratio)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)
    return EXIT_OK


def cmd_batch_dynamics(cfg: ExperimentConfig) -> int:
    if cfg.dataset != "synthetic":
        print("error: batch-dynamics needs dataset = synthetic", file=sys.stderr)
        return EXIT_ERROR
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        try:
            rep, _ = experiments.batch_dynamics(
                cfg.mode, cfg.classes, cfg.dynamics_per_class, cfg.dim, cfg.spread,
                cfg.dynamics_batch, cfg.dynamics_epochs, cfg.hidden, cfg.lr, seed, cfg.workers)
        except DivergenceError as exc:
            print(f"error: batch-dynamics seed {seed} diverged: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
        rows = ([r.epoch, r.batch, r.loss] for r in rep.records)
        write_csv(out / f"batch_dynamics_{cfg.mode}_seed{seed}.csv", DYNAMICS_COLUMNS, rows)
    return EXIT_OK


def cmd_batch_model(c1s, c2s, psi, lo, hi, out_dir=None) -> int:
    if len(c2s) == 1:
        c2s = c2s * len(c1s)
    if len(c1s) == 1:
        c1s = c1s * len(c2s)
    if len(c1s) != len(c2s):
        print("error: give one --c2 or one per --c1", file=sys.stderr)
        return EXIT_ERROR
    systems = [SystemModel(a, b) for a, b in zip(c1s, c2s)]
    if len(systems) > 1 and out_dir is None:
        print("error: several systems need --out", file=sys.stderr)
        return EXIT_ERROR
    argmins = []
    for i, sys_ in enumerate(systems):
        grid, t = time_curve(psi, sys_, lo, hi)
        rows = zip(grid.tolist(), t.tolist())
        if out_dir is None:
            write_csv(sys.stdout, MODEL_COLUMNS, rows)
        else:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            name = "batch_model.csv" if len(systems) == 1 else f"batch_model_{i}.csv"
            write_csv(out / name, MODEL_COLUMNS, rows)
        nb, tb = optimal_batch(psi, sys_, lo, hi)
        argmins.append([i, sys_.c1, sys_.c2, nb, tb])
    if out_dir is None:
        write_csv(sys.stderr, ARGMIN_COLUMNS, argmins)
    else:
        write_csv(Path(out_dir) / "batch_model_argmin.csv", ARGMIN_COLUMNS, argmins)
    return EXIT_OK


def _real(s):
    return math.inf if s.lower() in ("inf", "infinity") else float(s)


def build_parser():
    p = argparse.ArgumentParser(prog="isgd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="key = value config file")
        sp.add_argument("--seed", type=int, help="run a single seed (overrides 'seeds')")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--variant", choices=optim.VARIANTS)
        sp.add_argument("--sigma-k", type=_real, dest="sigma_k")
        sp.add_argument("--stop", type=int)
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key")

    common(sub.add_parser("train", help="paired SGD vs ISGD runs"))
    dyn = sub.add_parser("batch-dynamics", help="per-batch loss traces on hand-built batches")
    common(dyn)
    dyn.add_argument("--mode", choices=("single", "iid"))

    bm = sub.add_parser("batch-model", help="predicted training time versus batch size")
    bm.add_argument("--c1", type=float, nargs="+", required=True, help="examples per second")
    bm.add_argument("--c2", type=float, nargs="+", default=[0.0], help="sync seconds per update")
    bm.add_argument("--psi", type=float, required=True, help="target loss")
    bm.add_argument("--range", type=int, nargs=2, default=(1, 3000), metavar=("LO", "HI"))
    bm.add_argument("--out", help="output directory (default: curve to stdout, argmin to stderr)")
    return p


def resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    for item in args.set:
        key, _, value = item.partition("=")
        cfg.set(key.strip(), value.strip())
    if args.seed is not None:
        cfg.seeds = (args.seed,)
    for key in ("workers", "out", "variant", "sigma_k", "stop", "epsilon", "mode"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    level = os.environ.get("ISGD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "batch-model":
            return cmd_batch_model(args.c1, args.c2, args.psi, *args.range, args.out)
        cfg = resolve_config(args)
        if args.command == "train":
            return cmd_train(cfg)
        return cmd_batch_dynamics(cfg)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
