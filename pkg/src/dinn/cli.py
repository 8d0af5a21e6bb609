"""``dinn`` command line: prepare, train, eval, sweep, baseline.

Every command takes an optional ``--config`` (TOML or JSON, RunConfig
fields; optimizer settings under ``[optimizer]``); explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from . import data as D
from . import harness as H
from .exceptions import DivergenceDetected
from .interval import Interval
from .net import load_model

EXIT_ERROR = 1
EXIT_DIVERGED = 3

_RUN_FLAGS = {
    "dataset": str, "profile": str, "hidden_layers": int, "units": int, "epochs": int,
    "batch_size": int, "seed": int, "out_dir": str, "init": str, "init_scale": float,
    "pretrain_epochs": int, "pretrain_lr": float, "reg_kind": str, "reg_strength": float,
    "test_fraction": float, "divergence_factor": float, "mc_samples": int,
    "jitter_sigma": float, "dropout_p": float, "baseline_runs": int, "baseline_lr": float,
}
_OPT_FLAGS = {"alpha": float, "momentum": float, "beta1": float, "beta2": float,
              "epsilon": float, "clip": float}


def _add_run_flags(p):
    p.add_argument("--config", help="TOML or JSON file with RunConfig fields")
    for name, typ in _RUN_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)
    p.add_argument("--optimizer", dest="kind", choices=("sgd", "momentum", "iadam", "adam"))
    for name, typ in _OPT_FLAGS.items():
        p.add_argument("--" + name, dest=name, type=typ)
    p.add_argument("--no-clip", action="store_true")
    p.add_argument("--schedule", choices=("constant", "step", "anneal"))
    p.add_argument("--schedule-factor", type=float)
    p.add_argument("--schedule-every", type=int)


def run_config(args) -> H.RunConfig:
    raw = H.load_config(args.config) if getattr(args, "config", None) else {}
    opt = dict(raw.pop("optimizer", {}) or {})
    for name in _RUN_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            raw[name] = value
    if getattr(args, "kind", None):
        opt["kind"] = args.kind
    for name in _OPT_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            opt[name] = value
    if getattr(args, "no_clip", False):
        opt["clip"] = None
    sched = dict(opt.get("schedule") or {})
    for flag, key in (("schedule", "kind"), ("schedule_factor", "factor"),
                      ("schedule_every", "every")):
        value = getattr(args, flag, None)
        if value is not None:
            sched[key] = value
    if sched:
        opt["schedule"] = sched
    raw["optimizer"] = opt
    return H.RunConfig.from_dict(raw)


def _datasets(cfg: H.RunConfig):
    if cfg.dataset is None:
        raise ValueError("no dataset given (--dataset)")
    if os.path.isdir(cfg.dataset):
        return H.load_prepared(cfg.dataset)
    if cfg.profile is None:
        raise ValueError("a raw CSV needs --profile")
    return H.prepare_data(cfg.dataset, cfg.profile, cfg.test_fraction, cfg.seed)


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)


def cmd_prepare(args):
    if not os.path.isfile(args.profile):
        raise FileNotFoundError(f"uncertainty profile not found: {args.profile}")
    train, test = H.prepare_data(args.csv, args.profile, args.test_fraction, args.seed, args.out)
    print(f"prepared {len(train)} train / {len(test)} test rows, "
          f"d={train.features.shape[1]} -> {args.out}")
    return 0


def cmd_train(args):
    cfg = run_config(args)
    train, test = _datasets(cfg)
    out = cfg.out_dir or "."
    os.makedirs(out, exist_ok=True)
    _write_json(cfg.to_dict(), os.path.join(out, "run_config.json"))
    result = H.run_training(cfg, train, out)
    report = H.evaluate(result.model, test, result.trace,
                        os.path.join(out, "predictions.csv"))
    _write_json(report.to_dict(), os.path.join(out, "eval_report.json"))
    status = "diverged" if result.diverged else "completed"
    print(f"{status} after {len(result.trace)} epochs; test interval MSE "
          f"[{report.interval_mse.lo:.6g}, {report.interval_mse.hi:.6g}], "
          f"coverage {report.coverage:.3f}")
    return EXIT_DIVERGED if result.diverged else 0


def cmd_eval(args):
    model = load_model(args.checkpoint)
    ds = D.load_dataset(args.dataset)
    trace = []
    if args.trace:
        with open(args.trace) as fh:
            trace = [(int(r["epoch"]), Interval(float(r["loss_lo"]), float(r["loss_hi"])))
                     for r in csv.DictReader(fh)]
    report = H.evaluate(model, ds, trace, args.predictions)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text)
    return 0


def cmd_sweep(args):
    cfg = run_config(args)
    grid = json.loads(args.grid) if args.grid.lstrip().startswith("{") else H.load_config(args.grid)
    train, _ = _datasets(cfg)
    rows = H.sweep(cfg, train, grid, args.trials, args.sweep_seed, args.out)
    for r in rows:
        print(r)
    return 0


def cmd_baseline(args):
    cfg = run_config(args)
    train, test = _datasets(cfg)
    res = H.run_baseline(cfg, train, test, args.out)
    for name, r in res.items():
        print(f"{name}: MSE {r['mse_mean']:.4f} +- {r['mse_std']:.4f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="dinn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="clean, split and embed the raw CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a DINN and evaluate it on the test split")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a prepared split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True, help="prepared split, e.g. prep/test.json")
    p.add_argument("--trace", help="loss-trace CSV to attach to the report")
    p.add_argument("--predictions", help="write per-row predictions CSV here")
    p.add_argument("--out", help="write the report JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="seeded random hyperparameter search")
    _add_run_flags(p)
    p.add_argument("--grid", required=True, help="inline JSON or a TOML/JSON file")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--sweep-seed", type=int, default=0)
    p.add_argument("--out", default="sweep.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("baseline", help="MC dropout baseline with and without jitter")
    _add_run_flags(p)
    p.add_argument("--out", default="baseline.json")
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DivergenceDetected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
