"""``qkanseq`` command-line entry point.

Exit codes: 0 success, 1 validation error, 2 runtime failure or divergence,
3 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import yaml

from . import config as cfgmod
from . import data, train
from .errors import CheckpointError, ConfigError, DivergenceError, EmptyResultError, ShapeError

log = logging.getLogger("qkanseq")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3

SUMMARY_COLUMNS = ("model", "seq_len", "classical", "quantum", "total", "epochs", "train_loss", "test_loss",
                   "mse", "mae", "r2", "mse_raw", "mae_raw")


# ---------------------------------------------------------------------------
# helpers


def _experiment(args, preset=None, seq_len=None) -> cfgmod.ExperimentConfig:
    """Resolve --config/--preset plus command-line overrides."""
    preset = preset or getattr(args, "preset", None)
    path = getattr(args, "config", None)
    if bool(path) == bool(preset):
        raise ConfigError("give exactly one of --config or --preset", ["config", "preset"])
    if preset:
        doc = cfgmod.preset_dict(preset, surrogate=getattr(args, "surrogate", False))
    else:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}", ["config"])
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        if getattr(args, "surrogate", False) and (doc.get("dataset") or {}).get("kind") == "telecom":
            doc["dataset"]["kind"] = "telecom-surrogate"
    doc = dict(doc)
    doc["dataset"] = dict(doc.get("dataset") or {})
    doc["train"] = dict(doc.get("train") or {})
    seq_len = seq_len or getattr(args, "seq_len", None)
    if seq_len is not None:
        doc["dataset"]["seq_len"] = int(seq_len)
    if getattr(args, "seed", None) is not None:
        doc["train"]["seed"] = int(args.seed)
    if getattr(args, "epochs", None) is not None:
        doc["train"]["epochs"] = int(args.epochs)
    if getattr(args, "lr", None) is not None:
        doc["train"]["learning_rate"] = float(args.lr)
    if getattr(args, "out", None):
        doc["out"] = args.out
    name = preset or os.path.splitext(os.path.basename(path))[0]
    return cfgmod.from_dict(doc, name=name)


def _metrics_line(m: train.Metrics, **extra):
    doc = {"mse": m.mse, "mae": m.mae, "r2": m.r2}
    doc.update(extra)
    return json.dumps({k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in doc.items()},
                      sort_keys=True)


def run_experiment(exp: cfgmod.ExperimentConfig, out_dir=None, write=True):
    """Train one configuration; returns a summary dict and writes artifacts."""
    ds = cfgmod.load_dataset(exp.dataset)
    model = exp.model.build(seed=exp.train.seed)
    hist, model, opt = train.train(model, ds, exp.train, log=lambda r: log.info("%s %s", exp.name, r))
    Xte, yte = ds.part("test")
    metrics, yhat = train.evaluate(model, Xte, yte)
    raw = train.Metrics.of(ds.denormalize(yte), ds.denormalize(yhat))
    rep = train.count_params(model)
    if write:
        out_dir = out_dir or exp.out
        os.makedirs(out_dir, exist_ok=True)
        train.write_history(os.path.join(out_dir, "history.csv"), hist)
        train.write_params(os.path.join(out_dir, "params.csv"), [(exp.model.kind, rep)])
        train.write_predictions(os.path.join(out_dir, "predictions.csv"), yte, yhat)
        train.save_checkpoint(model, opt, os.path.join(out_dir, "checkpoint.json"))
        exp.dump(os.path.join(out_dir, "config.yaml"))
    row = hist.last()
    return {
        "model": exp.model.kind, "seq_len": exp.dataset.seq_len, "classical": rep.classical,
        "quantum": rep.quantum, "total": rep.total, "epochs": exp.train.epochs,
        "train_loss": row["train_loss"], "test_loss": row["test_loss"], "mse": metrics.mse,
        "mae": metrics.mae, "r2": metrics.r2, "mse_raw": raw.mse, "mae_raw": raw.mae,
        "_target": yte, "_pred": yhat,
    }


def _run_job(args):
    exp, out_dir = args
    return run_experiment(exp, out_dir)


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args):
    kind = args.kind
    if kind == "shm":
        zeta = 0.1 if args.zeta is None else args.zeta
        series = data.gen_damped_shm(zeta, args.omega0, args.t_max, args.points or 500)
    elif kind == "bessel":
        series = data.gen_bessel_series(args.order, args.xmax, args.points or 500)
    else:
        series = data.gen_telecom_surrogate(args.points or 8784, 0 if args.seed is None else args.seed)
    out = args.out or f"{kind}.csv"
    parent = os.path.dirname(os.path.abspath(out))
    os.makedirs(parent, exist_ok=True)
    data.write_series_csv(series, out)
    print(out)
    return EXIT_OK


def cmd_train(args):
    exp = _experiment(args)
    res = run_experiment(exp, exp.out)
    m = train.Metrics(res["mse"], res["mae"], res["r2"])
    print(_metrics_line(m, model=exp.model.kind, out=exp.out))
    return EXIT_OK


def cmd_evaluate(args):
    ckpt = args.checkpoint
    if not os.path.exists(ckpt):
        raise FileNotFoundError(f"checkpoint not found: {ckpt}")
    if not args.config and not args.preset:
        sibling = os.path.join(os.path.dirname(os.path.abspath(ckpt)), "config.yaml")
        if not os.path.exists(sibling):
            raise ConfigError("no --config/--preset given and no config.yaml beside the checkpoint", ["config"])
        args.config = sibling
    args.out = args.out or os.path.dirname(os.path.abspath(ckpt))
    exp = _experiment(args)
    model = train.load_checkpoint(ckpt)
    ds = cfgmod.load_dataset(exp.dataset)
    X, y = ds.part(args.split)
    if len(y) == 0:
        raise ConfigError(f"the {args.split} split is empty", ["split"])
    if X.shape[2] != model.n:
        raise ConfigError(f"checkpoint expects {model.n} input features, dataset has {X.shape[2]}", ["checkpoint"])
    metrics, yhat = train.evaluate(model, X, y)
    os.makedirs(args.out, exist_ok=True)
    train.write_predictions(os.path.join(args.out, "predictions.csv"), y, yhat)
    print(_metrics_line(metrics))
    return EXIT_OK


def cmd_benchmark(args):
    suite = args.suite
    if suite not in cfgmod.SUITES:
        raise ConfigError(f"unknown suite {suite!r}; expected one of {', '.join(cfgmod.SUITES)}", ["suite"])
    kinds = cfgmod.suite_kinds(suite)
    if args.models:
        chosen = [k.strip() for k in args.models.split(",") if k.strip()]
        bad = [k for k in chosen if k not in kinds]
        if bad:
            raise ConfigError(f"unknown model kinds: {', '.join(bad)}", ["models"])
        kinds = [k for k in kinds if k in chosen]
    out = args.out or os.path.join("runs", f"bench-{suite}")
    seq_lens = args.seq_len or [None]
    jobs = []
    for T in seq_lens:
        for kind in kinds:
            ns = argparse.Namespace(**{**vars(args), "seq_len": T, "out": None, "config": None})
            exp = _experiment(ns, preset=f"{suite}-{kind}")
            jobs.append((exp, os.path.join(out, f"{kind}-T{exp.dataset.seq_len}")))
    # realise the dataset once up front so a missing source fails before training
    cfgmod.load_series(jobs[0][0].dataset)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    os.makedirs(out, exist_ok=True)
    train.write_csv(os.path.join(out, "summary.csv"), SUMMARY_COLUMNS,
                    [[r[c] for c in SUMMARY_COLUMNS] for r in results])
    for T in sorted({r["seq_len"] for r in results}):
        rows = [r for r in results if r["seq_len"] == T]
        header = ["index", "target"] + [r["model"] for r in rows]
        cols = [rows[0]["_target"]] + [r["_pred"] for r in rows]
        train.write_csv(os.path.join(out, f"plot_T{T}.csv"), header,
                        [[k] + [c[k] for c in cols] for k in range(len(cols[0]))])
    for r in results:
        print(_metrics_line(train.Metrics(r["mse"], r["mae"], r["r2"]), model=r["model"], seq_len=r["seq_len"],
                            total=r["total"], mae_raw=r["mae_raw"]))
    print(os.path.join(out, "summary.csv"))
    return EXIT_OK


def cmd_params(args):
    rows = []
    if args.config or args.preset:
        exp = _experiment(args)
        rows.append((exp.name, train.count_params(exp.model.build(seed=0))))
    else:
        suites = [args.suite] if args.suite else list(cfgmod.SUITES)
        for s in suites:
            for kind in cfgmod.suite_kinds(s):
                exp = cfgmod.load_preset(f"{s}-{kind}", surrogate=True)
                rows.append((f"{s}-{kind}", train.count_params(exp.model.build(seed=0))))
    if args.out:
        parent = os.path.dirname(os.path.abspath(args.out))
        os.makedirs(parent, exist_ok=True)
        train.write_params(args.out, rows)
    print("model,classical,quantum,total")
    for name, r in rows:
        print(f"{name},{r.classical},{r.quantum},{r.total}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_experiment_flags(p, with_out=True):
    p.add_argument("--config", metavar="PATH", help="YAML experiment config")
    p.add_argument("--preset", metavar="NAME", help="shipped preset, e.g. shm-qkan")
    p.add_argument("--seed", type=int, help="training and initialisation seed")
    p.add_argument("--seq-len", type=int, help="window length T")
    p.add_argument("--surrogate", action="store_true", help="use the synthetic telecom series")
    p.add_argument("--epochs", type=int, help="override the number of epochs")
    p.add_argument("--lr", type=float, help="override the learning rate")
    if with_out:
        p.add_argument("--out", metavar="DIR", help="output directory")


def build_parser():
    ap = argparse.ArgumentParser(prog="qkanseq", description="QKAN-LSTM time-series forecasting")
    ap.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic series as CSV")
    g.add_argument("kind", choices=("shm", "bessel", "telecom-surrogate"))
    g.add_argument("--zeta", type=float, help="damping ratio (shm)")
    g.add_argument("--omega0", type=float, default=2 * np.pi, help="natural frequency, rad/s (shm)")
    g.add_argument("--t-max", type=float, default=10.0, help="end time, s (shm)")
    g.add_argument("--order", type=int, default=2, help="Bessel order")
    g.add_argument("--xmax", type=float, default=20.0, help="Bessel domain end")
    g.add_argument("--points", type=int, help="number of samples")
    g.add_argument("--seed", type=int, help="surrogate seed")
    g.add_argument("--out", metavar="PATH", help="CSV path")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train one model")
    _add_experiment_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="evaluate a checkpoint")
    e.add_argument("checkpoint", help="checkpoint.json written by train")
    e.add_argument("--split", choices=("train", "val", "test"), default="test")
    _add_experiment_flags(e)
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("benchmark", help="train every model kind of a suite")
    b.add_argument("suite", help="shm, bessel or telecom")
    b.add_argument("--seq-len", type=int, action="append", help="window length; repeat for a grid")
    b.add_argument("--models", help="comma-separated subset of lstm,qlstm,qkan,hqkan")
    b.add_argument("--seed", type=int)
    b.add_argument("--surrogate", action="store_true")
    b.add_argument("--epochs", type=int)
    b.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    b.add_argument("--out", metavar="DIR")
    b.set_defaults(func=cmd_benchmark, preset=None, lr=None)

    pp = sub.add_parser("params", help="parameter counts")
    pp.add_argument("--suite", choices=cfgmod.SUITES)
    _add_experiment_flags(pp, with_out=False)
    pp.add_argument("--out", metavar="PATH", help="params CSV path")
    pp.set_defaults(func=cmd_params)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, ShapeError, EmptyResultError) as exc:
        print(f"qkanseq: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CheckpointError, OSError) as exc:
        print(f"qkanseq: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DivergenceError as exc:
        print(f"qkanseq: diverged: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"qkanseq: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - last-resort runtime failure
        print(f"qkanseq: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
