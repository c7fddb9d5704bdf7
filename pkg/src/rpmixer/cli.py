"""Command-line surface: generate, train, evaluate, ablate, diagnose, baseline.

Every command is deterministic given its config and seed. Exit codes:
0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, ExperimentConfig, parse_synthetic_spec
from .data import DataError, SyntheticSpec, save_binary, synthetic_generate
from .diagnostics import (corr_error_csv, correlation_error_diagram,
                          decomposition_residual, jl_check, jl_csv)
from .evaluation import (baseline_1nn, baseline_hl, baseline_linear,
                         horizon_table, metrics, metrics_per_step_csv)
from .pipeline import (evaluate_model, load_dataset, predict, prepare_data,
                       train_model)
from .tensor import SeededRng, randn
from .training import TrainingError

USAGE_ERRORS = (ConfigError, DataError, CheckpointError, FileNotFoundError)


def _write(path, text):
    with open(path, "w") as f:
        f.write(text)


def _ensure_out(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if getattr(args, "dataset", None):
        cfg = replace(cfg, dataset=args.dataset)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_generate(args) -> int:
    if args.spec:
        with open(args.spec) as f:
            spec = parse_synthetic_spec(f.read())
    else:
        spec = SyntheticSpec()
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    raw = synthetic_generate(spec)
    save_binary(raw, args.out)

    # Periodicity check: autocorrelation of node 0 at one-day lag.
    x = raw.values[0, 0].astype(np.float64)
    lag = spec.steps_per_day
    a, b = x[:-lag], x[lag:]
    denom = a.std() * b.std()
    acf = float(((a - a.mean()) * (b - b.mean())).mean() / denom) if denom > 0 else 0.0
    summary = (f"n={raw.n}\nd={raw.d}\nt={raw.t}\n"
               f"interval_minutes={raw.interval_minutes}\n"
               f"daily_lag_autocorrelation={acf:.4f}\n")
    _write(str(args.out) + ".summary.txt", summary)
    print(summary, end="")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = _ensure_out(args.out)
    prepared = prepare_data(cfg)
    log = print if not args.quiet else None
    model, history = train_model(cfg, prepared, log=log)

    save_checkpoint(os.path.join(out, "checkpoint.rpck"), model, cfg,
                    prepared.n, prepared.d, best_metric=history.best_val_mae)
    _write(os.path.join(out, "history.csv"), history.to_csv())
    cfg.to_file(os.path.join(out, "config.resolved.txt"))

    report = evaluate_model(model, prepared.windows["val"],
                            prepared.standardizer, mask_zero=cfg.mask_zero)
    _write(os.path.join(out, "val_metrics.csv"),
           metrics_per_step_csv({"rpmixer": report}))
    from .plots import plot_history
    plot_history(history, os.path.join(out, "history.png"))
    mae, rmse, mape = report.average
    print(f"final val: MAE {mae:.4f} RMSE {rmse:.4f} MAPE {mape:.2f}% "
          f"(best epoch {history.best_epoch})")
    return 0


def _evaluate_to_dir(reports, param_counts, out):
    _write(os.path.join(out, "metrics.csv"), metrics_per_step_csv(reports))
    _write(os.path.join(out, "horizon_table.csv"),
           horizon_table(reports, param_counts))
    from .plots import plot_per_step_metrics
    plot_per_step_metrics(reports, os.path.join(out, "metrics_per_step.png"))


def cmd_evaluate(args) -> int:
    out = _ensure_out(args.out)
    if args.checkpoint:
        model, cfg, _ = load_checkpoint(args.checkpoint)
        if args.dataset:
            cfg = replace(cfg, dataset=args.dataset, synthetic=False)
        prepared = prepare_data(cfg)
        if prepared.n != model.config.n or prepared.d != model.config.d:
            raise DataError(
                f"dataset shape (n={prepared.n}, d={prepared.d}) does not match "
                f"checkpoint (n={model.config.n}, d={model.config.d})")
        report = evaluate_model(model, prepared.windows[args.split],
                                prepared.standardizer, mask_zero=cfg.mask_zero)
        reports = {"rpmixer": report}
        counts = {"rpmixer": model.parameter_count()}
    elif args.baseline:
        return cmd_baseline(args)
    else:
        raise ConfigError("evaluate needs --checkpoint or --baseline")
    _evaluate_to_dir(reports, counts, out)
    mae, rmse, mape = report.average
    print(f"{args.split}: MAE {mae:.4f} RMSE {rmse:.4f} MAPE {mape:.2f}%")
    return 0


def cmd_baseline(args) -> int:
    cfg = _load_config(args)
    out = _ensure_out(args.out)
    prepared = prepare_data(cfg)
    split = prepared.windows[args.split]
    split_index = {"train": 0, "val": 1, "test": 2}[args.split]
    which = args.baseline or getattr(args, "which", None)
    counts = {}

    if which == "hl":
        # HL needs no training and no scaling: operate on raw windows.
        raw_split = prepared.splits[split_index].values
        from .data import make_windows
        windows = make_windows(raw_split, cfg.t_past, cfg.t_future)
        past = windows.x.reshape(len(windows), prepared.n, prepared.d, cfg.t_past)
        pred = baseline_hl(past[:, :, 0, :], cfg.t_future)
        report = metrics(pred, windows.y, mask_zero=cfg.mask_zero)
        counts["hl"] = 0
    elif which == "linear":
        train = prepared.windows["train"]
        val = prepared.windows["val"]
        model = baseline_linear((train.x, train.y), (val.x, val.y),
                                prepared.d * cfg.t_past, cfg.t_future,
                                loss_kind=cfg.loss, max_epochs=cfg.max_epochs,
                                batch_size=cfg.batch_size, lr=cfg.lr,
                                patience=cfg.patience, seed=cfg.seed,
                                standardizer=prepared.standardizer)
        pred, target = predict(model, split, prepared.standardizer)
        report = metrics(pred, target, mask_zero=cfg.mask_zero)
        counts["linear"] = model.parameter_count()
    elif which == "1nn":
        train_raw = prepared.splits[0].values[:, 0, :]
        raw_split = prepared.splits[split_index].values
        from .data import make_windows
        windows = make_windows(raw_split, cfg.t_past, cfg.t_future)
        past = windows.x.reshape(len(windows), prepared.n, prepared.d, cfg.t_past)
        pred = baseline_1nn(train_raw, past[:, :, 0, :], cfg.t_future)
        report = metrics(pred, windows.y, mask_zero=cfg.mask_zero)
        counts["1nn"] = 0
    else:
        raise ConfigError(f"unknown baseline {which!r}")

    reports = {which: report}
    _evaluate_to_dir(reports, counts, out)
    mae, rmse, mape = report.average
    print(f"{which} {args.split}: MAE {mae:.4f} RMSE {rmse:.4f} MAPE {mape:.2f}%")
    return 0


ABLATION_VARIANTS = {
    "full": {},
    "post_activation": {"pre_activation": False},
    "no_random_projection": {"random_projection": False},
    "no_frequency_domain": {"frequency_domain": False},
}


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    out = _ensure_out(args.out)
    prepared = prepare_data(cfg)
    reports = {}
    counts = {}
    for name, flags in ABLATION_VARIANTS.items():
        variant_cfg = replace(cfg, **flags)
        log = (lambda msg, _n=name: print(f"[{_n}] {msg}")) if not args.quiet else None
        model, _ = train_model(variant_cfg, prepared, log=log)
        reports[name] = evaluate_model(model, prepared.windows[args.split],
                                       prepared.standardizer,
                                       mask_zero=cfg.mask_zero)
        counts[name] = model.parameter_count()
        variant_cfg.to_file(os.path.join(out, f"config.{name}.txt"))
    _evaluate_to_dir(reports, counts, out)
    for name, rep in reports.items():
        mae, rmse, mape = rep.average
        print(f"{name}: MAE {mae:.4f} RMSE {rmse:.4f} MAPE {mape:.2f}%")
    return 0


def cmd_diagnose(args) -> int:
    out = _ensure_out(args.out)
    model, cfg, _ = load_checkpoint(args.checkpoint)
    if not model.config.pre_activation:
        raise ConfigError(
            "checkpoint was trained post-activation: the residual identity "
            "path does not exist, so the unraveled decomposition and the "
            "correlation-error diagram are unavailable")
    if args.dataset:
        cfg = replace(cfg, dataset=args.dataset, synthetic=False)
    prepared = prepare_data(cfg)
    split = prepared.windows[args.split]
    target_raw = split.y
    if prepared.standardizer is not None:
        target_raw = prepared.standardizer.inverse_transform_target(split.y)

    points, _ = correlation_error_diagram(model, split.x, target_raw,
                                          standardizer=prepared.standardizer,
                                          mask_zero=cfg.mask_zero)
    _write(os.path.join(out, "corr_error.csv"), corr_error_csv(points))

    n = model.config.n
    widths = sorted({model.config.n_rand,
                     min(n, model.config.n_rand * 4),
                     min(n, model.config.n_rand * 16)})
    jl_reports = {str(w): jl_check(n, w, num_vectors=min(100, len(split)),
                                   seed=cfg.seed) for w in widths}
    _write(os.path.join(out, "jl.csv"), jl_csv(jl_reports[str(widths[0])]))

    rng = SeededRng(cfg.seed + 12345)
    probe = randn(rng, (8, model.config.n, model.config.t))
    residual = max(decomposition_residual(model, probe),
                   decomposition_residual(model, split.x[:32]))
    _write(os.path.join(out, "decomposition.txt"),
           f"max_relative_residual={residual:.3e}\n"
           f"blocks={len(model.blocks)}\npairs={len(points)}\n")

    from .plots import plot_corr_error, plot_jl_distortion
    plot_corr_error(points, os.path.join(out, "corr_error.png"))
    plot_jl_distortion(jl_reports, os.path.join(out, "jl.png"))
    print(f"decomposition residual {residual:.3e} over {len(points)} block pairs")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rpmixer",
        description="All-MLP spatial-temporal forecaster with frequency-domain "
                    "mixing and fixed random projections")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, dataset=True):
        if config:
            p.add_argument("--config", help="key=value config file")
        if dataset:
            p.add_argument("--dataset", help="dataset path (.csv or binary)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap (computation is single-process)")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--spec", help="synthetic spec file (key=value)")
    p.add_argument("--out", required=True, help="output dataset path")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a model from a config")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="metrics for a checkpoint or baseline")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--baseline", choices=["hl", "linear", "1nn"])
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train and compare the four variants")
    common(p)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("diagnose", help="ensemble and projection diagnostics")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("baseline", help="run a training-free or simple baseline")
    common(p)
    p.add_argument("--which", required=True, choices=["hl", "linear", "1nn"])
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "baseline"):
        args.baseline = None
    try:
        return args.func(args)
    except USAGE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (TrainingError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
