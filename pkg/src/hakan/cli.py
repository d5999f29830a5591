"""Command line interface: train, eval, sweep, params, gradcheck.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric or
contract failure (including a failed gradient check).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import tensor as tt
from .config import RunConfig, load_config, serialize_config
from .data import load_csv, prepare
from .errors import ConfigError, ContractError, DataError, DimensionError
from .model import HaKanModel, ModelConfig, count_breakdown, model_param_count
from .training import aggregate_report, evaluate, grad_check, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

METRICS_COLUMNS = ("dataset", "horizon", "seed", "mse", "mae", "epochs", "seconds")

SWEEP_AXES = ("basis", "blocks", "bottleneck", "patch_len", "lookback",
              "components", "mlp")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (ContractError, DimensionError) as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hakan",
        description="Hahn-polynomial KAN forecaster: training, evaluation, ablations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train on a dataset and write metrics")
    _add_config_arg(p_train)
    _add_override_args(p_train)
    p_train.set_defaults(handler=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a test split")
    p_eval.add_argument("--checkpoint", required=True)
    _add_config_arg(p_eval)
    p_eval.add_argument("--data", help="override dataset csv path")
    p_eval.add_argument("--horizon", type=int, help="must match the checkpoint")
    p_eval.add_argument("--out", help="output directory override")
    p_eval.set_defaults(handler=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="ablation sweep along one axis")
    _add_config_arg(p_sweep)
    p_sweep.add_argument("--axis", required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated axis values")
    _add_override_args(p_sweep)
    p_sweep.set_defaults(handler=cmd_sweep)

    p_params = sub.add_parser("params", help="print the parameter budget")
    _add_config_arg(p_params, required=False)
    p_params.add_argument("--blocks", type=int, help="override block count")
    p_params.add_argument("--horizon", type=int)
    p_params.add_argument("--lookback", type=int)
    p_params.set_defaults(handler=cmd_params)

    p_grad = sub.add_parser("gradcheck",
                            help="finite-difference check of the backward pass")
    _add_config_arg(p_grad, required=False)
    p_grad.add_argument("--tolerance", type=float,
                        help="worst relative error allowed (default by mode)")
    p_grad.add_argument("--step", type=float, default=1e-5)
    p_grad.set_defaults(handler=cmd_gradcheck)

    return parser


def _add_config_arg(p, required=True):
    p.add_argument("--config", required=required, help="run config file")


def _add_override_args(p):
    p.add_argument("--data", help="override dataset csv path")
    p.add_argument("--horizon", type=int)
    p.add_argument("--lookback", type=int)
    p.add_argument("--seed", type=int, help="single seed override")
    p.add_argument("--seeds", help="comma-separated seed list override")
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--out", help="output directory override")
    p.add_argument("--deterministic", action="store_true", default=None)
    p.add_argument("--no-guards", action="store_true",
                   help="disable finite-value guards (faster)")


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {
        "data": "data_path",
        "horizon": "horizon",
        "lookback": "lookback",
        "max_epochs": "max_epochs",
        "batch_size": "batch_size",
        "lr": "lr",
        "out": "out_dir",
    }
    for arg_name, field in overrides.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            setattr(cfg, field, value)
    if getattr(args, "seed", None) is not None:
        cfg.seeds = (args.seed,)
    if getattr(args, "seeds", None):
        cfg.seeds = tuple(int(s) for s in args.seeds.split(","))
    if getattr(args, "deterministic", None):
        cfg.deterministic = True
    if getattr(args, "no_guards", False):
        cfg.finite_guards = False
    return cfg


def _append_metrics(path: Path, rows) -> None:
    new_file = not path.exists()
    with path.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow(row)


def _write_manifest(path: Path, cfg: RunConfig, extras: dict) -> None:
    # The manifest is itself a parseable config; results ride along as comments.
    body = serialize_config(cfg)
    notes = "".join(f"# {key} = {value}\n" for key, value in extras.items())
    path.write_text(body + "\n" + notes, encoding="utf-8")


def _train_one(cfg: RunConfig, splits, seed: int):
    model = HaKanModel(cfg.to_model_config(splits.n_channels, seed))
    return train(model, splits, cfg.to_train_spec(seed))


def _load_splits(cfg: RunConfig):
    if not cfg.data_path:
        raise ConfigError("no dataset path configured (data.path)")
    ds = load_csv(cfg.data_path, cfg.data_name or None, cfg.frequency)
    return prepare(ds, cfg.to_split_spec(), cfg.lookback)


def cmd_train(args) -> int:
    cfg = _resolve(args)
    tt.set_finite_checks(cfg.finite_guards)
    splits = _load_splits(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for seed in cfg.seeds:
        started = time.strftime("%Y-%m-%d %H:%M:%S")
        model, rec = _train_one(cfg, splits, seed)
        stem = f"{splits.name}_T{cfg.horizon}_seed{seed}"
        model.save(out / f"{stem}.npz")
        _write_manifest(out / f"{stem}.manifest", cfg, {
            "run.started": started,
            "run.seed": seed,
            "split.train": f"{splits.train.start}:{splits.train.end}",
            "split.val": f"{splits.val.start}:{splits.val.end}",
            "split.test": f"{splits.test.start}:{splits.test.end}",
            "result.mse": f"{rec.mse:.6f}",
            "result.mae": f"{rec.mae:.6f}",
            "result.epochs": rec.epoch_stopped,
            "result.seconds": f"{rec.wall_time:.1f}",
        })
        _append_metrics(out / "metrics.csv", [
            (rec.dataset, rec.horizon, rec.seed, f"{rec.mse:.6f}",
             f"{rec.mae:.6f}", rec.epoch_stopped, f"{rec.wall_time:.1f}")
        ])
        print(f"{rec.dataset} T={rec.horizon} seed={rec.seed} "
              f"mse={rec.mse:.4f} mae={rec.mae:.4f} "
              f"epochs={rec.epoch_stopped} {rec.wall_time:.1f}s")
        records.append(rec)
    if len(records) > 1:
        report = aggregate_report(records)
        stats = report.cells[(splits.name, cfg.horizon)]
        _append_metrics(out / "metrics.csv", [
            (splits.name, cfg.horizon, "mean", f"{stats.mse_mean:.6f}",
             f"{stats.mae_mean:.6f}", "", ""),
            (splits.name, cfg.horizon, "std", f"{stats.mse_std:.6f}",
             f"{stats.mae_std:.6f}", "", ""),
        ])
        print(f"{splits.name} T={cfg.horizon} over {stats.n_seeds} seeds: "
              f"mse={stats.mse_mean:.4f}±{stats.mse_std:.4f} "
              f"mae={stats.mae_mean:.4f}±{stats.mae_std:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = HaKanModel.load(args.checkpoint)
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.data:
        cfg.data_path = args.data
    cfg.lookback = model.config.lookback
    cfg.horizon = model.config.horizon
    if args.horizon is not None and args.horizon != model.config.horizon:
        raise ConfigError(
            f"checkpoint was trained for horizon {model.config.horizon}, "
            f"requested {args.horizon}"
        )
    splits = _load_splits(cfg)
    if splits.n_channels != model.config.n_channels:
        raise ConfigError(
            f"checkpoint expects {model.config.n_channels} channels, "
            f"dataset {splits.name} has {splits.n_channels}"
        )
    mse, mae = evaluate(model, splits, splits.test, cfg.batch_size)
    print(f"{splits.name} T={model.config.horizon} test "
          f"mse={mse:.4f} mae={mae:.4f}")
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _append_metrics(out / "metrics.csv", [
        (splits.name, model.config.horizon, model.config.seed,
         f"{mse:.6f}", f"{mae:.6f}", "", "")
    ])
    return EXIT_OK


def _axis_variants(axis: str, values: str):
    """Yield (label, config changes) pairs for a sweep axis."""
    items = [v.strip() for v in values.split(",") if v.strip()]
    if axis == "basis":
        for v in items:
            yield v, {"basis": v}
    elif axis == "blocks":
        for v in items:
            yield v, {"n_blocks": int(v)}
    elif axis == "bottleneck":
        for v in items:
            yield v, {"bottleneck_dim": int(v)}
    elif axis == "patch_len":
        for v in items:
            p = int(v)
            yield v, {"patch_len": p, "stride": max(1, p // 2)}
    elif axis == "lookback":
        for v in items:
            yield v, {"lookback": int(v)}
    elif axis == "components":
        table = {
            "both": {"intra_enabled": True, "inter_enabled": True},
            "intra-only": {"intra_enabled": True, "inter_enabled": False},
            "inter-only": {"intra_enabled": False, "inter_enabled": True},
        }
        for v in items:
            if v not in table:
                raise ConfigError(
                    f"components value {v!r}; choose from {sorted(table)}"
                )
            yield v, table[v]
    elif axis == "mlp":
        for v in items:
            if v not in ("kan", "linear"):
                raise ConfigError(f"mlp value {v!r}; choose kan or linear")
            yield v, {"mode": v}
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}; axes: {SWEEP_AXES}")


def cmd_sweep(args) -> int:
    base = _resolve(args)
    tt.set_finite_checks(base.finite_guards)
    out = Path(base.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for label, changes in _axis_variants(args.axis, args.values):
        cfg = replace(base, **changes)
        splits = _load_splits(cfg)
        records = []
        for seed in cfg.seeds:
            _, rec = _train_one(cfg, splits, seed)
            records.append(rec)
            print(f"  [{args.axis}={label}] seed={seed} "
                  f"mse={rec.mse:.4f} mae={rec.mae:.4f}")
        report = aggregate_report(records)
        stats = report.cells[(splits.name, cfg.horizon)]
        params = model_param_count(cfg.to_model_config(splits.n_channels, cfg.seeds[0]))
        rows.append((label, stats.mse_mean, stats.mae_mean, params))
    print(f"\n{args.axis:<12}{'mse':>10}{'mae':>10}{'params':>12}")
    for label, mse, mae, params in rows:
        print(f"{label:<12}{mse:>10.4f}{mae:>10.4f}{params:>12,}")
    with (out / f"sweep_{args.axis}.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow((args.axis, "mse", "mae", "params"))
        writer.writerows(rows)
    return EXIT_OK


def cmd_params(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    for name in ("blocks", "horizon", "lookback"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, {"blocks": "n_blocks"}.get(name, name), value)
    model_cfg = cfg.to_model_config(n_channels=1, seed=cfg.seeds[0])
    breakdown = count_breakdown(model_cfg)
    width = max(len(name) for name, _ in breakdown)
    for name, count in breakdown:
        print(f"{name:<{width}}  {count:>12,}")
    total = model_param_count(model_cfg)
    print(f"{'total':<{width}}  {total:>12,}")
    return EXIT_OK


def tiny_check_config(base: ModelConfig | None = None) -> ModelConfig:
    """Shrink a configuration to gradient-check scale (< 5000 parameters)."""
    cfg = ModelConfig(
        lookback=8, horizon=4, patch_len=4, stride=2, embed_dim=3,
        n_blocks=1, bottleneck_dim=5, degree=2, hahn_n=7, seed=7,
    )
    if base is not None:
        cfg = replace(
            cfg,
            basis=base.basis,
            mode=base.mode,
            hahn_a=base.hahn_a,
            hahn_b=base.hahn_b,
            hahn_n=base.hahn_n,
            degree=min(base.degree, base.hahn_n),
            intra_enabled=base.intra_enabled,
            inter_enabled=base.inter_enabled,
        )
    return cfg


def cmd_gradcheck(args) -> int:
    base = None
    if args.config:
        cfg = load_config(args.config)
        base = cfg.to_model_config(n_channels=1, seed=cfg.seeds[0])
    check_cfg = tiny_check_config(base)
    tolerance = args.tolerance
    if tolerance is None:
        tolerance = 1e-6 if check_cfg.mode == "linear" else 1e-4
    report = grad_check(check_cfg, step=args.step)
    worst_name, worst = max(report.items(), key=lambda kv: kv[1])
    for name, err in report.items():
        print(f"{name:<24} {err:.3e}")
    ok = worst <= tolerance
    verdict = "PASS" if ok else "FAIL"
    print(f"gradcheck {verdict}: worst {worst:.3e} in {worst_name} "
          f"(tolerance {tolerance:.1e})")
    return EXIT_OK if ok else EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
