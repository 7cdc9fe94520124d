"""Command-line entry points: generate, train, evaluate, localize, trace.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .dataset import load_dataset, read_shard
from .errors import (
    EmptyInput,
    GnssFixError,
    IoFailure,
    ModelMissing,
    NoLabels,
)
from .estimator.baselines import fit_elevation_baseline, heuristic_weights
from .estimator.features import guess_state
from .estimator.network import load_model, predict_errors, save_model
from .estimator.training import TrainConfig, train
from .evaluation import PipelineSpec, emit_reports, run_pipeline
from .regulator import regulate_measurements, regulate_weights
from .selector import SelectorConfig
from .simulator import (
    DEFAULT_EPOCHS_PER_REGION,
    SceneConfig,
    default_scenes,
    generate_dataset,
    origin_from_lat_lon,
    sample_sky_mask,
    scene_from_dict,
    stable_seed,
)
from .solver import WlsConfig, geometry_matrix, wls_solve
from .types import Epoch

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _parse_scene_entry(entry: dict, global_seed: int) -> tuple[SceneConfig, int]:
    """One region from a config file: a style shorthand or explicit fields."""
    if "region_id" not in entry:
        raise ValueError("region entry missing region_id")
    count = int(entry.get("epochs", DEFAULT_EPOCHS_PER_REGION))
    if "receiver_origin" in entry and "sky_mask_bins" in entry:
        payload = {k: v for k, v in entry.items() if k != "epochs"}
        payload.setdefault("seed", stable_seed(global_seed, entry["region_id"], "mask"))
        defaults = SceneConfig(
            region_id="defaults",
            receiver_origin=origin_from_lat_lon(0.0, 0.0),
            sky_mask_bins=tuple([0.0] * 36),
        )
        for fname in (
            "n_sats_range",
            "los_sigma_base",
            "nlos_mean_extra",
            "nlos_sigma",
            "cn0_los_mean",
            "cn0_los_std",
            "cn0_nlos_mean",
            "cn0_nlos_std",
            "guess_offset_sigma",
        ):
            payload.setdefault(fname, getattr(defaults, fname))
        return scene_from_dict(payload), count
    style = entry.get("style", "urban")
    lat = float(entry.get("lat", 0.0))
    lon = float(entry.get("lon", 0.0))
    mask_seed = stable_seed(global_seed, entry["region_id"], "mask")
    mask = sample_sky_mask(style, np.random.default_rng(mask_seed))
    overrides = {
        k: v
        for k, v in entry.items()
        if k not in ("region_id", "style", "lat", "lon", "epochs")
    }
    if "n_sats_range" in overrides:
        overrides["n_sats_range"] = tuple(int(v) for v in overrides["n_sats_range"])
    scene = SceneConfig(
        region_id=str(entry["region_id"]),
        receiver_origin=origin_from_lat_lon(lat, lon),
        sky_mask_bins=tuple(float(v) for v in mask),
        seed=mask_seed,
        **overrides,
    )
    return scene, count


def _load_scenes_config(path: str, global_seed: int) -> tuple[list[SceneConfig], list[int]]:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "regions" not in payload:
        raise ValueError(f"config {path} must be an object with a 'regions' list")
    scenes, counts = [], []
    for entry in payload["regions"]:
        scene, count = _parse_scene_entry(entry, global_seed)
        scenes.append(scene)
        counts.append(count)
    return scenes, counts


def _cmd_generate(args: argparse.Namespace) -> int:
    if args.config:
        scenes, counts = _load_scenes_config(args.config, args.seed)
    else:
        scenes = default_scenes(args.seed)
        counts = [args.epochs] * len(scenes)
    manifest = generate_dataset(scenes, counts, args.out, global_seed=args.seed)
    total = sum(e.epochs for e in manifest.entries)
    print(f"wrote {total} epochs across {len(manifest.entries)} regions to {args.out}")
    return EXIT_OK


def _split_dataset(data_dir: str, holdout: str) -> tuple[list[Epoch], list[Epoch]]:
    manifest, regions = load_dataset(data_dir)
    if holdout not in manifest.region_ids:
        raise ValueError(f"holdout region {holdout!r} not in dataset regions {manifest.region_ids}")
    train_epochs = [ep for rid, eps in regions.items() if rid != holdout for ep in eps]
    return train_epochs, regions[holdout]


def _cmd_train(args: argparse.Namespace) -> int:
    train_epochs, _ = _split_dataset(args.data, args.holdout)
    config = TrainConfig(
        batch_size=args.batch,
        iterations=args.iters,
        seed=args.seed,
    )
    params = train(train_epochs, config)
    save_model(params, args.out)
    print(
        f"trained on {len(train_epochs)} epochs from regions {list(params.train_regions)}; "
        f"model written to {args.out}"
    )
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    train_epochs, eval_epochs = _split_dataset(args.data, args.holdout)
    spec = PipelineSpec(
        method=args.method,
        use_selector=args.selector,
        model_path=args.model,
        selector_config=SelectorConfig(),
        wls_config=WlsConfig(),
    )
    elevation_fit = fit_elevation_baseline(train_epochs) if args.method == "wls_elevation" else None
    report = run_pipeline(
        spec,
        eval_epochs,
        oracle_errors=args.oracle_errors,
        elevation_fit=elevation_fit,
    )
    paths = emit_reports(report, args.out)
    print(
        f"{args.method} on {args.holdout}: p50={report.p50:.3f} m p95={report.p95:.3f} m "
        f"({report.nonconverged_count} nonconverged, {report.skipped_count} skipped); "
        f"reports in {args.out}"
    )
    for name in ("cdf", "summary", "trace"):
        print(f"  {paths[name]}")
    return EXIT_OK


def _cmd_localize(args: argparse.Namespace) -> int:
    epochs = read_shard(args.epoch_file)
    if not epochs:
        raise EmptyInput(f"no epochs in {args.epoch_file}")
    needs_estimates = args.method in ("regulate_weights", "regulate_measurements")
    model = None
    if needs_estimates:
        if not args.model:
            raise ModelMissing(f"method {args.method!r} needs --model")
        model = load_model(args.model)
    spec = PipelineSpec(method=args.method, model_path=args.model)
    for ep in epochs:
        sub = ep
        if args.method == "regulate_measurements":
            sub = regulate_measurements(ep, predict_errors(model, ep))
            weights = np.ones(len(sub))
        elif args.method == "regulate_weights":
            weights = regulate_weights(geometry_matrix(ep, guess_state(ep)), predict_errors(model, ep))
        elif args.method == "wls_cn0":
            weights = heuristic_weights("cn0", ep)
        elif args.method == "wls_unit":
            weights = np.ones(len(ep))
        else:
            raise ValueError(f"method {args.method!r} is not available for localize")
        result = wls_solve(sub, weights, guess_state(sub), spec.wls_config)
        fix = {
            "epoch_id": ep.epoch_id,
            "region": ep.region_id,
            "x": result.state.pos.x,
            "y": result.state.pos.y,
            "z": result.state.pos.z,
            "clk": result.state.clock_bias,
            "converged": result.converged,
            "iterations": result.iterations,
        }
        print(json.dumps(fix, separators=(",", ":")))
    return EXIT_OK


def _cmd_trace(args: argparse.Namespace) -> int:
    manifest, regions = load_dataset(args.data)
    if args.holdout:
        if args.holdout not in manifest.region_ids:
            raise ValueError(f"holdout region {args.holdout!r} not in dataset")
        epochs = regions[args.holdout]
    else:
        epochs = [ep for eps in regions.values() for ep in eps]
    model = load_model(args.model)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch_id", "region_id", "mean_abs_err", "mean_abs_prediction_dev"])
            rows = 0
            for ep in epochs:
                if not ep.has_truth_errors():
                    continue
                e = ep.truth_errors()
                e_hat = predict_errors(model, ep)
                writer.writerow(
                    [
                        ep.epoch_id,
                        ep.region_id,
                        repr(float(np.mean(np.abs(e)))),
                        repr(float(np.mean(np.abs(e_hat - e)))),
                    ]
                )
                rows += 1
    except OSError as exc:
        raise IoFailure(f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {rows} rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnssfix",
        description="Synthetic GNSS positioning with learned measurement-error regulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    p.add_argument("--config", help="scenes JSON; omit for the built-in five-region layout")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--epochs",
        type=int,
        default=DEFAULT_EPOCHS_PER_REGION,
        help="epochs per region when using the built-in layout",
    )
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train the error estimator")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--holdout", required=True, help="region to exclude from training")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=TrainConfig().iterations)
    p.add_argument("--batch", type=int, default=TrainConfig().batch_size)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="run a pipeline on the held-out region")
    p.add_argument("--data", required=True)
    p.add_argument("--holdout", required=True)
    p.add_argument(
        "--method",
        required=True,
        choices=["wls_unit", "wls_cn0", "wls_elevation", "regulate_weights", "regulate_measurements"],
    )
    p.add_argument("--model", help="model JSON (needed for regulate_* unless --oracle-errors)")
    p.add_argument("--selector", action="store_true", help="apply measurement selection")
    p.add_argument("--oracle-errors", action="store_true", help="use true errors instead of the model")
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("localize", help="print per-epoch fixes as JSON lines")
    p.add_argument("--epoch-file", required=True, help="JSONL epochs")
    p.add_argument("--model", help="model JSON")
    p.add_argument(
        "--method",
        default="regulate_measurements",
        choices=["wls_unit", "wls_cn0", "regulate_weights", "regulate_measurements"],
    )
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("trace", help="per-epoch mean error vs prediction deviation CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--holdout", help="limit to one region")
    p.add_argument("--out", default="trace.csv")
    p.set_defaults(func=_cmd_trace)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream consumer (head, jq -e ...) closed the pipe; not our error.
        # mute stdout so the interpreter does not raise again at shutdown
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except (IoFailure, ModelMissing, NoLabels, EmptyInput, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GnssFixError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
