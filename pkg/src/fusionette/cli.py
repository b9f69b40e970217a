"""Command-line surface: dataset generation, training, evaluation, ablation.

Usage:
    fusionette gen-synth --kind xor --n 4000,500,500 --seed 7 --out data/xor
    fusionette train --data data/xor --variant guided_ca --out runs/gca
    fusionette eval --model runs/gca/model_run1.fusn --data data/xor --split test
    fusionette ablate --data data/xor --variants all --runs 3 --out runs/ablation

Exit codes: 0 success, 2 usage, 3 file format, 4 dimension mismatch,
5 training/data error, 6 partial ablation failure.

FUSIONETTE_THREADS caps how many variants an ablation trains in
parallel (default: one thread per variant).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .data import (
    SYNTHETIC_KINDS,
    DatasetSplit,
    gen_synthetic,
    load_dataset_dir,
    write_split,
)
from .errors import DataError, DimensionError, FormatError, TrainingError
from .fusion import VARIANT_NAMES, VariantSpec
from .metrics import MetricsReport
from .model import load_model, save_model
from .train import MultiRunResult, TrainConfig, evaluate, multi_run

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_DIMENSION = 4
EXIT_TRAINING = 5
EXIT_PARTIAL = 6


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _split_sizes(text: str) -> tuple[int, ...]:
    parts = text.split(",")
    if len(parts) not in (1, 3):
        raise argparse.ArgumentTypeError("--n takes N or N_TRAIN,N_VAL,N_TEST")
    try:
        sizes = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--n must be integers, got {text!r}")
    if any(n <= 0 for n in sizes):
        raise argparse.ArgumentTypeError("--n sizes must be positive")
    return sizes if len(sizes) == 3 else sizes * 3


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = Path(os.fspath(path) + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _file_crc(path: Path) -> str:
    return f"{zlib.crc32(path.read_bytes()) & 0xFFFFFFFF:#010x}"


def _dataset_info(data_dir: Path, splits: dict[str, DatasetSplit]) -> dict:
    files = []
    for path in sorted(data_dir.glob("*.mmeb")):
        files.append({"path": str(path), "crc32": _file_crc(path)})
    return {
        "dir": str(data_dir),
        "files": files,
        "splits": {name: len(split) for name, split in splits.items()},
        "task_id": next(iter(splits.values())).task_id,
        "num_classes": next(iter(splits.values())).num_classes,
    }


def _require_splits(splits: dict[str, DatasetSplit]) -> tuple[DatasetSplit, DatasetSplit, DatasetSplit]:
    missing = [name for name in ("train", "validation", "test") if name not in splits]
    if missing:
        raise DataError(f"dataset is missing splits: {', '.join(missing)}")
    empty = [name for name in ("train", "validation", "test") if len(splits[name]) == 0]
    if empty:
        raise TrainingError(f"dataset has empty splits: {', '.join(empty)}")
    return splits["train"], splits["validation"], splits["test"]


def _percent(x: float) -> str:
    return f"{100.0 * x:.2f}"


def _metrics_csv(rows: list[tuple[str, int, str, MetricsReport]]) -> str:
    """Rows of (variant, task_id, run_label, report) -> CSV text, percentages 2dp."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["variant", "task", "run", "accuracy", "macro_f1", "weighted_f1"])
    for variant, task, run, report in rows:
        writer.writerow(
            [variant, task, run, _percent(report.accuracy), _percent(report.macro_f1), _percent(report.weighted_f1)]
        )
    return buf.getvalue()


def _spec_for(variant: str, splits: dict[str, DatasetSplit], args) -> VariantSpec:
    train_split = splits["train"]
    return VariantSpec(
        name=variant,
        d_i=train_split.d_i,
        d_t=train_split.d_t,
        n_tok=args.n_tok,
        n_tok_fused=args.n_tok_fused,
        h=args.hidden,
        num_classes=train_split.num_classes,
    )


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        lr=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=args.seed,
        runs=args.runs,
    )


def cmd_gen_synth(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    splits = gen_synthetic(args.kind, args.n, d_i=args.dim_image, d_t=args.dim_text, seed=args.seed)
    files = []
    for split in splits:
        path = out_dir / f"{split.split_name}.mmeb"
        write_split(split, path)
        files.append({"path": str(path), "split_name": split.split_name, "n_records": len(split), "crc32": _file_crc(path)})
    sidecar = {
        "tool": {"name": "fusionette", "version": __version__},
        "kind": args.kind,
        "n": list(args.n),
        "dim_image": args.dim_image,
        "dim_text": args.dim_text,
        "seed": args.seed,
        "files": files,
    }
    _atomic_write_text(out_dir / "generation.json", json.dumps(sidecar, indent=2) + "\n")
    print(f"wrote {len(files)} splits + sidecar to {out_dir}")
    return EXIT_OK


def _run_variant(variant: str, splits, args) -> MultiRunResult:
    spec = _spec_for(variant, splits, args)
    cfg = _train_config(args)
    train_split, val_split, test_split = _require_splits(splits)
    return multi_run(spec, cfg, train_split, val_split, test_split)


def cmd_train(args) -> int:
    started = time.time()
    data_dir = Path(args.data)
    splits = load_dataset_dir(data_dir)
    _require_splits(splits)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = _run_variant(args.variant, splits, args)
    task_id = splits["train"].task_id

    model_files = []
    for i, model in enumerate(result.models, start=1):
        path = out_dir / f"model_run{i}.fusn"
        save_model(model, path)
        model_files.append(str(path))

    rows = [(args.variant, task_id, str(i + 1), rep) for i, rep in enumerate(result.per_run)]
    rows.append((args.variant, task_id, "avg", result.average))
    _atomic_write_text(out_dir / "metrics.csv", _metrics_csv(rows))

    metrics = {
        "average": result.average.to_dict(),
        "per_run": [r.to_dict() for r in result.per_run],
    }
    _atomic_write_text(out_dir / "metrics.json", json.dumps(metrics, indent=2) + "\n")

    manifest = {
        "tool": {"name": "fusionette", "version": __version__},
        "command": "train",
        "variant_spec": _spec_for(args.variant, splits, args).to_dict(),
        "train_config": _train_config(args).to_dict(),
        "dataset": _dataset_info(data_dir, splits),
        "model_files": model_files,
        "per_run": [
            {
                "seed": args.seed + i,
                "metrics": rep.to_dict(),
                "history": hist.to_dict(),
            }
            for i, (rep, hist) in enumerate(zip(result.per_run, result.histories))
        ],
        "average": result.average.to_dict(),
        "wall_clock_seconds": round(time.time() - started, 3),
    }
    _atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    print(
        f"{args.variant}: avg accuracy {_percent(result.average.accuracy)}%, "
        f"macro F1 {_percent(result.average.macro_f1)}%, "
        f"weighted F1 {_percent(result.average.weighted_f1)}% "
        f"({args.runs} runs) -> {out_dir}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    model_path = Path(args.model)
    if not model_path.exists():
        raise UsageError(f"model file not found: {model_path}")
    model = load_model(model_path)
    splits = load_dataset_dir(Path(args.data))
    if args.split not in splits:
        raise UsageError(f"dataset has no {args.split!r} split")
    report = evaluate(model, splits[args.split])
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def cmd_ablate(args) -> int:
    started = time.time()
    data_dir = Path(args.data)
    splits = load_dataset_dir(data_dir)
    _require_splits(splits)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.variants == "all":
        variants = list(VARIANT_NAMES)
    else:
        variants = [v.strip() for v in args.variants.split(",") if v.strip()]
        unknown = [v for v in variants if v not in VARIANT_NAMES]
        if unknown:
            raise UsageError(f"unknown variants: {', '.join(unknown)}")

    default_threads = len(variants)
    threads = int(os.environ.get("FUSIONETTE_THREADS", default_threads))
    threads = max(1, min(threads, len(variants)))

    results: dict[str, MultiRunResult] = {}
    failures: dict[str, str] = {}

    if threads == 1:
        for variant in variants:
            try:
                results[variant] = _run_variant(variant, splits, args)
            except Exception as exc:  # a failing variant is reported and skipped
                failures[variant] = f"{type(exc).__name__}: {exc}"
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {v: pool.submit(_run_variant, v, splits, args) for v in variants}
        for variant in variants:
            try:
                results[variant] = futures[variant].result()
            except Exception as exc:  # a failing variant is reported and skipped
                failures[variant] = f"{type(exc).__name__}: {exc}"

    task_id = splits["train"].task_id
    rows = []
    for variant in variants:
        if variant not in results:
            continue
        res = results[variant]
        rows.append((variant, task_id, "avg", res.average))
        for i, rep in enumerate(res.per_run, start=1):
            rows.append((variant, task_id, str(i), rep))
    _atomic_write_text(out_dir / "ablation.csv", _metrics_csv(rows))

    manifest = {
        "tool": {"name": "fusionette", "version": __version__},
        "command": "ablate",
        "variants": variants,
        "train_config": _train_config(args).to_dict(),
        "hidden": args.hidden,
        "n_tok": args.n_tok,
        "n_tok_fused": args.n_tok_fused,
        "dataset": _dataset_info(data_dir, splits),
        "threads": threads,
        "average": {v: results[v].average.to_dict() for v in variants if v in results},
        "failures": failures,
        "wall_clock_seconds": round(time.time() - started, 3),
    }
    _atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")

    for variant in variants:
        if variant in results:
            avg = results[variant].average
            print(f"{variant}: accuracy {_percent(avg.accuracy)}%")
        else:
            print(f"{variant}: FAILED ({failures[variant]})", file=sys.stderr)
    if failures:
        return EXIT_PARTIAL
    return EXIT_OK


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="base RNG seed (run i adds i)")
    parser.add_argument("--runs", type=_positive_int, default=3, help="runs to average (default 3)")
    parser.add_argument("--lr", type=float, default=1e-3, help="learning rate (default 1e-3)")
    parser.add_argument("--batch-size", type=_positive_int, default=32, help="batch size (default 32)")
    parser.add_argument("--max-epochs", type=_positive_int, default=50, help="epoch cap (default 50)")
    parser.add_argument("--patience", type=_positive_int, default=5, help="early-stop patience (default 5)")
    parser.add_argument("--hidden", type=_positive_int, default=256, help="guided hidden width h")
    parser.add_argument("--n-tok", type=_positive_int, default=8, help="tokens per modality embedding")
    parser.add_argument("--n-tok-fused", type=_positive_int, default=4, help="tokens for the fused vector")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fusionette", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"fusionette {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-synth", help="generate a synthetic embedding dataset")
    gen.add_argument("--kind", choices=SYNTHETIC_KINDS, required=True)
    gen.add_argument("--n", type=_split_sizes, default=(800, 200, 200), help="N or N_TRAIN,N_VAL,N_TEST")
    gen.add_argument("--dim-image", type=_positive_int, default=512)
    gen.add_argument("--dim-text", type=_positive_int, default=512)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen_synth)

    tr = sub.add_parser("train", help="train one fusion variant")
    tr.add_argument("--data", required=True, help="directory holding the three .mmeb splits")
    tr.add_argument("--variant", choices=VARIANT_NAMES, required=True)
    tr.add_argument("--out", required=True)
    _add_train_flags(tr)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a saved model on a dataset split")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--split", choices=("train", "validation", "test"), default="test")
    ev.set_defaults(func=cmd_eval)

    ab = sub.add_parser("ablate", help="train every requested variant and tabulate metrics")
    ab.add_argument("--data", required=True)
    ab.add_argument("--variants", default="all", help="'all' or a comma-separated subset")
    ab.add_argument("--out", required=True)
    _add_train_flags(ab)
    ab.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except DimensionError as exc:
        print(f"dimension error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except (TrainingError, DataError) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
