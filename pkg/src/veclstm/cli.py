"""Command-line entry point wiring the pipeline end to end.

Subcommands:
    ingest     GeoLife tree -> 7-column dataset CSV
    vectorize  dataset CSV -> heatmap records in a vector store
    train      dataset CSV -> trained model + metrics/ROC/report files
    bench      dataset CSV -> per-variant timing and metrics tables

Every report embeds the effective configuration and seed, so a report
suffices to reproduce its run. Timing values live only in files whose
name says so; metrics.json is byte-identical across same-seed runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ingest as ingest_mod
from . import metrics as metrics_mod
from .errors import VecLstmError
from .models import (
    HYBRID,
    ModelSpec,
    build_hybrid,
    build_lstm_stack,
    build_veclstm,
    init_model_params,
)
from .neuralnet import save_checkpoint
from .trainer import (
    DensityFeaturePipeline,
    TrainConfig,
    TrainData,
    StandardScaler,
    encode_labels,
    predict,
    random_oversample,
    run_epochs,
    train_model,
    train_test_split,
)
from .vecstore import VectorRecord, open_store
from .vectorizer import (
    VectorizationConfig,
    sample_cell_grids,
    vectorize_trajectory,
)

STORE_ENV_VAR = "VECLSTM_STORE"

ARCH_BUILDERS = {
    "lstm": build_lstm_stack,
    "veclstm": build_veclstm,
    "hybrid": build_hybrid,
}

BENCH_COLUMNS = (
    "variant", "train_seconds", "vectorize_seconds", "val_acc", "test_acc",
    "weighted_f1", "rmse", "mae", "mse",
)


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    vectorizer: VectorizationConfig = field(default_factory=VectorizationConfig)
    metadata_feature: str = "cell_density"
    regression_basis: str = "class_codes"
    lstm_output_activation: str = "tanh"
    modes: tuple[str, ...] = ingest_mod.DEFAULT_MODES

    def to_dict(self) -> dict:
        return {
            "train": self.train.to_dict(),
            "vectorizer": {
                "grid_size": self.vectorizer.grid_size,
                "missing_default": self.vectorizer.missing_default,
                "value_mode": self.vectorizer.value_mode,
            },
            "metadata_feature": self.metadata_feature,
            "regression_basis": self.regression_basis,
            "lstm_output_activation": self.lstm_output_activation,
            "modes": list(self.modes),
        }


def load_run_config(path: str | None, seed: int | None) -> RunConfig:
    doc = {}
    if path:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    train_overrides = dict(doc.get("train", {}))
    if seed is not None:
        train_overrides["seed"] = seed
    config = RunConfig(
        train=TrainConfig.from_dict(train_overrides),
        vectorizer=VectorizationConfig(**doc.get("vectorizer", {})),
        metadata_feature=doc.get("metadata_feature", "cell_density"),
        regression_basis=doc.get("regression_basis", "class_codes"),
        lstm_output_activation=doc.get("lstm_output_activation", "tanh"),
        modes=tuple(doc.get("modes", ingest_mod.DEFAULT_MODES)),
    )
    if len(config.modes) != 7:
        raise ValueError("modes must list exactly 7 transportation modes")
    return config


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _resolve_store(arg: str | None) -> str | None:
    return arg or os.environ.get(STORE_ENV_VAR)


# --- ingest --------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace) -> int:
    try:
        config = load_run_config(args.config, None)
        result = ingest_mod.ingest_geolife(
            Path(args.geolife_dir),
            config=config.vectorizer,
            strict=args.strict,
            metadata_feature=config.metadata_feature,
            mode_names=config.modes,
        )
    except (VecLstmError, OSError, ValueError) as exc:
        print(f"ingest failed: {exc}", file=sys.stderr)
        return 1
    for warning in result.warnings:
        print(f"warning: {warning.path}: {warning.error}", file=sys.stderr)

    out = Path(args.out)
    if result.dataset is None:
        print("warning: no labeled samples found; writing header-only CSV",
              file=sys.stderr)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerow(ingest_mod.DATASET_COLUMNS)
        print(f"rows=0 labels=0 users=0 parsed_points={result.n_points}")
        return 0
    ingest_mod.write_dataset_csv(result.dataset, out)
    labels = {s.label for s in result.dataset.samples}
    users = {s.user for s in result.dataset.samples}
    print(f"rows={len(result.dataset)} labels={len(labels)}"
          f" users={len(users)} parsed_points={result.n_points}")
    return 0


# --- vectorize -----------------------------------------------------------

def cmd_vectorize(args: argparse.Namespace) -> int:
    descriptor = _resolve_store(args.store)
    if not descriptor:
        print(f"vectorize failed: no store given (--store or ${STORE_ENV_VAR})",
              file=sys.stderr)
        return 1
    try:
        config = load_run_config(args.config, None)
        dataset = ingest_mod.read_dataset_csv(Path(args.dataset))
    except (VecLstmError, OSError, ValueError) as exc:
        print(f"vectorize failed reading inputs: {exc}", file=sys.stderr)
        return 1

    # One heatmap per (user, label) trajectory group, binned against the
    # dataset-wide normalization bounds.
    groups: dict[tuple[str, int], list[tuple[float, float, float]]] = {}
    for s in dataset.samples:
        groups.setdefault((s.user, s.label), []).append((s.lat, s.lon, s.alt))

    started = time.perf_counter()
    records = []
    now = int(time.time())
    for (user, label), coords in sorted(groups.items()):
        vector = vectorize_trajectory(coords, config.vectorizer, stats=dataset.stats)
        records.append(VectorRecord(
            record_id=0, user=user, label=label,
            vector=vector.astype("<f4"), created_at=now,
        ))
    vectorize_seconds = time.perf_counter() - started

    try:
        store = open_store(descriptor, grid_size=config.vectorizer.grid_size)
        with store:
            store.init_schema()
            inserted = store.insert_batch(records)
            total = store.count()
    except VecLstmError as exc:
        print(f"vectorize failed at store: {exc}", file=sys.stderr)
        return 1

    print(f"groups={len(groups)} inserted={inserted} store_total={total}"
          f" vectorize_seconds={vectorize_seconds:.6f}")
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "vectorize_report.json", {
            "config": config.to_dict(),
            "store": descriptor,
            "groups": len(groups),
            "inserted": inserted,
            "vectorize_seconds": vectorize_seconds,
        })
    return 0


# --- train ---------------------------------------------------------------

@dataclass
class PreparedData:
    data: TrainData
    x_test: "np.ndarray | tuple"
    y_test_codes: np.ndarray
    x_val: "np.ndarray | tuple | None"
    y_val_codes: np.ndarray | None


def _feature_tensor(meta_scaled: np.ndarray) -> np.ndarray:
    return meta_scaled.reshape(meta_scaled.shape[0], 1, meta_scaled.shape[1])


def prepare_splits(
    dataset: ingest_mod.Dataset,
    spec: ModelSpec,
    config: RunConfig,
) -> PreparedData:
    """split -> oversample (train only) -> scale -> one-hot.

    The test split comes off first, then validation off the training
    remainder; oversampling and the scaler fit see only training rows.
    Hybrid grid inputs pass through unscaled.
    """
    arrays = dataset.to_arrays()
    meta = arrays["metadata"].reshape(-1, 1)
    labels = arrays["label"]
    seed = config.train.seed

    if spec.architecture == HYBRID:
        grids = sample_cell_grids(arrays["lat"], arrays["lon"], arrays["alt"],
                                  dataset.stats, config.vectorizer)
        features = (meta, grids)
    else:
        features = meta

    (x_rest, y_rest), (x_test, y_test) = train_test_split(
        features, labels, config.train.test_fraction, seed
    )
    (x_train, y_train), (x_val, y_val) = train_test_split(
        x_rest, y_rest, config.train.validation_fraction, seed + 1
    )
    x_train, y_train = random_oversample(x_train, y_train, seed + 2)

    def split_meta(x):
        return x[0] if isinstance(x, tuple) else x

    scaler = StandardScaler().fit(split_meta(x_train))

    def assemble(x):
        scaled = _feature_tensor(scaler.transform(split_meta(x)))
        if isinstance(x, tuple):
            return (scaled, x[1])
        return scaled

    data = TrainData(
        x_train=assemble(x_train),
        y_train=encode_labels(y_train, spec.n_classes),
        x_val=assemble(x_val) if len(y_val) else None,
        y_val=encode_labels(y_val, spec.n_classes) if len(y_val) else None,
    )
    return PreparedData(
        data=data,
        x_test=assemble(x_test),
        y_test_codes=y_test,
        x_val=data.x_val,
        y_val_codes=y_val if len(y_val) else None,
    )


def _write_metrics_files(out_dir: Path, bundle: metrics_mod.MetricsBundle) -> None:
    with open(out_dir / "confusion.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"pred_{i}" for i in range(len(bundle.confusion))])
        writer.writerows(bundle.confusion)
    for key, curve in bundle.roc_curves.items():
        name = "roc_micro.csv" if key == "micro" else f"roc_class_{key}.csv"
        (out_dir / name).write_text(curve.to_csv() + "\n", encoding="utf-8")


def cmd_train(args: argparse.Namespace) -> int:
    stage = "configuration"
    try:
        config = load_run_config(args.config, args.seed)
        builder = ARCH_BUILDERS[args.arch]
        spec = builder(
            n_features=1,
            grid_size=config.vectorizer.grid_size,
            lstm_output_activation=config.lstm_output_activation,
            seed=config.train.seed,
        )
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

        stage = "dataset load"
        dataset = ingest_mod.read_dataset_csv(Path(args.dataset))

        stage = "preprocessing"
        prepared = prepare_splits(dataset, spec, config)

        stage = "training"
        params, report = train_model(spec, prepared.data, config.train)

        stage = "evaluation"
        probs = predict(spec, params, prepared.x_test)
        bundle = metrics_mod.evaluate_classifier(
            probs, prepared.y_test_codes, spec.n_classes,
            regression_basis=config.regression_basis,
        )

        stage = "report writing"
        config_doc = config.to_dict()
        _write_json(out_dir / "train_report.json", {
            "arch": args.arch,
            "config": config_doc,
            "report": report.to_dict(),
        })
        _write_json(out_dir / "metrics.json", {
            "arch": args.arch,
            "config": config_doc,
            "seed": config.train.seed,
            "metrics": bundle.to_dict(),
        })
        _write_metrics_files(out_dir, bundle)
        (out_dir / "model_spec.json").write_text(spec.to_json() + "\n",
                                                 encoding="utf-8")
        save_checkpoint(out_dir / "model.vlnn", params)
    except (VecLstmError, OSError, KeyError, ValueError) as exc:
        print(f"train failed at stage {stage}: {exc}", file=sys.stderr)
        return 1

    print(f"arch={args.arch} test_acc={bundle.accuracy:.4f}"
          f" weighted_f1={bundle.weighted_f1:.4f}"
          f" train_seconds={report.train_seconds:.3f}")
    return 0


# --- bench ---------------------------------------------------------------

def _bench_variants(dataset: ingest_mod.Dataset, config: RunConfig):
    """Run the three Table-style variants over one shared split.

    lstm_novec recomputes its scalar feature per batch every epoch;
    veclstm_vec and hybrid_vec train on precomputed features. All share
    seed, split, oversampling and batch order, so the lstm_novec /
    veclstm_vec pair differs only in feature supply.
    """
    arrays = dataset.to_arrays()
    labels = arrays["label"]
    n = labels.size
    seed = config.train.seed
    tcfg = config.train

    index = np.arange(n)
    (rest_idx, y_rest), (test_idx, y_test) = train_test_split(
        index, labels, tcfg.test_fraction, seed)
    (train_idx, y_train), (val_idx, y_val) = train_test_split(
        rest_idx, y_rest, tcfg.validation_fraction, seed + 1)
    train_os_idx, y_os = random_oversample(train_idx, y_train, seed + 2)
    y_os_onehot = encode_labels(y_os)

    pipeline = DensityFeaturePipeline(
        arrays["lat"], arrays["lon"], arrays["alt"],
        vec_config=config.vectorizer, fit_idx=train_os_idx,
    )
    t0 = time.perf_counter()
    x_all = pipeline.precompute()
    t_vectorize = time.perf_counter() - t0

    t0 = time.perf_counter()
    grids = sample_cell_grids(arrays["lat"], arrays["lon"], arrays["alt"],
                              pipeline.stats, config.vectorizer)
    t_grids = time.perf_counter() - t0

    x_train_pre = x_all[train_os_idx]
    grids_train = grids[train_os_idx]

    variants = [
        ("lstm_novec", build_lstm_stack(1), pipeline.batch_fn(train_os_idx), 0.0),
        ("veclstm_vec", build_veclstm(1),
         lambda pos: x_train_pre[pos], t_vectorize),
        ("hybrid_vec", build_hybrid(1),
         lambda pos: (x_train_pre[pos], grids_train[pos]),
         t_vectorize + t_grids),
    ]

    rows = []
    for name, spec, feature_fn, vec_seconds in variants:
        params = init_model_params(spec, seed=seed)
        params, _, _, seconds = run_epochs(spec, params, feature_fn,
                                           y_os_onehot, tcfg)

        def eval_features(idx):
            if spec.architecture == HYBRID:
                return (x_all[idx], grids[idx])
            return x_all[idx]

        val_probs = predict(spec, params, eval_features(val_idx))
        val_acc = float((val_probs.argmax(axis=1) == y_val).mean())
        test_probs = predict(spec, params, eval_features(test_idx))
        bundle = metrics_mod.evaluate_classifier(
            test_probs, y_test, regression_basis=config.regression_basis)
        rows.append({
            "variant": name,
            "train_seconds": seconds,
            "vectorize_seconds": vec_seconds,
            "val_acc": val_acc,
            "test_acc": bundle.accuracy,
            "weighted_f1": bundle.weighted_f1,
            "rmse": bundle.rmse,
            "mae": bundle.mae,
            "mse": bundle.mse,
        })
    return rows


def _store_workload(dataset: ingest_mod.Dataset, config: RunConfig,
                    descriptor: str) -> dict:
    """Synthetic insert/fetch workload: store every (user, label) group's
    heatmap, then read everything back and once per user. Purely a
    throughput probe; the timings are workload-defined, not comparable
    across backends of different kinds.
    """
    groups: dict[tuple[str, int], list[tuple[float, float, float]]] = {}
    for s in dataset.samples:
        groups.setdefault((s.user, s.label), []).append((s.lat, s.lon, s.alt))
    now = int(time.time())
    records = [
        VectorRecord(record_id=0, user=user, label=label,
                     vector=vectorize_trajectory(
                         coords, config.vectorizer,
                         stats=dataset.stats).astype("<f4"),
                     created_at=now)
        for (user, label), coords in sorted(groups.items())
    ]
    with open_store(descriptor, grid_size=config.vectorizer.grid_size) as store:
        store.init_schema()
        t0 = time.perf_counter()
        inserted = store.insert_batch(records)
        insert_seconds = time.perf_counter() - t0
        users = sorted({user for user, _ in groups})
        t0 = time.perf_counter()
        fetched = len(store.fetch())
        for user in users:
            store.fetch(user=user)
        fetch_seconds = time.perf_counter() - t0
    return {
        "workload": "insert all (user, label) group heatmaps;"
                    " fetch all, then per user",
        "store": descriptor,
        "records_inserted": inserted,
        "records_fetched": fetched,
        "insert_seconds": insert_seconds,
        "fetch_seconds": fetch_seconds,
    }


def cmd_bench(args: argparse.Namespace) -> int:
    stage = "configuration"
    try:
        config = load_run_config(args.config, args.seed)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

        stage = "dataset load"
        dataset = ingest_mod.read_dataset_csv(Path(args.dataset))

        stage = "benchmark"
        rows = _bench_variants(dataset, config)

        store_bench = None
        descriptor = _resolve_store(args.store)
        if descriptor:
            stage = "store workload"
            store_bench = _store_workload(dataset, config, descriptor)

        stage = "report writing"
        by_name = {row["variant"]: row for row in rows}
        t_novec = by_name["lstm_novec"]["train_seconds"]
        t_vec = by_name["veclstm_vec"]["train_seconds"]
        reduction = 100.0 * (t_novec - t_vec) / t_novec if t_novec > 0 else 0.0

        with open(out_dir / "bench.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
            writer.writeheader()
            for row in rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v
                                 for k, v in row.items()})
        doc = {
            "config": config.to_dict(),
            "seed": config.train.seed,
            "rows": rows,
            "reduction_pct": reduction,
        }
        if store_bench is not None:
            doc["store_bench"] = store_bench
        _write_json(out_dir / "bench.json", doc)
    except (VecLstmError, OSError, KeyError, ValueError) as exc:
        print(f"bench failed at stage {stage}: {exc}", file=sys.stderr)
        return 1

    for row in rows:
        print(f"{row['variant']}: train_seconds={row['train_seconds']:.3f}"
              f" test_acc={row['test_acc']:.4f}")
    print(f"reduction_pct={reduction:.2f}")
    return 0


# --- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veclstm",
        description="GPS trajectory activity recognition toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse a GeoLife tree into a dataset CSV")
    p_ingest.add_argument("geolife_dir")
    p_ingest.add_argument("--out", required=True, help="output dataset CSV")
    p_ingest.add_argument("--strict", action="store_true",
                          help="fail on the first malformed file")
    p_ingest.add_argument("--config", help="JSON config file")
    p_ingest.set_defaults(func=cmd_ingest)

    p_vec = sub.add_parser("vectorize", help="store per-trajectory heatmaps")
    p_vec.add_argument("dataset")
    p_vec.add_argument("--store", help=f"sqlite:<path> or file path"
                                       f" (default ${STORE_ENV_VAR})")
    p_vec.add_argument("--config", help="JSON config file")
    p_vec.add_argument("--out-dir", help="also write vectorize_report.json here")
    p_vec.set_defaults(func=cmd_vectorize)

    p_train = sub.add_parser("train", help="train and evaluate one architecture")
    p_train.add_argument("dataset")
    p_train.add_argument("--arch", required=True, choices=sorted(ARCH_BUILDERS))
    p_train.add_argument("--out-dir", required=True)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--config", help="JSON config file")
    p_train.set_defaults(func=cmd_train)

    p_bench = sub.add_parser("bench", help="vectorized vs non-vectorized benchmark")
    p_bench.add_argument("dataset")
    p_bench.add_argument("--out-dir", required=True)
    p_bench.add_argument("--seed", type=int)
    p_bench.add_argument("--config", help="JSON config file")
    p_bench.add_argument("--store", help="also time an insert/fetch store"
                                         f" workload (default ${STORE_ENV_VAR})")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
