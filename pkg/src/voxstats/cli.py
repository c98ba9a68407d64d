"""Command-line surface: extract, train, predict, relics, synth, eval.

Exit codes: 0 success, 1 partial or data failure, 2 configuration/usage
error.  Every artifact written here embeds the feature-config hash so a
model never silently consumes features with a different geometry.  The
only environment variable honored is VOXSTATS_WORKERS (extraction pool
size).
"""

import argparse
import concurrent.futures
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import classical, crnn, features, synth
from .audio_io import read_manifest, read_wav, to_mono, trim_segments
from .bispectral import bicoherence_grids
from .config import (
    CrnnConfig,
    FeatureConfig,
    config_hash,
    load_pipeline_config,
)
from .errors import ConfigError, VoxstatsError
from .spectral import mel_spectrogram, minmax_scale

log = logging.getLogger("voxstats")


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _load_configs(args):
    if getattr(args, "config", None):
        return load_pipeline_config(args.config)
    return FeatureConfig(), CrnnConfig(), {}


def _worker_count():
    raw = os.environ.get("VOXSTATS_WORKERS", "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"VOXSTATS_WORKERS must be an integer, got {raw!r}")
    if workers < 1:
        raise ConfigError("VOXSTATS_WORKERS must be at least 1")
    return workers


def _segments_for_entry(manifest_dir, entry, cfg):
    """Decode, downmix and trim one manifest entry into analysis segments."""
    path = Path(entry.path)
    if not path.is_absolute():
        path = manifest_dir / path
    clip = to_mono(read_wav(path))
    return trim_segments(clip, cfg.min_clip_s, cfg.max_clip_s)


def _extract_rows(manifest_path, cfg):
    """Feature vectors for every admitted segment, in manifest order.

    Returns (vectors, skipped) where skipped is [(path, reason)].  Segment
    extraction fans out over a thread pool but results are merged in
    manifest order, so the output is independent of the worker count.
    """
    manifest_dir = Path(manifest_path).resolve().parent
    entries = read_manifest(manifest_path)
    jobs = []
    skipped = []
    for entry in entries:
        try:
            segments = _segments_for_entry(manifest_dir, entry, cfg)
        except (VoxstatsError, OSError) as exc:
            skipped.append((entry.path, str(exc)))
            continue
        if not segments:
            skipped.append((entry.path, "shorter than the minimum slot"))
            continue
        jobs.extend((segment, entry.label) for segment in segments)

    def run(job):
        segment, label = job
        return features.extract_feature_vector(segment, label, cfg)

    workers = _worker_count()
    if workers == 1:
        getters = [(job, lambda j=job: run(j)) for job in jobs]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(job, pool.submit(run, job)) for job in jobs]
        getters = [(job, fut.result) for job, fut in futures]
    vectors = []
    for (segment, _), get in getters:
        try:
            vectors.append(get())
        except VoxstatsError as exc:
            skipped.append((segment.source_id, str(exc)))
    return vectors, skipped


def write_pgm(path, grid):
    """8-bit ASCII PGM of a [0, 1] grid."""
    g = np.clip(np.asarray(grid, dtype=np.float64), 0.0, 1.0)
    levels = np.rint(g * 255).astype(int)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"P2\n{g.shape[1]} {g.shape[0]}\n255\n")
        for row in levels:
            fh.write(" ".join(str(v) for v in row) + "\n")


def write_csv_grid(path, grid):
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.asarray(grid, dtype=np.float64):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _report_payload(feature_cfg, extra_cfg, scenario, algo, seed, report, cm,
                    timing_s, artifacts):
    return {
        "format": "voxstats-report",
        "version": 1,
        "config": {"features": feature_cfg.to_dict(), **extra_cfg},
        "config_hash": config_hash(feature_cfg),
        "scenario": scenario,
        "algo": algo,
        "seed": seed,
        "metrics": report.to_dict(),
        "confusion": {
            "classes": list(cm.classes),
            "counts": cm.counts.tolist(),
        },
        "timing_s": timing_s,
        "artifacts": artifacts,
    }


def load_run_report(path):
    """Read a report and cross-check its metrics against the confusion matrix."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    cm = classical.ConfusionMatrix(
        np.array(payload["confusion"]["counts"]),
        tuple(payload["confusion"]["classes"]),
    )
    recomputed = classical.metrics(
        cm, positive_class=payload["metrics"].get("positive_class")
    )
    stored = payload["metrics"]
    for key in ("accuracy", "macro_precision", "macro_recall", "macro_f1"):
        if abs(stored[key] - getattr(recomputed, key)) > 1e-12:
            raise ConfigError(f"report {path}: stored {key} disagrees with confusion")
    return payload


def _check_hash(expected, actual, what):
    if expected is not None and actual is not None and expected != actual:
        raise ConfigError(
            f"config hash mismatch for {what}: expected {expected}, got {actual}"
        )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args):
    manifest = synth.generate_corpus(
        args.out,
        count=args.count,
        n_classes=args.classes,
        seed=args.seed,
        sample_rate=args.sample_rate,
        duration_s=args.duration,
    )
    log.info("wrote %d clips under %s", args.count, args.out)
    print(manifest)
    return 0


def cmd_extract(args):
    cfg, _, _ = _load_configs(args)
    vectors, skipped = _extract_rows(args.manifest, cfg)
    for path, reason in skipped:
        log.warning("skipped %s: %s", path, reason)
    if not vectors:
        log.error("no clips admitted; feature table would be empty")
        return 1
    table = features.FeatureTable.from_vectors(vectors)
    table.to_csv(args.out, config=cfg, config_digest=config_hash(cfg))
    log.info("wrote %d rows to %s (%d skipped)", len(table), args.out, len(skipped))
    return 0


def _load_feature_table(args, cfg):
    """Feature table plus the effective feature config for this run."""
    if args.features:
        table, config_data, digest = features.FeatureTable.from_csv(args.features)
        if config_data is not None:
            embedded = FeatureConfig.from_dict(config_data)
            if args.config:
                _check_hash(config_hash(cfg), digest, args.features)
            cfg = embedded
        return table, cfg
    if not args.manifest:
        raise ConfigError("provide --features or --manifest")
    vectors, skipped = _extract_rows(args.manifest, cfg)
    for path, reason in skipped:
        log.warning("skipped %s: %s", path, reason)
    if not vectors:
        raise ConfigError("no clips admitted from the manifest")
    return features.FeatureTable.from_vectors(vectors), cfg


def _balance_table(table, per_class, seed):
    labels = np.asarray(table.labels, dtype=object)
    keep = []
    rng = np.random.default_rng(np.random.SeedSequence([seed, 4]))
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        if len(idx) < per_class:
            raise ConfigError(
                f"class {c!r} has {len(idx)} rows, fewer than --balance {per_class}"
            )
        chosen = idx[rng.permutation(len(idx))][:per_class]
        keep.extend(chosen.tolist())
    return table.take(sorted(keep))


def _train_classical(args, table, cfg, algo_overrides):
    started = time.perf_counter()
    spec = classical.AlgoSpec(args.algo, params=algo_overrides, seed=args.seed)
    if args.subset != "all":
        table = features.select_subset(table, args.subset)
    if args.balance:
        table = _balance_table(table, args.balance, args.seed)
    report, cm = classical.cross_validate(table, spec, args.scenario, k=args.kfold)
    model = classical.train_classifier(
        table, spec, args.scenario, config_hash=config_hash(cfg),
        feature_config=cfg.to_dict(),
    )
    classical.save_model(model, args.out)
    artifacts = {"model": str(args.out)}
    if args.features:
        artifacts["features"] = str(args.features)
    payload = _report_payload(
        cfg, {"algo_params": spec.params, "kfold": args.kfold},
        args.scenario, args.algo, args.seed, report, cm,
        time.perf_counter() - started, artifacts,
    )
    report_path = str(args.out) + ".report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    log.info(
        "cv accuracy %.4f over %d rows; model %s, report %s",
        report.accuracy, cm.total, args.out, report_path,
    )
    return 0


def _train_crnn(args, cfg, crnn_cfg):
    if not args.manifest:
        raise ConfigError("crnn training needs --manifest (features CSV has no images)")
    started = time.perf_counter()
    manifest_dir = Path(args.manifest).resolve().parent
    entries = read_manifest(args.manifest)
    images = []
    labels = []
    for entry in entries:
        try:
            segments = _segments_for_entry(manifest_dir, entry, cfg)
        except (VoxstatsError, OSError) as exc:
            log.warning("skipped %s: %s", entry.path, exc)
            continue
        for segment in segments:
            images.append(crnn.clip_image(segment, cfg))
            labels.append(entry.label.value)
    if not images:
        raise ConfigError("no clips admitted from the manifest")
    projected = classical.project_labels(labels, args.scenario)
    classes = sorted(set(projected))
    if len(classes) not in (2, 4):
        raise ConfigError(
            f"the detector head takes 2 or 4 classes, manifest has {len(classes)}"
        )
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[lab] for lab in projected], dtype=int)
    x = np.stack(images)

    net = crnn.build_crnn32(
        len(classes), crnn_cfg, seed=args.seed, classes=classes,
        feature_config=cfg.to_dict(),
    )
    net, history, splits = crnn.train(net, x, y, crnn_cfg, seed=args.seed)
    test_idx = splits["test"]
    scores = crnn.predict_scores(net, x[test_idx])
    pred = [classes[i] for i in scores.argmax(axis=1)]
    truth = [classes[i] for i in y[test_idx]]
    cm = classical.ConfusionMatrix.from_predictions(truth, pred, classes)
    positive = "Synthetic" if args.scenario == "binary" and "Synthetic" in classes else None
    report = classical.metrics(cm, positive_class=positive)

    crnn.save_network(net, args.out)
    history_path = str(args.out) + ".history.csv"
    crnn.history_to_csv(history, history_path)
    payload = _report_payload(
        cfg, {"crnn": crnn_cfg.to_dict()}, args.scenario, "crnn32", args.seed,
        report, cm, time.perf_counter() - started,
        {"model": str(args.out), "history": history_path},
    )
    report_path = str(args.out) + ".report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    log.info(
        "test accuracy %.4f on %d held-out images; model %s",
        report.accuracy, cm.total, args.out,
    )
    return 0


def cmd_train(args):
    cfg, crnn_cfg, algo_overrides = _load_configs(args)
    if args.algo == "crnn32":
        return _train_crnn(args, cfg, crnn_cfg)
    table, cfg = _load_feature_table(args, cfg)
    return _train_classical(args, table, cfg, algo_overrides)


def _sniff_model(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(crnn.network.NET_MAGIC))
    return "network" if magic == crnn.network.NET_MAGIC else "classical"


def _predict_file(path, model_kind, model, cfg):
    clip = to_mono(read_wav(path))
    segments = trim_segments(clip, cfg.min_clip_s, cfg.max_clip_s)
    if not segments:
        raise ConfigError("clip shorter than the minimum slot")
    if model_kind == "network":
        scores = np.mean(
            [crnn.classify(model, seg, cfg)[1] for seg in segments], axis=0
        )
        classes = model.classes
    else:
        cols = features.SUBSET_COLUMNS[model.feature_subset]
        rows = [features.feature_values(seg, cfg)[list(cols)] for seg in segments]
        batch_scores, _ = model.predict_batch(np.stack(rows))
        scores = batch_scores.mean(axis=0)
        classes = model.classes
    label = classes[int(np.argmax(scores))]
    return {
        "path": str(path),
        "label": label,
        "scores": {c: float(s) for c, s in zip(classes, scores)},
    }


def cmd_predict(args):
    kind = _sniff_model(args.model)
    if kind == "network":
        model = crnn.load_network(args.model)
        stored = model.feature_config
        cfg = FeatureConfig.from_dict(stored) if stored else FeatureConfig()
        stored_hash = config_hash(cfg)
    else:
        model = classical.load_model(args.model)
        stored_hash = model.config_hash
        cfg = (FeatureConfig.from_dict(model.feature_config)
               if model.feature_config else FeatureConfig())
    if args.config:
        file_cfg, _, _ = load_pipeline_config(args.config)
        _check_hash(stored_hash, config_hash(file_cfg), "the model's features")
        cfg = file_cfg
    elif stored_hash is not None:
        # The stored geometry must hash to what we are about to use.
        _check_hash(stored_hash, config_hash(cfg), "the model's features")

    failures = 0
    for path in args.audio:
        try:
            record = _predict_file(path, kind, model, cfg)
        except (VoxstatsError, OSError) as exc:
            failures += 1
            print(json.dumps({"path": str(path), "error": str(exc)}))
            continue
        print(json.dumps(record))
    return 1 if failures else 0


def cmd_relics(args):
    cfg, _, _ = _load_configs(args)
    clip = to_mono(read_wav(args.audio))
    if args.kind == "bicoherence":
        grid = bicoherence_grids(clip, cfg.k_segments, cfg.grid_size)[0]
        csv_grid = grid
    elif args.kind == "melspec":
        grid = minmax_scale(mel_spectrogram(clip, cfg).frames)
        csv_grid = grid
    else:  # cepstral matrices: CSV keeps raw values, frames as rows
        from . import cepstral

        mat = cepstral.mfcc(clip, cfg)
        if args.kind in ("delta", "delta2"):
            mat = cepstral.delta(mat)
        if args.kind == "delta2":
            mat = cepstral.delta(mat)
        csv_grid = mat.values
        grid = minmax_scale(mat.values)
    out = Path(args.out)
    write_pgm(out.with_suffix(".pgm"), grid)
    write_csv_grid(out.with_suffix(".csv"), csv_grid)
    log.info("wrote %s.pgm and %s.csv", out.with_suffix(""), out.with_suffix(""))
    return 0


def cmd_eval(args):
    cfg, _, _ = _load_configs(args)
    kind = _sniff_model(args.model)
    started = time.perf_counter()
    if kind == "network":
        model = crnn.load_network(args.model)
        if model.feature_config:
            cfg = FeatureConfig.from_dict(model.feature_config)
        manifest_dir = Path(args.manifest).resolve().parent
        truth, pred = [], []
        classes = model.classes
        scenario = "binary" if len(classes) == 2 else "multi"
        for entry in read_manifest(args.manifest):
            try:
                segments = _segments_for_entry(manifest_dir, entry, cfg)
            except (VoxstatsError, OSError) as exc:
                log.warning("skipped %s: %s", entry.path, exc)
                continue
            for segment in segments:
                label, _ = crnn.classify(model, segment, cfg)
                pred.append(label)
                truth.append(
                    classical.project_labels([entry.label.value], scenario)[0]
                )
    else:
        model = classical.load_model(args.model)
        scenario = "binary" if set(model.classes) == {"Human", "Synthetic"} else "multi"
        if args.features:
            table, config_data, digest = features.FeatureTable.from_csv(args.features)
            _check_hash(model.config_hash, digest, args.features)
        else:
            if not args.manifest:
                raise ConfigError("provide --features or --manifest")
            vectors, _ = _extract_rows(args.manifest, cfg)
            if not vectors:
                raise ConfigError("no clips admitted from the manifest")
            table = features.FeatureTable.from_vectors(vectors)
        table = features.select_subset(table, model.feature_subset)
        truth = classical.project_labels(table.labels, scenario)
        _, pred = model.predict_batch(table.matrix())
    classes = sorted(set(truth) | set(pred))
    cm = classical.ConfusionMatrix.from_predictions(truth, pred, classes)
    positive = "Synthetic" if scenario == "binary" and "Synthetic" in classes else None
    report = classical.metrics(cm, positive_class=positive)
    payload = _report_payload(
        cfg, {}, scenario, kind, 0, report, cm,
        time.perf_counter() - started, {"model": str(args.model)},
    )
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="voxstats",
        description="Bispectral/cepstral forensics for AI-synthesized speech.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the seeded synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=400)
    p.add_argument("--classes", type=int, choices=(2, 4), default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-rate", type=int, default=synth.SAMPLE_RATE)
    p.add_argument("--duration", type=float, default=synth.DURATION_S)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="manifest -> feature CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="pipeline config JSON")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a classifier or the crnn32 detector")
    p.add_argument("--features", help="feature CSV from extract")
    p.add_argument("--manifest", help="extract features/images on the fly")
    p.add_argument("--algo", default="rus_boosted_trees",
                   choices=classical.ALGO_KINDS + ("crnn32",))
    p.add_argument("--scenario", choices=("binary", "multi"), default="binary")
    p.add_argument("--subset", default="all",
                   choices=tuple(features.SUBSET_COLUMNS))
    p.add_argument("--balance", type=int, default=None,
                   help="cap per-class training rows (e.g. 150)")
    p.add_argument("--kfold", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out", required=True, help="model output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify audio files with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--config", help="pipeline config JSON (must match training)")
    p.add_argument("audio", nargs="+")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("relics", help="export a bicoherence/melspec/cepstral grid")
    p.add_argument("--kind", required=True,
                   choices=("bicoherence", "melspec", "mfcc", "delta", "delta2"))
    p.add_argument("--out", required=True, help="output basename (.pgm/.csv)")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("audio")
    p.set_defaults(func=cmd_relics)

    p = sub.add_parser("eval", help="evaluate a saved model on labeled data")
    p.add_argument("--model", required=True)
    p.add_argument("--features")
    p.add_argument("--manifest")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out", help="write the report JSON here instead of stdout")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return 2
    except (VoxstatsError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
