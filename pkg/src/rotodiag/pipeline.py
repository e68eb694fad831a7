"""End-to-end orchestration with resumable per-stage artifacts.

Stage order is the fixed contract: convert -> normalize/silence/wiener ->
extract -> split -> scale -> augment -> train -> evaluate. Every stage writes
an artifact that round-trips exactly (quantized WAV grids, repr-formatted
CSV floats, JSON models), so a run resumed from any artifact reproduces the
cold run's report bit for bit. The final report is computed on the untouched
test split only.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from datetime import datetime, timezone

import numpy as np

from . import _kernels
from .augment import oversample
from .config import PipelineConfig
from .dataset import (FeatureDataset, ScalerParams, fit_scaler, from_feature_sets,
                      holdout_split, read_feature_csv, scale_dataset,
                      write_feature_csv, write_split_manifest)
from .errors import StageError, PipelineError
from .features import extract_file_features
from .gbm import (GbmModel, feature_importance, model_from_json, model_to_json,
                  predict, train_gbm)
from .metrics import EvalReport, confusion, evaluate
from .plots import plot_importance_svg
from .preprocess import preprocess_clip
from .signal_io import (AudioClip, ManifestEntry, decode_wav, encode_wav,
                        extract_mic_channel, parse_measurement_csv, quantize,
                        read_manifest, resample, write_manifest)

logger = logging.getLogger(__name__)

PROCESSED_BIT_DEPTH = 16  # audit precision for conditioned clips


def _flat_name(rel_path: str) -> str:
    stem = rel_path.replace("\\", "/").strip("/").replace("/", "__")
    if stem.lower().endswith(".csv"):
        stem = stem[:-4]
    return stem + ".wav"


def corpus_source_rate(cfg: PipelineConfig, input_dir) -> int:
    """The corpus sidecar (corpus_meta.json) declares the raw rate when present;
    otherwise the config's source_rate_hz applies (50 kHz for the real rig)."""
    meta_path = os.path.join(input_dir, "corpus_meta.json")
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            return int(json.load(fh)["sample_rate_hz"])
    return cfg.signal.source_rate_hz


def convert_one(cfg: PipelineConfig, mfile, source_rate_hz: int | None = None) -> AudioClip:
    """Raw measurement -> mic channel -> resample -> quantize."""
    rate = cfg.signal.source_rate_hz if source_rate_hz is None else source_rate_hz
    clip = extract_mic_channel(mfile, sample_rate_hz=rate)
    clip = resample(clip, cfg.signal.sample_rate_hz)
    return quantize(clip, cfg.signal.bit_depth)


def preprocess_one(cfg: PipelineConfig, clip: AudioClip) -> AudioClip:
    """Conditioning chain, snapped to the audit grid the artifact would use."""
    return quantize(preprocess_clip(clip, cfg.preprocess), PROCESSED_BIT_DEPTH)


def stage_convert(cfg: PipelineConfig, input_dir, out_dir, resume=False) -> list[ManifestEntry]:
    manifest_path = os.path.join(out_dir, "manifest.csv")
    if resume and os.path.exists(manifest_path):
        logger.info("convert: reusing %s", out_dir)
        return read_manifest(manifest_path)
    os.makedirs(out_dir, exist_ok=True)
    entries = read_manifest(os.path.join(input_dir, "manifest.csv"))
    source_rate = corpus_source_rate(cfg, input_dir)
    out_entries = []
    log_rows = []
    for entry in entries:
        try:
            with open(os.path.join(input_dir, entry.path)) as fh:
                mfile = parse_measurement_csv(fh, entry.class_id, path=entry.path,
                                              class_label=entry.class_label)
            peak = float(np.max(np.abs(mfile.columns[7])))
            clip = convert_one(cfg, mfile, source_rate)
        except PipelineError as exc:
            raise StageError("convert", entry.path, exc) from exc
        name = _flat_name(entry.path)
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(encode_wav(clip))
        out_entries.append(ManifestEntry(name, entry.class_id, entry.class_label,
                                         source=entry.source_path()))
        log_rows.append([entry.path, repr(peak), repr(1.0 / max(1.0, peak))])
    write_manifest(manifest_path, out_entries)
    with open(os.path.join(out_dir, "conversion_log.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "raw_peak", "rescale_factor"])
        writer.writerows(log_rows)
    return out_entries


def stage_preprocess(cfg: PipelineConfig, converted_dir, out_dir, resume=False) -> list[ManifestEntry]:
    manifest_path = os.path.join(out_dir, "manifest.csv")
    if resume and os.path.exists(manifest_path):
        logger.info("preprocess: reusing %s", out_dir)
        return read_manifest(manifest_path)
    os.makedirs(out_dir, exist_ok=True)
    entries = read_manifest(os.path.join(converted_dir, "manifest.csv"))
    out_entries = []
    for entry in entries:
        with open(os.path.join(converted_dir, entry.path), "rb") as fh:
            clip = decode_wav(fh.read())
        try:
            processed = preprocess_one(cfg, clip)
        except PipelineError as exc:
            raise StageError("preprocess", entry.path, exc) from exc
        with open(os.path.join(out_dir, entry.path), "wb") as fh:
            fh.write(encode_wav(processed))
        out_entries.append(entry)
    write_manifest(manifest_path, out_entries)
    return out_entries


def stage_extract(cfg: PipelineConfig, processed_dir, features_csv, resume=False) -> FeatureDataset:
    if resume and os.path.exists(features_csv):
        logger.info("extract: reusing %s", features_csv)
        return read_feature_csv(features_csv)
    entries = read_manifest(os.path.join(processed_dir, "manifest.csv"))
    n_classes = max(e.class_id for e in entries) + 1
    sets = []
    for entry in entries:
        with open(os.path.join(processed_dir, entry.path), "rb") as fh:
            clip = decode_wav(fh.read())
        try:
            sets.append(extract_file_features(clip, cfg.framing, entry.class_id,
                                              entry.source_path(), entry.class_label))
        except PipelineError as exc:
            raise StageError("extract", entry.path, exc) from exc
    ds = from_feature_sets(sets, n_classes=n_classes)
    write_feature_csv(features_csv, ds)
    return ds


def stage_split(cfg: PipelineConfig, ds: FeatureDataset, split_dir, resume=False):
    train_csv = os.path.join(split_dir, "train.csv")
    test_csv = os.path.join(split_dir, "test.csv")
    if resume and os.path.exists(train_csv) and os.path.exists(test_csv):
        logger.info("split: reusing %s", split_dir)
        return read_feature_csv(train_csv), read_feature_csv(test_csv)
    os.makedirs(split_dir, exist_ok=True)
    train, test = holdout_split(ds, cfg.split.test_fraction, cfg.split.seed)
    write_feature_csv(train_csv, train)
    write_feature_csv(test_csv, test)
    write_split_manifest(os.path.join(split_dir, "split_manifest.csv"), train, test)
    return train, test


def _scaler_to_json(params: ScalerParams) -> str:
    return json.dumps({"method": params.method,
                       "center": params.center.tolist(),
                       "scale": params.scale.tolist()})


def _scaler_from_json(text: str) -> ScalerParams:
    doc = json.loads(text)
    return ScalerParams(doc["method"], np.asarray(doc["center"]),
                        np.asarray(doc["scale"]))


def stage_scale(cfg: PipelineConfig, train: FeatureDataset, test: FeatureDataset,
                scaled_dir, resume=False):
    train_csv = os.path.join(scaled_dir, "train.csv")
    test_csv = os.path.join(scaled_dir, "test.csv")
    scaler_json = os.path.join(scaled_dir, "scaler.json")
    if resume and all(os.path.exists(p) for p in (train_csv, test_csv, scaler_json)):
        logger.info("scale: reusing %s", scaled_dir)
        with open(scaler_json) as fh:
            params = _scaler_from_json(fh.read())
        return read_feature_csv(train_csv), read_feature_csv(test_csv), params
    os.makedirs(scaled_dir, exist_ok=True)
    params = fit_scaler(train, cfg.scaler)
    train_s = scale_dataset(params, train)
    test_s = scale_dataset(params, test)
    write_feature_csv(train_csv, train_s)
    write_feature_csv(test_csv, test_s)
    with open(scaler_json, "w") as fh:
        fh.write(_scaler_to_json(params))
    return train_s, test_s, params


def stage_augment(cfg: PipelineConfig, train_s: FeatureDataset, augmented_csv,
                  resume=False) -> FeatureDataset:
    if resume and os.path.exists(augmented_csv):
        logger.info("augment: reusing %s", augmented_csv)
        return read_feature_csv(augmented_csv)
    if cfg.augment is None:
        augmented = train_s
    else:
        try:
            augmented = oversample(train_s, cfg.augment)
        except PipelineError as exc:
            raise StageError("augment", "training split", exc) from exc
    write_feature_csv(augmented_csv, augmented)
    return augmented


def _select_columns(cfg: PipelineConfig, X: np.ndarray) -> np.ndarray:
    if cfg.feature_subset is None:
        return X
    return X[:, np.asarray(cfg.feature_subset, dtype=int)]


def stage_train(cfg: PipelineConfig, augmented: FeatureDataset, model_path,
                resume=False) -> GbmModel:
    if resume and os.path.exists(model_path):
        logger.info("train: reusing %s", model_path)
        with open(model_path) as fh:
            return model_from_json(fh.read())
    try:
        model = train_gbm(_select_columns(cfg, augmented.features),
                          augmented.class_ids, cfg.gbm,
                          n_classes=augmented.n_classes)
    except PipelineError as exc:
        raise StageError("train", "augmented training split", exc) from exc
    with open(model_path, "w") as fh:
        fh.write(model_to_json(model))
    return model


def stage_evaluate(cfg: PipelineConfig, model: GbmModel, test_s: FeatureDataset,
                   report_dir) -> EvalReport:
    os.makedirs(report_dir, exist_ok=True)
    y_pred = predict(model, _select_columns(cfg, test_s.features))
    cm = confusion(test_s.class_ids, y_pred, test_s.n_classes)
    report = evaluate(cm, cfg.beta)
    with open(os.path.join(report_dir, "report.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EvalReport.CSV_FIELDS)
        writer.writerow(report.csv_row())
    with open(os.path.join(report_dir, "report.txt"), "w") as fh:
        fh.write(report.text_block())
    np.savetxt(os.path.join(report_dir, "confusion.csv"), cm.counts,
               fmt="%d", delimiter=",")
    _write_importance(cfg, model, report_dir)
    return report


def _write_importance(cfg: PipelineConfig, model: GbmModel, report_dir) -> None:
    from .features import DESCRIPTIVE_NAMES

    w = feature_importance(model, "weight")
    gain = feature_importance(model, "gain")
    subset = cfg.feature_subset or list(range(model.n_features))
    with open(os.path.join(report_dir, "importance.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature_index", "name", "weight_fraction", "gain_fraction"])
        for local, pos in enumerate(subset):
            writer.writerow([pos, DESCRIPTIVE_NAMES[pos], repr(float(w[local])),
                             repr(float(gain[local]))])
    plot_importance_svg(w, os.path.join(report_dir, "importance.svg"))


def run_pipeline(cfg: PipelineConfig, input_dir, output_dir,
                 resume: bool = False) -> EvalReport:
    """Execute every stage under output_dir and report on the test split."""
    os.makedirs(output_dir, exist_ok=True)
    timings = {}

    def timed(name, fn, *args, **kwargs):
        started = time.perf_counter()
        result = fn(*args, **kwargs)
        timings[name] = round(time.perf_counter() - started, 3)
        return result

    converted = os.path.join(output_dir, "converted")
    processed = os.path.join(output_dir, "processed")
    timed("convert", stage_convert, cfg, input_dir, converted, resume)
    timed("preprocess", stage_preprocess, cfg, converted, processed, resume)
    ds = timed("extract", stage_extract, cfg, processed,
               os.path.join(output_dir, "features.csv"), resume)
    train, test = timed("split", stage_split, cfg, ds,
                        os.path.join(output_dir, "split"), resume)
    train_s, test_s, _ = timed("scale", stage_scale, cfg, train, test,
                               os.path.join(output_dir, "scaled"), resume)
    augmented = timed("augment", stage_augment, cfg, train_s,
                      os.path.join(output_dir, "augmented.csv"), resume)
    model = timed("train", stage_train, cfg, augmented,
                  os.path.join(output_dir, "model.json"), resume)
    report = timed("evaluate", stage_evaluate, cfg, model, test_s,
                   os.path.join(output_dir, "report"))
    manifest = {
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "kernel_backend": _kernels.BACKEND,
        "stage_seconds": timings,
    }
    with open(os.path.join(output_dir, "run_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    return report


def extract_features_in_memory(cfg: PipelineConfig, input_dir) -> FeatureDataset:
    """Feature dataset for a config without writing stage artifacts.

    Matches the staged path exactly: clips pass through the same quantization
    grids the WAV artifacts would impose.
    """
    entries = read_manifest(os.path.join(input_dir, "manifest.csv"))
    source_rate = corpus_source_rate(cfg, input_dir)
    n_classes = max(e.class_id for e in entries) + 1
    sets = []
    for entry in entries:
        try:
            with open(os.path.join(input_dir, entry.path)) as fh:
                mfile = parse_measurement_csv(fh, entry.class_id, path=entry.path,
                                              class_label=entry.class_label)
            clip = preprocess_one(cfg, convert_one(cfg, mfile, source_rate))
            sets.append(extract_file_features(clip, cfg.framing, entry.class_id,
                                              entry.source_path(), entry.class_label))
        except PipelineError as exc:
            raise StageError("extract", entry.path, exc) from exc
    return from_feature_sets(sets, n_classes=n_classes)


def make_dataset_builder(input_dir):
    """dataset_builder for grid_search when axes touch pre-feature stages."""
    def build(cfg: PipelineConfig) -> FeatureDataset:
        return extract_features_in_memory(cfg, input_dir)
    return build


UPSTREAM_PREFIXES = ("signal.", "preprocess.", "framing.")


def axes_touch_upstream(paths) -> bool:
    return any(p.startswith(UPSTREAM_PREFIXES) for p in paths)
