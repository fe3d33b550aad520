"""Command-line entry point: ``avibench <subcommand> ...``.

Every subcommand prints one JSON document (or writes it to ``--out``). The
``provenance`` block holds the wall-clock time and invocation details and is
the only part that may differ between two runs with identical inputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .audio import AudioError, normalize_peak, read_wav, segment, write_wav
from .detectors.adapt import AdaptationConfig, AdaptationLog
from .detectors.model import ModelError, check_feature_hash, load_model, save_model
from .eval.analysis import ensemble_mean, revalidation_candidates, top_mismatched, write_annotation_sheet
from .eval.calibration import calibration_table, platt_apply, platt_fit
from .eval.io import SubmissionFormatError, load_submission, write_submission
from .eval.metrics import EvalError
from .eval.report import dumps, evaluate, write_report_files
from .features.cache import load_cache, save_cache
from .features.spectral import FeatureError
from .manifest import ManifestError, load_manifest
from .service.state import ServiceError
from .pipeline import (DetectorConfig, FeatureConfig, FeatureSet, adapt_on, derive_seed, featurize_clip,
                       featurize_manifest, predict_on, to_cache, train_on)
from .synth import PROFILES, SiteProfile, SynthError, generate_dataset

DATA_DIR_ENV = "AVIBENCH_DATA_DIR"


class CliError(Exception):
    code = "usage"


@dataclass(frozen=True)
class PipelineConfig:
    feature: FeatureConfig = field(default_factory=FeatureConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    adaptation: AdaptationConfig = field(default_factory=AdaptationConfig)
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise CliError(f"unknown config sections {sorted(unknown)}")
        try:
            return cls(FeatureConfig(**d.get("feature", {})), DetectorConfig(**d.get("detector", {})),
                       AdaptationConfig(**d.get("adaptation", {})), int(d.get("seed", 0)))
        except TypeError as e:
            raise CliError(f"bad config: {e}") from None

    def to_dict(self):
        return {"feature": self.feature.to_dict(), "detector": self.detector.to_dict(),
                "adaptation": asdict(self.adaptation), "seed": self.seed}


def _config(args) -> PipelineConfig:
    raw = {}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            raise CliError(f"cannot read config {args.config}: {e}") from None
    cfg = PipelineConfig.from_dict(raw)
    det = cfg.detector.to_dict()
    if getattr(args, "seed", None) is not None:
        det["seed"] = args.seed
        cfg = PipelineConfig(cfg.feature, cfg.detector, cfg.adaptation, args.seed)
    if getattr(args, "threads", None) is not None:
        det["threads"] = args.threads
    if getattr(args, "variant", None):
        det["variant"] = args.variant
    return PipelineConfig(cfg.feature, DetectorConfig(**det), cfg.adaptation, cfg.seed)


def _data_path(p) -> Path:
    """Relative paths that do not exist here are looked up under $AVIBENCH_DATA_DIR."""
    path = Path(p)
    root = os.environ.get(DATA_DIR_ENV)
    if not path.is_absolute() and not path.exists() and root and (Path(root) / path).exists():
        return Path(root) / path
    return path


def _manifest(p):
    return load_manifest(_data_path(p))


def _features(manifest, cfg: PipelineConfig, kind: str, cache_path=None) -> FeatureSet:
    if not cache_path:
        return featurize_manifest(manifest, cfg.feature, kinds=(kind,))
    cache = load_cache(_data_path(cache_path))
    if cache.kind != kind:
        raise CliError(f"feature cache holds {cache.kind}, detector needs {kind}")
    if cache.config_hash != bytes.fromhex(cfg.feature.hash())[:16]:
        raise CliError("feature cache was built with a different feature config")
    blocks = dict(zip(cache.ids, cache.blocks))
    missing = [i for i in manifest.ids if i not in blocks]
    if missing:
        raise CliError(f"feature cache lacks {len(missing)} manifest items, e.g. {missing[:5]}")
    return FeatureSet(list(manifest.ids), {kind: [blocks[i] for i in manifest.ids]},
                      [it.label for it in manifest.items], [it.site for it in manifest.items])


def _profile(name) -> SiteProfile:
    if name in PROFILES:
        return PROFILES[name]
    path = Path(name)
    if path.suffix == ".json" and path.exists():
        return SiteProfile.from_dict(json.loads(path.read_text(encoding="utf-8")))
    raise CliError(f"unknown profile {name!r} (built in: {', '.join(sorted(PROFILES))})")


# ---- subcommands; each returns (result dict, optional csv rows)

def cmd_synth(args, cfg):
    out = Path(args.out) if args.out else Path(os.environ.get(DATA_DIR_ENV, ".")) / args.profile
    m = generate_dataset(_profile(args.profile), args.n, args.clip_len, cfg.seed, out)
    labels = [it.label for it in m.items]
    return {"profile": args.profile, "n_items": len(labels), "n_positive": int(sum(labels)),
            "clip_len_s": args.clip_len, "seed": cfg.seed}, None


def cmd_segment(args, cfg):
    src = _data_path(args.input)
    files = sorted(src.glob("*.wav")) if src.is_dir() else [src]
    if not files:
        raise CliError(f"no .wav files under {src}")
    out = Path(args.out or "segments")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for f in files:
        clip = read_wav(f, downmix=args.downmix)
        if args.normalize == "file":
            clip = normalize_peak(clip)
        for seg in segment(clip, args.clip_len):
            if args.normalize == "segment":
                seg = normalize_peak(seg)
            write_wav(seg, out / f"{seg.id}.wav")
            rows.append({"source": f.name, "segment": seg.id})
    return {"n_files": len(files), "n_segments": len(rows), "clip_len_s": args.clip_len, "normalize": args.normalize,
            "segments": [r["segment"] for r in rows]}, rows


def cmd_featurize(args, cfg):
    m = _manifest(args.manifest)
    fs = featurize_manifest(m, cfg.feature, kinds=(args.kind,))
    if not args.out:
        raise CliError("featurize needs --out for the cache file")
    save_cache(to_cache(fs, args.kind, cfg.feature), args.out)
    return {"kind": args.kind, "n_items": len(fs.ids), "n_frames": int(sum(len(b) for b in fs.blocks[args.kind])),
            "feature_hash": cfg.feature.hash()}, None


def cmd_train(args, cfg):
    m = _manifest(args.manifest)
    fs = _features(m, cfg, cfg.detector.input_kind, args.features)
    model = train_on(fs, cfg.detector, cfg.feature.hash())
    if not args.out:
        raise CliError("train needs --out for the model file")
    save_model(model, args.out)
    labels = [l for l in fs.labels if l is not None]
    return {"variant": cfg.detector.variant, "n_train": len(labels), "n_positive": int(sum(labels))}, None


def _load_checked_model(path, cfg):
    model = load_model(_data_path(path))
    check_feature_hash(model, cfg.feature.hash())
    return model


def cmd_predict(args, cfg):
    model = _load_checked_model(args.model, cfg)
    m = _manifest(args.manifest)
    sub = predict_on(model, _features(m, cfg, model.input_kind, args.features), team=args.team)
    if args.out:
        write_submission(sub, args.out)
    rows = [{"itemid": i, "prediction": s} for i, s in sub.predictions.items()]
    return {"variant": model.variant, "n_items": len(sub)}, rows


def cmd_adapt(args, cfg):
    model = _load_checked_model(args.model, cfg)
    kind = model.input_kind
    train = _features(_manifest(args.train), cfg, kind)
    pool = _features(_manifest(args.pool), cfg, kind)
    log = AdaptationLog()
    adapted = adapt_on(model, train, pool, cfg.adaptation, log)
    if not args.out:
        raise CliError("adapt needs --out for the adapted model")
    save_model(adapted, args.out)
    return {"rounds": [{"n_positive": len(r["positive"]), "n_negative": len(r["negative"]),
                        "positive": r["positive"], "negative": r["negative"]} for r in log.rounds]}, None


def cmd_evaluate(args, cfg):
    sub = load_submission(_data_path(args.sub))
    truth = _manifest(args.truth)
    rep = evaluate(sub, truth, args.n_boot, derive_seed(cfg.seed, "evaluate"), args.bins)
    if args.figures:
        write_report_files(rep, args.figures)
    d = rep.to_dict()
    d["ci"].pop("replicates", None)
    return d, d["calibration"]


def cmd_crossgrid(args, cfg):
    if args.benchmark:
        from .benchmark import SHIFT_SIZES, build_shift_benchmark, run_crossgrid
        sizes = (args.n_train or SHIFT_SIZES[0], args.n_test or SHIFT_SIZES[1])
        bench = build_shift_benchmark(cfg.seed, sizes, kinds=(cfg.detector.input_kind,))
        grid = run_crossgrid(bench, cfg.detector)
    else:
        from .eval.crossgrid import crossgrid
        if not args.train or not args.test:
            raise CliError("crossgrid needs --train and --test manifests (or --benchmark)")
        names = args.names.split(",") if args.names else None
        grid = crossgrid([_manifest(p) for p in args.train], [_manifest(p) for p in args.test], cfg.detector,
                         cfg.feature, names)
    rows = [{"train": tr, **{te: float(grid.auc[i, j]) for j, te in enumerate(grid.test_names)}}
            for i, tr in enumerate(grid.train_names)]
    return grid.to_dict(), rows


def cmd_calibrate(args, cfg):
    sub = load_submission(_data_path(args.sub))
    truth = _manifest(args.truth)
    a, b = platt_fit(sub, truth)
    calibrated = platt_apply(sub, a, b)
    if args.out:
        write_submission(calibrated, args.out)
    before, after = calibration_table(sub, truth, args.bins), calibration_table(calibrated, truth, args.bins)
    rows = [{"bin": k, "lo": x.lo, "hi": x.hi, "before_count": x.count, "before_rate": x.empirical_rate,
             "before_mean": x.mean_predicted, "after_count": y.count, "after_rate": y.empirical_rate,
             "after_mean": y.mean_predicted} for k, (x, y) in enumerate(zip(before.bins, after.bins))]
    return {"platt_a": a, "platt_b": b, "before": before.to_rows(), "after": after.to_rows(),
            "max_gap_before": before.max_gap(args.min_count), "max_gap_after": after.max_gap(args.min_count)}, rows


def cmd_revalidate(args, cfg):
    subs = [load_submission(_data_path(p)) for p in args.subs]
    mean = ensemble_mean(subs)
    ids = revalidation_candidates(mean, _manifest(args.truth), args.neg_thresh, args.pos_thresh)
    return {"n_submissions": len(subs), "neg_thresh": args.neg_thresh, "pos_thresh": args.pos_thresh,
            "candidates": ids}, [{"itemid": i, "mean_prediction": mean.predictions[i]} for i in ids]


def cmd_mismatch_report(args, cfg):
    sub = load_submission(_data_path(args.sub))
    rows = top_mismatched(sub, _manifest(args.truth), args.k)
    if args.sheet:
        write_annotation_sheet(rows, args.sheet)
    table = [asdict(r) for r in rows]
    return {"k": args.k, "rows": table}, table


def cmd_score_file(args, cfg):
    model = _load_checked_model(args.model, cfg)
    clip = read_wav(_data_path(args.wav), downmix=True)
    clips = segment(clip, args.clip_len) if args.clip_len else [clip]
    blocks = [featurize_clip(c, cfg.feature, model.input_kind) for c in clips]
    scores = model.score(blocks) if blocks else np.zeros(0)
    rows = [{"segment": c.id, "score": float(s)} for c, s in zip(clips, scores)]
    return {"file": Path(args.wav).name, "max_score": float(scores.max()) if rows else None,
            "segments": rows}, rows


def cmd_serve(args, cfg):
    import uvicorn

    from .service.app import ServiceConfig, create_app, state_from_config
    if not args.service_config and not args.test_manifest:
        raise CliError("serve needs --service-config or --test-manifest")
    overrides = {"test_manifest": args.test_manifest, "data_dir": args.data_dir, "host": args.host,
                 "port": args.port, "preview_fraction": args.preview_fraction, "seed": args.seed}
    if args.service_config:
        scfg = ServiceConfig.from_file(args.service_config, **overrides)
    else:
        scfg = ServiceConfig(**{k: v for k, v in overrides.items() if v is not None})
    state = state_from_config(scfg)
    uvicorn.run(create_app(state), host=scfg.host, port=scfg.port, log_level="warning")
    return None, None


COMMANDS = {
    "synth": cmd_synth, "segment": cmd_segment, "featurize": cmd_featurize, "train": cmd_train,
    "predict": cmd_predict, "adapt": cmd_adapt, "evaluate": cmd_evaluate, "crossgrid": cmd_crossgrid,
    "calibrate": cmd_calibrate, "revalidate": cmd_revalidate, "mismatch-report": cmd_mismatch_report,
    "serve": cmd_serve, "score-file": cmd_score_file,
}

# subcommands whose --out names an artifact; their JSON summary goes to stdout
ARTIFACT_OUT = {"synth", "segment", "featurize", "train", "predict", "adapt", "calibrate"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="JSON", help="pipeline config file with feature/detector/adaptation/seed")
    common.add_argument("--seed", type=int, help="master seed (u64); per-stage seeds are derived from it")
    common.add_argument("--threads", type=int, help="worker threads for training (results do not depend on it)")
    common.add_argument("--out", metavar="PATH", help="output file or directory")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="result format (default json)")

    p = argparse.ArgumentParser(prog="avibench", description="Bird audio detection benchmark toolkit.")
    p.add_argument("--version", action="version", version=f"avibench {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, description=help_)

    s = add("synth", "Generate a synthetic labelled dataset (WAVs, manifest.csv, events.json).")
    s.add_argument("--profile", default="siteA", help="built-in profile name or a profile JSON file")
    s.add_argument("--n", type=int, default=200, help="number of clips")
    s.add_argument("--clip-len", type=float, default=10.0, help="clip length in seconds")

    s = add("segment", "Cut recordings into fixed-length clips.")
    s.add_argument("--input", required=True, help="a .wav file or a directory of them")
    s.add_argument("--clip-len", type=float, default=10.0, help="clip length in seconds")
    s.add_argument("--downmix", action="store_true", help="average multi-channel input to mono")
    s.add_argument("--normalize", choices=("file", "segment", "none"), default="file",
                   help="peak-normalize to -2 dBFS per input file (default), per segment, or not at all")

    s = add("featurize", "Compute a feature cache for a manifest.")
    s.add_argument("--manifest", required=True)
    s.add_argument("--kind", choices=("mfcc", "log-mel"), default="mfcc")

    s = add("train", "Train a detector on a labelled manifest.")
    s.add_argument("--manifest", required=True)
    s.add_argument("--features", help="feature cache to reuse instead of reading audio")
    s.add_argument("--variant", choices=("gmm-pair", "random-forest"), help="overrides the config")

    s = add("predict", "Score a manifest; --out receives the submission CSV.")
    s.add_argument("--model", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--features", help="feature cache to reuse instead of reading audio")
    s.add_argument("--team", default="", help="team name recorded in the submission")

    s = add("adapt", "Self-adapt a model on an unlabelled pool via confident pseudo-labels.")
    s.add_argument("--model", required=True)
    s.add_argument("--train", required=True, help="manifest the model was trained on")
    s.add_argument("--pool", required=True, help="manifest of the adaptation pool (labels ignored)")

    s = add("evaluate", "AUC, bootstrap CI, ROC, calibration and per-site AUC of a submission.")
    s.add_argument("--sub", required=True, help="submission CSV (itemid,prediction)")
    s.add_argument("--truth", required=True, help="ground-truth manifest")
    s.add_argument("--n-boot", type=int, default=1000)
    s.add_argument("--bins", type=int, default=10, help="calibration bins")
    s.add_argument("--figures", metavar="DIR", help="also write ROC/calibration CSV and SVG here")

    s = add("crossgrid", "Train/test AUC grid over datasets (matched on the diagonal).")
    s.add_argument("--train", nargs="+", help="training manifests")
    s.add_argument("--test", nargs="+", help="test manifests, same order as --train")
    s.add_argument("--names", help="comma-separated dataset names")
    s.add_argument("--variant", choices=("gmm-pair", "random-forest"), help="overrides the config")
    s.add_argument("--benchmark", action="store_true", help="use the built-in synthetic siteA/siteB shift benchmark")
    s.add_argument("--n-train", type=int, help="benchmark clips per site for training")
    s.add_argument("--n-test", type=int, help="benchmark clips per site for testing")

    s = add("calibrate", "Fit Platt scaling on a labelled submission; --out receives the calibrated CSV.")
    s.add_argument("--sub", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--bins", type=int, default=10)
    s.add_argument("--min-count", type=int, default=30, help="bins smaller than this are ignored in max_gap")

    s = add("revalidate", "Ids whose ensemble-mean prediction contradicts the label.")
    s.add_argument("--subs", nargs="+", required=True, help="submission CSVs to average")
    s.add_argument("--truth", required=True)
    s.add_argument("--neg-thresh", type=float, default=0.2, help="negatives with mean above this")
    s.add_argument("--pos-thresh", type=float, default=0.3, help="positives with mean below this")

    s = add("mismatch-report", "Top-k items ranked by |prediction - label|.")
    s.add_argument("--sub", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--k", type=int, default=500)
    s.add_argument("--sheet", help="write an annotation sheet CSV with error-category columns")

    s = add("serve", "Run the challenge HTTP service.")
    s.add_argument("--service-config", help="service JSON config")
    s.add_argument("--test-manifest")
    s.add_argument("--data-dir")
    s.add_argument("--host")
    s.add_argument("--port", type=int)
    s.add_argument("--preview-fraction", type=float)

    s = add("score-file", "Score one audio file, optionally per segment.")
    s.add_argument("--model", required=True)
    s.add_argument("--wav", required=True)
    s.add_argument("--clip-len", type=float, help="segment length in seconds (default: whole file)")
    return p


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _error_code(exc) -> str:
    for cls, code in ((CliError, "usage"), (ManifestError, "manifest"), (AudioError, "audio"),
                      (SubmissionFormatError, "submission"), (EvalError, "eval"), (ModelError, "model"),
                      (FeatureError, "features"), (SynthError, "synth"), (ServiceError, "service"), (OSError, "io")):
        if isinstance(exc, cls):
            return code
    return "error"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        result, rows = COMMANDS[args.command](args, cfg)
        if result is None:
            return 0
        if args.format == "csv":
            if rows is None:
                raise CliError(f"{args.command} has no tabular output; use --format json")
            text = _csv_text(rows)
        else:
            doc = {"command": args.command, "config": cfg.to_dict(), "result": result,
                   "provenance": {"tool": "avibench", "version": __version__,
                                  "argv": list(sys.argv[1:] if argv is None else argv),
                                  "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds")}}
            text = dumps(doc)
        if args.out and args.command not in ARTIFACT_OUT:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return 0
    except (CliError, ServiceError, ValueError, OSError, KeyError) as e:
        msg = " ".join(str(e).split()) or type(e).__name__
        print(f"avibench {args.command}: error [{_error_code(e)}]: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
