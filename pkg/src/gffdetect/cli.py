"""Command-line entry point: ``gffdetect <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal
invariant failure (including a failed gradient check).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .errors import DataError, IoFailure
from .net.model import MODEL_FORMAT

log = logging.getLogger("gffdetect")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# flag groups; every dest doubles as a config-file key

def _tracker_flags(p):
    g = p.add_argument_group("tracker")
    g.add_argument("--alpha", type=float, default=0.3, help="WMA blend weight for the newest embedding")
    g.add_argument("--distance-threshold", type=float, default=1.1, help="max embedding distance to join a track")
    g.add_argument("--wma-window-fraction", type=float, default=0.1, help="WMA window T as a fraction of num_frames")
    g.add_argument("--distance-metric", choices=("euclidean", "cosine"), default="euclidean",
                   help="embedding distance used for matching")


def _gff_flags(p):
    g = p.add_argument_group("gff")
    g.add_argument("--frames-per-matrix", type=int, default=16, help="sampled frames L per GFF matrix")
    g.add_argument("--face-slots", type=int, default=5, help="faces N per GFF matrix")
    g.add_argument("--pad-value", type=float, default=0.0, help="fill for empty slots and absent frames")
    g.add_argument("--group-stride", type=int, default=None, help="window stride over sorted faces (default: face-slots)")
    g.add_argument("--no-geometry", dest="no_geometry", action="store_true", default=False,
                   help="zero the geometry columns (fakeness-only ablation)")


def _model_flags(p):
    g = p.add_argument_group("model")
    g.add_argument("--agg-mode", choices=("fc", "max"), default="fc", help="video score from group scores")
    g.add_argument("--g-max", type=int, default=4, help="group scores fed to the fc aggregator")
    g.add_argument("--agg-hidden", type=int, default=16, help="hidden units of the fc aggregator")
    g.add_argument("--num-layers", type=int, choices=(1, 2), default=2, help="convolution layers in the CNNBlock")
    g.add_argument("--kernel-sizes", type=_int_list, default=(1, 2, 3, 4, 6, 8), help="comma-separated kernel sizes")
    g.add_argument("--filters1", type=int, default=32, help="layer-1 filters per kernel size")
    g.add_argument("--filters2", type=int, default=8, help="layer-2 filters per kernel size")
    g.add_argument("--dense", type=int, default=48, help="width of the dense layer")


def _train_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--lr", type=float, default=0.001, help="learning rate")
    g.add_argument("--momentum", type=float, default=0.9, help="Nesterov momentum")
    g.add_argument("--batch-size", type=int, default=12, help="videos per SGD step")
    g.add_argument("--label-smoothing", type=float, default=0.001, help="symmetric smoothing of the BCE target")
    g.add_argument("--epochs", type=int, default=100, help="training epochs")
    g.add_argument("--samples-per-epoch", type=int, default=1000, help="videos drawn per epoch")


def _seed_flag(p):
    p.add_argument("--seed", type=int, default=None, help="random seed (required)")


def _jobs_flag(p):
    p.add_argument("--jobs", type=int, default=1, help="worker processes; output is identical for any value")


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(v) for v in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _str_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(text)
    return tuple(v for v in str(text).split(",") if v)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="gffdetect", description="Multi-face deepfake detection with geometric-fakeness features.",
                     formatter_class=fmt)
    parser.add_argument("--version", action="version",
                        version=f"gffdetect {__version__} (model format {MODEL_FORMAT})")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt)
        p.add_argument("--config", type=Path, default=None, help="JSON config file; flags override its values")
        return p

    p = add("synth", "Generate synthetic multi-face videos plus a manifest.csv")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--spec", type=Path, default=None, help="scenario JSON (object or list); default: benchmark mix")
    p.add_argument("--preset", choices=("benchmark", "figure3"), default="benchmark",
                   help="built-in scenario when --spec is not given")
    p.add_argument("--n", type=int, default=250, help="videos to generate from the benchmark mix")
    _seed_flag(p)

    p = add("track", "Group faces into tracks and print a JSONL track report")
    p.add_argument("--video", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="report path (default: stdout)")
    _tracker_flags(p)

    p = add("gff", "Dump the GFF matrices of one video as CSV files")
    p.add_argument("--video", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    _tracker_flags(p)
    _gff_flags(p)

    p = add("train", "Train CNNBlock and aggregator on a manifest of videos")
    p.add_argument("--data", type=Path, required=True, help="manifest.csv or a directory holding one")
    p.add_argument("--model-out", type=Path, required=True)
    p.add_argument("--loss-out", type=Path, default=None, help="loss history CSV (epoch,mean_loss)")
    _tracker_flags(p)
    _gff_flags(p)
    _model_flags(p)
    _train_flags(p)
    _seed_flag(p)
    _jobs_flag(p)

    p = add("predict", "Score videos with a trained model; one JSON line per video")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--video", type=Path, nargs="+", required=True)
    p.add_argument("--threshold", type=float, default=0.5, help="score at or above which a video is fake")

    p = add("eval", "Train/test ablation variants and report metrics")
    p.add_argument("--data", type=Path, required=True, help="manifest.csv or a directory holding one")
    p.add_argument("--variants", type=_str_list, default=("gff", "fakeness_only", "modified_cnnblock"),
                   help="comma-separated: gff, fakeness_only, modified_cnnblock")
    p.add_argument("--folds", type=int, default=None, help="k-fold cross-validation instead of an 80:20 split")
    p.add_argument("--threshold", type=float, default=0.5, help="score at or above which a video is fake")
    p.add_argument("--out", type=Path, default=None, help="report CSV path")
    _tracker_flags(p)
    _gff_flags(p)
    _model_flags(p)
    _train_flags(p)
    _seed_flag(p)
    _jobs_flag(p)

    p = add("gradcheck", "Compare analytic gradients with central finite differences")
    p.add_argument("--tolerance", type=float, default=1e-4, help="max relative error for PASS")
    p.add_argument("--n-seeds", type=int, default=1, help="check seeds seed .. seed+n-1")
    _seed_flag(p)
    return parser


# --------------------------------------------------------------------------
# config helpers

def _config_keys(parser) -> set[str]:
    keys = set()
    for action in parser._actions:
        if action.dest not in ("help", "config", "version"):
            keys.add(action.dest)
    return keys


def _all_config_keys(parser) -> set[str]:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    keys = set()
    for p in sub.choices.values():
        keys |= _config_keys(p)
    return keys


def load_config(path: Path, parser) -> dict:
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    doc = {k.replace("-", "_"): v for k, v in doc.items()}
    unknown = sorted(set(doc) - _all_config_keys(parser))
    if unknown:
        raise UsageError(f"{path}: unknown config keys {unknown}")
    return doc


def parse_args(argv, parser=None):
    parser = parser or build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[args.command]
    values = load_config(args.config, parser)
    relevant = {k: v for k, v in values.items() if k in _config_keys(sub)}
    for action in sub._actions:
        if action.dest in relevant and action.type is not None and isinstance(relevant[action.dest], (str, list)):
            relevant[action.dest] = action.type(relevant[action.dest])
    sub.set_defaults(**relevant)
    return parser.parse_args(argv)


def _tracker_cfg(a):
    from .tracker import TrackerConfig

    return TrackerConfig(a.alpha, a.distance_threshold, a.wma_window_fraction, a.distance_metric)


def _gff_cfg(a, fakeness_channels=1):
    from .gff import GffConfig

    return GffConfig(a.frames_per_matrix, a.face_slots, fakeness_channels, a.pad_value, a.group_stride,
                     use_geometry=not a.no_geometry)


def _train_cfg(a):
    from .net.train import TrainConfig

    return TrainConfig(a.lr, a.momentum, a.batch_size, a.label_smoothing, a.epochs, a.samples_per_epoch, a.seed)


def _model_overrides(a):
    return dict(agg_mode=a.agg_mode, g_max=a.g_max, agg_hidden=a.agg_hidden, num_layers=a.num_layers,
                kernel_sizes=tuple(a.kernel_sizes), filters1=a.filters1, filters2=a.filters2, dense=a.dense)


def _require_seed(a):
    if a.seed is None:
        raise UsageError(f"{a.command}: --seed is required (flag or config file)")


def read_manifest(path: Path):
    """Load ``(video, label)`` pairs from a manifest CSV with columns video_id,label,path."""
    from .ingest import load

    if path.is_dir():
        path = path / "manifest.csv"
    try:
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    out = []
    for i, row in enumerate(rows, start=2):
        try:
            video_path = Path(row["path"])
            label = row["label"]
        except KeyError as exc:
            raise DataError(f"{path}:{i}: missing column {exc}") from exc
        if not video_path.is_absolute():
            video_path = path.parent / video_path
        video = load(video_path)
        y = video.label if label in ("", None) else int(label)
        if y not in (0, 1):
            raise DataError(f"{path}:{i}: video {row.get('video_id')} has no label")
        out.append((video, y))
    return out


# --------------------------------------------------------------------------
# subcommands

def cmd_synth(a) -> int:
    from . import synth
    from .ingest import write_observations

    _require_seed(a)
    a.out.mkdir(parents=True, exist_ok=True)
    if a.spec is not None:
        try:
            doc = json.loads(a.spec.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"{a.spec}: {exc}") from exc
        specs = [synth.ScenarioSpec.from_dict(d) for d in (doc if isinstance(doc, list) else [doc])]
        videos = [synth.generate_scenario(s) for s in specs]
        pairs = [(v, v.label) for v in videos]
    elif a.preset == "figure3":
        v = synth.generate_scenario(synth.figure3_spec(a.seed))
        pairs = [(v, v.label)]
    else:
        pairs = synth.generate_dataset(a.n, seed=a.seed)

    with open(a.out / "manifest.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["video_id", "label", "path"])
        for video, label in pairs:
            name = f"{video.video_id}.jsonl"
            write_observations(video, a.out / name)
            writer.writerow([video.video_id, label, name])
    log.info("wrote %d videos to %s", len(pairs), a.out)
    return EXIT_OK


def track_report(video, tracks) -> list[dict]:
    index = {id(o): i for i, o in enumerate(video.observations)}
    report = []
    for t in tracks:
        frames = t.frames
        spans: list[list[int]] = []  # inclusive runs of consecutive frames
        for f in frames:
            if spans and f == spans[-1][1] + 1:
                spans[-1][1] = f
            else:
                spans.append([f, f])
        report.append({
            "track_id": t.track_id,
            "num_frames": len(frames),
            "spans": spans,
            "mean_fakeness": t.mean_fakeness(),
            "assignments": [[f, index[id(t.slots[f])]] for f in frames],
        })
    return report


def cmd_track(a) -> int:
    from .ingest import load
    from .tracker import build_tracks

    video = load(a.video)
    tracks = build_tracks(video, _tracker_cfg(a))
    lines = [json.dumps(r, separators=(",", ":")) for r in track_report(video, tracks)]
    text = "".join(line + "\n" for line in lines)
    if a.out:
        a.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gff(a) -> int:
    from .gff import video_gffs, write_csv
    from .ingest import load

    video = load(a.video)
    mats = video_gffs(video, _gff_cfg(a, video.fakeness_channels), _tracker_cfg(a))
    a.out_dir.mkdir(parents=True, exist_ok=True)
    for g, m in enumerate(mats):
        write_csv(m, a.out_dir / f"{video.video_id}_gff{g}.csv")
    print(json.dumps({"video_id": video.video_id, "matrices": len(mats),
                      "slots": [list(m.slot_track_ids) for m in mats]}))
    return EXIT_OK


def cmd_train(a) -> int:
    from .net.train import model_config_for, train

    _require_seed(a)
    data = read_manifest(a.data)
    channels = data[0][0].fakeness_channels if data else 1
    gff_cfg = _gff_cfg(a, channels)
    model_cfg = model_config_for(gff_cfg, **_model_overrides(a))
    model, history = train(data, gff_cfg, _tracker_cfg(a), _train_cfg(a), model_cfg, jobs=a.jobs)
    model.save(a.model_out)
    if a.loss_out:
        with open(a.loss_out, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["epoch", "mean_loss"])
            for epoch, loss in enumerate(history):
                writer.writerow([epoch, repr(loss)])
    log.info("trained on %d videos; final loss %s", len(data), history[-1] if history else "n/a")
    return EXIT_OK


def cmd_predict(a) -> int:
    from .ingest import load
    from .net.model import Model
    from .net.train import pipeline_configs, predict_video

    model = Model.load(a.model)
    for path in a.video:
        video = load(path)
        gff_cfg, tracker_cfg = pipeline_configs(model, video.fakeness_channels)
        pred = predict_video(video, model, gff_cfg, tracker_cfg, a.threshold)
        print(json.dumps(pred.to_dict()))
    return EXIT_OK


def cmd_eval(a) -> int:
    from .evaluate import VARIANTS, ablation_run, report_csv, report_table

    _require_seed(a)
    unknown = [v for v in a.variants if v not in VARIANTS]
    if unknown:
        raise UsageError(f"unknown variants {unknown}; choose from {sorted(VARIANTS)}")
    data = read_manifest(a.data)
    channels = data[0][0].fakeness_channels if data else 1
    overrides = _model_overrides(a)
    for key in ("num_layers", "kernel_sizes"):
        overrides.pop(key)  # set per variant
    rows = ablation_run(data, a.variants, _train_cfg(a), _gff_cfg(a, channels), _tracker_cfg(a),
                        split_seed=a.seed, folds=a.folds, threshold=a.threshold, model_overrides=overrides,
                        jobs=a.jobs)
    if a.out:
        a.out.write_text(report_csv(rows))
    print(report_table(rows))
    return EXIT_OK


def cmd_gradcheck(a) -> int:
    from .net import gradcheck

    _require_seed(a)
    worst, skipped, checked = 0.0, 0, 0
    for seed in range(a.seed, a.seed + a.n_seeds):
        r = gradcheck.run(seed)
        worst = max(worst, r.max_rel_error)
        skipped += r.skipped_at_kinks
        checked += r.checked
    ok = worst < a.tolerance
    print(f"max relative error {worst:.3e} over {checked} coordinates ({skipped} skipped at kinks): "
          f"{'PASS' if ok else 'FAIL'} (tolerance {a.tolerance:g})")
    return EXIT_OK if ok else EXIT_INTERNAL


COMMANDS = {
    "synth": cmd_synth, "track": cmd_track, "gff": cmd_gff, "train": cmd_train,
    "predict": cmd_predict, "eval": cmd_eval, "gradcheck": cmd_gradcheck,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parse_args(argv, parser)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gffdetect: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, IoFailure) as exc:
        print(f"gffdetect: {exc}", file=sys.stderr)
        return EXIT_DATA

    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gffdetect: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, IoFailure) as exc:
        print(f"gffdetect: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
