"""Command-line interface.  Exit codes: 0 success, 1 usage error, 2 data error."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import io as gio
from .config import PipelineConfig, apply_overrides, parse_config, preset
from .dlsp import dlsp_evaluate, select_layer
from .errors import DataError, DimensionMismatch, GeoVadError
from .evalkit import average_precision, parse_grid_text, roc_auc, separability_stats, sweep, write_sweep_csv
from .pipeline import CalibrationPriors, calibrate_priors, expand_and_smooth, run_online, score_with_priors
from .prototypes import read_bank, write_bank
from .sphere import center_many
from .synthgen import preset_world

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
WORLDS = ["A", "B", "C", "D"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="random seed (world seed for synth, clustering seed otherwise)")
    p.add_argument("--config", default=d, help="key = value config file")
    p.add_argument("--preset", dest="config_preset", metavar="NAME", default=d, help="named config preset (default, xd, ucf, ubnormal, unified)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                   help="worker threads; never changes results")


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="geovad", description="Hypersphere prototype scoring for video anomaly detection.")
    _global_flags(root, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = root.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic preset world")
    p.add_argument("--world", choices=WORLDS, help="world preset (--preset A..D also works here)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("calibrate", parents=[common], help="fit centering means and the prototype bank")
    p.add_argument("--features", help="test feature file (GVF1); omit for a synthetic-only mean")
    p.add_argument("--calib", required=True, help="class-grouped synthetic feature file (GVF1)")
    p.add_argument("--mode", choices=["offline", "online"], help="online uses a synthetic-only mean")
    p.add_argument("--priors", required=True, help="output priors file")
    p.add_argument("--bank", required=True, help="output prototype bank file")

    p = sub.add_parser("infer", parents=[common], help="score a feature file offline")
    p.add_argument("--features", required=True)
    p.add_argument("--priors", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--out", required=True, help="scores CSV")
    p.add_argument("--json", help="optional per-video JSON records")

    p = sub.add_parser("online", parents=[common], help="score clips one at a time as they are read")
    p.add_argument("--input", required=True, help="GVF1 file, or - for stdin")
    p.add_argument("--priors", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--out", default="-", help="scores CSV (default stdout)")

    p = sub.add_parser("eval", parents=[common], help="frame AUC/AP of a scores CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--features", help="with --priors and --bank, also report separability")
    p.add_argument("--priors")
    p.add_argument("--bank")

    p = sub.add_parser("dlsp", parents=[common], help="rank layers of a multi-layer file")
    p.add_argument("--layers", required=True, help="GVFL file with normal*/abn* records per layer")
    p.add_argument("--out", required=True, help="saliency CSV")

    p = sub.add_parser("sweep", parents=[common], help="grid search over config keys")
    p.add_argument("--features", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--grid", required=True, help="grid file: key = v1, v2, ...")
    p.add_argument("--out", required=True)
    return root


def _config(args) -> PipelineConfig:
    if args.config and args.config_preset:
        raise UsageError("--config and --preset are mutually exclusive")
    cfg = parse_config(args.config) if args.config else preset(args.config_preset or "default")
    if args.seed is not None:
        cfg = apply_overrides(cfg, {"seed": args.seed})
    return cfg


def _load_priors(args) -> CalibrationPriors:
    p = gio.read_priors(args.priors)
    bank = read_bank(args.bank)
    if bank.dim != p.unified_mean.shape[0]:
        raise DimensionMismatch(f"bank dimension {bank.dim} != priors dimension {p.unified_mean.shape[0]}")
    return CalibrationPriors(p.unified_mean, p.visual_mean, bank, p.synthetic_only)


def _with_labels(ds: gio.FeatureDataset, path) -> gio.FeatureDataset:
    labels = gio.read_labels(path)
    missing = [v.id for v in ds.videos if v.id not in labels]
    if missing:
        raise gio.FormatError(f"labels missing for {missing[:3]}")
    ds.labels = labels
    return ds


def cmd_synth(args) -> None:
    name = args.world or (args.config_preset or "").upper()
    if name not in WORLDS:
        raise UsageError("synth needs --world (or --preset) A, B, C or D")
    world = preset_world(name, args.seed if args.seed is not None else 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gio.write_features(world.dataset, out / "test.gvf")
    gio.write_features(gio.class_dataset(world.syn_normal, world.syn_abn), out / "calib.gvf")
    gio.write_labels(world.dataset.labels, out / "labels.csv", [v.id for v in world.dataset.videos])
    print(f"wrote {out}/test.gvf ({len(world.dataset.videos)} videos), calib.gvf, labels.csv")


def cmd_calibrate(args) -> None:
    cfg = _config(args)
    if args.mode:
        cfg = apply_overrides(cfg, {"mode": args.mode})
    syn_n, syn_a = gio.split_by_class(gio.read_features(args.calib))
    ds = gio.read_features(args.features) if args.features else None
    if ds is not None and ds.dim != syn_n.shape[1]:
        raise DimensionMismatch(f"test dimension {ds.dim} != calibration dimension {syn_n.shape[1]}")
    pri = calibrate_priors(ds, syn_n, syn_a, cfg)
    gio.write_priors(gio.PriorsFile(pri.unified_mean, pri.visual_mean, pri.synthetic_only), args.priors)
    write_bank(pri.bank, args.bank)
    print(f"bank: {pri.bank.k_n} normal, {pri.bank.k_a} anomalous prototypes in D={pri.bank.dim}")


def cmd_infer(args) -> None:
    cfg = _config(args)
    pri = _load_priors(args)
    ds = gio.read_features(args.features)
    if ds.dim != pri.bank.dim:
        raise DimensionMismatch(f"feature dimension {ds.dim} != bank dimension {pri.bank.dim}")
    res = score_with_priors(ds, pri, cfg, threads=max(1, args.threads))
    gio.write_scores_csv(res.traces, args.out)
    if args.json:
        gio.write_scores_json(res.traces, args.json)
    if res.at_base_count:
        print(f"warning: {res.at_base_count} clips coincided with a centering mean", file=sys.stderr)


def cmd_online(args) -> None:
    cfg = _config(args)
    pri = _load_priors(args)
    src = sys.stdin.buffer if args.input == "-" else open(args.input, "rb")
    dst = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        w = csv.writer(dst, lineterminator="\n")
        w.writerow(["video_id", "frame_index", "score"])
        flagged = 0
        for dim, video in gio.iter_videos(src):
            if dim != pri.bank.dim:
                raise DimensionMismatch(f"feature dimension {dim} != bank dimension {pri.bank.dim}")
            frame = 0
            for out in run_online(video.main, pri, cfg):
                flagged += out.at_base
                # causal: each clip score is repeated over its frames, no smoothing
                for _ in range(cfg.frames_per_clip):
                    w.writerow([video.id, frame, repr(out.score)])
                    frame += 1
                dst.flush()
        if flagged:
            print(f"warning: {flagged} clips coincided with the centering mean", file=sys.stderr)
    finally:
        if src is not sys.stdin.buffer:
            src.close()
        if dst is not sys.stdout:
            dst.close()


def cmd_eval(args) -> None:
    scores = gio.read_scores(args.scores)
    labels = gio.read_labels(args.labels)
    s, y = [], []
    for vid, sc in scores.items():
        if vid not in labels or len(labels[vid]) != len(sc):
            raise gio.FormatError(f"labels for {vid!r} missing or of different length")
        s.append(sc)
        y.append(labels[vid])
    s, y = np.concatenate(s), np.concatenate(y)
    print(f"AUC {roc_auc(s, y):.6f}")
    print(f"AP {average_precision(s, y):.6f}")
    if args.features:
        if not (args.priors and args.bank):
            raise UsageError("--features needs --priors and --bank")
        cfg = _config(args)
        pri = _load_priors(args)
        ds = gio.read_features(args.features)
        main, _, _ = ds.stacked()
        feats, _ = center_many(pri.unified_mean, main)
        clip_y = np.concatenate([labels[v.id].reshape(v.clip_count, -1).max(axis=1) for v in ds.videos])
        st = separability_stats(feats, clip_y, pri.bank)
        print(f"delta_mu_deg {st.delta_mu:.4f}")
        print(f"sigma_delta_deg {st.sigma_delta:.4f}")
        print(f"fisher {st.fisher:.4f}")
        print(f"score_overlap {st.score_overlap:.4f}")


def cmd_dlsp(args) -> None:
    layers = gio.read_layers(args.layers)
    normal, abn = zip(*(gio.split_by_class(layer) for layer in layers))
    sal = dlsp_evaluate(list(normal), list(abn))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layer", "kl", "ldr", "entropy", "z_kl", "z_ldr", "z_entropy", "composite"])
        for row in sal.rows():
            w.writerow([row[0], *(repr(float(x)) for x in row[1:])])
    print(f"selected layer {select_layer(sal)}")


def cmd_sweep(args) -> None:
    cfg = _config(args)
    grid = parse_grid_text(Path(args.grid).read_text(encoding="utf-8"))
    syn_n, syn_a = gio.split_by_class(gio.read_features(args.calib))
    ds = _with_labels(gio.read_features(args.features), args.labels)
    rows = sweep(ds, syn_n, syn_a, cfg, grid, threads=max(1, args.threads))
    write_sweep_csv(rows, args.out)
    best = max(rows, key=lambda r: (r.ap, -r.index))
    print(f"best AP {best.ap:.6f} at {best.point}")


COMMANDS = {
    "synth": cmd_synth, "calibrate": cmd_calibrate, "infer": cmd_infer, "online": cmd_online,
    "eval": cmd_eval, "dlsp": cmd_dlsp, "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.threads is not None and args.threads < 1:
        print("geovad: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"geovad: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, UnicodeDecodeError) as exc:
        print(f"geovad: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GeoVadError as exc:
        print(f"geovad: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
