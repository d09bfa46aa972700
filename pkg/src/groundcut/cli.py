"""Command-line entry point: ``segment``, ``eval``, ``export`` and ``synth``.

Exit status is 0 when every item succeeded, 1 when some scans failed (the
batch still runs to the end) and 2 for configuration or usage errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import synth
from .config import PipelineConfig, load_config, parse_assignments
from .errors import ConfigError, GroundcutError, UsageError
from .labels import LabelState, TruthClass
from .metrics import ScanMetrics, score_scan, write_report
from .pipeline import segment
from .pointcloud import (
    PointCloud,
    load_scan,
    read_label_ids,
    resolve_remap,
    write_label_ids,
    write_scan,
)
from .sensor import SensorModel, resolve_sensor

log = logging.getLogger("groundcut")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2

# codes written to predicted label files; records dropped on load get INVALID
PRED_INVALID = 0
PRED_GROUND = int(LabelState.GROUND)
PRED_OBSTACLE = int(LabelState.OBSTACLE)

# raw ids written for synthetic truth, chosen to match the default remap
TRUTH_IDS = {TruthClass.GROUND: 40, TruthClass.ORDINARY: 50, TruthClass.KEY: 10}

PINK = (255, 192, 203)
RED = (255, 0, 0)
GREEN = (0, 255, 0)
GRAY = (128, 128, 128)

REFERENCE_NOTE = (
    "reference means on SemanticKITTI with the full pipeline: "
    "recall_o 0.9572 (all sequences), iou_g 0.6331 (sequence 04); dataset-bound, not targets"
)


# -- helpers -----------------------------------------------------------------


def _collect(inputs: list[str], suffix: str) -> list[Path]:
    out: list[Path] = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            out.extend(sorted(p.glob(f"*{suffix}")))
        else:
            out.append(p)
    return out


def _config_from_args(args) -> PipelineConfig:
    overrides = parse_assignments(getattr(args, "set", None))
    if getattr(args, "stage", None):
        overrides["pipeline.stage"] = args.stage
    return load_config(args.config, overrides)


def _sensor(cfg: PipelineConfig) -> SensorModel:
    try:
        return resolve_sensor(cfg.sensor)
    except GroundcutError as exc:
        raise ConfigError(str(exc)) from exc
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load sensor model {cfg.sensor!r}: {exc}") from exc


def prediction_codes(cloud: PointCloud, labels: np.ndarray) -> np.ndarray:
    """Expand per-point labels to one code per file record."""
    codes = np.full(cloud.record_count, PRED_INVALID, dtype=np.uint32)
    codes[cloud.source_index] = np.where(labels == LabelState.OBSTACLE, PRED_OBSTACLE, PRED_GROUND)
    return codes


# -- segment -----------------------------------------------------------------


def _segment_one(job: tuple[str, str, PipelineConfig, SensorModel]) -> dict:
    scan_path, out_dir, cfg, model = job
    scan_id = Path(scan_path).stem
    row = {"scan_id": scan_id, "points": 0, "runtime_ms": "", "fallback": "", "status": "ok"}
    try:
        cloud = load_scan(scan_path)
        res = segment(cloud, model, cfg)
        write_label_ids(Path(out_dir) / f"{scan_id}.label", prediction_codes(cloud, res.labels))
    except (GroundcutError, OSError) as exc:
        row["status"] = f"error: {exc}"
        return row
    row.update(points=len(cloud), runtime_ms=f"{res.runtime_ms:.3f}", fallback=int(res.fallback))
    return row


def cmd_segment(args) -> int:
    cfg = _config_from_args(args)
    model = _sensor(cfg)
    cfg.check_rows(model.laser_count)
    scans = _collect(args.inputs, ".bin")
    if not scans:
        raise UsageError("no input scans")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(str(p), str(out_dir), cfg, model) for p in scans]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_segment_one, jobs))
    else:
        rows = [_segment_one(j) for j in jobs]
    timing = Path(args.timing) if args.timing else out_dir / "timing.csv"
    with open(timing, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["scan_id", "points", "runtime_ms", "fallback", "status"])
        w.writeheader()
        w.writerows(rows)
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        log.error("%s: %s", r["scan_id"], r["status"])
    log.info("segmented %d of %d scans", len(rows) - len(failed), len(rows))
    return EXIT_PARTIAL if failed else EXIT_OK


# -- eval --------------------------------------------------------------------


def _read_timing(path: str | None) -> dict[str, float]:
    if not path:
        return {}
    with open(path, newline="", encoding="utf-8") as fh:
        return {r["scan_id"]: float(r["runtime_ms"]) for r in csv.DictReader(fh) if r.get("runtime_ms")}


def _pair_label_files(pred: str, truth: str) -> list[tuple[str, Path, Path]]:
    p, t = Path(pred), Path(truth)
    if p.is_dir() != t.is_dir():
        raise UsageError("--pred and --truth must both be files or both be directories")
    if not p.is_dir():
        return [(p.stem, p, t)]
    pairs = []
    for pf in sorted(p.glob("*.label")):
        tf = t / pf.name
        pairs.append((pf.stem, pf, tf))
    return pairs


def score_files(pred_path, truth_path, remap, runtime_ms=None) -> ScanMetrics:
    """Score one predicted label file; records coded invalid are left out."""
    pred = read_label_ids(pred_path)
    truth_ids = read_label_ids(truth_path)
    if pred.size != truth_ids.size:
        raise UsageError(f"{pred_path}: {pred.size} predictions for {truth_ids.size} truth labels")
    truth, _ = remap(truth_ids)
    keep = pred != PRED_INVALID
    return score_scan(pred[keep], truth[keep], runtime_ms)


def cmd_eval(args) -> int:
    try:
        remap = resolve_remap(args.remap)
    except GroundcutError as exc:
        raise ConfigError(str(exc)) from exc
    timing = _read_timing(args.timing)
    pairs = _pair_label_files(args.pred, args.truth)
    if not pairs:
        raise UsageError("no predicted label files")
    rows: list[tuple[str, ScanMetrics]] = []
    failed = 0
    for scan_id, pf, tf in pairs:
        try:
            rows.append((scan_id, score_files(pf, tf, remap, timing.get(scan_id))))
        except (GroundcutError, OSError) as exc:
            log.error("%s: %s", scan_id, exc)
            failed += 1
    if not rows:
        return EXIT_PARTIAL
    summary = write_report(args.out, rows, REFERENCE_NOTE)
    mean = summary.iou_g.mean, summary.recall_o.mean
    log.info("scans=%d mean iou_g=%s mean recall_o=%s", len(rows), *mean)
    return EXIT_PARTIAL if failed else EXIT_OK


# -- export ------------------------------------------------------------------


def write_ply(path, xyz: np.ndarray, colors: np.ndarray) -> None:
    """ASCII PLY with one ``x y z r g b`` line per vertex."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(xyz)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        fh.write("end_header\n")
        for (x, y, z), (r, g, b) in zip(xyz.tolist(), colors.tolist()):
            fh.write(f"{x:.6f} {y:.6f} {z:.6f} {r} {g} {b}\n")


def label_colors(codes: np.ndarray, truth_remap=None) -> np.ndarray:
    """Per-record colors: ground pink and obstacle red.

    With ``truth_remap`` the codes are raw truth ids and ordinary obstacles
    are drawn green.
    """
    colors = np.tile(np.array(GRAY, dtype=np.uint8), (codes.size, 1))
    if truth_remap is None:
        colors[codes == PRED_GROUND] = PINK
        colors[codes == PRED_OBSTACLE] = RED
    else:
        cls, _ = truth_remap(codes)
        colors[cls == TruthClass.GROUND] = PINK
        colors[cls == TruthClass.KEY] = RED
        colors[cls == TruthClass.ORDINARY] = GREEN
    return colors


def cmd_export(args) -> int:
    cloud = load_scan(args.scan)
    codes = read_label_ids(args.labels)
    if codes.size != cloud.record_count:
        raise UsageError(f"{args.labels}: {codes.size} labels for {cloud.record_count} scan records")
    remap = resolve_remap(args.remap) if args.truth else None
    colors = label_colors(codes[cloud.source_index], remap)
    write_ply(args.out, cloud.xyz, colors)
    return EXIT_OK


# -- synth -------------------------------------------------------------------


def _scene_specs(args) -> list[tuple[str, synth.SceneSpec]]:
    if args.scene:
        return [(args.name or Path(args.scene).stem, synth.SceneSpec.load(args.scene))]
    name = args.name or args.preset
    noise = args.noise
    if args.preset == "random":
        return [(f"{name}_{s:03d}", synth.random_scene(s, **({} if noise is None else {"noise_sigma": noise})))
                for s in range(args.seed, args.seed + args.count)]
    kw = {"seed": args.seed}
    if noise is not None:
        kw["noise_sigma"] = noise
    factory = {"flat": synth.flat_scene, "obstacle": synth.obstacle_scene, "curb": synth.curb_scene}[args.preset]
    return [(name, factory(**kw))]


def write_truth(path, cloud: PointCloud) -> None:
    ids = np.zeros(cloud.record_count, dtype=np.uint32)
    for cls, raw in TRUTH_IDS.items():
        ids[cloud.source_index[cloud.class_label == cls]] = raw
    write_label_ids(path, ids)


def cmd_synth(args) -> int:
    cfg = _config_from_args(args)
    model = _sensor(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, spec in _scene_specs(args):
        scan = synth.generate(spec, model)
        write_scan(out_dir / f"{name}.bin", scan.cloud)
        write_truth(out_dir / f"{name}.label", scan.cloud)
        log.info("%s: %d points", name, len(scan.cloud))
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groundcut", description="LiDAR ground segmentation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="label scans as ground or obstacle")
    p.add_argument("inputs", nargs="+", help=".bin scans or directories of them")
    p.add_argument("--out", required=True, help="directory for .label outputs")
    p.add_argument("--stage", choices=("coarse", "adjacency", "full"))
    p.add_argument("--jobs", type=int, default=1, help="scans processed in parallel")
    p.add_argument("--timing", help="timing CSV path (default OUT/timing.csv)")
    _add_config_args(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="score predictions against truth labels")
    p.add_argument("--pred", required=True, help="predicted .label file or directory")
    p.add_argument("--truth", required=True, help="truth .label file or directory")
    p.add_argument("--remap", default="semantickitti", help="'semantickitti' or a remap INI file")
    p.add_argument("--timing", help="timing CSV from segment, fills the runtime column")
    p.add_argument("--out", required=True, help="CSV report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="write a colored ASCII PLY")
    p.add_argument("scan")
    p.add_argument("labels")
    p.add_argument("--out", required=True)
    p.add_argument("--truth", action="store_true", help="labels are raw truth ids")
    p.add_argument("--remap", default="semantickitti")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("synth", help="generate a synthetic scan with truth labels")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scene", help="scene INI file")
    src.add_argument("--preset", choices=("flat", "obstacle", "curb", "random"), default="obstacle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1, help="number of random scenes")
    p.add_argument("--noise", type=float, help="range noise sigma in meters")
    p.add_argument("--name", help="output file stem")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_args(p)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (GroundcutError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
