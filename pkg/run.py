"""
occukit: occupancy pseudo-labels, radar/camera fusion reference blocks,
losses and metrics.
CLI entry point.
"""

import argparse
import io
import json
import os
import sys
from typing import Optional

import numpy as np

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config.run_config import RunConfig, class_names, load_class_table, load_run_config
from config.settings import settings
from models.errors import ConfigError, FormatError, MetricError, OccukitError
from models.fusion import init_block_weights
from models.grid import VoxelGrid
from tools.console import console, error, log, table
from tools.file_handler import atomic_write_bytes, load_points_csv, save_to_json


# ── helpers ─────────────────────────────────────────────────────────────────

def _dump_bev(path: Optional[str], grid: VoxelGrid, config: RunConfig) -> None:
    if not path:
        return
    from tools.bev_image import write_bev_ppm

    write_bev_ppm(path, grid, load_class_table(config.class_table))
    log("BEV", f"top-down image written to {path}")


def _out(args, output_dir: str, default_name: str) -> str:
    """--out, or `default_name` under the configured output directory."""
    return args.out or os.path.join(output_dir, default_name)


def _save_npy(path: str, array: np.ndarray) -> str:
    buf = io.BytesIO()
    np.save(buf, array)
    return atomic_write_bytes(path, buf.getvalue())


# ── subcommands ─────────────────────────────────────────────────────────────

def cmd_gen_labels(args) -> int:
    from graph.workflow import run_pseudo_labels
    from tools.formats import write_grid
    from tools.scene_io import load_scene

    config = load_run_config(args.config)
    scene = load_scene(args.scene)
    state = run_pseudo_labels(scene, config)
    grid = state["occupancy"]
    out = write_grid(_out(args, config.io.output_dir, "labels.mocg"), grid)

    counts = state.get("counts", {})
    table("Pseudo-label stages", ["stage", "points"], [
        ["extracted", counts.get("extracted")],
        ["filtered", counts.get("filtered")],
        ["labeled", counts.get("labeled")],
        ["voxelized", counts.get("voxelized")],
    ])
    log("Labels", f"grid written to {out}")
    _dump_bev(args.dump_bev_pgm, grid, config)
    return 0


def _grid_pairs(pred: str, gt: str) -> list[tuple[str, str]]:
    """(pred, gt) file pairs; directories pair grids by file name."""
    if os.path.isdir(pred) or os.path.isdir(gt):
        if not (os.path.isdir(pred) and os.path.isdir(gt)):
            raise ConfigError("--pred and --gt must both be files or both be directories")
        names = sorted(n for n in os.listdir(pred) if n.endswith(".mocg"))
        if not names:
            raise FormatError("no .mocg grids", pred)
        pairs = []
        for name in names:
            gt_path = os.path.join(gt, name)
            if not os.path.isfile(gt_path):
                raise FormatError("missing file", gt_path)
            pairs.append((os.path.join(pred, name), gt_path))
        return pairs
    return [(pred, gt)]


def cmd_eval(args) -> int:
    from scoring.metrics import build_report, confusion
    from tools.formats import read_grid

    config = load_run_config(args.config)
    matrix = None
    pairs = _grid_pairs(args.pred, args.gt)
    for pred_path, gt_path in pairs:
        m = confusion(read_grid(pred_path), read_grid(gt_path), ignore=args.ignore or ())
        matrix = m if matrix is None else matrix + m

    names = class_names(load_class_table(config.class_table), matrix.num_classes)
    report = build_report(matrix, names, extra={"frames": len(pairs), "class_table": config.class_table})

    rows = [["SC IoU", f"{report['sc_iou']:.4f}"], ["mIoU", f"{report['miou']:.4f}"]]
    rows += [[name, None if v is None else f"{v:.4f}"] for name, v in report["per_class"].items()]
    table(f"Occupancy metrics ({len(pairs)} frame(s))", ["class", "IoU"], rows)
    if args.report:
        save_to_json(report, args.report)
        log("Eval", f"report written to {args.report}")
    else:
        print(json.dumps(report, indent=2))
    return 0


def cmd_fuse_demo(args) -> int:
    from fusion.pipeline import fuse_scene
    from tools.formats import load_weights, save_weights, write_grid
    from tools.scene_io import load_scene

    config = load_run_config(args.config)
    section = config.fusion
    if args.frames is not None:
        if args.frames < 1:
            raise ConfigError(f"--frames must be at least 1, got {args.frames}")
        section = section.model_copy(update={"frames": args.frames})
    cfg = section.to_fusion_config()

    if args.init_weights and not os.path.exists(args.weights):
        seed = config.seed if args.seed is None else args.seed
        save_weights(args.weights, init_block_weights(cfg, seed))
        log("Fuse", f"initialized weights (seed {seed}) at {args.weights}")
    weights = load_weights(args.weights).validate(cfg)

    scene = load_scene(args.scene)
    fused = fuse_scene(scene, section.grid, weights, cfg)
    out = write_grid(_out(args, config.io.output_dir, "fused.mocg"), fused.grid)
    _save_npy(f"{out}.probs.npy", fused.probs)
    log("Fuse", f"{cfg.frames} frame(s) fused, grid written to {out}")
    _dump_bev(args.dump_bev_pgm, fused.grid, config)
    return 0


def cmd_gradcheck(args) -> int:
    from scoring.gradcheck import TOLERANCE, run_gradcheck

    if args.trials < 1:
        raise ConfigError(f"--trials must be at least 1, got {args.trials}")
    seeds = args.seed or [settings.seed]
    worst: dict[str, float] = {}
    for seed in seeds:
        report = run_gradcheck(seed, args.trials, adversarial=args.adversarial)
        for name, err in report.max_error.items():
            worst[name] = max(worst.get(name, 0.0), err)

    passed = all(err < TOLERANCE for err in worst.values())
    table(
        f"Gradient check ({len(seeds)} seed(s) x {args.trials} trials)",
        ["loss", "max rel. error", "status"],
        [[name, f"{err:.3e}", "ok" if err < TOLERANCE else "FAIL"] for name, err in worst.items()],
    )
    return 0 if passed else 1


def cmd_make_fixture(args) -> int:
    from tools.fixtures import write_fixture

    seed = settings.seed if args.seed is None else args.seed
    out = _out(args, settings.output_dir, args.kind)
    fixture = write_fixture(args.kind, seed, out)
    log("Fixture", f"{args.kind} ({len(fixture.scene.frames)} frame(s)) written to {out}")
    return 0


def cmd_voxelize(args) -> int:
    from tools.formats import read_points, write_grid
    from tools.grid_ops import voxelize_points

    config = load_run_config(args.config)
    if args.points.lower().endswith(".csv"):
        cloud = load_points_csv(args.points)
    else:
        cloud = read_points(args.points)
    num_classes = args.num_classes or len(load_class_table(config.class_table))
    vox = voxelize_points(cloud, config.grid_spec, num_classes)
    out = write_grid(_out(args, config.io.output_dir, "voxels.mocg"), vox.grid)
    log("Voxelize", f"{len(cloud)} points -> {len(vox.members)} occupied voxels, written to {out}")
    _dump_bev(args.dump_bev_pgm, vox.grid, config)
    return 0


def cmd_mix_labels(args) -> int:
    from tools.label_mixing import mix_labels

    seed = settings.seed if args.seed is None else args.seed
    out = _out(args, settings.output_dir, "mixed")
    sources = mix_labels(args.frames, args.gt_dir, args.pseudo_dir, args.ratio, seed, out)
    n_gt = sum(1 for s in sources.values() if s == "gt")
    log("Mix", f"{n_gt} ground-truth and {len(sources) - n_gt} pseudo-label frame(s) written to {out}")
    return 0


# ── parser ──────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    from tools.fixtures import FIXTURE_KINDS

    parser = argparse.ArgumentParser(
        prog="occukit",
        description="occukit: occupancy pseudo-labels, fusion blocks, losses and metrics",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python run.py make-fixture --kind plane+car --out scenes/plane_car
  python run.py gen-labels --scene scenes/plane_car --out output/labels.mocg
  python run.py eval --pred output/labels.mocg --gt scenes/plane_car/expected.mocg
  python run.py gradcheck --seed 0 1 2 --trials 100
        """,
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help=f"Worker threads for per-frame stages (default: {settings.threads}; 1 = reference mode)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def _config(p):
        p.add_argument(
            "--config",
            type=str,
            default=None,
            help="Run configuration JSON/YAML (default: config/omnihd.json)",
        )

    def _bev(p):
        p.add_argument(
            "--dump-bev-pgm",
            type=str,
            default=None,
            metavar="PATH",
            help="Also write a top-down class-color image (binary PPM)",
        )

    p = sub.add_parser("gen-labels", help="Generate an occupancy pseudo-label grid for a scene")
    p.add_argument("--scene", required=True, help="Scene directory")
    p.add_argument("--out", default=None, help="Output MOCG grid (default: <output_dir>/labels.mocg)")
    _config(p)
    _bev(p)
    p.set_defaults(func=cmd_gen_labels)

    p = sub.add_parser("eval", help="Score predicted grids against ground truth")
    p.add_argument("--pred", required=True, help="Predicted MOCG grid or directory of grids")
    p.add_argument("--gt", required=True, help="Ground-truth MOCG grid or directory of grids")
    p.add_argument("--ignore", type=int, nargs="*", default=None, help="Ground-truth class ids to skip")
    p.add_argument("--report", default=None, help="Write the JSON report here (default: stdout)")
    _config(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fuse-demo", help="Run the radar/camera fusion blocks on a scene")
    p.add_argument("--scene", required=True, help="Scene directory")
    p.add_argument("--weights", required=True, help="MOBW weight bundle")
    p.add_argument("--out", default=None, help="Output MOCG grid, probabilities go to <out>.probs.npy (default: <output_dir>/fused.mocg)")
    p.add_argument("--init-weights", action="store_true", help="Write a seeded weight bundle if --weights does not exist")
    p.add_argument("--seed", type=int, default=None, help="Seed for --init-weights (default: config seed)")
    p.add_argument("--frames", type=int, default=None, help="Temporal window T (default: from config)")
    _config(p)
    _bev(p)
    p.set_defaults(func=cmd_fuse_demo)

    p = sub.add_parser("gradcheck", help="Check analytic loss gradients against finite differences")
    p.add_argument("--seed", type=int, nargs="+", default=None, help="One or more seeds")
    p.add_argument("--trials", type=int, default=100, help="Random cases per seed (default: 100)")
    p.add_argument("--adversarial", action="store_true", help="Use near-one-hot probabilities")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("make-fixture", help="Write a synthetic scene directory")
    p.add_argument("--kind", required=True, choices=sorted(FIXTURE_KINDS), help="Fixture kind")
    p.add_argument("--seed", type=int, default=None, help="Fixture seed")
    p.add_argument("--out", default=None, help="Output scene directory (default: <output_dir>/<kind>)")
    p.set_defaults(func=cmd_make_fixture)

    p = sub.add_parser("voxelize", help="Voxelize a labeled point cloud")
    p.add_argument("--points", required=True, help="MOPC cloud or CSV with a header row")
    p.add_argument("--out", default=None, help="Output MOCG grid (default: <output_dir>/voxels.mocg)")
    p.add_argument("--num-classes", type=int, default=None, help="K (default: class table length)")
    _config(p)
    _bev(p)
    p.set_defaults(func=cmd_voxelize)

    p = sub.add_parser("mix-labels", help="Mix ground-truth and pseudo-label grids by ratio")
    p.add_argument("--gt-dir", required=True, help="Directory of ground-truth <frame>.mocg grids")
    p.add_argument("--pseudo-dir", required=True, help="Directory of pseudo-label <frame>.mocg grids")
    p.add_argument("--ratio", type=float, required=True, help="Fraction of frames taken from ground truth")
    p.add_argument("--frames", nargs="*", default=None, help="Frame ids (default: every grid in --pseudo-dir)")
    p.add_argument("--seed", type=int, default=None, help="Selection seed")
    p.add_argument("--out", default=None, help="Output directory (default: <output_dir>/mixed)")
    p.set_defaults(func=cmd_mix_labels)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """Parse arguments and run one subcommand; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if args.threads is not None:
        if args.threads < 1:
            error("--threads must be at least 1")
            return 2
        settings.threads = args.threads

    try:
        return args.func(args)
    except MetricError as e:
        error(str(e))
        return 1
    except (OccukitError, OSError) as e:
        error(str(e))
        return 2
    finally:
        console.file.flush()


if __name__ == "__main__":
    sys.exit(main())
