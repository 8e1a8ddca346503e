"""Command-line interface.

Subcommands: gen, reconstruct, eval, baseline, render.
Exit codes: 0 success, 2 config error, 3 I/O error, 4 data-consistency
error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .dataset import generate_dataset, load_config, load_manifest, load_sample
from .errors import ConfigError, DataConsistencyError, FileFormatError
from .formats import read_tensor, write_pgm16, write_ply, write_tensor, write_toml
from .frontdepth import clamp_gt
from .geometry import SonarIntrinsics, Pose
from .metrics import chamfer_fast, depth_map_to_point_cloud, mae
from .occupancy import InverseSensorModel, OccupancyGrid, extract_surface, integrate_view
from .pipeline import ReconstructionParams, reconstruct
from .simulator import FrontDepthMap


def _triple(text, cast):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated values")
    return tuple(cast(p) for p in parts)


def build_parser():
    p = argparse.ArgumentParser(prog="sonarsweep", description=__doc__)
    p.add_argument("--version", action="version", version=f"sonarsweep {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=None, help="override the config seed")

    r = sub.add_parser("reconstruct", help="plane-sweep reconstruction of dataset samples")
    r.add_argument("--manifest", required=True)
    r.add_argument("--out", required=True)
    sel = r.add_mutually_exclusive_group(required=True)
    sel.add_argument("--sample", help="sample id to reconstruct")
    sel.add_argument("--all", action="store_true")
    r.add_argument("--feature-mode", default="patch-stats")
    r.add_argument("--planes", type=int, default=None, help="override elevation plane count")
    r.add_argument("--sigma", type=lambda s: _triple(s, float), default=(2.0, 1.0, 1.0))
    r.add_argument("--tau", type=float, default=None)
    r.add_argument("--upsample", type=lambda s: _triple(s, int), default=(1, 1, 1))
    r.add_argument("--downsample-factor", type=int, default=1)
    r.add_argument("--views", type=int, default=None, help="use at most this many views")
    r.add_argument("--no-warp", action="store_true", help="ablation: skip elevation plane warping")
    r.add_argument("--threads", type=int, default=1)

    e = sub.add_parser("eval", help="score estimates against ground truth")
    e.add_argument("--manifest", required=True)
    e.add_argument("--estimates", required=True)
    e.add_argument("--out", default=None, help="report directory (default: estimates dir)")

    b = sub.add_parser("baseline", help="two-frame occupancy-mapping baseline")
    b.add_argument("--manifest", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--cell-size", type=float, default=None)
    b.add_argument("--occ-threshold", type=float, default=1.0, help="log-odds surface threshold")
    b.add_argument("--views", type=int, default=2)
    b.add_argument("--threads", type=int, default=1)

    v = sub.add_parser("render", help="render a rank-2 tensor to a 16-bit PGM heatmap")
    v.add_argument("--input", required=True)
    v.add_argument("--out", required=True)
    return p


def cmd_gen(args):
    config = load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    manifest = generate_dataset(config, args.out)
    print(f"wrote {len(manifest.samples)} samples to {args.out}")
    return 0


def _reconstruct_one(manifest, record, params, out_dir):
    ref, sources, gt, mask = load_sample(manifest, record)
    result = reconstruct(ref, sources, list(record.rel_poses), manifest.intrinsics, params)
    depth_path = os.path.join(out_dir, f"{record.sample_id}_depth.snr")
    write_tensor(depth_path, result.depth.depths, ("elevation", "azimuth"))
    cloud = depth_map_to_point_cloud(result.depth, mask, manifest.intrinsics)
    write_ply(os.path.join(out_dir, f"{record.sample_id}_cloud.ply"), cloud)
    return record.sample_id, result.elapsed


def cmd_reconstruct(args):
    manifest = load_manifest(args.manifest)
    k = manifest.intrinsics
    if args.planes is not None:
        from dataclasses import replace as dc_replace

        k = dc_replace(k, elevation_planes=args.planes)
    params = ReconstructionParams(
        feature_mode=args.feature_mode,
        downsample_factor=args.downsample_factor,
        sigma=args.sigma,
        tau=args.tau,
        upsample=args.upsample,
        warp=not args.no_warp,
        max_views=args.views,
    )
    if args.all:
        records = list(manifest.samples)
    else:
        records = [r for r in manifest.samples if r.sample_id == args.sample]
        if not records:
            raise DataConsistencyError(f"sample {args.sample!r} not found in manifest")
    os.makedirs(args.out, exist_ok=True)
    from dataclasses import replace as dc_replace

    manifest = dc_replace(manifest, intrinsics=k)
    timings = {}
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            for sid, dt in pool.map(
                lambda rec: _reconstruct_one(manifest, rec, params, args.out), records
            ):
                timings[sid] = dt
    else:
        for rec in records:
            sid, dt = _reconstruct_one(manifest, rec, params, args.out)
            timings[sid] = dt
    write_toml(
        os.path.join(args.out, "run.toml"),
        {
            "command": "reconstruct",
            "generator": f"sonarsweep {__version__}",
            "manifest": os.path.abspath(args.manifest),
            "params": params.as_table(),
            "timing_s": {sid: round(t, 6) for sid, t in sorted(timings.items())},
        },
    )
    print(f"reconstructed {len(records)} sample(s) into {args.out}")
    return 0


def _metrics_for(manifest, record, est_depths):
    ref, sources, gt, mask = load_sample(manifest, record)
    gt = clamp_gt(gt)
    est = FrontDepthMap(est_depths.astype(float), manifest.intrinsics)
    if est.depths.shape != gt.depths.shape:
        raise DataConsistencyError(
            f"estimate for sample {record.sample_id} has shape {est.depths.shape}, "
            f"ground truth is {gt.depths.shape}"
        )
    sample_mae = mae(est, gt)
    if mask.any():
        cd = chamfer_fast(
            depth_map_to_point_cloud(est, mask, manifest.intrinsics),
            depth_map_to_point_cloud(gt, mask, manifest.intrinsics),
        )
    else:
        cd = float("nan")
    return sample_mae, cd


def _write_report(out_dir, rows, missing, name="report"):
    """rows: list of (id, mae, cd). Emits an aligned text table and a TOML file."""
    maes = np.array([r[1] for r in rows], dtype=float)
    cds = np.array([r[2] for r in rows], dtype=float)
    cds_ok = cds[~np.isnan(cds)]
    lines = [f"{'sample':<10}{'mae':>14}{'cd':>14}"]
    for sid, m, c in rows:
        cd_txt = f"{c:.6f}" if not np.isnan(c) else "n/a"
        lines.append(f"{sid:<10}{m:>14.6f}{cd_txt:>14}")
    lines.append("")
    if rows:
        lines.append(f"{'mae':<10}mean {maes.mean():.6f}  std {maes.std():.6f}")
        if cds_ok.size:
            lines.append(f"{'cd':<10}mean {cds_ok.mean():.6f}  std {cds_ok.std():.6f}")
    if missing:
        lines.append("missing estimates: " + ", ".join(missing))
    text = "\n".join(lines) + "\n"
    with open(os.path.join(out_dir, f"{name}.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    table = {
        "samples": [
            {"id": sid, "mae": float(m), "cd": float(c) if not np.isnan(c) else float("nan")}
            for sid, m, c in rows
        ],
        "aggregate": {
            "mae_mean": float(maes.mean()) if rows else 0.0,
            "mae_std": float(maes.std()) if rows else 0.0,
            "cd_mean": float(cds_ok.mean()) if cds_ok.size else 0.0,
            "cd_std": float(cds_ok.std()) if cds_ok.size else 0.0,
            "count": len(rows),
            "missing": list(missing),
        },
    }
    write_toml(os.path.join(out_dir, f"{name}.toml"), table)
    return text


def cmd_eval(args):
    manifest = load_manifest(args.manifest)
    out_dir = args.out or args.estimates
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    missing = []
    for rec in manifest.samples:
        path = os.path.join(args.estimates, f"{rec.sample_id}_depth.snr")
        if not os.path.exists(path):
            missing.append(rec.sample_id)
            continue
        est, _ = read_tensor(path)
        sample_mae, cd = _metrics_for(manifest, rec, est)
        rows.append((rec.sample_id, sample_mae, cd))
    text = _write_report(out_dir, rows, missing)
    sys.stdout.write(text)
    if missing:
        return 4
    return 0


def _baseline_one(manifest, record, args):
    ref, sources, gt, mask = load_sample(manifest, record)
    k = manifest.intrinsics
    grid = OccupancyGrid.for_scope(k, cell_size=args.cell_size)
    grid = integrate_view(grid, ref, Pose.identity(), k)
    for img, pose in list(zip(sources, record.rel_poses))[: max(args.views - 1, 0)]:
        grid = integrate_view(grid, img, pose, k)
    cloud = extract_surface(grid, args.occ_threshold)
    write_ply(os.path.join(args.out, f"{record.sample_id}_cloud.ply"), cloud)
    gt_cloud = depth_map_to_point_cloud(clamp_gt(gt), mask, k)
    if cloud.is_empty or gt_cloud.is_empty:
        return record.sample_id, float("nan")
    return record.sample_id, chamfer_fast(cloud, gt_cloud)


def cmd_baseline(args):
    manifest = load_manifest(args.manifest)
    os.makedirs(args.out, exist_ok=True)
    results = []
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(lambda rec: _baseline_one(manifest, rec, args), manifest.samples))
    else:
        for rec in manifest.samples:
            results.append(_baseline_one(manifest, rec, args))
    cds = np.array([c for _, c in results], dtype=float)
    ok = cds[~np.isnan(cds)]
    lines = [f"{'sample':<10}{'cd':>14}"]
    for sid, c in results:
        lines.append(f"{sid:<10}" + (f"{c:>14.6f}" if not np.isnan(c) else f"{'n/a':>14}"))
    lines.append("")
    if ok.size:
        lines.append(f"{'cd':<10}mean {ok.mean():.6f}  std {ok.std():.6f}")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(args.out, "baseline_report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    write_toml(
        os.path.join(args.out, "baseline_report.toml"),
        {
            "samples": [{"id": sid, "cd": float(c)} for sid, c in results],
            "aggregate": {
                "cd_mean": float(ok.mean()) if ok.size else 0.0,
                "cd_std": float(ok.std()) if ok.size else 0.0,
                "count": len(results),
            },
        },
    )
    sys.stdout.write(text)
    return 0


def cmd_render(args):
    arr, _ = read_tensor(args.input)
    if arr.ndim != 2:
        raise DataConsistencyError("render expects a rank-2 tensor")
    write_pgm16(args.out, arr)
    print(f"wrote {args.out}")
    return 0


_DISPATCH = {
    "gen": cmd_gen,
    "reconstruct": cmd_reconstruct,
    "eval": cmd_eval,
    "baseline": cmd_baseline,
    "render": cmd_render,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, FileFormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except DataConsistencyError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
