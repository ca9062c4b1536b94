"""``gausskin`` command line.

Exit codes: 0 success, 1 validation or comparison failure (including
inconsistent assets), 2 usage error, 3 I/O or file-format error.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
import itertools
import json
import math
import os
from pathlib import Path
import platform
import statistics
import sys
import time
import warnings

import numpy as np

from . import errors
from ._parallel import default_workers
from .gsmodel import GaussianCloud, activate_cloud, ply_read, ply_write
from .metrics import compare_images, psnr_to_json
from .raster import Camera, fixture_camera, load_camera, render, save_camera
from .rig import (
    AnimationClip,
    Skeleton,
    SkinWeights,
    load_clip,
    load_rig,
    load_weights,
    make_test_clip,
    make_test_rig,
    save_clip,
    save_rig,
    save_weights,
)
from .skinning import EXACT, PosedCloud, SkinningMode, Solver, skin_cloud
from .validate import FAULTS, run_all, suite_assets

REPORT_VERSION = "gausskin-report/1"

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

ASSET_NAMES = {
    "cloud": "cloud.ply",
    "rig": "rig.json",
    "weights": "weights.json",
    "clip": "clip.json",
    "camera": "cam.json",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration

@dataclass
class RunConfig:
    cloud: Path
    rig: Path
    weights: Path
    clip: Path
    camera: Path
    mode: SkinningMode
    solver: Solver
    out: Path
    workers: int
    seed: int


def _solver(args) -> Solver:
    if args.solver == "exact":
        return EXACT
    if args.iters < 1:
        raise UsageError("--iters must be >= 1")
    return Solver("power", args.iters)


def _workers(args) -> int:
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        return args.workers
    try:
        return default_workers()
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _mode(value: str) -> SkinningMode:
    try:
        return SkinningMode.parse(value)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config(args) -> RunConfig:
    base = Path(args.assets) if args.assets else Path(".")
    paths = {key: Path(getattr(args, key) or base / name) for key, name in ASSET_NAMES.items()}
    return RunConfig(mode=_mode(args.mode), solver=_solver(args), out=Path(args.out),
                     workers=_workers(args), seed=args.seed, **paths)


def _resolution(text: str | None, cam: Camera) -> Camera:
    if text is None:
        return cam
    try:
        if "x" in text.lower():
            w, h = (int(v) for v in text.lower().split("x"))
        else:
            w = h = int(text)
    except ValueError:
        raise UsageError(f"--resolution expects N or WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise UsageError("--resolution must be positive")
    return cam.with_resolution(w, h)


@dataclass
class Assets:
    cloud: GaussianCloud
    skeleton: Skeleton
    weights: SkinWeights
    clip: AnimationClip
    camera: Camera | None


def _load_assets(cfg: RunConfig, need_camera: bool = True) -> Assets:
    for key in ASSET_NAMES:
        if key == "camera" and not need_camera:
            continue
        path = getattr(cfg, key)
        if not path.is_file():
            raise FileNotFoundError(f"{path}: {key} file not found")
    cloud = ply_read(cfg.cloud)
    skeleton = load_rig(cfg.rig)
    weights = load_weights(cfg.weights)
    clip = load_clip(cfg.clip)
    camera = load_camera(cfg.camera) if need_camera else None
    if len(weights) != len(cloud):
        raise errors.AssetMismatchError(
            f"{cfg.weights}: {len(weights)} weight rows but {cfg.cloud} has {len(cloud)} Gaussians")
    if weights.joint_count != len(skeleton):
        raise errors.AssetMismatchError(
            f"{cfg.weights}: joint_count {weights.joint_count} but {cfg.rig} has "
            f"{len(skeleton)} joints")
    if len(clip.frames[0]) != len(skeleton):
        raise errors.AssetMismatchError(
            f"{cfg.clip}: poses have {len(clip.frames[0])} joints but {cfg.rig} has "
            f"{len(skeleton)}")
    return Assets(cloud, skeleton, weights, clip, camera)


def _frames(clip: AnimationClip, frame: int | None) -> list[int]:
    if frame is None:
        return list(range(len(clip)))
    if not 0 <= frame < len(clip):
        raise UsageError(f"--frame {frame} out of range (clip has {len(clip)} frames)")
    return [frame]


def _pad(count: int) -> int:
    return max(4, len(str(count - 1)))


def _write_report(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# commands

def cmd_generate_fixture(args) -> int:
    if args.bones < 1:
        raise UsageError("--bones must be >= 1")
    if args.frames < 1:
        raise UsageError("--frames must be >= 1")
    if args.rings < 1 or args.per_ring < 1:
        raise UsageError("--rings and --per-ring must be >= 1")
    skel, weights, cloud = make_test_rig(args.bones, args.per_ring, args.rings, args.seed)
    clip = make_test_clip(skel, args.frames, args.fps)
    w, h = (512, 512) if args.resolution is None else _size(args.resolution)
    cam = fixture_camera(args.bones, w, h)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ply_write(cloud, out / ASSET_NAMES["cloud"])
    save_rig(skel, out / ASSET_NAMES["rig"])
    save_weights(weights, out / ASSET_NAMES["weights"])
    save_clip(clip, out / ASSET_NAMES["clip"])
    save_camera(cam, out / ASSET_NAMES["camera"])
    print(f"wrote {len(cloud)} Gaussians, {len(skel)} joints, {len(clip)} frames to {out} "
          f"(seed {args.seed})")
    return EXIT_OK


def _size(text: str) -> tuple[int, int]:
    cam = _resolution(text, Camera.look_at([0, 0, 1], [0, 0, 0], width=1, height=1))
    return cam.width, cam.height


def posed_to_storage(posed: PosedCloud, canonical: GaussianCloud) -> GaussianCloud:
    """Raw PLY fields for a posed cloud.

    Scales and opacities are pose independent, so the canonical raw values
    pass through untouched rather than through a lossy log/logit round trip.
    """
    return GaussianCloud(posed.positions, posed.rotations, canonical.log_scales,
                         canonical.opacity_logits, posed.sh)


def cmd_skin(args) -> int:
    cfg = _config(args)
    assets = _load_assets(cfg, need_camera=False)
    frames = _frames(assets.clip, 0 if args.frame is None else args.frame)
    pose = assets.clip.frames[frames[0]]
    posed = skin_cloud(assets.cloud, assets.weights, assets.skeleton, pose, cfg.mode, cfg.solver,
                       cfg.workers)
    out = cfg.out
    if out.suffix.lower() != ".ply":
        out = out / f"posed_{frames[0]:0{_pad(len(assets.clip))}d}.ply"
    out.parent.mkdir(parents=True, exist_ok=True)
    ply_write(posed_to_storage(posed, assets.cloud), out)
    print(f"frame {frames[0]} posed with {cfg.mode.value}/{cfg.solver} -> {out}")
    return EXIT_OK


def _render_frames(args, all_frames: bool):
    cfg = _config(args)
    assets = _load_assets(cfg)
    cam = _resolution(args.resolution, assets.camera)
    frames = _frames(assets.clip, None if all_frames else args.frame)
    cfg.out.mkdir(parents=True, exist_ok=True)
    act = activate_cloud(assets.cloud)
    pad = _pad(len(assets.clip))
    written = []
    for k in frames:
        posed = skin_cloud(act, assets.weights, assets.skeleton, assets.clip.frames[k], cfg.mode,
                           cfg.solver, cfg.workers)
        fb = render(posed, cam, args.background, cfg.workers)
        name = cfg.out / f"frame_{k:0{pad}d}.png"
        fb.save_png(name)
        entry = {"frame": k, "time": assets.clip.frames[k].time, "image": name.name}
        if args.mask:
            mask = cfg.out / f"mask_{k:0{pad}d}.png"
            fb.save_mask(mask)
            entry["mask"] = mask.name
        written.append(entry)
    return cfg, cam, written


def cmd_render(args) -> int:
    cfg, _, written = _render_frames(args, all_frames=False)
    print(f"rendered {len(written)} frame(s) with {cfg.mode.value}/{cfg.solver} to {cfg.out}")
    return EXIT_OK


def cmd_animate(args) -> int:
    if args.frame is not None:
        raise UsageError("animate renders the whole clip; use render --frame for one frame")
    cfg, cam, written = _render_frames(args, all_frames=True)
    _write_report(cfg.out / "frames.json", {
        "version": REPORT_VERSION, "kind": "animation", "mode": cfg.mode.value,
        "solver": str(cfg.solver), "resolution": [cam.width, cam.height], "seed": cfg.seed,
        "frames": written})
    print(f"animated {len(written)} frames with {cfg.mode.value}/{cfg.solver} to {cfg.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    modes = [_mode(m) for m in args.modes.split(",") if m.strip()]
    if len(modes) < 2:
        raise UsageError("--modes needs at least two comma-separated modes")
    assets = _load_assets(cfg)
    cam = _resolution(args.resolution, assets.camera)
    frames = _frames(assets.clip, args.frame)
    act = activate_cloud(assets.cloud)
    pairs = list(itertools.combinations(range(len(modes)), 2))
    per_frame = []
    for k in frames:
        pose = assets.clip.frames[k]
        images, det_err = [], None
        for m in modes:
            posed = skin_cloud(act, assets.weights, assets.skeleton, pose, m, cfg.solver,
                               cfg.workers)
            # positions, and so the blended matrices, are the same in every mode
            det_err = float(np.mean(np.abs(posed.blend_det - 1.0)))
            images.append(render(posed, cam, args.background, cfg.workers).rgb)
        row = {"frame": k, "det_error": det_err, "pairs": []}
        for a, b in pairs:
            rep = compare_images(images[a], images[b])
            row["pairs"].append({"a": modes[a].value, "b": modes[b].value, "psnr": rep.psnr,
                                 "ssim": rep.ssim})
        per_frame.append(row)

    summary = []
    for p, (a, b) in enumerate(pairs):
        ps = [r["pairs"][p]["psnr"] for r in per_frame]
        ss = [r["pairs"][p]["ssim"] for r in per_frame]
        summary.append({"a": modes[a].value, "b": modes[b].value,
                        "psnr_mean": _mean_psnr(ps), "psnr_min": min(ps),
                        "ssim_mean": float(np.mean(ss)), "ssim_min": float(min(ss))})
    det_mean = float(np.mean([r["det_error"] for r in per_frame]))

    doc = {
        "version": REPORT_VERSION, "kind": "comparison", "solver": str(cfg.solver),
        "seed": cfg.seed, "resolution": [cam.width, cam.height],
        "modes": [m.value for m in modes], "det_error_mean": det_mean,
        "frames": [{**r, "pairs": [{**p, "psnr": psnr_to_json(p["psnr"])} for p in r["pairs"]]}
                   for r in per_frame],
        "summary": [{**s, "psnr_mean": psnr_to_json(s["psnr_mean"]),
                     "psnr_min": psnr_to_json(s["psnr_min"])} for s in summary],
    }
    out = cfg.out if cfg.out.suffix.lower() == ".json" else cfg.out / "compare.json"
    _write_report(out, doc)

    print(f"{len(frames)} frame(s), solver {cfg.solver}, mean |det - 1| of blended "
          f"matrices: {det_mean:.6g}")
    print(f"{'original':<20} {'skinned':<20} {'PSNR mean':>10} {'PSNR min':>10} "
          f"{'SSIM mean':>10} {'SSIM min':>10}")
    for s in summary:
        print(f"{s['a']:<20} {s['b']:<20} {_fmt_db(s['psnr_mean']):>10} "
              f"{_fmt_db(s['psnr_min']):>10} {s['ssim_mean']:>10.6f} {s['ssim_min']:>10.6f}")
    print(f"report: {out}")
    return EXIT_OK


def _mean_psnr(values: list[float]) -> float:
    # mean over frames of the per-frame MSE, reported back in dB
    mses = [0.0 if math.isinf(v) else 10.0 ** (-v / 10.0) for v in values]
    m = float(np.mean(mses))
    return math.inf if m == 0.0 else -10.0 * math.log10(m)


def _fmt_db(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.3f}"


def cmd_validate(args) -> int:
    faults = args.inject_fault or []
    results = run_all(args.seed, faults)
    if args.assets:
        base = Path(args.assets)
        paths = {key: base / ASSET_NAMES[key] for key in ("cloud", "rig", "weights", "clip")}
        for key, path in paths.items():
            if not path.is_file():
                raise FileNotFoundError(f"{path}: {key} file not found")
        results += suite_assets(ply_read(paths["cloud"]), load_rig(paths["rig"]),
                                load_weights(paths["weights"]), load_clip(paths["clip"]))
    print(f"{'suite':<32} {'max error':>12} {'tolerance':>12}  result")
    for r in results:
        print(f"{r.name:<32} {r.max_error:>12.3e} {r.tolerance:>12.3e}  "
              f"{'pass' if r.passed else 'FAIL'}")
    failed = [r.name for r in results if not r.passed]
    if args.out:
        out = Path(args.out)
        out = out if out.suffix.lower() == ".json" else out / "validate.json"
        _write_report(out, {"version": REPORT_VERSION, "kind": "validation", "seed": args.seed,
                            "faults": list(faults), "suites": [r.to_json() for r in results]})
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_FAIL
    print(f"all {len(results)} suites passed")
    return EXIT_OK


def _timed(fn, reps: int) -> float:
    fn()  # warm-up (also triggers kernel compilation)
    times = []
    for _ in range(reps):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def cmd_bench(args) -> int:
    if args.frames < 1:
        raise UsageError("--frames must be >= 1: nothing to benchmark in an empty clip")
    if args.reps < 5:
        raise UsageError("--reps must be >= 5")
    if args.gaussians < 1:
        raise UsageError("--gaussians must be >= 1")
    workers = _workers(args)
    per_ring = 32
    rings = max(1, math.ceil(args.gaussians / per_ring))
    skel, weights, cloud = make_test_rig(3, per_ring, rings, args.seed)
    clip = make_test_clip(skel, args.frames)
    pose = clip.frames[-1]
    act = activate_cloud(cloud)
    n = len(cloud)
    solvers = [EXACT, Solver("power", args.iters)]
    skin_rows = []
    for mode in SkinningMode:
        for solver in solvers:
            sec = _timed(lambda: skin_cloud(act, weights, skel, pose, mode, solver, workers),
                         args.reps)
            skin_rows.append({"mode": mode.value, "solver": str(solver), "seconds": sec,
                              "gaussians_per_second": n / sec})
    w, h = (512, 512) if args.resolution is None else _size(args.resolution)
    cam = fixture_camera(3, w, h)
    posed = skin_cloud(act, weights, skel, pose, SkinningMode.QUAT_AVERAGE, solvers[1], workers)
    frame_sec = _timed(lambda: render(posed, cam, workers=workers), args.reps)

    doc = {
        "version": REPORT_VERSION, "kind": "benchmark", "seed": args.seed,
        "gaussians": n, "workers": workers, "machine_cpus": os.cpu_count(),
        "machine": platform.processor() or platform.machine(),
        "repetitions": args.reps, "warmup": 1, "statistic": "median",
        "resolution": [w, h], "skinning": skin_rows,
        "render": {"seconds": frame_sec, "fps": 1.0 / frame_sec},
    }
    print(f"{n} Gaussians, {workers} worker(s) on {os.cpu_count()} CPU(s), median of "
          f"{args.reps} after 1 warm-up")
    print(f"{'mode':<20} {'solver':<10} {'ms/frame':>10} {'Gaussians/s':>14}")
    for r in skin_rows:
        print(f"{r['mode']:<20} {r['solver']:<10} {r['seconds'] * 1e3:>10.2f} "
              f"{r['gaussians_per_second']:>14.4g}")
    print(f"render {w}x{h}: {frame_sec * 1e3:.2f} ms/frame ({1.0 / frame_sec:.2f} fps)")
    if args.out:
        out = Path(args.out)
        out = out if out.suffix.lower() == ".json" else out / "bench.json"
        _write_report(out, doc)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p, assets=True, render=False):
    p.add_argument("--seed", type=int, default=7, help="recorded in reports (default 7)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: $GAUSSKIN_WORKERS or CPU count)")
    if assets:
        p.add_argument("--assets", help="directory holding cloud.ply, rig.json, weights.json, "
                                        "clip.json, cam.json")
        for key in ASSET_NAMES:
            p.add_argument(f"--{key}", help=f"override the {key} file")
        p.add_argument("--mode", default=SkinningMode.QUAT_AVERAGE.value,
                       help="skinning mode: " + ", ".join(m.value for m in SkinningMode))
        p.add_argument("--solver", choices=("exact", "power"), default="power")
        p.add_argument("--iters", type=int, default=15, help="power iterations (default 15)")
        p.add_argument("--out", default="out")
        p.add_argument("--frame", type=int, default=None)
    if render:
        p.add_argument("--resolution", default=None, help="N or WxH; rescales the camera")
        p.add_argument("--background", type=float, nargs=3, default=(0.0, 0.0, 0.0),
                       metavar=("R", "G", "B"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gausskin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate-fixture", help="write the procedural tube avatar assets")
    p.add_argument("--bones", type=int, default=3)
    p.add_argument("--rings", type=int, default=40)
    p.add_argument("--per-ring", type=int, default=32)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--resolution", default=None)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default="assets")
    p.set_defaults(func=cmd_generate_fixture)

    p = sub.add_parser("skin", help="pose the cloud at one clip frame and write a PLY")
    _common(p)
    p.set_defaults(func=cmd_skin)

    p = sub.add_parser("render", help="render clip frames (all unless --frame) to PNG")
    _common(p, render=True)
    p.add_argument("--mask", action="store_true", help="also write alpha masks")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("animate", help="render the whole clip plus a frame index")
    _common(p, render=True)
    p.add_argument("--mask", action="store_true", help="also write alpha masks")
    p.set_defaults(func=cmd_animate)

    p = sub.add_parser("compare", help="PSNR/SSIM between skinning modes over the clip")
    _common(p, render=True)
    p.add_argument("--modes", default="quat_average,lbs_rotation",
                   help="comma-separated modes (at least two)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="run the oracle suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-fault", action="append", choices=FAULTS,
                   help="corrupt one ingredient to check that its suite fails")
    p.add_argument("--assets", default=None,
                   help="also check a generated asset directory for consistency")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="skinning and rendering throughput")
    _common(p, assets=False, render=False)
    p.add_argument("--gaussians", type=int, default=100_000)
    p.add_argument("--frames", type=int, default=30)
    p.add_argument("--iters", type=int, default=15)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--resolution", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except UsageError as exc:
        print(f"gausskin: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except errors.AssetMismatchError as exc:
        print(f"gausskin: inconsistent assets: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (OSError, errors.SchemaError, errors.PlyError) as exc:
        print(f"gausskin: {exc}", file=sys.stderr)
        return EXIT_IO
    except errors.GausskinError as exc:
        print(f"gausskin: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
