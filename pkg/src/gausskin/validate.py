"""Self-check suites run by ``gausskin validate``.

Each suite compares an implementation against an independent route at a
fixed seed and reports the largest error seen next to its tolerance.
``faults`` lets tests corrupt one ingredient on purpose to prove the
corresponding suite notices.
"""

from __future__ import annotations

from dataclasses import dataclass
import os
import tempfile

import numpy as np

from .gsmodel import GaussianCloud, activate_cloud, ply_read, ply_write
from .raster import composite_pixel, fixture_camera, render
from .rig import Pose, make_test_rig, random_blend_instance, rigid_pose
from .rotcore import (
    RigidTransform,
    angular_distance,
    average_quaternions,
    quat_to_matrix,
    random_quaternions,
)
from .shrot import apply_blocks, sh_eval_color, wigner_blocks
from .skinning import SkinningMode, skin_cloud

FAULTS = ("wigner", "eigen", "ply")


@dataclass(frozen=True)
class SuiteResult:
    name: str
    max_error: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.max_error <= self.tolerance)

    def to_json(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "max_error": self.max_error,
                "tolerance": self.tolerance, "detail": self.detail}


def _blocks(R, faults):
    D1, D2, D3 = wigner_blocks(R)
    if "wigner" in faults:
        D2 = D2.copy()
        D2[0, 0] += 1e-3
    return D1, D2, D3


def suite_eigensolver(seed: int = 0, count: int = 2000, faults=()) -> list[SuiteResult]:
    """Power iteration against the Jacobi solver, and the Jacobi solver against itself."""
    rng = np.random.default_rng(seed)
    iters = 1 if "eigen" in faults else 15
    power_err, perm_err = [], []
    for _ in range(count):
        bones, w = random_blend_instance(rng)
        exact = average_quaternions(bones, w, "exact")
        power = average_quaternions(bones, w, "power", iters)
        power_err.append(angular_distance(exact, power))
        perm = rng.permutation(len(w))
        flips = rng.choice([-1.0, 1.0], size=(len(w), 1))
        again = average_quaternions(bones[perm] * flips, w[perm], "exact")
        perm_err.append(angular_distance(exact, again))
    p999 = float(np.percentile(power_err, 99.9))
    return [
        SuiteResult("eigensolver.power_vs_exact", p999, 1e-3,
                    f"99.9th percentile over {count} blends, {iters} iterations"),
        SuiteResult("eigensolver.permutation_sign", float(max(perm_err)), 1e-9,
                    "exact solver under reordering and quaternion sign flips"),
    ]


def _unit_vectors(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def suite_sh(seed: int = 0, count: int = 200, directions: int = 100, faults=()) -> list[SuiteResult]:
    """Rotated coefficients sampled against the original function at rotated directions."""
    rng = np.random.default_rng(seed)
    sample_err = norm_err = hom_err = 0.0
    for _ in range(count):
        coeffs = rng.normal(scale=0.3, size=(16, 3))
        coeffs[0] = 2.0  # keep colors above the clamp at 0
        R1, R2 = (quat_to_matrix(q) for q in random_quaternions(rng, 2))
        blocks = _blocks(R1, faults)
        rotated = apply_blocks(coeffs, blocks)
        d = _unit_vectors(rng, directions)
        got = sh_eval_color(rotated, d)
        want = sh_eval_color(coeffs, d @ R1)  # rows are R1^T d
        sample_err = max(sample_err, float(np.abs(got - want).max()))
        for sl in (slice(1, 4), slice(4, 9), slice(9, 16)):
            a = np.linalg.norm(coeffs[sl], axis=0)
            b = np.linalg.norm(rotated[sl], axis=0)
            norm_err = max(norm_err, float(np.abs(a - b).max()))
        B12 = _blocks(R1 @ R2, faults)
        B2 = _blocks(R2, faults)
        for D12, D1, D2 in zip(B12, blocks, B2):
            hom_err = max(hom_err, float(np.abs(D12 - D1 @ D2).max()))
    return [
        SuiteResult("sh.sampling_equivariance", sample_err, 1e-6,
                    f"{count} rotations x {directions} directions"),
        SuiteResult("sh.norm_preservation", norm_err, 1e-7, "per order and channel"),
        SuiteResult("sh.homomorphism", hom_err, 1e-6, "D(R1 R2) vs D(R1) D(R2)"),
    ]


def suite_rigid(seed: int = 0, count: int = 4, resolution: int = 96, faults=()) -> list[SuiteResult]:
    """Skinning by a global rigid motion equals moving the camera the opposite way."""
    rng = np.random.default_rng(seed)
    skel, weights, cloud = make_test_rig(3, gaussians_per_ring=16, rings=20)
    act = activate_cloud(cloud)
    cam = fixture_camera(3, resolution, resolution)
    worst = 0.0
    for _ in range(count):
        G = RigidTransform(random_quaternions(rng, 1)[0], rng.normal(scale=0.3, size=3))
        posed = skin_cloud(act, weights, skel, rigid_pose(skel, G), SkinningMode.QUAT_AVERAGE)
        a = render(posed, cam).rgb
        b = render(act, cam.moved(G.inverse())).rgb
        worst = max(worst, float(np.abs(a - b).mean()))
    return [SuiteResult("rigid.render_equivariance", worst, 1e-5,
                        f"mean abs per channel, {count} motions, {resolution}px")]


def suite_composite() -> list[SuiteResult]:
    c1, c2, bg = np.array([0.9, 0.2, 0.1]), np.array([0.1, 0.6, 0.8]), np.array([0.3, 0.3, 0.3])
    rgb, alpha = composite_pixel([(c1, 0.5), (c2, 0.5)], bg)
    err = max(float(np.abs(rgb - (0.5 * c1 + 0.25 * c2 + 0.25 * bg)).max()), abs(alpha - 0.75))
    return [SuiteResult("raster.two_splat_composite", err, 1e-12)]


def suite_ply(seed: int = 0, count: int = 2000, faults=()) -> list[SuiteResult]:
    """Write then read a random cloud; every stored float must come back bit for bit."""
    cloud = GaussianCloud.random(count, seed)
    fd, path = tempfile.mkstemp(suffix=".ply")
    os.close(fd)
    try:
        ply_write(cloud, path)
        if "ply" in faults:
            with open(path, "r+b") as fh:
                fh.seek(-1, os.SEEK_END)
                last = fh.read(1)
                fh.seek(-1, os.SEEK_END)
                fh.write(bytes([last[0] ^ 0x40]))
        back = ply_read(path)
    finally:
        os.unlink(path)
    mismatched = 0
    for name in ("positions", "rotations", "log_scales", "opacity_logits", "sh"):
        a, b = getattr(cloud, name), getattr(back, name)
        mismatched += int(np.count_nonzero(a.view(np.uint32) != b.view(np.uint32)))
    return [SuiteResult("ply.roundtrip", float(mismatched), 0.0,
                        f"mismatched float32 words over {count} Gaussians")]


def suite_assets(cloud, skeleton, weights, clip) -> list[SuiteResult]:
    """Loaded assets: normalized weights and a neutral identity pose."""
    sums = weights.weights.sum(axis=1)
    act = activate_cloud(cloud)
    posed = skin_cloud(act, weights, skeleton, Pose.identity(len(skeleton)),
                       SkinningMode.QUAT_AVERAGE)
    drift = max(float(np.abs(posed.positions - act.positions).max(initial=0.0)),
                float(np.abs(posed.sh - act.sh).max(initial=0.0)))
    return [
        SuiteResult("assets.weight_sums", float(np.abs(sums - 1.0).max(initial=0.0)), 1e-5,
                    f"{len(weights)} rows"),
        SuiteResult("assets.identity_pose", drift, 1e-7,
                    f"{len(cloud)} Gaussians, {len(skeleton)} joints, {len(clip)} frames"),
    ]


def run_all(seed: int = 0, faults=()) -> list[SuiteResult]:
    faults = tuple(faults)
    unknown = set(faults) - set(FAULTS)
    if unknown:
        raise ValueError(f"unknown fault(s) {sorted(unknown)}; choose from {list(FAULTS)}")
    results = []
    results += suite_eigensolver(seed, faults=faults)
    results += suite_sh(seed, faults=faults)
    results += suite_rigid(seed, faults=faults)
    results += suite_composite()
    results += suite_ply(seed, faults=faults)
    return results
