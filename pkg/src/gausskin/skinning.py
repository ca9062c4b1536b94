"""Deforming a canonical Gaussian cloud into a pose.

Positions always follow linear blend skinning. Rotations and SH
coefficients follow the selected :class:`SkinningMode`:

* ``QUAT_AVERAGE``: weighted quaternion average of the bone rotations,
  composed with the canonical rotation; SH rotated by the same rotation.
* ``QUAT_AVERAGE_NO_SH``: as above, SH left canonical.
* ``LBS_ROTATION``: baseline. The blended 3x3 block is replaced by its
  polar (nearest rotation) factor, which rotates both ``q`` and SH.
* ``VIEWDIR_CANONICAL``: baseline. Rotation as ``LBS_ROTATION``; SH stays
  canonical and the renderer evaluates it with the view direction carried
  back by the same polar rotation.
* ``POSITION_ONLY``: rotation and SH untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
import enum
import math

import numpy as np
from numba import njit

from ._parallel import run_chunks
from .errors import AssetMismatchError, DegenerateWeightsError
from .gsmodel import ActivatedCloud, GaussianCloud, activate_cloud
from .rig import Pose, Skeleton, SkinWeights, skinning_transforms, transforms_to_arrays
from .rotcore import (
    DEFAULT_POWER_ITERS,
    RigidTransform,
    _accumulate_outer,
    _matrix_to_quat,
    _max_eigenvector_exact,
    _max_eigenvector_power_into,
    _quat_compose,
    _quat_compose_into,
    _quat_to_matrix,
    average_quaternions,
    check_rotation,
)
from .shrot import _apply_flat, _wigner_into, rotate_sh


class SkinningMode(enum.Enum):
    LBS_ROTATION = "lbs_rotation"
    QUAT_AVERAGE = "quat_average"
    QUAT_AVERAGE_NO_SH = "quat_average_no_sh"
    VIEWDIR_CANONICAL = "viewdir_canonical"
    POSITION_ONLY = "position_only"

    @classmethod
    def parse(cls, value) -> SkinningMode:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "_"))
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown skinning mode {value!r} (choose from {names})") from None


_MODE_CODES = {
    SkinningMode.LBS_ROTATION: 0,
    SkinningMode.QUAT_AVERAGE: 1,
    SkinningMode.QUAT_AVERAGE_NO_SH: 2,
    SkinningMode.VIEWDIR_CANONICAL: 3,
    SkinningMode.POSITION_ONLY: 4,
}


@dataclass(frozen=True)
class Solver:
    """Eigensolver for the quaternion average: ``exact`` or ``power``."""

    kind: str = "power"
    iterations: int = DEFAULT_POWER_ITERS

    def __post_init__(self):
        if self.kind not in ("exact", "power"):
            raise ValueError(f"unknown solver {self.kind!r}")
        if self.kind == "power" and self.iterations < 1:
            raise ValueError("power iteration needs at least one iteration")

    def __str__(self) -> str:
        return "exact" if self.kind == "exact" else f"power({self.iterations})"


EXACT = Solver("exact")
POWER15 = Solver("power", DEFAULT_POWER_ITERS)


@dataclass
class PosedCloud:
    """Activated Gaussians in the observation space.

    ``canonical_rotations`` is set only in ``VIEWDIR_CANONICAL`` mode: per
    Gaussian, the rotation whose transpose maps world view directions back
    to the canonical frame. ``blend_det`` is the determinant of each
    unorthonormalized blended 3x3 block.
    """

    positions: np.ndarray
    rotations: np.ndarray
    scales: np.ndarray
    opacities: np.ndarray
    sh: np.ndarray
    mode: SkinningMode
    canonical_rotations: np.ndarray | None = None
    blend_det: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.positions)

    @classmethod
    def from_activated(cls, act: ActivatedCloud,
                       mode: SkinningMode = SkinningMode.POSITION_ONLY) -> PosedCloud:
        """Wrap an unposed cloud for rendering as-is."""
        return cls(act.positions, act.rotations, act.scales, act.opacities, act.sh, mode,
                   None, np.ones(len(act)))


# ---------------------------------------------------------------------------
# kernels

@njit(cache=True, nogil=True)
def _det3(m):
    return (m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
            - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]))


@njit(cache=True, nogil=True)
def _inv_t3(m, det):
    """Inverse transpose of a 3x3 (the cofactor matrix over det)."""
    out = np.empty((3, 3))
    out[0, 0] = (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]) / det
    out[0, 1] = (m[1, 2] * m[2, 0] - m[1, 0] * m[2, 2]) / det
    out[0, 2] = (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0]) / det
    out[1, 0] = (m[0, 2] * m[2, 1] - m[0, 1] * m[2, 2]) / det
    out[1, 1] = (m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]) / det
    out[1, 2] = (m[0, 1] * m[2, 0] - m[0, 0] * m[2, 1]) / det
    out[2, 0] = (m[0, 1] * m[1, 2] - m[0, 2] * m[1, 1]) / det
    out[2, 1] = (m[0, 2] * m[1, 0] - m[0, 0] * m[1, 2]) / det
    out[2, 2] = (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]) / det
    return out


@njit(cache=True, nogil=True)
def _fro(m):
    acc = 0.0
    for i in range(3):
        for j in range(3):
            acc += m[i, j] * m[i, j]
    return math.sqrt(acc)


@njit(cache=True, nogil=True)
def _polar3(m):
    """Rotation factor of the polar decomposition by scaled Newton iteration.

    Returns (R, ok); ok is False when det(m) is not safely positive.
    """
    x = m.copy()
    scale = _fro(x)
    det = _det3(x)
    if not scale > 0.0 or det <= 1e-12 * scale * scale * scale:
        return x, False
    scaled = True
    for _ in range(60):
        det = _det3(x)
        xit = _inv_t3(x, det)
        if scaled:
            g = math.sqrt(_fro(xit) / _fro(x))
        else:
            g = 1.0
        diff = 0.0
        for i in range(3):
            for j in range(3):
                v = 0.5 * (g * x[i, j] + xit[i, j] / g)
                diff += (v - x[i, j]) * (v - x[i, j])
                x[i, j] = v
        diff = math.sqrt(diff)
        if diff < 1e-2:
            scaled = False
        if diff <= 1e-15:
            break
    return x, True


@njit(cache=True, nogil=True)
def _skin_range(start, end, mu, q, sh, idx, wts, mats, bquats, mode, use_power, iters,
                out_mu, out_q, out_sh, out_canon, out_det, status):
    k_max = idx.shape[1]
    M = np.empty((3, 4))
    A = np.empty((4, 4))
    rot = np.empty(4)
    d1 = np.empty(9)
    d2 = np.empty(25)
    d3 = np.empty(49)
    for i in range(start, end):
        M[:] = 0.0
        total = 0.0
        best = -1
        best_w = -1.0
        for k in range(k_max):
            j = idx[i, k]
            if j < 0:
                continue
            w = wts[i, k]
            total += w
            if w > best_w or (w == best_w and j < best):
                best_w = w
                best = j
            for r in range(3):
                for c in range(4):
                    M[r, c] += w * mats[j, r, c]
        if not total > 0.0:
            status[i] = 1
            continue
        for r in range(3):
            out_mu[i, r] = M[r, 0] * mu[i, 0] + M[r, 1] * mu[i, 1] + M[r, 2] * mu[i, 2] + M[r, 3]
        out_det[i] = _det3(M)
        if mode == 4:
            out_q[i] = q[i]
            out_sh[i] = sh[i]
            continue
        if mode == 0 or mode == 3:
            P, ok = _polar3(M[:, :3])
            if not ok:
                status[i] = 2
                continue
            rot[:] = _matrix_to_quat(P)
        else:
            A[:] = 0.0
            for k in range(k_max):
                j = idx[i, k]
                if j >= 0:
                    _accumulate_outer(A, bquats[j], wts[i, k])
            if use_power:
                _max_eigenvector_power_into(A, bquats[best], iters, rot)
            else:
                rot[:] = _max_eigenvector_exact(A)
        _quat_compose_into(rot, q[i], out_q[i])
        if mode == 3:
            out_canon[i] = rot
        if mode == 0 or mode == 1:
            _wigner_into(_quat_to_matrix(rot), d1, d2, d3)
            _apply_flat(sh[i], d1, d2, d3, out_sh[i])
        else:
            out_sh[i] = sh[i]


# ---------------------------------------------------------------------------
# single-Gaussian operations

def _row_arrays(weights_row):
    pairs = list(weights_row)
    idx = np.array([int(j) for j, _ in pairs], dtype=np.int64)
    w = np.array([float(v) for _, v in pairs])
    return idx, w


def blend_transforms(transforms: list[RigidTransform], weights_row) -> np.ndarray:
    """Weighted entrywise sum of homogeneous 4x4 bone matrices."""
    idx, w = _row_arrays(weights_row)
    out = np.zeros((4, 4))
    for j, wj in zip(idx, w):
        out += wj * transforms[j].matrix()
    out[3] = (0.0, 0.0, 0.0, 1.0)
    return out


def skin_positions(positions, weights: SkinWeights, transforms: list[RigidTransform]) -> np.ndarray:
    _, mats = transforms_to_arrays(transforms)
    mats = np.concatenate([mats, np.zeros((1, 3, 4))])  # padding slot j = -1
    blended = np.einsum("nk,nkrc->nrc", weights.weights, mats[weights.indices])
    p = np.asarray(positions, dtype=np.float64)
    return np.einsum("nrc,nc->nr", blended[:, :, :3], p) + blended[:, :, 3]


def polar_rotation(block) -> np.ndarray:
    """Nearest rotation to a 3x3 block with positive determinant."""
    R, ok = _polar3(np.ascontiguousarray(block, dtype=np.float64)[:3, :3])
    if not ok:
        raise DegenerateWeightsError("blended rotation block is singular or reflecting")
    return R


def skin_rotation_lbs(blended, q_canonical) -> np.ndarray:
    R = polar_rotation(np.asarray(blended, dtype=np.float64)[:3, :3])
    return _quat_compose(_matrix_to_quat(R), np.asarray(q_canonical, dtype=np.float64))


def average_rotation(bones, weights, solver: Solver = POWER15) -> np.ndarray:
    """Weighted quaternion average; power iteration starts at the heaviest bone."""
    return average_quaternions(bones, weights, solver.kind, solver.iterations)


def skin_rotation_avg(bones, weights, q_canonical, solver: Solver = POWER15) -> np.ndarray:
    qbar = average_rotation(bones, weights, solver)
    return _quat_compose(qbar, np.asarray(q_canonical, dtype=np.float64))


def skin_sh(s_canonical, qbar) -> np.ndarray:
    return rotate_sh(s_canonical, _quat_to_matrix(np.asarray(qbar, dtype=np.float64)))


def canonicalize_viewdir(view_direction, rotation) -> np.ndarray:
    """Carry a world view direction back through ``rotation``: ``R^T d``, renormalized."""
    R = check_rotation(rotation)
    d = R.T @ np.asarray(view_direction, dtype=np.float64)
    return d / np.linalg.norm(d)


# ---------------------------------------------------------------------------
# whole-cloud skinning

def skin_cloud(cloud: GaussianCloud | ActivatedCloud, weights: SkinWeights, skeleton: Skeleton,
               pose: Pose, mode=SkinningMode.QUAT_AVERAGE, solver: Solver = POWER15,
               workers: int = 1) -> PosedCloud:
    """Pose every Gaussian. Output is bitwise independent of ``workers``."""
    mode = SkinningMode.parse(mode)
    act = activate_cloud(cloud) if isinstance(cloud, GaussianCloud) else cloud
    n = len(act)
    if len(weights) != n:
        raise AssetMismatchError(f"cloud has {n} Gaussians but weights have {len(weights)} rows")
    if weights.joint_count != len(skeleton):
        raise AssetMismatchError(
            f"weights reference {weights.joint_count} joints, skeleton has {len(skeleton)}")
    transforms = skinning_transforms(skeleton, pose)
    bquats, mats = transforms_to_arrays(transforms)

    out_mu = np.empty((n, 3))
    out_q = np.empty((n, 4))
    out_sh = np.empty_like(act.sh)
    out_canon = np.zeros((n, 4)) if mode is SkinningMode.VIEWDIR_CANONICAL else np.zeros((0, 4))
    out_det = np.empty(n)
    status = np.zeros(n, dtype=np.int8)
    code = _MODE_CODES[mode]

    def work(start, end):
        _skin_range(start, end, act.positions, act.rotations, act.sh, weights.indices,
                    weights.weights, mats, bquats, code, solver.kind == "power",
                    solver.iterations, out_mu, out_q, out_sh, out_canon, out_det, status)

    run_chunks(work, n, workers)
    bad = np.flatnonzero(status)
    if len(bad):
        i = int(bad[0])
        if status[i] == 1:
            raise DegenerateWeightsError(f"Gaussian {i}: all skin weights are zero")
        raise DegenerateWeightsError(
            f"Gaussian {i}: blended rotation block is singular or reflecting")
    return PosedCloud(
        positions=out_mu,
        rotations=out_q,
        scales=act.scales,
        opacities=act.opacities,
        sh=out_sh,
        mode=mode,
        canonical_rotations=out_canon if mode is SkinningMode.VIEWDIR_CANONICAL else None,
        blend_det=out_det,
    )
