"""Skeleton model, forward kinematics, skin weights, animation clips, their
JSON file formats, and the procedural tube fixture used by end-to-end tests."""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
import os
from pathlib import Path
import warnings

import numpy as np

from .errors import SchemaError
from .gsmodel import GaussianCloud, logit
from .rotcore import (
    IDENTITY_QUAT,
    RigidTransform,
    _quat_compose,
    _quat_to_matrix,
    matrix_to_quat,
    quat_conjugate,
    quat_from_axis_angle,
)
from .shrot import NUM_COEFFS, dc_from_color

RIG_VERSION = "gausskin-rig/1"
CLIP_VERSION = "gausskin-clip/1"
WEIGHTS_VERSION = "gausskin-weights/1"

K_MAX = 8
WEIGHT_SUM_TOL = 1e-5


class WeightNormalizationWarning(UserWarning):
    pass


def as_unit_quat(q) -> np.ndarray:
    """Canonical unit quaternion; values already unit-norm are kept bit-for-bit."""
    q = np.asarray(q, dtype=np.float64).reshape(4)
    n2 = float(q @ q)
    if not np.isfinite(n2) or n2 == 0.0:
        raise ValueError("quaternion must be finite and nonzero")
    if abs(n2 - 1.0) > 1e-13:
        q = q / math.sqrt(n2)
    if q[0] < 0 or (q[0] == 0 and q[np.flatnonzero(q)[0]] < 0):
        q = -q
    return q + 0.0


def _unit_rigid(rotation, translation) -> RigidTransform:
    t = RigidTransform.identity()
    object.__setattr__(t, "rotation", as_unit_quat(rotation))
    object.__setattr__(t, "translation", np.asarray(translation, dtype=np.float64).reshape(3))
    return t


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int | None
    bind_local: RigidTransform


class Skeleton:
    """Joints in topological order (parents before children).

    ``bind_world[j]`` is the rest transform of joint ``j`` and
    ``inverse_bind[j]`` its inverse.
    """

    def __init__(self, joints: list[Joint]):
        self.joints = list(joints)
        _check_topology([j.parent for j in self.joints])
        self.bind_world: list[RigidTransform] = []
        for j, joint in enumerate(self.joints):
            if joint.parent is None:
                self.bind_world.append(joint.bind_local)
            else:
                self.bind_world.append(self.bind_world[joint.parent] * joint.bind_local)
        self.inverse_bind = [t.inverse() for t in self.bind_world]

    def __len__(self) -> int:
        return len(self.joints)

    @property
    def parents(self) -> list[int | None]:
        return [j.parent for j in self.joints]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Skeleton) or len(self) != len(other):
            return False
        for a, b in zip(self.joints, other.joints):
            if (a.name != b.name or a.parent != b.parent
                    or not np.array_equal(a.bind_local.rotation, b.bind_local.rotation)
                    or not np.array_equal(a.bind_local.translation, b.bind_local.translation)):
                return False
        return True


def _check_topology(parents, path=None) -> None:
    n = len(parents)
    for j, p in enumerate(parents):
        if p is None:
            continue
        if not isinstance(p, (int, np.integer)) or not 0 <= p < n:
            raise SchemaError(f"parent index {p!r} out of range", path, f"joints[{j}].parent")
        seen = {j}
        cur = p
        while cur is not None:
            if cur in seen:
                raise SchemaError("parent indices form a cycle", path, f"joints[{j}].parent")
            seen.add(cur)
            cur = parents[cur]
        if p >= j:
            raise SchemaError("parent must precede its child (topological order)",
                              path, f"joints[{j}].parent")


@dataclass
class Pose:
    """Local joint rotations (J, 4), a root translation and a timestamp."""

    rotations: np.ndarray
    root_translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    time: float = 0.0

    def __post_init__(self):
        rots = np.asarray(self.rotations, dtype=np.float64).reshape(-1, 4)
        self.rotations = np.array([as_unit_quat(q) for q in rots]).reshape(-1, 4)
        self.root_translation = np.asarray(self.root_translation, dtype=np.float64).reshape(3)
        self.time = float(self.time)

    @classmethod
    def identity(cls, joint_count: int, time: float = 0.0) -> Pose:
        return cls(np.tile(IDENTITY_QUAT, (joint_count, 1)), np.zeros(3), time)

    def __len__(self) -> int:
        return len(self.rotations)


@dataclass
class AnimationClip:
    fps: float
    frames: list[Pose]

    def __post_init__(self):
        if not self.frames:
            raise ValueError("an animation clip needs at least one frame")
        if not self.fps > 0:
            raise ValueError("clip frame rate must be positive")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class SkinWeights:
    """Sparse skin weights, padded to ``K <= K_MAX`` columns.

    Padding slots hold joint index -1 and weight 0.
    """

    indices: np.ndarray
    weights: np.ndarray
    joint_count: int

    def __post_init__(self):
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.indices.ndim != 2 or self.indices.shape != self.weights.shape:
            raise ValueError("indices and weights must be matching (N, K) arrays")
        if self.indices.shape[1] > K_MAX:
            raise ValueError(f"at most {K_MAX} weights per Gaussian")

    def __len__(self) -> int:
        return len(self.indices)

    def row(self, i: int) -> list[tuple[int, float]]:
        return [(int(j), float(w)) for j, w in zip(self.indices[i], self.weights[i]) if j >= 0]

    @classmethod
    def from_rows(cls, rows, joint_count: int, path=None) -> SkinWeights:
        """Build from ``[[(joint, weight), ...], ...]``, validating and normalizing."""
        k = max((len(r) for r in rows), default=1)
        k = max(k, 1)
        if k > K_MAX:
            bad = next(i for i, r in enumerate(rows) if len(r) > K_MAX)
            raise SchemaError(f"more than {K_MAX} weights", path, f"rows[{bad}]")
        idx = np.full((len(rows), k), -1, dtype=np.int64)
        wts = np.zeros((len(rows), k))
        renormalized = []
        for i, r in enumerate(rows):
            for s, entry in enumerate(r):
                try:
                    j, w = entry
                except (TypeError, ValueError):
                    raise SchemaError("entry must be a [joint, weight] pair", path,
                                      f"rows[{i}][{s}]") from None
                if not isinstance(j, (int, np.integer)) or not 0 <= j < joint_count:
                    raise SchemaError(f"joint index {j!r} out of range", path, f"rows[{i}][{s}]")
                w = float(w)
                if not np.isfinite(w) or w < 0:
                    raise SchemaError(f"weight {w!r} must be finite and >= 0", path,
                                      f"rows[{i}][{s}]")
                idx[i, s] = j
                wts[i, s] = w
            total = wts[i].sum()
            if not total > 0:
                raise SchemaError("weights sum to zero", path, f"rows[{i}]")
            if abs(total - 1.0) > WEIGHT_SUM_TOL:
                wts[i] /= total
                renormalized.append(i)
        if renormalized:
            warnings.warn(
                f"{len(renormalized)} weight rows did not sum to 1 and were normalized "
                f"(first: row {renormalized[0]})", WeightNormalizationWarning, stacklevel=2)
        return cls(idx, wts, joint_count)


# ---------------------------------------------------------------------------
# kinematics

def _conjugated(bind: RigidTransform, local_rot: np.ndarray) -> RigidTransform:
    """``B * rot(local_rot) * B^-1`` for a rest transform ``B``.

    The quaternion ``b p b*`` keeps ``p``'s scalar part and rotates its vector
    part, so an identity ``p`` maps to the exact identity.
    """
    q = np.empty(4)
    q[0] = local_rot[0]
    q[1:] = bind.matrix3 @ local_rot[1:]
    rot = as_unit_quat(q)
    c = bind.translation
    return _unit_rigid(rot, c - _quat_to_matrix(rot) @ c)


def _check_pose(skeleton: Skeleton, pose: Pose) -> None:
    if len(pose) != len(skeleton):
        raise ValueError(f"pose has {len(pose)} joint rotations, skeleton has {len(skeleton)} joints")


def forward_kinematics(skeleton: Skeleton, pose: Pose) -> list[RigidTransform]:
    """World transform of every joint under ``pose``."""
    _check_pose(skeleton, pose)
    world: list[RigidTransform] = []
    for j, joint in enumerate(skeleton.joints):
        local = joint.bind_local * _unit_rigid(pose.rotations[j], np.zeros(3))
        if joint.parent is None:
            world.append(_unit_rigid(local.rotation, local.translation + pose.root_translation))
        else:
            world.append(world[joint.parent] * local)
    return world


def skinning_transforms(skeleton: Skeleton, pose: Pose) -> list[RigidTransform]:
    """Per-joint ``world[j] * inverse_bind[j]``; identity pose gives exact identities."""
    _check_pose(skeleton, pose)
    out: list[RigidTransform] = []
    for j, joint in enumerate(skeleton.joints):
        local = _conjugated(skeleton.bind_world[j], pose.rotations[j])
        if joint.parent is None:
            out.append(_unit_rigid(local.rotation, local.translation + pose.root_translation))
        else:
            parent = out[joint.parent]
            out.append(_unit_rigid(_quat_compose(parent.rotation, local.rotation),
                                   parent.matrix3 @ local.translation + parent.translation))
    return out


def transforms_to_arrays(transforms: list[RigidTransform]) -> tuple[np.ndarray, np.ndarray]:
    """(J, 4) rotation quaternions and (J, 3, 4) affine matrices."""
    quats = np.array([t.rotation for t in transforms]).reshape(-1, 4)
    mats = np.zeros((len(transforms), 3, 4))
    for j, t in enumerate(transforms):
        mats[j, :, :3] = t.matrix3
        mats[j, :, 3] = t.translation
    return quats, mats


def rigid_pose(skeleton: Skeleton, G: RigidTransform, time: float = 0.0) -> Pose:
    """A pose whose skinning transforms all equal ``G`` (roots carry all motion).

    Only valid for single-root skeletons.
    """
    roots = [j for j, p in enumerate(skeleton.parents) if p is None]
    if len(roots) != 1:
        raise ValueError("rigid_pose needs a skeleton with exactly one root")
    r = roots[0]
    b = skeleton.bind_world[r]
    local = _quat_compose(_quat_compose(quat_conjugate(b.rotation), G.rotation), b.rotation)
    rots = np.tile(IDENTITY_QUAT, (len(skeleton), 1))
    rots[r] = local
    c = b.translation
    root_t = G.translation - c + G.matrix3 @ c
    return Pose(rots, root_t, time)


# ---------------------------------------------------------------------------
# JSON I/O

def _load_json(path, version: str):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON ({exc.msg} at line {exc.lineno})", path) from None
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object", path)
    if doc.get("version") != version:
        raise SchemaError(f"expected version {version!r}, found {doc.get('version')!r}", path,
                          "version")
    return doc


def _get(doc, key, path, where, kind=None):
    if key not in doc:
        raise SchemaError("missing field", path, f"{where}.{key}" if where else key)
    val = doc[key]
    if kind is not None and not isinstance(val, kind):
        raise SchemaError(f"expected {getattr(kind, '__name__', kind)}", path,
                          f"{where}.{key}" if where else key)
    return val


def _vec(val, n, path, where):
    if not isinstance(val, list) or len(val) != n or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in val):
        raise SchemaError(f"expected a list of {n} numbers", path, where)
    arr = np.array(val, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise SchemaError("non-finite number", path, where)
    return arr


def _quat_field(val, path, where):
    q = _vec(val, 4, path, where)
    if not np.any(q != 0):
        raise SchemaError("zero quaternion", path, where)
    return q


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def save_rig(skeleton: Skeleton, path: str | os.PathLike) -> None:
    joints = [{
        "name": j.name,
        "parent": j.parent,
        "rotation": [float(v) for v in j.bind_local.rotation],
        "translation": [float(v) for v in j.bind_local.translation],
    } for j in skeleton.joints]
    _write_json(path, {"version": RIG_VERSION, "joints": joints})


def load_rig(path: str | os.PathLike) -> Skeleton:
    doc = _load_json(path, RIG_VERSION)
    raw = _get(doc, "joints", path, "", list)
    joints = []
    parents = []
    for j, item in enumerate(raw):
        where = f"joints[{j}]"
        if not isinstance(item, dict):
            raise SchemaError("expected an object", path, where)
        name = _get(item, "name", path, where, str)
        parent = _get(item, "parent", path, where)
        if parent is not None and (not isinstance(parent, int) or isinstance(parent, bool)):
            raise SchemaError("expected an integer or null", path, f"{where}.parent")
        rot = _quat_field(_get(item, "rotation", path, where), path, f"{where}.rotation")
        trans = _vec(_get(item, "translation", path, where), 3, path, f"{where}.translation")
        parents.append(parent)
        joints.append(Joint(name, parent, _unit_rigid(rot, trans)))
    _check_topology(parents, path)
    return Skeleton(joints)


def save_clip(clip: AnimationClip, path: str | os.PathLike) -> None:
    frames = [{
        "time": p.time,
        "root_translation": [float(v) for v in p.root_translation],
        "rotations": [[float(v) for v in q] for q in p.rotations],
    } for p in clip.frames]
    joint_count = len(clip.frames[0])
    _write_json(path, {"version": CLIP_VERSION, "fps": clip.fps, "joint_count": joint_count,
                       "frames": frames})


def load_clip(path: str | os.PathLike) -> AnimationClip:
    doc = _load_json(path, CLIP_VERSION)
    fps = _get(doc, "fps", path, "", (int, float))
    if not fps > 0:
        raise SchemaError("frame rate must be positive", path, "fps")
    joint_count = _get(doc, "joint_count", path, "", int)
    raw = _get(doc, "frames", path, "", list)
    if not raw:
        raise SchemaError("clip has no frames", path, "frames")
    frames = []
    for k, item in enumerate(raw):
        where = f"frames[{k}]"
        if not isinstance(item, dict):
            raise SchemaError("expected an object", path, where)
        t = _get(item, "time", path, where, (int, float))
        if abs(t - k / fps) > 1e-6:
            raise SchemaError(f"frame time {t} breaks uniform timing at {fps} Hz", path,
                              f"{where}.time")
        rots = _get(item, "rotations", path, where, list)
        if len(rots) != joint_count:
            raise SchemaError(f"expected {joint_count} rotations, found {len(rots)}", path,
                              f"{where}.rotations")
        quats = [_quat_field(q, path, f"{where}.rotations[{j}]") for j, q in enumerate(rots)]
        root = _vec(_get(item, "root_translation", path, where), 3, path,
                    f"{where}.root_translation")
        frames.append(Pose(np.array(quats).reshape(-1, 4), root, t))
    return AnimationClip(float(fps), frames)


def save_weights(weights: SkinWeights, path: str | os.PathLike) -> None:
    rows = [[[j, w] for j, w in weights.row(i)] for i in range(len(weights))]
    _write_json(path, {"version": WEIGHTS_VERSION, "joint_count": weights.joint_count,
                       "rows": rows})


def load_weights(path: str | os.PathLike) -> SkinWeights:
    doc = _load_json(path, WEIGHTS_VERSION)
    joint_count = _get(doc, "joint_count", path, "", int)
    rows = _get(doc, "rows", path, "", list)
    for i, r in enumerate(rows):
        if not isinstance(r, list):
            raise SchemaError("expected a list of [joint, weight] pairs", path, f"rows[{i}]")
    return SkinWeights.from_rows(rows, joint_count, path)


# ---------------------------------------------------------------------------
# fixtures

BONE_LENGTH = 1.0
TUBE_RADIUS = 0.3


def chain_skeleton(bones: int, length: float = BONE_LENGTH, axis=(0.0, 1.0, 0.0)) -> Skeleton:
    """A straight chain; the root sits at the origin, joint ``j`` at ``j * length``."""
    step = np.asarray(axis, dtype=np.float64) * length
    joints = []
    for j in range(bones):
        t = np.zeros(3) if j == 0 else step
        joints.append(Joint(f"bone{j}", None if j == 0 else j - 1,
                            _unit_rigid(IDENTITY_QUAT, t)))
    return Skeleton(joints)


def make_test_rig(bones: int, gaussians_per_ring: int = 32, rings: int = 40,
                  seed: int = 7) -> tuple[Skeleton, SkinWeights, GaussianCloud]:
    """Tube of Gaussians around a vertical bone chain.

    Weights interpolate linearly between the two nearest bone midpoints and
    saturate on the end bones.
    """
    if bones < 1:
        raise ValueError("bones must be >= 1")
    if gaussians_per_ring < 1 or rings < 1:
        raise ValueError("gaussians_per_ring and rings must be >= 1")
    rng = np.random.default_rng(seed)
    skel = chain_skeleton(bones)
    height = bones * BONE_LENGTH
    n = gaussians_per_ring * rings

    ring_y = (np.arange(rings) + 0.5) / rings * height
    ring_offset = rng.uniform(0, 2 * np.pi / gaussians_per_ring, size=rings)
    theta = (np.arange(gaussians_per_ring)[None, :] * 2 * np.pi / gaussians_per_ring
             + ring_offset[:, None]).reshape(-1)
    y = np.repeat(ring_y, gaussians_per_ring)
    positions = np.stack([TUBE_RADIUS * np.cos(theta), y, TUBE_RADIUS * np.sin(theta)], axis=1)

    # local frame: x along the ring tangent, y along the chain, z inward
    rots = []
    for th in theta:
        frame = np.array([[-math.sin(th), 0.0, -math.cos(th)],
                          [0.0, 1.0, 0.0],
                          [math.cos(th), 0.0, -math.sin(th)]])
        base = matrix_to_quat(frame)
        jitter = quat_from_axis_angle(rng.normal(size=3), rng.uniform(0.0, 0.15))
        rots.append(_quat_compose(base, jitter))
    rotations = np.array(rots)

    tangential = 2 * np.pi * TUBE_RADIUS / gaussians_per_ring * 0.6
    vertical = height / rings * 0.6
    scales = np.tile([tangential, vertical, 0.02], (n, 1)) * rng.uniform(0.8, 1.25, size=(n, 3))
    opacity = rng.uniform(0.75, 0.95, size=n)

    sh = np.zeros((n, NUM_COEFFS, 3))
    base_color = np.stack([0.25 + 0.5 * y / height, 0.45 + 0.25 * np.cos(theta),
                           0.75 - 0.5 * y / height], axis=1)
    sh[:, 0, :] = dc_from_color(np.clip(base_color + rng.normal(scale=0.05, size=(n, 3)), 0, 1))
    sh[:, 1:4, :] = rng.normal(scale=0.15, size=(n, 3, 3))
    sh[:, 4:9, :] = rng.normal(scale=0.08, size=(n, 5, 3))
    sh[:, 9:16, :] = rng.normal(scale=0.04, size=(n, 7, 3))

    cloud = GaussianCloud(positions, rotations, np.log(scales), logit(opacity), sh)
    return skel, _tube_weights(y, bones), cloud


def _tube_weights(heights: np.ndarray, bones: int) -> SkinWeights:
    n = len(heights)
    if bones == 1:
        return SkinWeights(np.zeros((n, 1), dtype=np.int64), np.ones((n, 1)), 1)
    centers = (np.arange(bones) + 0.5) * BONE_LENGTH
    s = np.clip((heights - centers[0]) / BONE_LENGTH, 0.0, bones - 1.0)
    lo = np.minimum(np.floor(s).astype(np.int64), bones - 2)
    t = s - lo
    idx = np.stack([lo, lo + 1], axis=1)
    wts = np.stack([1.0 - t, t], axis=1)
    return SkinWeights(idx, wts, bones)


def twist_pose(skeleton: Skeleton, amount: float, time: float = 0.0) -> Pose:
    """Every non-root joint twisted about the chain axis and bent sideways.

    The bend axis alternates between z and x down the chain, so bone
    rotations do not share an axis.
    """
    twist = quat_from_axis_angle([0.0, 1.0, 0.0], math.radians(70.0) * amount)
    rots = np.tile(IDENTITY_QUAT, (len(skeleton), 1))
    for j, p in enumerate(skeleton.parents):
        if p is not None:
            axis = [0.0, 0.0, 1.0] if j % 2 else [1.0, 0.0, 0.0]
            rots[j] = _quat_compose(twist, quat_from_axis_angle(axis, math.radians(35.0) * amount))
    return Pose(rots, np.zeros(3), time)


def make_test_clip(skeleton: Skeleton, frames: int = 30, fps: float = 30.0) -> AnimationClip:
    """Starts at the identity pose and ramps to the full twist."""
    if frames < 1:
        raise ValueError("frames must be >= 1")
    poses = []
    for k in range(frames):
        amount = 0.0 if frames == 1 else k / (frames - 1)
        poses.append(twist_pose(skeleton, amount, k / fps))
    return AnimationClip(fps, poses)


def identity_clip(skeleton: Skeleton, frames: int = 1, fps: float = 30.0) -> AnimationClip:
    return AnimationClip(fps, [Pose.identity(len(skeleton), k / fps) for k in range(frames)])


def random_blend_instance(rng: np.random.Generator, max_joints: int = 24, max_weights: int = 4,
                          max_angle: float = math.pi / 2) -> tuple[np.ndarray, np.ndarray]:
    """World bone rotations of a random posed tree plus one sparse weight row.

    The tree has 2..``max_joints`` joints, each rotated locally by at most
    ``max_angle``. Weights sit on a kinematic neighborhood (a joint, its
    ancestors, then its children), as skin weights do on real rigs.
    Returns ``(bone_quats (J, 4), weights (J,))``.
    """
    J = int(rng.integers(2, max_joints + 1))
    parents = [-1] + [int(rng.integers(0, j)) for j in range(1, J)]
    world = np.empty((J, 4))
    for j in range(J):
        local = quat_from_axis_angle(rng.normal(size=3), rng.uniform(0.0, max_angle))
        world[j] = local if parents[j] < 0 else _quat_compose(world[parents[j]], local)
    j = int(rng.integers(0, J))
    hood = [j]
    p = parents[j]
    while p >= 0 and len(hood) < max_weights:
        hood.append(p)
        p = parents[p]
    hood += [c for c in range(J) if parents[c] == j][:max_weights - len(hood)]
    k = int(rng.integers(1, len(hood) + 1))
    w = rng.random(k)
    weights = np.zeros(J)
    weights[hood[:k]] = w / w.sum()
    return world, weights
