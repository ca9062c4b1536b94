import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from gausskin.errors import AssetMismatchError, DegenerateWeightsError
from gausskin.gsmodel import activate_cloud
from gausskin.rig import (
    Pose,
    SkinWeights,
    chain_skeleton,
    make_test_rig,
    rigid_pose,
    skinning_transforms,
    twist_pose,
)
from gausskin.rotcore import (
    RigidTransform,
    angular_distance,
    quat_compose,
    quat_from_axis_angle,
    quat_to_matrix,
    random_quaternions,
)
from gausskin.shrot import rotate_sh, sh_eval_color
from gausskin.skinning import (
    EXACT,
    POWER15,
    PosedCloud,
    SkinningMode,
    Solver,
    average_rotation,
    blend_transforms,
    canonicalize_viewdir,
    polar_rotation,
    skin_cloud,
    skin_positions,
    skin_rotation_avg,
    skin_rotation_lbs,
    skin_sh,
)

IDQ = np.array([1.0, 0, 0, 0])
RZ90 = quat_from_axis_angle([0, 0, 1], math.pi / 2)
RZ45 = quat_from_axis_angle([0, 0, 1], math.pi / 4)
I = RigidTransform.identity()


def rot(q):
    return RigidTransform(q, np.zeros(3))


def svd_polar(M):
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U[:, -1] *= -1
        R = U @ Vt
    return R


# blending --------------------------------------------------------------------------

def test_blend_single_weight():
    T = RigidTransform(RZ90, [1.0, 2.0, 3.0])
    assert np.array_equal(blend_transforms([T], [(0, 1.0)]), T.matrix())


def test_blend_half_rotation_has_det_half():
    B = blend_transforms([I, rot(RZ90)], [(0, 0.5), (1, 0.5)])
    want = np.array([[0.5, -0.5, 0], [0.5, 0.5, 0], [0, 0, 1]])
    assert np.abs(B[:3, :3] - want).max() < 1e-15
    assert abs(np.linalg.det(B[:3, :3]) - 0.5) < 1e-15
    assert np.array_equal(B[3], [0, 0, 0, 1])


def test_blend_translations():
    t1, t2 = np.array([1.0, -2, 0.5]), np.array([0.0, 3, 1])
    w = 0.3
    B = blend_transforms([RigidTransform(IDQ, t1), RigidTransform(IDQ, t2)], [(0, w), (1, 1 - w)])
    assert np.allclose(B[:3, 3], w * t1 + (1 - w) * t2, atol=1e-15)
    assert np.array_equal(B[:3, :3], np.eye(3))


def test_skin_positions_examples():
    p = np.array([[0.0, 0, 0], [1.0, 2, 3]])
    one = SkinWeights(np.zeros((2, 1), dtype=np.int64), np.ones((2, 1)), 1)
    assert np.array_equal(skin_positions(p, one, [I]), p)
    t = np.array([0.5, -1.0, 2.0])
    assert np.array_equal(skin_positions(p, one, [RigidTransform(IDQ, t)]), p + t)
    two = SkinWeights(np.array([[0, 1]]), np.array([[0.5, 0.5]]), 2)
    got = skin_positions(np.zeros((1, 3)), two,
                         [RigidTransform(IDQ, [1, 0, 0]), RigidTransform(IDQ, [0, 1, 0])])
    assert np.array_equal(got[0], [0.5, 0.5, 0.0])


# rotations -------------------------------------------------------------------------

def test_polar_of_half_blend_matches_svd():
    B = blend_transforms([I, rot(RZ90)], [(0, 0.5), (1, 0.5)])
    R = polar_rotation(B[:3, :3])
    assert np.abs(R - svd_polar(B[:3, :3])).max() < 1e-12
    assert np.abs(R - quat_to_matrix(RZ45)).max() < 1e-12


def test_polar_against_svd_random(rng):
    for _ in range(200):
        M = rng.normal(size=(3, 3))
        if np.linalg.det(M) <= 0.05:
            continue
        assert np.abs(polar_rotation(M) - svd_polar(M)).max() < 1e-9


def test_polar_rejects_singular_and_reflection():
    with pytest.raises(DegenerateWeightsError):
        polar_rotation(np.diag([1.0, 1.0, 0.0]))
    with pytest.raises(DegenerateWeightsError):
        polar_rotation(np.diag([1.0, 1.0, -1.0]))


def test_lbs_rotation_examples(rng):
    q0 = random_quaternions(rng, 1)[0]
    T = RigidTransform(RZ90, [1, 2, 3])
    assert angular_distance(skin_rotation_lbs(T.matrix(), q0), quat_compose(RZ90, q0)) < 1e-12
    assert angular_distance(skin_rotation_lbs(np.eye(4), q0), q0) < 1e-12


def test_average_examples(rng):
    q0 = random_quaternions(rng, 1)[0]
    bones = np.array([IDQ, RZ90])
    for solver in (EXACT, POWER15):
        assert angular_distance(average_rotation(bones, [0.5, 0.5], solver), RZ45) < 1e-9
        assert angular_distance(skin_rotation_avg(np.array([IDQ]), [1.0], q0, solver), q0) < 1e-12
        r = random_quaternions(rng, 1)[0]
        got = skin_rotation_avg(np.array([r]), [1.0], q0, solver)
        assert angular_distance(got, quat_compose(r, q0)) < 1e-9
        assert got[0] >= 0


def test_average_rejects_zero_weights():
    with pytest.raises(ValueError):
        average_rotation(np.array([IDQ, RZ90]), [0.0, 0.0])


def test_solver_validation():
    assert str(POWER15) == "power(15)" and str(EXACT) == "exact"
    with pytest.raises(ValueError):
        Solver("power", 0)
    with pytest.raises(ValueError):
        Solver("lanczos")


def test_mode_parse():
    assert SkinningMode.parse("quat-average") is SkinningMode.QUAT_AVERAGE
    assert SkinningMode.parse("LBS_ROTATION") is SkinningMode.LBS_ROTATION
    with pytest.raises(ValueError):
        SkinningMode.parse("dual_quaternion")


def blend_polar(bones, w):
    M = sum(wi * quat_to_matrix(b) for b, wi in zip(bones, w))
    return polar_rotation(M)


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_polar_blend_equals_quaternion_average(seed):
    # both minimize sum_k w_k ||R - R_k||_F^2 over rotations, so they coincide
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 5))
    base = random_quaternions(rng, 1)[0]
    bones = np.array([quat_compose(base, quat_from_axis_angle(rng.normal(size=3), rng.uniform(0, 1.2)))
                      for _ in range(k)])
    w = rng.dirichlet(np.ones(k))
    M = sum(wi * quat_to_matrix(b) for b, wi in zip(bones, w))
    if np.linalg.det(M) < 1e-3:
        return
    avg = quat_to_matrix(average_rotation(bones, w, EXACT))
    assert np.abs(blend_polar(bones, w) - avg).max() < 1e-9


# SH and view direction --------------------------------------------------------------

def test_skin_sh_examples(rng):
    s = rng.normal(size=(16, 3))
    assert np.array_equal(skin_sh(s, IDQ), s)
    dc = np.zeros((16, 3))
    dc[0] = rng.normal(size=3)
    assert np.array_equal(skin_sh(dc, random_quaternions(rng, 1)[0]), dc)
    q = random_quaternions(rng, 1)[0]
    R = quat_to_matrix(q)
    s[0] = 2.0
    d = rng.normal(size=(50, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    got = sh_eval_color(skin_sh(s, q), d)
    want = sh_eval_color(s, d @ R)
    assert np.abs(got - want).max() < 1e-6


def test_canonicalize_viewdir_examples(rng):
    d = np.array([0.6, 0.0, 0.8])
    assert np.allclose(canonicalize_viewdir(d, np.eye(3)), d, atol=1e-15)
    Rz = quat_to_matrix(RZ90)
    assert np.abs(canonicalize_viewdir([1.0, 0, 0], Rz) - [0, -1, 0]).max() < 1e-15
    R = quat_to_matrix(random_quaternions(rng, 1)[0])
    back = R @ canonicalize_viewdir(d, R)
    assert np.abs(back - d).max() < 1e-12


# whole cloud ------------------------------------------------------------------------

ALL_MODES = list(SkinningMode)


@pytest.fixture(scope="module")
def rig():
    return make_test_rig(3, 12, 15)


@pytest.mark.parametrize("mode", ALL_MODES)
def test_identity_pose_is_neutral(rig, mode):
    skel, w, cloud = rig
    act = activate_cloud(cloud)
    posed = skin_cloud(act, w, skel, Pose.identity(len(skel)), mode)
    assert np.abs(posed.positions - act.positions).max() < 1e-7
    assert np.abs(posed.sh - act.sh).max() < 1e-7
    assert max(angular_distance(a, b) for a, b in zip(posed.rotations, act.rotations)) < 1e-7
    assert np.abs(posed.blend_det - 1.0).max() < 1e-9


@pytest.mark.parametrize("mode", ALL_MODES)
def test_scale_and_opacity_pass_through(rig, mode):
    skel, w, cloud = rig
    act = activate_cloud(cloud)
    posed = skin_cloud(act, w, skel, twist_pose(skel, 1.0), mode)
    assert np.array_equal(posed.scales, act.scales)
    assert np.array_equal(posed.opacities, act.opacities)
    assert len(posed) == len(act)


def test_rigid_motion(rig, rng):
    skel, w, cloud = rig
    act = activate_cloud(cloud)
    G = RigidTransform(random_quaternions(rng, 1)[0], rng.normal(size=3))
    R = G.matrix3
    posed = {m: skin_cloud(act, w, skel, rigid_pose(skel, G), m) for m in ALL_MODES}
    want_mu = act.positions @ R.T + G.translation
    for m, p in posed.items():
        assert np.abs(p.positions - want_mu).max() < 1e-9
        if m is not SkinningMode.POSITION_ONLY:
            want_q = [quat_compose(G.rotation, q) for q in act.rotations]
            assert max(angular_distance(a, b) for a, b in zip(p.rotations, want_q)) < 1e-9
    qa = posed[SkinningMode.QUAT_AVERAGE]
    d = rng.normal(size=(20, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    for i in range(0, len(act), 17):
        got = sh_eval_color(qa.sh[i], d)
        want = sh_eval_color(act.sh[i], d @ R)
        assert np.abs(got - want).max() < 1e-6
    for m in (SkinningMode.LBS_ROTATION, SkinningMode.QUAT_AVERAGE_NO_SH,
              SkinningMode.VIEWDIR_CANONICAL):
        assert max(angular_distance(a, b) for a, b in
                   zip(posed[m].rotations, qa.rotations)) < 1e-7
    assert np.abs(posed[SkinningMode.LBS_ROTATION].sh - qa.sh).max() < 1e-7


def test_single_bone_rigid(rng):
    skel, w, cloud = make_test_rig(1, 8, 6)
    act = activate_cloud(cloud)
    G = RigidTransform(random_quaternions(rng, 1)[0], [0.1, 0.2, -0.3])
    posed = skin_cloud(act, w, skel, rigid_pose(skel, G), SkinningMode.QUAT_AVERAGE)
    assert np.abs(posed.positions - (act.positions @ G.matrix3.T + G.translation)).max() < 1e-12
    for i in range(len(act)):
        assert np.abs(posed.sh[i] - rotate_sh(act.sh[i], G.matrix3)).max() < 1e-12


def test_mode_semantics_on_twist(rig):
    skel, w, cloud = rig
    act = activate_cloud(cloud)
    pose = twist_pose(skel, 1.0)
    p = {m: skin_cloud(act, w, skel, pose, m) for m in ALL_MODES}
    po = p[SkinningMode.POSITION_ONLY]
    assert np.array_equal(po.rotations, act.rotations) and np.array_equal(po.sh, act.sh)
    assert np.array_equal(p[SkinningMode.QUAT_AVERAGE_NO_SH].sh, act.sh)
    assert np.array_equal(p[SkinningMode.QUAT_AVERAGE_NO_SH].rotations,
                          p[SkinningMode.QUAT_AVERAGE].rotations)
    vd = p[SkinningMode.VIEWDIR_CANONICAL]
    assert np.array_equal(vd.sh, act.sh)
    assert vd.canonical_rotations is not None and p[SkinningMode.QUAT_AVERAGE].canonical_rotations is None
    assert np.array_equal(vd.rotations, p[SkinningMode.LBS_ROTATION].rotations)
    for m in ALL_MODES[1:]:
        assert np.array_equal(p[m].positions, po.positions)
    # the unorthonormalized blends are not rotations on the twisted fixture
    dev = np.abs(po.blend_det - 1.0).max()
    assert dev > 1e-3
    # the polar and averaged rotations coincide up to rounding
    diff = max(angular_distance(a, b) for a, b in
               zip(p[SkinningMode.QUAT_AVERAGE].rotations, p[SkinningMode.LBS_ROTATION].rotations))
    print(f"twist fixture: max det deviation {dev:.4g}, max quat_average/lbs angle {diff:.3g} rad")


def test_twist_matches_per_gaussian_reference(rig):
    skel, w, cloud = rig
    act = activate_cloud(cloud)
    pose = twist_pose(skel, 0.7)
    T = skinning_transforms(skel, pose)
    bones = np.array([t.rotation for t in T])
    posed = skin_cloud(act, w, skel, pose, SkinningMode.QUAT_AVERAGE, EXACT)
    for i in range(0, len(act), 11):
        row = w.row(i)
        B = blend_transforms(T, row)
        assert np.abs(posed.positions[i] - (B[:3, :3] @ act.positions[i] + B[:3, 3])).max() < 1e-12
        idx = [j for j, _ in row]
        q = skin_rotation_avg(bones[idx], [x for _, x in row], act.rotations[i], EXACT)
        assert angular_distance(posed.rotations[i], q) < 1e-12
        assert np.abs(posed.sh[i] - skin_sh(act.sh[i], quat_compose(q, [act.rotations[i][0],
                      *(-act.rotations[i][1:])]))).max() < 1e-9
        assert abs(posed.blend_det[i] - np.linalg.det(B[:3, :3])) < 1e-12


def test_quaternion_outputs_are_unit(rig):
    skel, w, cloud = rig
    posed = skin_cloud(cloud, w, skel, twist_pose(skel, 1.0), SkinningMode.QUAT_AVERAGE)
    norms = np.linalg.norm(posed.rotations, axis=1)
    assert np.abs(norms - 1).max() < 1e-12
    assert np.all(posed.rotations[:, 0] >= 0)


def test_power_and_exact_solvers_agree(rig):
    skel, w, cloud = rig
    pose = twist_pose(skel, 1.0)
    a = skin_cloud(cloud, w, skel, pose, SkinningMode.QUAT_AVERAGE, EXACT)
    b = skin_cloud(cloud, w, skel, pose, SkinningMode.QUAT_AVERAGE, POWER15)
    assert max(angular_distance(x, y) for x, y in zip(a.rotations, b.rotations)) < 1e-3


@pytest.mark.parametrize("mode", ALL_MODES)
def test_worker_count_is_bitwise_irrelevant(rig, mode):
    skel, w, cloud = rig
    pose = twist_pose(skel, 0.8)
    a = skin_cloud(cloud, w, skel, pose, mode, workers=1)
    for workers in (2, 3, 8):
        b = skin_cloud(cloud, w, skel, pose, mode, workers=workers)
        for f in ("positions", "rotations", "sh", "blend_det"):
            assert np.array_equal(getattr(a, f), getattr(b, f))


def test_scipy_rotation_oracle_for_bones(rig):
    skel, _, _ = rig
    pose = twist_pose(skel, 1.0)
    for t in skinning_transforms(skel, pose):
        wxyz = t.rotation
        R = Rotation.from_quat([wxyz[1], wxyz[2], wxyz[3], wxyz[0]]).as_matrix()
        assert np.abs(R - t.matrix3).max() < 1e-12


def test_mismatched_assets(rig):
    skel, w, cloud = rig
    short = SkinWeights(w.indices[:-1], w.weights[:-1], w.joint_count)
    with pytest.raises(AssetMismatchError):
        skin_cloud(cloud, short, skel, Pose.identity(3))
    with pytest.raises(AssetMismatchError):
        skin_cloud(cloud, w, chain_skeleton(2), Pose.identity(2))
    with pytest.raises(ValueError):
        skin_cloud(cloud, w, skel, Pose.identity(2))


def test_degenerate_blend_reports_index():
    skel = chain_skeleton(2)
    _, _, cloud = make_test_rig(2, 2, 2)
    n = len(cloud)
    # half of the identity and half of a half turn about z: singular block
    w = SkinWeights(np.tile([0, 1], (n, 1)), np.full((n, 2), 0.5), 2)
    rots = np.array([IDQ, quat_from_axis_angle([0, 0, 1], math.pi)])
    with pytest.raises(DegenerateWeightsError, match="Gaussian 0"):
        skin_cloud(cloud, w, skel, Pose(rots), SkinningMode.LBS_ROTATION)
    # the average stays well defined on the same input
    posed = skin_cloud(cloud, w, skel, Pose(rots), SkinningMode.QUAT_AVERAGE, EXACT)
    assert np.all(np.isfinite(posed.rotations))


def test_posed_from_activated(rig):
    _, _, cloud = rig
    act = activate_cloud(cloud)
    p = PosedCloud.from_activated(act)
    assert p.mode is SkinningMode.POSITION_ONLY and len(p) == len(act)
