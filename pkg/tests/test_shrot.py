import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, strategies as st

from gausskin.errors import IllConditionedError, MalformedRotationError
from gausskin.rotcore import quat_from_axis_angle, quat_to_matrix, random_quaternions
from gausskin.shrot import (
    ORDER_SLICES,
    SH_C0,
    apply_blocks,
    dc_from_color,
    rotate_sh,
    sh_basis,
    sh_eval_color,
    sh_project_from_samples,
    wigner_blocks,
)


def unit_vectors(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_rotation(rng):
    return quat_to_matrix(random_quaternions(rng, 1)[0])


def scipy_basis(d):
    """Real SH from scipy's complex harmonics (Condon-Shortley phase kept)."""
    theta = np.arccos(np.clip(d[:, 2], -1, 1))
    phi = np.arctan2(d[:, 1], d[:, 0])
    cols = []
    for l in range(4):
        for m in range(-l, l + 1):
            Y = sp.sph_harm_y(l, abs(m), theta, phi)
            if m == 0:
                cols.append(np.real(Y))
            else:
                cols.append(math.sqrt(2) * (np.imag(Y) if m < 0 else np.real(Y)))
    return np.stack(cols, axis=1)


# basis -------------------------------------------------------------------------

def test_basis_matches_complex_harmonics(rng):
    d = unit_vectors(rng, 500)
    assert np.abs(sh_basis(d) - scipy_basis(d)).max() < 1e-12


def test_basis_constant_and_axis():
    b = sh_basis(np.array([0.0, 0.0, 1.0]))
    assert b[0] == 0.28209479177387814
    assert b[1] == 0.0 and b[3] == 0.0 and b[2] != 0.0


def test_basis_monte_carlo_orthonormal(rng):
    d = unit_vectors(rng, 50_000)
    B = sh_basis(d)
    gram = 4.0 * math.pi * B.T @ B / len(d)
    assert np.abs(gram - np.eye(16)).max() < 2e-2


def test_basis_batch_shapes(rng):
    d = unit_vectors(rng, 6).reshape(2, 3, 3)
    assert sh_basis(d).shape == (2, 3, 16)


# colors --------------------------------------------------------------------------

def test_eval_color_offset_and_clamp():
    d = np.array([0.0, 1.0, 0.0])
    assert np.array_equal(sh_eval_color(np.zeros((16, 3)), d), [0.5, 0.5, 0.5])
    c = np.zeros((16, 3))
    c[0] = -10.0
    assert np.array_equal(sh_eval_color(c, d), [0.0, 0.0, 0.0])


def test_dc_from_color_round_trip():
    target = np.array([0.1, 0.7, 0.95])
    c = np.zeros((16, 3))
    c[0] = dc_from_color(target)
    assert np.allclose(c[0], target / SH_C0 - 0.5 / SH_C0, atol=1e-15)
    assert np.allclose(sh_eval_color(c, [0.0, 0.0, 1.0]), target, atol=1e-15)


# Wigner blocks -----------------------------------------------------------------

def test_identity_blocks_exact():
    for D in wigner_blocks(np.eye(3)):
        assert np.array_equal(D, np.eye(len(D)))


def test_blocks_orthogonal_det_one(rng):
    for _ in range(200):
        for D in wigner_blocks(random_rotation(rng)):
            assert np.abs(D @ D.T - np.eye(len(D))).max() < 1e-7
            assert abs(np.linalg.det(D) - 1.0) < 1e-6


def test_homomorphism(rng):
    for _ in range(200):
        R1, R2 = random_rotation(rng), random_rotation(rng)
        for D12, D1, D2 in zip(wigner_blocks(R1 @ R2), wigner_blocks(R1), wigner_blocks(R2)):
            assert np.abs(D12 - D1 @ D2).max() < 1e-6


def test_blocks_match_least_squares_projection(rng):
    # independent route: fit each rotated basis function d -> Y_k(R^T d)
    d = unit_vectors(rng, 400)
    for _ in range(20):
        R = random_rotation(rng)
        target = sh_basis(d @ R)  # Y(R^T d)
        fit, *_ = np.linalg.lstsq(sh_basis(d), target, rcond=None)  # (16, 16)
        D1, D2, D3 = wigner_blocks(R)
        for D, sl in zip((D1, D2, D3), ORDER_SLICES[1:]):
            # f(R^T d) = sum_k c_k Y_k(R^T d); rotated coefficients are fit @ c
            assert np.abs(fit[sl, sl] - D).max() < 1e-9


def test_order_one_block_is_permuted_rotation():
    R = quat_to_matrix(quat_from_axis_angle([0, 0, 1], math.pi / 2))
    D1 = wigner_blocks(R)[0]
    # order-one components are (-y, z, -x); a quarter turn about z sends x -> y
    c = np.zeros(16)
    c[3] = -1.0  # the function d -> SH_C1 * x
    out = apply_blocks(c, wigner_blocks(R))
    assert np.allclose(out[1:4], [-1.0, 0.0, 0.0], atol=1e-15)  # SH_C1 * y
    assert D1.shape == (3, 3)


def test_wigner_rejects_non_rotation():
    with pytest.raises(MalformedRotationError):
        wigner_blocks(np.diag([1.0, 1.0, -1.0]))


# rotate_sh -----------------------------------------------------------------------

def test_rotate_identity_and_dc_only(rng):
    c = rng.normal(size=(16, 3))
    assert np.array_equal(rotate_sh(c, np.eye(3)), c)
    dc = np.zeros((16, 3))
    dc[0] = rng.normal(size=3)
    assert np.array_equal(rotate_sh(dc, random_rotation(rng)), dc)


def test_rotate_functional_equivariance(rng):
    worst = 0.0
    for _ in range(300):
        c = rng.normal(scale=0.3, size=(16, 3))
        c[0] = 3.0  # stay clear of the clamp at zero
        R = random_rotation(rng)
        d = unit_vectors(rng, 100)
        got = sh_eval_color(rotate_sh(c, R), d)
        want = sh_eval_color(c, d @ R)
        worst = max(worst, np.abs(got - want).max())
    assert worst < 1e-6


def test_rotate_preserves_order_norms(rng):
    for _ in range(200):
        c = rng.normal(size=(16, 3))
        r = rotate_sh(c, random_rotation(rng))
        assert r[0].tolist() == c[0].tolist()
        for sl in ORDER_SLICES[1:]:
            assert np.abs(np.linalg.norm(r[sl], axis=0) - np.linalg.norm(c[sl], axis=0)).max() < 1e-7


@given(st.integers(0, 2**32 - 1))
def test_rotate_composition_and_inverse(seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(16, 3))
    R1, R2 = random_rotation(rng), random_rotation(rng)
    assert np.abs(rotate_sh(rotate_sh(c, R1), R2) - rotate_sh(c, R2 @ R1)).max() < 1e-6
    assert np.abs(rotate_sh(rotate_sh(c, R1), R1.T) - c).max() < 1e-6


def test_apply_blocks_vector_and_bad_shape(rng):
    c = rng.normal(size=16)
    blocks = wigner_blocks(random_rotation(rng))
    assert np.allclose(apply_blocks(c, blocks), apply_blocks(c[:, None], blocks)[:, 0])
    with pytest.raises(ValueError):
        apply_blocks(np.zeros((9, 3)), blocks)


# least-squares projection -------------------------------------------------------

def test_project_recovers_coefficients(rng):
    c = rng.normal(scale=0.2, size=(16, 3))
    c[0] = 2.0
    d = unit_vectors(rng, 500)
    rgb = sh_basis(d) @ c + 0.5
    assert np.abs(sh_project_from_samples(d, rgb) - c).max() < 1e-5


def test_project_constant_color(rng):
    d = unit_vectors(rng, 200)
    got = sh_project_from_samples(d, np.tile([0.2, 0.4, 0.6], (200, 1)))
    assert np.allclose(got[0], dc_from_color([0.2, 0.4, 0.6]), atol=1e-9)
    assert np.abs(got[1:]).max() < 1e-6


def test_project_ill_conditioned(rng):
    with pytest.raises(IllConditionedError):
        sh_project_from_samples(unit_vectors(rng, 15), np.zeros((15, 3)))
    # all directions in one plane: the z-dependent functions are undetermined
    phi = rng.uniform(0, 2 * np.pi, 100)
    flat = np.stack([np.cos(phi), np.sin(phi), np.zeros(100)], axis=1)
    with pytest.raises(IllConditionedError):
        sh_project_from_samples(flat, np.zeros((100, 3)))


def test_generated_module_is_current():
    from pathlib import Path

    import gausskin.shrot as shrot

    path = Path(shrot.__file__).with_name(shrot.GENERATED_MODULE)
    assert path.read_text() == shrot.generated_source()


def test_generated_blocks_equal_table_evaluation(rng):
    from gausskin.shrot import _T2, _T3, _wigner_into, _wigner_into_tables

    for q in random_quaternions(rng, 200):
        R = quat_to_matrix(q)
        fast = [np.empty(9), np.empty(25), np.empty(49)]
        ref = [np.empty(9), np.empty(25), np.empty(49)]
        _wigner_into(R, *fast)
        _wigner_into_tables(R, *ref, *_T2, *_T3)
        for a, b in zip(fast, ref):
            assert np.array_equal(a, b)
