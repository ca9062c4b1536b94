"""Real spherical harmonics (orders 0-3) and their rotation.

The basis, component order and signs follow the convention used by 3DGS
assets: index 0 is the constant term, 1-3 hold order 1 as ``(-y, z, -x)``,
4-8 order 2 and 9-15 order 3 (``m = -l .. l`` within each order).
Coefficient arrays have shape ``(16, 3)``: one column per color channel.

``rotate_sh(s, R)`` returns coefficients of the function ``d -> f(R^T d)``,
so the lobe pattern turns with the body.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ._wigner_gen import order2 as _order2, order3 as _order3
from .errors import IllConditionedError
from .rotcore import check_rotation

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)

NUM_COEFFS = 16
ORDER_SLICES = (slice(0, 1), slice(1, 4), slice(4, 9), slice(9, 16))


def sh_basis(direction) -> np.ndarray:
    """Basis values for one direction (3,) or a batch (..., 3) -> (..., 16)."""
    d = np.asarray(direction, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    xx, yy, zz = x * x, y * y, z * z
    out = np.empty(d.shape[:-1] + (16,))
    out[..., 0] = SH_C0
    out[..., 1] = -SH_C1 * y
    out[..., 2] = SH_C1 * z
    out[..., 3] = -SH_C1 * x
    out[..., 4] = SH_C2[0] * x * y
    out[..., 5] = SH_C2[1] * y * z
    out[..., 6] = SH_C2[2] * (2.0 * zz - xx - yy)
    out[..., 7] = SH_C2[3] * x * z
    out[..., 8] = SH_C2[4] * (xx - yy)
    out[..., 9] = SH_C3[0] * y * (3.0 * xx - yy)
    out[..., 10] = SH_C3[1] * x * y * z
    out[..., 11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
    out[..., 12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    out[..., 13] = SH_C3[4] * x * (4.0 * zz - xx - yy)
    out[..., 14] = SH_C3[5] * z * (xx - yy)
    out[..., 15] = SH_C3[6] * x * (xx - 3.0 * yy)
    return out


def sh_eval_color(coeffs, direction) -> np.ndarray:
    """RGB for one direction or a batch: ``basis . coeffs + 0.5``, clamped at 0."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    rgb = sh_basis(direction) @ coeffs + 0.5
    return np.maximum(rgb, 0.0)


def dc_from_color(color) -> np.ndarray:
    """DC coefficient per channel that evaluates to ``color``."""
    return (np.asarray(color, dtype=np.float64) - 0.5) / SH_C0


# ---------------------------------------------------------------------------
# Wigner blocks by the real-basis recurrence
#
# Each order-l block entry is a sum of products (order-1 entry) x (order l-1
# entry). The recurrence is expanded once, symbolically, into flat term
# tables (target, coefficient, order-1 index, order l-1 index) with the
# basis signs folded into the coefficients; the kernels just evaluate them.

def _sign(m: int) -> float:
    return -1.0 if m % 2 else 1.0


def _p_terms(i, a, b, l):
    """Terms of the recurrence helper P as (coef, (i, j) order 1, (a, b) order l-1)."""
    if b == l:
        return [(1.0, (i, 1), (a, l - 1)), (-1.0, (i, -1), (a, -l + 1))]
    if b == -l:
        return [(1.0, (i, 1), (a, -l + 1)), (1.0, (i, -1), (a, l - 1))]
    return [(1.0, (i, 0), (a, b))]


def _entry_terms(l, m, n):
    am = abs(m)
    d = 1.0 if m == 0 else 0.0
    denom = 2 * l * (2 * l - 1) if abs(n) == l else (l + n) * (l - n)
    u = math.sqrt((l + m) * (l - m) / denom)
    v = 0.5 * math.sqrt((1 + d) * (l + am - 1) * (l + am) / denom) * (1 - 2 * d)
    w = -0.5 * math.sqrt(max((l - am - 1) * (l - am), 0) / denom) * (1 - d)
    terms = []

    def add(scale, i, a, b):
        terms.extend((scale * c, r, p) for c, r, p in _p_terms(i, a, b, l))

    if u:
        add(u, 0, m, n)
    if v:
        if m == 0:
            add(v, 1, 1, n)
            add(v, -1, -1, n)
        elif m > 0:
            d1 = 1.0 if m == 1 else 0.0
            add(v * math.sqrt(1 + d1), 1, m - 1, n)
            if 1 - d1:
                add(-v, -1, -m + 1, n)
        else:
            d1 = 1.0 if m == -1 else 0.0
            if 1 - d1:
                add(v, 1, m + 1, n)
            add(v * math.sqrt(1 + d1), -1, -m - 1, n)
    if w:
        if m > 0:
            add(w, 1, m + 1, n)
            add(w, -1, -m - 1, n)
        else:
            add(w, 1, m - 1, n)
            add(-w, -1, -m + 1, n)
    return terms


def _term_table(l):
    size, prev = 2 * l + 1, 2 * l - 1
    target, coef, r_idx, p_idx = [], [], [], []
    for m in range(-l, l + 1):
        for n in range(-l, l + 1):
            for c, (i, j), (a, b) in _entry_terms(l, m, n):
                # unsigned -> signed basis: every entry picks up s_row * s_col
                c *= _sign(m) * _sign(n) * _sign(i) * _sign(j) * _sign(a) * _sign(b)
                target.append((m + l) * size + (n + l))
                coef.append(c)
                r_idx.append((i + 1) * 3 + (j + 1))
                p_idx.append((a + l - 1) * prev + (b + l - 1))
    return (np.array(target, dtype=np.int64), np.array(coef),
            np.array(r_idx, dtype=np.int64), np.array(p_idx, dtype=np.int64))


_T2 = _term_table(2)
_T3 = _term_table(3)

GENERATED_MODULE = "_wigner_gen.py"


def generated_source() -> str:
    """Source of ``_wigner_gen``: the term tables unrolled into straight-line code.

    Each entry sums its terms left to right starting from 0.0, the same
    operations in the same order as the table evaluator, so both give
    bitwise equal blocks.
    """
    out = ['"""Wigner blocks of orders 2 and 3 as straight-line code.',
           "",
           "Generated from the term tables in ``shrot`` by",
           "``shrot.write_generated_module()``; do not edit by hand.",
           '"""',
           "",
           "from numba import njit",
           ""]
    for l, table, prev in ((2, _T2, "d1"), (3, _T3, "d2")):
        target, coef, r_idx, p_idx = table
        size = 2 * l + 1
        args = "out, d1" if l == 2 else "out, d1, d2"
        out += ["", "@njit(cache=True, nogil=True)", f"def order{l}({args}):"]
        for t in range(size * size):
            terms = [f"{float(coef[k])!r} * d1[{r_idx[k]}] * {prev}[{p_idx[k]}]"
                     for k in np.flatnonzero(target == t)]
            out.append(f"    out[{t}] = " + " + ".join(["0.0"] + terms))
    return "\n".join(out) + "\n"


def write_generated_module(path=None) -> None:
    import pathlib

    path = pathlib.Path(__file__).with_name(GENERATED_MODULE) if path is None else path
    pathlib.Path(path).write_text(generated_source())


@njit(cache=True, nogil=True)
def _eval_terms(out, target, coef, r_idx, p_idx, d1, prev):
    out[:] = 0.0
    for k in range(target.shape[0]):
        out[target[k]] += coef[k] * d1[r_idx[k]] * prev[p_idx[k]]


@njit(cache=True, nogil=True)
def _order1_into(R, d1):
    # order-1 components are ordered (y, z, x), hence the index shift
    for i in range(3):
        for j in range(3):
            s = 1.0 if (i + j) % 2 == 0 else -1.0
            d1[i * 3 + j] = s * R[(i + 1) % 3, (j + 1) % 3]


@njit(cache=True, nogil=True)
def _wigner_into_tables(R, d1, d2, d3, t2, c2, r2, p2, t3, c3, r3, p3):
    """Reference evaluation straight from the term tables."""
    _order1_into(R, d1)
    _eval_terms(d2, t2, c2, r2, p2, d1, d1)
    _eval_terms(d3, t3, c3, r3, p3, d1, d2)


@njit(cache=True, nogil=True)
def _wigner_into(R, d1, d2, d3):
    """Fill flat blocks d1 (9,), d2 (25,), d3 (49,) for rotation R."""
    _order1_into(R, d1)
    _order2(d2, d1)
    _order3(d3, d1, d2)


@njit(cache=True, nogil=True)
def _apply_flat(sh, d1, d2, d3, out):
    """Rotate one (16, C) coefficient array into ``out`` (must not alias ``sh``)."""
    for c in range(sh.shape[1]):
        out[0, c] = sh[0, c]
        for i in range(3):
            acc = 0.0
            for j in range(3):
                acc += d1[i * 3 + j] * sh[1 + j, c]
            out[1 + i, c] = acc
        for i in range(5):
            acc = 0.0
            for j in range(5):
                acc += d2[i * 5 + j] * sh[4 + j, c]
            out[4 + i, c] = acc
        for i in range(7):
            acc = 0.0
            for j in range(7):
                acc += d3[i * 7 + j] * sh[9 + j, c]
            out[9 + i, c] = acc


def _blocks_flat(R):
    d1, d2, d3 = np.empty(9), np.empty(25), np.empty(49)
    _wigner_into(np.ascontiguousarray(R, dtype=np.float64), d1, d2, d3)
    return d1, d2, d3


def wigner_blocks(R) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rotation operators for orders 1, 2, 3 (3x3, 5x5, 7x7)."""
    d1, d2, d3 = _blocks_flat(check_rotation(R))
    return d1.reshape(3, 3), d2.reshape(5, 5), d3.reshape(7, 7)


def apply_blocks(coeffs, blocks) -> np.ndarray:
    """Apply (D1, D2, D3) to a (16, C) or (16,) coefficient array."""
    sh = np.ascontiguousarray(coeffs, dtype=np.float64)
    if sh.shape[0] != NUM_COEFFS:
        raise ValueError(f"expected {NUM_COEFFS} coefficients per channel, got {sh.shape[0]}")
    squeeze = sh.ndim == 1
    if squeeze:
        sh = sh[:, None]
    flat = [np.ascontiguousarray(D, dtype=np.float64).reshape(-1) for D in blocks]
    out = np.empty_like(sh)
    _apply_flat(sh, flat[0], flat[1], flat[2], out)
    return out[:, 0] if squeeze else out


def rotate_sh(coeffs, R) -> np.ndarray:
    """Rotate a (16, 3) coefficient array so it represents ``d -> f(R^T d)``."""
    return apply_blocks(coeffs, wigner_blocks(R))


def sh_project_from_samples(directions, colors, max_condition: float = 1e6) -> np.ndarray:
    """Least-squares (16, 3) coefficients reproducing sampled colors.

    Inverts the ``+0.5`` color offset; samples are assumed unclamped.
    """
    d = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    rgb = np.asarray(colors, dtype=np.float64).reshape(len(d), -1)
    if len(d) < NUM_COEFFS:
        raise IllConditionedError(
            f"need at least {NUM_COEFFS} samples to fit order-3 SH, got {len(d)}")
    B = sh_basis(d)
    cond = np.linalg.cond(B.T @ B)
    if not np.isfinite(cond) or cond >= max_condition:
        raise IllConditionedError(
            f"sample directions are too poorly spread (normal-equation condition {cond:.3g})")
    coeffs, *_ = np.linalg.lstsq(B, rgb - 0.5, rcond=None)
    return coeffs
