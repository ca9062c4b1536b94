"""Rotation algebra: quaternions, rotation matrices, rigid transforms and
weighted quaternion averaging.

Quaternions are float64 arrays ordered ``(w, x, y, z)`` and are always
returned with a canonical sign (``w >= 0``; when ``w == 0`` the first
nonzero of ``x, y, z`` is positive). ``q`` and ``-q`` encode the same
rotation, the canonical sign just makes results reproducible.

The ``_``-prefixed functions are numba kernels shared with the batched
skinning code; the public wrappers validate and coerce their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from numba import njit

from .errors import DegenerateWeightsError, MalformedRotationError

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 32
TIE_TOL = 1e-12
DEFAULT_POWER_ITERS = 15


# ---------------------------------------------------------------------------
# kernels

@njit(cache=True, nogil=True)
def _canonicalize_into(q, out):
    """Write the w >= 0 representative of ``q``; ``out`` may alias ``q``."""
    flip = False
    if q[0] < 0.0:
        flip = True
    elif q[0] == 0.0:
        for k in range(1, 4):
            if q[k] != 0.0:
                flip = q[k] < 0.0
                break
    s = -1.0 if flip else 1.0
    for k in range(4):
        # adding 0.0 turns -0.0 into +0.0
        out[k] = s * q[k] + 0.0


@njit(cache=True, nogil=True)
def _canonicalize(q):
    out = np.empty(4)
    _canonicalize_into(q, out)
    return out


@njit(cache=True, nogil=True)
def _normalize(q):
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    out = np.empty(4)
    for k in range(4):
        out[k] = q[k] / n
    return _canonicalize(out)


@njit(cache=True, nogil=True)
def _quat_to_matrix_into(q, m):
    w, x, y, z = q[0], q[1], q[2], q[3]
    m[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    m[0, 1] = 2.0 * (x * y - w * z)
    m[0, 2] = 2.0 * (x * z + w * y)
    m[1, 0] = 2.0 * (x * y + w * z)
    m[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    m[1, 2] = 2.0 * (y * z - w * x)
    m[2, 0] = 2.0 * (x * z - w * y)
    m[2, 1] = 2.0 * (y * z + w * x)
    m[2, 2] = 1.0 - 2.0 * (x * x + y * y)


@njit(cache=True, nogil=True)
def _quat_to_matrix(q):
    m = np.empty((3, 3))
    _quat_to_matrix_into(q, m)
    return m


@njit(cache=True, nogil=True)
def _matrix_to_quat(m):
    # Shepperd: branch on the largest of (trace, diagonal) for stability
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    q = np.empty(4)
    if tr >= m[0, 0] and tr >= m[1, 1] and tr >= m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + tr)
        q[0] = 0.25 * s
        q[1] = (m[2, 1] - m[1, 2]) / s
        q[2] = (m[0, 2] - m[2, 0]) / s
        q[3] = (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = 2.0 * math.sqrt(max(1.0 + m[0, 0] - m[1, 1] - m[2, 2], 0.0))
        q[0] = (m[2, 1] - m[1, 2]) / s
        q[1] = 0.25 * s
        q[2] = (m[0, 1] + m[1, 0]) / s
        q[3] = (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] >= m[2, 2]:
        s = 2.0 * math.sqrt(max(1.0 + m[1, 1] - m[0, 0] - m[2, 2], 0.0))
        q[0] = (m[0, 2] - m[2, 0]) / s
        q[1] = (m[0, 1] + m[1, 0]) / s
        q[2] = 0.25 * s
        q[3] = (m[1, 2] + m[2, 1]) / s
    else:
        s = 2.0 * math.sqrt(max(1.0 + m[2, 2] - m[0, 0] - m[1, 1], 0.0))
        q[0] = (m[1, 0] - m[0, 1]) / s
        q[1] = (m[0, 2] + m[2, 0]) / s
        q[2] = (m[1, 2] + m[2, 1]) / s
        q[3] = 0.25 * s
    return _normalize(q)


@njit(cache=True, nogil=True)
def _quat_mul_into(a, b, out):
    """Hamilton product, not canonicalized; ``out`` must not alias the inputs."""
    out[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    out[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    out[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    out[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]


@njit(cache=True, nogil=True)
def _quat_mul(a, b):
    out = np.empty(4)
    _quat_mul_into(a, b, out)
    return out


@njit(cache=True, nogil=True)
def _quat_compose_into(a, b, out):
    _quat_mul_into(a, b, out)
    _canonicalize_into(out, out)


@njit(cache=True, nogil=True)
def _quat_compose(a, b):
    out = np.empty(4)
    _quat_compose_into(a, b, out)
    return out


@njit(cache=True, nogil=True)
def _accumulate_outer(A, b, w):
    # fill the upper triangle and mirror it, so A is exactly symmetric
    for r in range(4):
        wr = w * b[r]
        A[r, r] += wr * b[r]
        for c in range(r + 1, 4):
            v = wr * b[c]
            A[r, c] += v
            A[c, r] += v


@njit(cache=True, nogil=True)
def _jacobi_eigh(A):
    """Cyclic Jacobi on a symmetric 4x4. Returns (eigenvalues, eigenvector columns)."""
    a = A.copy()
    v = np.eye(4)
    fro = 0.0
    for r in range(4):
        for c in range(4):
            fro += a[r, c] * a[r, c]
    fro = math.sqrt(fro)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = 0.0
        for r in range(4):
            for c in range(4):
                if r != c:
                    off += a[r, c] * a[r, c]
        if math.sqrt(off) <= JACOBI_TOL * fro:
            break
        for p in range(3):
            for q in range(p + 1, 4):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                for k in range(4):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(4):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(4):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    vals = np.empty(4)
    for k in range(4):
        vals[k] = a[k, k]
    return vals, v


@njit(cache=True, nogil=True)
def _max_eigenvector_exact(A):
    vals, vecs = _jacobi_eigh(A)
    top = vals.max()
    scale = max(abs(top), abs(vals.min()))
    tol = TIE_TOL * scale if scale > 0.0 else TIE_TOL
    count = 0
    last = 0
    for k in range(4):
        if top - vals[k] <= tol:
            count += 1
            last = k
    if count == 1:
        return _canonicalize(vecs[:, last].copy())
    # repeated dominant eigenvalue: the unit vector of the eigenspace with the
    # largest |w| is the normalized projection of e_w (then e_x, e_y, e_z)
    for axis in range(4):
        p = np.zeros(4)
        for k in range(4):
            if top - vals[k] <= tol:
                coef = vecs[axis, k]
                for r in range(4):
                    p[r] += coef * vecs[r, k]
        n = math.sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3])
        if n > 1e-12:
            for r in range(4):
                p[r] /= n
            return _canonicalize(p)
    return _canonicalize(vecs[:, last].copy())


@njit(cache=True, nogil=True)
def _power_steps_into(A, start, iterations, v):
    """Exactly ``iterations`` normalized steps from ``start``; False if A v hits zero."""
    n = math.sqrt(start[0] * start[0] + start[1] * start[1] + start[2] * start[2]
                  + start[3] * start[3])
    v0, v1, v2, v3 = start[0] / n, start[1] / n, start[2] / n, start[3] / n
    ok = True
    for _ in range(iterations):
        u0 = A[0, 0] * v0 + A[0, 1] * v1 + A[0, 2] * v2 + A[0, 3] * v3
        u1 = A[1, 0] * v0 + A[1, 1] * v1 + A[1, 2] * v2 + A[1, 3] * v3
        u2 = A[2, 0] * v0 + A[2, 1] * v1 + A[2, 2] * v2 + A[2, 3] * v3
        u3 = A[3, 0] * v0 + A[3, 1] * v1 + A[3, 2] * v2 + A[3, 3] * v3
        n = math.sqrt(u0 * u0 + u1 * u1 + u2 * u2 + u3 * u3)
        if n == 0.0:
            ok = False
            break
        inv = 1.0 / n
        v0, v1, v2, v3 = u0 * inv, u1 * inv, u2 * inv, u3 * inv
    v[0], v[1], v[2], v[3] = v0, v1, v2, v3
    return ok


@njit(cache=True, nogil=True)
def _power_steps(A, start, iterations):
    v = np.empty(4)
    ok = _power_steps_into(A, start, iterations, v)
    return v, ok


@njit(cache=True, nogil=True)
def _gap_certified(A, v):
    # Rayleigh quotient lam <= lambda_max and sum_{i>=2} lambda_i^2 <= |A|_F^2 - lam^2,
    # so lam - sqrt(|A|_F^2 - lam^2) lower-bounds the dominant eigen-gap.
    lam = 0.0
    fro2 = 0.0
    for r in range(4):
        acc = 0.0
        for c in range(4):
            acc += A[r, c] * v[c]
            fro2 += A[r, c] * A[r, c]
        lam += v[r] * acc
    rest = fro2 - lam * lam
    bound = lam - math.sqrt(rest if rest > 0.0 else 0.0)
    return bound >= TIE_TOL * math.sqrt(fro2)


@njit(cache=True, nogil=True)
def _max_eigenvector_power_into(A, start, iterations, v):
    ok = _power_steps_into(A, start, iterations, v)
    if not ok or not _gap_certified(A, v):
        v[:] = _max_eigenvector_exact(A)
    else:
        _canonicalize_into(v, v)


@njit(cache=True, nogil=True)
def _max_eigenvector_power(A, start, iterations):
    v = np.empty(4)
    _max_eigenvector_power_into(A, start, iterations, v)
    return v


@njit(cache=True, nogil=True)
def _angular_distance(a, b):
    # 4 atan2(|a - b|, |a + b|) after sign alignment; unlike acos of the dot
    # product it keeps full precision for nearly equal rotations
    s = 1.0 if a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] >= 0.0 else -1.0
    diff = 0.0
    tot = 0.0
    for k in range(4):
        diff += (a[k] - s * b[k]) ** 2
        tot += (a[k] + s * b[k]) ** 2
    return 4.0 * math.atan2(math.sqrt(diff), math.sqrt(tot))


# ---------------------------------------------------------------------------
# public API

def _as_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise ValueError(f"expected a 4-vector (w, x, y, z), got shape {q.shape}")
    return q


def normalize(q) -> np.ndarray:
    """Unit-normalize and canonicalize a quaternion; zero input is rejected."""
    q = _as_quat(q)
    n = float(np.linalg.norm(q))
    if not np.isfinite(n) or n == 0.0:
        raise ValueError("cannot normalize a zero or non-finite quaternion")
    return _normalize(q)


def canonicalize(q) -> np.ndarray:
    return _canonicalize(_as_quat(q))


def quat_to_matrix(q) -> np.ndarray:
    return _quat_to_matrix(_as_quat(q))


def check_rotation(m, tol: float = 1e-7) -> np.ndarray:
    """Return ``m`` as a float64 3x3 array, raising if it is not a proper rotation."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise MalformedRotationError(f"expected a 3x3 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise MalformedRotationError("rotation matrix has non-finite entries")
    err = np.abs(m.T @ m - np.eye(3)).max()
    if err > tol:
        raise MalformedRotationError(f"matrix is not orthogonal (max |M^T M - I| = {err:.3g})")
    det = np.linalg.det(m)
    if abs(det - 1.0) > tol:
        raise MalformedRotationError(f"matrix determinant is {det:.6g}, expected +1")
    return m


def matrix_to_quat(m) -> np.ndarray:
    return _matrix_to_quat(check_rotation(m))


def quat_compose(a, b) -> np.ndarray:
    """Rotation ``a`` applied after ``b``: ``R(compose(a, b)) = R(a) @ R(b)``."""
    return _quat_compose(_as_quat(a), _as_quat(b))


def quat_conjugate(q) -> np.ndarray:
    q = _as_quat(q)
    return _canonicalize(np.array([q[0], -q[1], -q[2], -q[3]]))


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    h = 0.5 * angle
    return normalize(np.concatenate([[math.cos(h)], math.sin(h) * axis]))


def random_quaternions(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` uniformly distributed canonical unit quaternions, shape (n, 4)."""
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return np.array([_canonicalize(row) for row in q]).reshape(n, 4)


def build_average_matrix(bones, weights) -> np.ndarray:
    """Weighted sum of quaternion outer products ``sum_j w_j b_j b_j^T``."""
    bones = np.asarray(bones, dtype=np.float64).reshape(-1, 4)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if len(bones) != len(weights):
        raise ValueError(f"{len(bones)} bones but {len(weights)} weights")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise DegenerateWeightsError("weights must be finite and non-negative")
    if not np.any(weights > 0):
        raise DegenerateWeightsError("all skin weights are zero")
    A = np.zeros((4, 4))
    for b, w in zip(bones, weights):
        _accumulate_outer(A, b, w)
    return A


def _as_sym4(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {A.shape}")
    return A


def max_eigenvector_exact(A) -> np.ndarray:
    """Dominant eigenvector of a symmetric 4x4 via cyclic Jacobi.

    When the dominant eigenvalue is repeated (within 1e-12 relative) the
    returned vector is the unit vector of that eigenspace with the largest
    ``|w|``, falling through to ``|x|``, ``|y|``, ``|z|``.
    """
    return _max_eigenvector_exact(_as_sym4(A))


def max_eigenvector_power(A, start, iterations: int = DEFAULT_POWER_ITERS) -> np.ndarray:
    """Fixed-count power iteration from ``start``.

    Falls back to :func:`max_eigenvector_exact` when the dominant eigen-gap
    cannot be certified above 1e-12 (power iteration has no defined limit
    direction under ties) or the iterate collapses to zero.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    start = _as_quat(start)
    if not np.any(start != 0):
        raise ValueError("start vector must be nonzero")
    return _max_eigenvector_power(_as_sym4(A), start, int(iterations))


def angular_distance(a, b) -> float:
    """Rotation angle between two unit quaternions (sign-insensitive)."""
    return float(_angular_distance(_as_quat(a), _as_quat(b)))


def average_quaternions(bones, weights, solver: str = "exact",
                        iterations: int = DEFAULT_POWER_ITERS) -> np.ndarray:
    """Weighted rotation average; the power solver warm-starts at the heaviest bone."""
    bones = np.asarray(bones, dtype=np.float64).reshape(-1, 4)
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    A = build_average_matrix(bones, weights)
    if solver == "exact":
        return max_eigenvector_exact(A)
    if solver == "power":
        return max_eigenvector_power(A, bones[int(np.argmax(weights))], iterations)
    raise ValueError(f"unknown solver {solver!r}")


@dataclass(frozen=True)
class RigidTransform:
    """Rotation (as a unit quaternion) followed by a translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", normalize(self.rotation))
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(IDENTITY_QUAT.copy(), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> RigidTransform:
        m = np.asarray(m, dtype=np.float64)
        return cls(matrix_to_quat(m[:3, :3]), m[:3, 3])

    @property
    def matrix3(self) -> np.ndarray:
        return _quat_to_matrix(self.rotation)

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.matrix3
        out[:3, 3] = self.translation
        return out

    def compose(self, other: RigidTransform) -> RigidTransform:
        """``self * other``: apply ``other`` first."""
        rot = _quat_compose(self.rotation, other.rotation)
        t = self.matrix3 @ other.translation + self.translation
        return RigidTransform(rot, t)

    __mul__ = compose

    def inverse(self) -> RigidTransform:
        conj = quat_conjugate(self.rotation)
        return RigidTransform(conj, -(_quat_to_matrix(conj) @ self.translation))

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.matrix3.T + self.translation
