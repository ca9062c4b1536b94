"""Gaussian cloud data model, parameter activations, covariance, density and
3DGS-compatible binary PLY I/O."""

from __future__ import annotations

from dataclasses import dataclass
import os
from pathlib import Path

import numpy as np

from . import errors
from .rotcore import _quat_to_matrix, normalize
from .shrot import NUM_COEFFS

# raw values past these saturate the activations so that scales stay finite
# and positive and opacities stay strictly inside (0, 1)
LOG_SCALE_LIMIT = 700.0
OPACITY_MIN = float(np.nextafter(0.0, 1.0))
OPACITY_MAX = float(np.nextafter(1.0, 0.0))

N_REST = 3 * (NUM_COEFFS - 1)
PLY_PROPERTIES = (
    ["x", "y", "z", "nx", "ny", "nz"]
    + [f"f_dc_{k}" for k in range(3)]
    + [f"f_rest_{k}" for k in range(N_REST)]
    + ["opacity"]
    + [f"scale_{k}" for k in range(3)]
    + [f"rot_{k}" for k in range(4)]
)
REQUIRED_PROPERTIES = tuple(p for p in PLY_PROPERTIES if p not in ("nx", "ny", "nz"))


@dataclass
class GaussianCloud:
    """Canonical avatar in raw (storage) parameters, structure-of-arrays.

    Arrays are float32 so the PLY round trip is bitwise exact:
    ``positions`` (N, 3), ``rotations`` (N, 4) unnormalized w-first,
    ``log_scales`` (N, 3), ``opacity_logits`` (N,), ``sh`` (N, 16, 3).
    """

    positions: np.ndarray
    rotations: np.ndarray
    log_scales: np.ndarray
    opacity_logits: np.ndarray
    sh: np.ndarray

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float32).reshape(-1, 3)
        n = len(self.positions)
        self.rotations = np.ascontiguousarray(self.rotations, dtype=np.float32).reshape(n, 4)
        self.log_scales = np.ascontiguousarray(self.log_scales, dtype=np.float32).reshape(n, 3)
        self.opacity_logits = np.ascontiguousarray(self.opacity_logits, dtype=np.float32).reshape(n)
        self.sh = np.ascontiguousarray(self.sh, dtype=np.float32).reshape(n, NUM_COEFFS, 3)

    def __len__(self) -> int:
        return len(self.positions)

    def check_finite(self) -> None:
        for name in ("positions", "rotations", "log_scales", "opacity_logits", "sh"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"GaussianCloud.{name} contains non-finite values")

    @classmethod
    def empty(cls) -> GaussianCloud:
        return cls(np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 3)), np.zeros(0),
                   np.zeros((0, NUM_COEFFS, 3)))

    @classmethod
    def random(cls, n: int, seed: int = 0, extent: float = 1.0) -> GaussianCloud:
        rng = np.random.default_rng(seed)
        return cls(
            positions=rng.uniform(-extent, extent, size=(n, 3)),
            rotations=rng.normal(size=(n, 4)),
            log_scales=rng.uniform(-5.0, -2.0, size=(n, 3)),
            opacity_logits=rng.normal(size=n),
            sh=rng.normal(scale=0.3, size=(n, NUM_COEFFS, 3)),
        )


@dataclass(frozen=True)
class ActivatedGaussian:
    mu: np.ndarray
    q: np.ndarray
    sigma: np.ndarray
    alpha: float
    sh: np.ndarray


@dataclass
class ActivatedCloud:
    """All Gaussians of a cloud in activated form, float64."""

    positions: np.ndarray
    rotations: np.ndarray
    scales: np.ndarray
    opacities: np.ndarray
    sh: np.ndarray

    def __len__(self) -> int:
        return len(self.positions)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, OPACITY_MIN, OPACITY_MAX)


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


def canonicalize_rows(q: np.ndarray) -> np.ndarray:
    """Apply the ``w >= 0`` sign convention to each row of (N, 4)."""
    q = np.asarray(q, dtype=np.float64)
    lead = q[:, 0].copy()
    for k in (1, 2, 3):
        fill = lead == 0.0
        lead[fill] = q[fill, k]
    sign = np.where(lead < 0.0, -1.0, 1.0)
    return q * sign[:, None] + 0.0


def normalize_rows(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    norm = np.sqrt(np.einsum("ij,ij->i", q, q))
    bad = ~(norm > 0.0) | ~np.isfinite(norm)
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        raise ValueError(f"Gaussian {first} has a zero or non-finite raw rotation")
    return canonicalize_rows(q / norm[:, None])


def activate_cloud(cloud: GaussianCloud) -> ActivatedCloud:
    return ActivatedCloud(
        positions=cloud.positions.astype(np.float64),
        rotations=normalize_rows(cloud.rotations),
        scales=np.exp(np.clip(cloud.log_scales.astype(np.float64), -LOG_SCALE_LIMIT, LOG_SCALE_LIMIT)),
        opacities=sigmoid(cloud.opacity_logits),
        sh=cloud.sh.astype(np.float64),
    )


def activate(cloud: GaussianCloud, index: int) -> ActivatedGaussian:
    """Activated parameters of a single Gaussian."""
    if not -len(cloud) <= index < len(cloud):
        raise IndexError(f"Gaussian index {index} out of range for {len(cloud)} Gaussians")
    raw_q = cloud.rotations[index].astype(np.float64)
    if not np.any(raw_q != 0):
        raise ValueError(f"Gaussian {index} has a zero raw rotation (corrupt asset)")
    log_s = np.clip(cloud.log_scales[index].astype(np.float64), -LOG_SCALE_LIMIT, LOG_SCALE_LIMIT)
    return ActivatedGaussian(
        mu=cloud.positions[index].astype(np.float64),
        q=normalize(raw_q),
        sigma=np.exp(log_s),
        alpha=float(sigmoid(np.float64(cloud.opacity_logits[index]))),
        sh=cloud.sh[index].astype(np.float64),
    )


def covariance3d(q, sigma) -> np.ndarray:
    """``R S S^T R^T`` for a unit quaternion and positive scales."""
    R = _quat_to_matrix(np.asarray(q, dtype=np.float64))
    M = R * np.asarray(sigma, dtype=np.float64)[None, :]
    return M @ M.T


def covariance3d_batch(q: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Vectorized covariance for (N, 4) unit quaternions and (N, 3) scales."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((len(q), 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    M = R * sigma[:, None, :]
    return np.einsum("nik,njk->nij", M, M)


def density_at(g: ActivatedGaussian, x) -> float:
    """Spatial opacity ``alpha * exp(-0.5 (x-mu)^T Sigma^-1 (x-mu))``."""
    d = np.asarray(x, dtype=np.float64) - g.mu
    # Sigma^-1 = R diag(1/sigma^2) R^T, so the quadratic form is |diag(1/sigma) R^T d|^2
    local = (_quat_to_matrix(g.q).T @ d) / g.sigma
    return float(g.alpha * np.exp(-0.5 * float(local @ local)))


# ---------------------------------------------------------------------------
# PLY

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2", "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4", "uint": "<u4", "uint32": "<u4",
    "float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8",
}


@dataclass
class _Element:
    name: str
    count: int
    props: list  # (name, dtype) or (name, None) for list properties

    @property
    def fixed(self) -> bool:
        return all(dt is not None for _, dt in self.props)

    def dtype(self) -> np.dtype:
        return np.dtype([(n, dt) for n, dt in self.props])


def _parse_header(data: bytes) -> tuple[list[_Element], int]:
    marker = b"end_header"
    pos = data.find(marker)
    if not data.startswith(b"ply") or pos < 0:
        raise errors.PlyHeaderError("not a PLY file (missing 'ply' magic or end_header)")
    end = data.find(b"\n", pos)
    if end < 0:
        raise errors.PlyHeaderError("truncated PLY header")
    lines = data[:pos].decode("ascii", errors="replace").splitlines()
    elements: list[_Element] = []
    fmt = None
    for raw in lines[1:]:
        parts = raw.strip().split()
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "format":
            fmt = parts[1] if len(parts) > 1 else None
        elif parts[0] == "element":
            if len(parts) != 3:
                raise errors.PlyHeaderError(f"bad element line {raw!r}")
            elements.append(_Element(parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise errors.PlyHeaderError("property declared before any element")
            if parts[1] == "list":
                elements[-1].props.append((parts[-1], None))
            else:
                if len(parts) != 3 or parts[1] not in _PLY_TYPES:
                    raise errors.PlyHeaderError(f"bad property line {raw!r}")
                elements[-1].props.append((parts[2], parts[1]))
        else:
            raise errors.PlyHeaderError(f"unexpected header line {raw!r}")
    if fmt != "binary_little_endian":
        raise errors.PlyHeaderError(f"unsupported PLY format {fmt!r}; need binary_little_endian")
    for el in elements:
        el.props = [(n, _PLY_TYPES[t] if t is not None else None) for n, t in el.props]
    return elements, end + 1


def ply_read(path: str | os.PathLike) -> GaussianCloud:
    data = Path(path).read_bytes()
    elements, offset = _parse_header(data)
    body = len(data) - offset
    vertex = None
    start = 0
    expected = 0
    exact = True
    for el in elements:
        if not el.fixed:
            if vertex is None:
                raise errors.PlyHeaderError(
                    f"element {el.name!r} with list properties precedes the vertex element")
            exact = False
            break
        size = el.dtype().itemsize * el.count
        if el.name == "vertex":
            vertex = el
            start = expected
        expected += size
    if vertex is None:
        raise errors.PlyHeaderError("no vertex element")
    types = dict(vertex.props)
    for name in REQUIRED_PROPERTIES:
        if name not in types:
            raise errors.PlyMissingPropertyError(name)
        if types[name] is None or np.dtype(types[name]) != np.dtype("<f4"):
            shown = "list" if types[name] is None else np.dtype(types[name]).name
            raise errors.PlyPropertyTypeError(name, shown)
    if (exact and body != expected) or (not exact and body < expected):
        raise errors.PlyBodyLengthError(expected, body)
    arr = np.frombuffer(data, dtype=vertex.dtype(), count=vertex.count, offset=offset + start)

    def cols(names):
        return np.stack([arr[n] for n in names], axis=-1) if vertex.count else np.zeros((0, len(names)), np.float32)

    n = vertex.count
    dc = cols([f"f_dc_{k}" for k in range(3)])
    rest = cols([f"f_rest_{k}" for k in range(N_REST)]).reshape(n, 3, NUM_COEFFS - 1)
    sh = np.empty((n, NUM_COEFFS, 3), dtype=np.float32)
    sh[:, 0, :] = dc
    sh[:, 1:, :] = rest.transpose(0, 2, 1)
    return GaussianCloud(
        positions=cols(["x", "y", "z"]),
        rotations=cols([f"rot_{k}" for k in range(4)]),
        log_scales=cols([f"scale_{k}" for k in range(3)]),
        opacity_logits=arr["opacity"].copy() if n else np.zeros(0, np.float32),
        sh=sh,
    )


def ply_write(cloud: GaussianCloud, path: str | os.PathLike) -> None:
    n = len(cloud)
    dtype = np.dtype([(name, "<f4") for name in PLY_PROPERTIES])
    arr = np.zeros(n, dtype=dtype)
    for k, name in enumerate("xyz"):
        arr[name] = cloud.positions[:, k]
    for c in range(3):
        arr[f"f_dc_{c}"] = cloud.sh[:, 0, c]
        for k in range(NUM_COEFFS - 1):
            arr[f"f_rest_{c * (NUM_COEFFS - 1) + k}"] = cloud.sh[:, 1 + k, c]
    arr["opacity"] = cloud.opacity_logits
    for k in range(3):
        arr[f"scale_{k}"] = cloud.log_scales[:, k]
    for k in range(4):
        arr[f"rot_{k}"] = cloud.rotations[:, k]
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {name}" for name in PLY_PROPERTIES]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(arr.tobytes())
