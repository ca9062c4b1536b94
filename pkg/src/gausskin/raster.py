"""Tile-based CPU splatting rasterizer.

Camera conventions follow OpenCV: camera space has +z forward, +x right,
+y down, and pixel ``(i, j)`` is sampled at the integer coordinate
``(i, j)``. A camera-space point ``p`` lands at
``(fx * p.x / p.z + cx, fy * p.y / p.z + cy)``.

Pipeline per frame: project every Gaussian to a 2D splat (mean, covariance
with a +0.3 pixel low-pass, color from SH), cull, sort globally by depth
(ties by source index), bin into 16x16 tiles, then composite each tile's
splats front to back. Every per-splat and per-pixel value is computed by
the same scalar kernel regardless of how the work is split, so images are
bitwise independent of the worker count.
"""

from __future__ import annotations

from dataclasses import dataclass
import json
import math
import os

import numpy as np
from numba import njit

from ._parallel import run_chunks
from .errors import SchemaError
from .gsmodel import ActivatedCloud, ActivatedGaussian
from .rotcore import RigidTransform, _quat_to_matrix, matrix_to_quat
from .shrot import SH_C0, SH_C1, SH_C2, SH_C3
from .skinning import PosedCloud, SkinningMode

CAMERA_VERSION = "gausskin-cam/1"

TILE = 16
LOW_PASS = 0.3
ALPHA_MAX = 0.999
T_MIN = 1e-4
# tangent-plane clamp: the Jacobian is evaluated no further than 15% of the
# image size outside the viewport
GUARD_BAND = 0.15


# ---------------------------------------------------------------------------
# camera

@dataclass(frozen=True)
class Camera:
    """Pinhole camera; ``view`` maps world points to camera space."""

    view: RigidTransform
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 0.01
    far: float = 100.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < self.near < self.far):
            raise ValueError("need 0 < near < far")
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValueError("image size must be at least 1x1")

    @property
    def center(self) -> np.ndarray:
        """Camera position in world space."""
        return self.view.inverse().translation

    def moved(self, G: RigidTransform) -> Camera:
        """The camera ``cam o G^-1``: sees ``G``-transformed points as this sees the originals."""
        return self._replace(view=self.view.compose(G.inverse()))

    def with_resolution(self, width: int, height: int) -> Camera:
        sx, sy = width / self.width, height / self.height
        return Camera(self.view, self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy,
                      int(width), int(height), self.near, self.far)

    def _replace(self, **kw) -> Camera:
        fields = dict(view=self.view, fx=self.fx, fy=self.fy, cx=self.cx, cy=self.cy,
                      width=self.width, height=self.height, near=self.near, far=self.far)
        fields.update(kw)
        return Camera(**fields)

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 1.0, 0.0), width: int = 512, height: int = 512,
                focal: float | None = None, near: float = 0.01, far: float = 100.0) -> Camera:
        """Camera at ``eye`` looking at ``target``; ``up`` points up in the image.

        ``focal`` defaults to the image width (about 53 degrees horizontal).
        """
        eye = np.asarray(eye, dtype=np.float64)
        fwd = np.asarray(target, dtype=np.float64) - eye
        fwd /= np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-12:
            raise ValueError("up vector is parallel to the viewing direction")
        right /= np.linalg.norm(right)
        down = np.cross(fwd, right)
        R = np.stack([right, down, fwd])  # rows: camera axes in world coordinates
        view = RigidTransform(matrix_to_quat(R), -R @ eye)
        f = float(width if focal is None else focal)
        return cls(view, f, f, width / 2.0, height / 2.0, int(width), int(height), near, far)


def fixture_camera(bones: int, width: int = 512, height: int = 512) -> Camera:
    """Front view of the tube fixture, far enough back to keep the bent chain in frame."""
    h = float(bones)
    return Camera.look_at([0.0, h / 2.0, 2.0 * h], [0.0, h / 2.0, 0.0],
                          width=width, height=height)


def save_camera(cam: Camera, path: str | os.PathLike) -> None:
    doc = {
        "version": CAMERA_VERSION,
        "width": int(cam.width),
        "height": int(cam.height),
        "fx": float(cam.fx),
        "fy": float(cam.fy),
        "cx": float(cam.cx),
        "cy": float(cam.cy),
        "near": float(cam.near),
        "far": float(cam.far),
        "world_to_camera": {
            "rotation": [float(v) for v in cam.view.rotation],
            "translation": [float(v) for v in cam.view.translation],
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_camera(path: str | os.PathLike) -> Camera:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON ({exc})", path) from None
    if not isinstance(doc, dict) or doc.get("version") != CAMERA_VERSION:
        raise SchemaError(f"expected version {CAMERA_VERSION!r}", path, "version")

    def num(key, src=doc, n=None):
        if key not in src:
            raise SchemaError("missing field", path, key)
        val = src[key]
        try:
            arr = np.asarray(val, dtype=np.float64)
        except (TypeError, ValueError):
            raise SchemaError("expected a number", path, key) from None
        if n is None and arr.shape != () or n is not None and arr.shape != (n,):
            raise SchemaError(f"expected {'a number' if n is None else f'{n} numbers'}", path, key)
        if not np.all(np.isfinite(arr)):
            raise SchemaError("must be finite", path, key)
        return arr if n else float(arr)

    ext = doc.get("world_to_camera")
    if not isinstance(ext, dict):
        raise SchemaError("missing extrinsics object", path, "world_to_camera")
    q = num("rotation", ext, 4)
    norm = np.linalg.norm(q)
    if abs(norm - 1.0) > 1e-6:
        raise SchemaError(f"rotation quaternion has norm {norm:.6g}", path,
                          "world_to_camera.rotation")
    view = RigidTransform(q / norm, num("translation", ext, 3))
    width, height = num("width"), num("height")
    if width != int(width) or height != int(height):
        raise SchemaError("image size must be integral", path, "width")
    try:
        return Camera(view, num("fx"), num("fy"), num("cx"), num("cy"), int(width), int(height),
                      num("near"), num("far"))
    except ValueError as exc:
        raise SchemaError(str(exc), path) from None


# ---------------------------------------------------------------------------
# projection

@dataclass(frozen=True)
class Splat2D:
    center: np.ndarray  # pixel coordinates (u, v)
    cov2d: np.ndarray   # 2x2, low-pass included
    depth: float
    color: np.ndarray
    opacity: float
    index: int


@dataclass
class SplatArrays:
    """Projected cloud, one row per Gaussian; ``visible`` marks the survivors of culling."""

    centers: np.ndarray   # (N, 2)
    cov2d: np.ndarray     # (N, 3): a, b, c of [[a, b], [b, c]]
    conics: np.ndarray    # (N, 3): inverse covariance, same layout
    depths: np.ndarray
    radii: np.ndarray     # int64 pixels
    rects: np.ndarray     # (N, 4) tile rectangle x0, y0, x1, y1 (exclusive)
    colors: np.ndarray    # (N, 3)
    opacities: np.ndarray
    visible: np.ndarray   # bool

    def __len__(self) -> int:
        return len(self.depths)

    def splat(self, i: int) -> Splat2D | None:
        if not self.visible[i]:
            return None
        a, b, c = self.cov2d[i]
        return Splat2D(self.centers[i].copy(), np.array([[a, b], [b, c]]), float(self.depths[i]),
                       self.colors[i].copy(), float(self.opacities[i]), int(i))


@njit(cache=True, nogil=True)
def _sh_color(sh, d, out):
    x, y, z = d[0], d[1], d[2]
    xx, yy, zz = x * x, y * y, z * z
    b = np.empty(16)
    b[0] = SH_C0
    b[1] = -SH_C1 * y
    b[2] = SH_C1 * z
    b[3] = -SH_C1 * x
    b[4] = SH_C2[0] * x * y
    b[5] = SH_C2[1] * y * z
    b[6] = SH_C2[2] * (2.0 * zz - xx - yy)
    b[7] = SH_C2[3] * x * z
    b[8] = SH_C2[4] * (xx - yy)
    b[9] = SH_C3[0] * y * (3.0 * xx - yy)
    b[10] = SH_C3[1] * x * y * z
    b[11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
    b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    b[13] = SH_C3[4] * x * (4.0 * zz - xx - yy)
    b[14] = SH_C3[5] * z * (xx - yy)
    b[15] = SH_C3[6] * x * (xx - 3.0 * yy)
    for c in range(3):
        acc = 0.0
        for k in range(16):
            acc += b[k] * sh[k, c]
        out[c] = max(acc + 0.5, 0.0)


@njit(cache=True, nogil=True)
def _project_range(start, end, mu, q, scales, opac, sh, canon, view_R, view_t, cam_pos,
                   intr, grid, centers, cov2d, conics, depths, radii, rects, colors, visible):
    fx, fy, cx, cy, width, height, near, far = (intr[0], intr[1], intr[2], intr[3],
                                                intr[4], intr[5], intr[6], intr[7])
    lim_lo_x = -(cx + GUARD_BAND * width) / fx
    lim_hi_x = (width - cx + GUARD_BAND * width) / fx
    lim_lo_y = -(cy + GUARD_BAND * height) / fy
    lim_hi_y = (height - cy + GUARD_BAND * height) / fy
    d = np.empty(3)
    p = np.empty(3)
    M = np.empty((3, 3))
    for i in range(start, end):
        visible[i] = False
        for r in range(3):
            p[r] = (view_R[r, 0] * mu[i, 0] + view_R[r, 1] * mu[i, 1]
                    + view_R[r, 2] * mu[i, 2] + view_t[r])
        tz = p[2]
        depths[i] = tz
        if not (tz > near and tz < far):
            continue
        u = fx * p[0] / tz + cx
        v = fy * p[1] / tz + cy
        centers[i, 0] = u
        centers[i, 1] = v

        # camera-space covariance W R S S R^T W^T, with M = W R S
        Rg = _quat_to_matrix(q[i])
        for r in range(3):
            for c in range(3):
                acc = 0.0
                for k in range(3):
                    acc += view_R[r, k] * Rg[k, c]
                M[r, c] = acc * scales[i, c]
        # J rows at the clamped tangent-plane point
        txz = min(max(p[0] / tz, lim_lo_x), lim_hi_x)
        tyz = min(max(p[1] / tz, lim_lo_y), lim_hi_y)
        j00, j02 = fx / tz, -fx * txz / tz
        j11, j12 = fy / tz, -fy * tyz / tz
        # T = J M (2x3); Sigma2D = T T^T
        t00 = j00 * M[0, 0] + j02 * M[2, 0]
        t01 = j00 * M[0, 1] + j02 * M[2, 1]
        t02 = j00 * M[0, 2] + j02 * M[2, 2]
        t10 = j11 * M[1, 0] + j12 * M[2, 0]
        t11 = j11 * M[1, 1] + j12 * M[2, 1]
        t12 = j11 * M[1, 2] + j12 * M[2, 2]
        a = t00 * t00 + t01 * t01 + t02 * t02 + LOW_PASS
        b = t00 * t10 + t01 * t11 + t02 * t12
        c = t10 * t10 + t11 * t11 + t12 * t12 + LOW_PASS
        cov2d[i, 0] = a
        cov2d[i, 1] = b
        cov2d[i, 2] = c
        det = a * c - b * b
        if not det > 0.0:
            continue
        conics[i, 0] = c / det
        conics[i, 1] = -b / det
        conics[i, 2] = a / det
        mid = 0.5 * (a + c)
        lam = mid + math.sqrt(max(0.1, mid * mid - det))
        rad = math.ceil(3.0 * math.sqrt(lam))
        if not (abs(u) < 1e9 and abs(v) < 1e9):
            continue
        x0 = min(max(int((u - rad) / TILE), 0), grid[0])
        y0 = min(max(int((v - rad) / TILE), 0), grid[1])
        x1 = min(max(int((u + rad + TILE - 1) / TILE), 0), grid[0])
        y1 = min(max(int((v + rad + TILE - 1) / TILE), 0), grid[1])
        if (x1 - x0) * (y1 - y0) == 0:
            continue
        radii[i] = rad
        rects[i, 0] = x0
        rects[i, 1] = y0
        rects[i, 2] = x1
        rects[i, 3] = y1

        # view direction from the camera center, optionally carried back to
        # the canonical frame
        n = 0.0
        for r in range(3):
            d[r] = mu[i, r] - cam_pos[r]
            n += d[r] * d[r]
        n = math.sqrt(n)
        for r in range(3):
            d[r] /= n
        if canon.shape[0] > 0:
            Rc = _quat_to_matrix(canon[i])
            e0 = Rc[0, 0] * d[0] + Rc[1, 0] * d[1] + Rc[2, 0] * d[2]
            e1 = Rc[0, 1] * d[0] + Rc[1, 1] * d[1] + Rc[2, 1] * d[2]
            e2 = Rc[0, 2] * d[0] + Rc[1, 2] * d[1] + Rc[2, 2] * d[2]
            n = math.sqrt(e0 * e0 + e1 * e1 + e2 * e2)
            d[0], d[1], d[2] = e0 / n, e1 / n, e2 / n
        _sh_color(sh[i], d, colors[i])
        visible[i] = True


def _as_posed(cloud) -> PosedCloud:
    if isinstance(cloud, PosedCloud):
        return cloud
    if isinstance(cloud, ActivatedCloud):
        return PosedCloud.from_activated(cloud)
    raise TypeError(f"expected PosedCloud or ActivatedCloud, got {type(cloud).__name__}")


def _grid(cam: Camera) -> np.ndarray:
    return np.array([(cam.width + TILE - 1) // TILE, (cam.height + TILE - 1) // TILE],
                    dtype=np.int64)


def project_cloud(cloud, cam: Camera, workers: int = 1) -> SplatArrays:
    posed = _as_posed(cloud)
    n = len(posed)
    f64 = lambda a: np.ascontiguousarray(a, dtype=np.float64)  # noqa: E731
    mu, q, scales = f64(posed.positions), f64(posed.rotations), f64(posed.scales)
    opac, sh = f64(posed.opacities), f64(posed.sh)
    canon = (f64(posed.canonical_rotations)
             if posed.mode is SkinningMode.VIEWDIR_CANONICAL and posed.canonical_rotations is not None
             else np.zeros((0, 4)))
    view_R = f64(cam.view.matrix3)
    view_t = f64(cam.view.translation)
    intr = np.array([cam.fx, cam.fy, cam.cx, cam.cy, cam.width, cam.height, cam.near, cam.far],
                    dtype=np.float64)
    out = SplatArrays(
        centers=np.zeros((n, 2)), cov2d=np.zeros((n, 3)), conics=np.zeros((n, 3)),
        depths=np.zeros(n), radii=np.zeros(n, dtype=np.int64),
        rects=np.zeros((n, 4), dtype=np.int64), colors=np.zeros((n, 3)),
        opacities=opac.copy(), visible=np.zeros(n, dtype=np.bool_))
    cam_pos = f64(cam.center)
    grid = _grid(cam)

    def work(s, e):
        _project_range(s, e, mu, q, scales, opac, sh, canon, view_R, view_t, cam_pos, intr, grid,
                       out.centers, out.cov2d, out.conics, out.depths, out.radii, out.rects,
                       out.colors, out.visible)

    run_chunks(work, n, workers)
    return out


def project(g: ActivatedGaussian, cam: Camera) -> Splat2D | None:
    """Project one Gaussian; ``None`` when it is culled."""
    one = ActivatedCloud(np.asarray(g.mu, dtype=np.float64)[None],
                         np.asarray(g.q, dtype=np.float64)[None],
                         np.asarray(g.sigma, dtype=np.float64)[None],
                         np.array([float(g.alpha)]),
                         np.asarray(g.sh, dtype=np.float64)[None])
    return project_cloud(one, cam).splat(0)


# ---------------------------------------------------------------------------
# ordering and binning

def depth_order(depths, indices=None) -> np.ndarray:
    """Permutation sorting by ascending depth, ties by ascending source index."""
    depths = np.asarray(depths, dtype=np.float64)
    indices = np.arange(len(depths)) if indices is None else np.asarray(indices)
    return np.lexsort((indices, depths))


def depth_sort(splats: list[Splat2D]) -> list[Splat2D]:
    order = depth_order([s.depth for s in splats], [s.index for s in splats])
    return [splats[k] for k in order]


@njit(cache=True)
def _expand_tiles(order, rects, grid_w, offsets, tile_ids, ranks):
    for r in range(order.shape[0]):
        i = order[r]
        pos = offsets[r]
        for ty in range(rects[i, 1], rects[i, 3]):
            for tx in range(rects[i, 0], rects[i, 2]):
                tile_ids[pos] = ty * grid_w + tx
                ranks[pos] = r
                pos += 1


def bin_tiles(splats: SplatArrays, cam: Camera):
    """Sorted splat order plus per-tile lists into it.

    Returns ``(order, tile_start, tile_list)``: tile ``t`` composites
    ``order[tile_list[tile_start[t]:tile_start[t + 1]]]``, in depth order.
    """
    vis = np.flatnonzero(splats.visible)
    order = vis[depth_order(splats.depths[vis], vis)]
    rects = splats.rects
    counts = ((rects[order, 2] - rects[order, 0]) * (rects[order, 3] - rects[order, 1]))
    offsets = np.zeros(len(order) + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    total = int(offsets[-1])
    tile_ids = np.empty(total, dtype=np.int64)
    ranks = np.empty(total, dtype=np.int64)
    grid = _grid(cam)
    _expand_tiles(order, rects, int(grid[0]), offsets, tile_ids, ranks)
    # stable: within a tile, entries stay in depth order
    perm = np.argsort(tile_ids, kind="stable")
    tile_list = ranks[perm]
    n_tiles = int(grid[0] * grid[1])
    tile_start = np.searchsorted(tile_ids[perm], np.arange(n_tiles + 1), side="left")
    return order, tile_start.astype(np.int64), tile_list


# ---------------------------------------------------------------------------
# compositing

@njit(cache=True, nogil=True, inline="always")
def _blend(acc, T, c0, c1, c2, a):
    w = a * T
    acc[0] += c0 * w
    acc[1] += c1 * w
    acc[2] += c2 * w
    return T * (1.0 - a)


@njit(cache=True, nogil=True)
def _composite_list(colors, alphas, bg, out):
    acc = np.zeros(3)
    T = 1.0
    for k in range(alphas.shape[0]):
        T = _blend(acc, T, colors[k, 0], colors[k, 1], colors[k, 2], alphas[k])
        if T < T_MIN:
            break
    for c in range(3):
        out[c] = acc[c] + T * bg[c]
    return 1.0 - T


def composite_pixel(contributions, background=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, float]:
    """Front-to-back blend of ``[(color, alpha), ...]`` over ``background``."""
    contributions = list(contributions)
    colors = np.array([np.asarray(c, dtype=np.float64) for c, _ in contributions]).reshape(-1, 3)
    alphas = np.array([float(a) for _, a in contributions], dtype=np.float64)
    if np.any(alphas < 0) or np.any(alphas >= 1):
        raise ValueError("alphas must lie in [0, 1)")
    out = np.empty(3)
    alpha = _composite_list(colors, alphas, np.asarray(background, dtype=np.float64), out)
    return out, float(alpha)


@njit(cache=True, nogil=True)
def _render_tiles(t_start, t_end, grid_w, width, height, order, tile_start, tile_list,
                  centers, conics, colors, opac, bg, rgb, alpha):
    acc = np.zeros(3)
    for t in range(t_start, t_end):
        tx = t % grid_w
        ty = t // grid_w
        lo = tile_start[t]
        hi = tile_start[t + 1]
        for py in range(ty * TILE, min((ty + 1) * TILE, height)):
            for px in range(tx * TILE, min((tx + 1) * TILE, width)):
                acc[:] = 0.0
                T = 1.0
                for k in range(lo, hi):
                    i = order[tile_list[k]]
                    dx = centers[i, 0] - px
                    dy = centers[i, 1] - py
                    power = -0.5 * (conics[i, 0] * dx * dx + conics[i, 2] * dy * dy) \
                        - conics[i, 1] * dx * dy
                    if power > 0.0:
                        continue
                    a = min(ALPHA_MAX, opac[i] * math.exp(power))
                    T = _blend(acc, T, colors[i, 0], colors[i, 1], colors[i, 2], a)
                    if T < T_MIN:
                        break
                for c in range(3):
                    rgb[py, px, c] = acc[c] + T * bg[c]
                alpha[py, px] = 1.0 - T


@dataclass
class FrameBuffer:
    """Linear RGB ``(H, W, 3)`` plus accumulated alpha ``(H, W)``."""

    rgb: np.ndarray
    alpha: np.ndarray
    background: np.ndarray

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    def to_srgb8(self) -> np.ndarray:
        return encode_srgb8(self.rgb)

    def mask8(self) -> np.ndarray:
        return np.round(np.clip(self.alpha, 0.0, 1.0) * 255.0).astype(np.uint8)

    def save_png(self, path: str | os.PathLike) -> None:
        from PIL import Image

        Image.fromarray(self.to_srgb8(), mode="RGB").save(path)

    def save_mask(self, path: str | os.PathLike) -> None:
        from PIL import Image

        Image.fromarray(self.mask8(), mode="L").save(path)


def encode_srgb8(linear: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(linear, dtype=np.float64), 0.0, 1.0)
    s = np.where(x <= 0.0031308, 12.92 * x, 1.055 * np.power(x, 1.0 / 2.4) - 0.055)
    return np.round(s * 255.0).astype(np.uint8)


def render(cloud, cam: Camera, background=(0.0, 0.0, 0.0), workers: int = 1) -> FrameBuffer:
    """Render a posed (or unposed activated) cloud.

    In ``VIEWDIR_CANONICAL`` mode colors use the view direction carried
    back to the canonical frame, otherwise the world view direction.
    """
    bg = np.asarray(background, dtype=np.float64).reshape(3)
    splats = project_cloud(cloud, cam, workers)
    order, tile_start, tile_list = bin_tiles(splats, cam)
    rgb = np.empty((cam.height, cam.width, 3))
    alpha = np.empty((cam.height, cam.width))
    grid = _grid(cam)
    n_tiles = int(grid[0] * grid[1])

    def work(s, e):
        _render_tiles(s, e, int(grid[0]), cam.width, cam.height, order, tile_start, tile_list,
                      splats.centers, splats.conics, splats.colors, splats.opacities, bg,
                      rgb, alpha)

    run_chunks(work, n_tiles, workers)
    return FrameBuffer(rgb, alpha, bg)

