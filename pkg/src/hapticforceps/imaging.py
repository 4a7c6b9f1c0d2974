"""Synthetic back-lit target images, bilateral denoising and blob detection."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from .geometry import CameraIntrinsics, Homography, Pose, TargetLayout, project_points


@dataclass(frozen=True)
class GrayImage:
    data: np.ndarray  # (height, width) uint8, row-major

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise ValueError("image data must be 2-D")
        if d.dtype != np.uint8:
            raise ValueError("image data must be uint8")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True)
class RenderConfig:
    background_level: float = 20.0
    foreground_level: float = 220.0
    noise_sigma: float = 0.0
    occlusion_center: Optional[Tuple[float, float]] = None  # pixels; None disables
    occlusion_radius: float = 10.0
    rng_seed: int = 0
    supersample: int = 5

    def __post_init__(self):
        for name in ("background_level", "foreground_level"):
            if not 0 <= getattr(self, name) <= 255:
                raise ValueError(f"{name} must lie in [0, 255]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.occlusion_radius < 0:
            raise ValueError("occlusion_radius must be >= 0")
        if self.supersample < 1:
            raise ValueError("supersample must be >= 1")


@dataclass(frozen=True)
class BlobParams:
    threshold: float = 120.0
    min_area: int = 4
    max_area: int = 2000
    min_circularity: float = 0.5

    def __post_init__(self):
        if self.min_area > self.max_area:
            raise ValueError("min_area must not exceed max_area")
        if not 0 <= self.min_circularity <= 1:
            raise ValueError("min_circularity must lie in [0, 1]")


def visible_markers(intr: CameraIntrinsics, pose: Pose, layout: TargetLayout,
                    cfg: RenderConfig) -> np.ndarray:
    """Boolean mask of markers whose projected centre is outside the occluder."""
    centers = project_points(intr, pose, layout.markers)
    if cfg.occlusion_center is None:
        return np.ones(len(centers), dtype=bool)
    d = np.hypot(*(centers - np.asarray(cfg.occlusion_center, dtype=float)).T)
    return d > cfg.occlusion_radius


def render_target(intr: CameraIntrinsics, pose: Pose, layout: TargetLayout,
                  cfg: RenderConfig, frame: int = 0) -> GrayImage:
    """Render bright marker holes on a dark background.

    Each hole is the exact perspective image of a disk of the layout's marker
    diameter, anti-aliased by supersampling. Noise is seeded by
    ``(cfg.rng_seed, frame)`` so frames of one sequence differ but reruns do not.
    """
    h, w = intr.height, intr.width
    img = np.full((h, w), float(cfg.background_level))
    H = Homography.from_pose(intr, pose)
    centers = project_points(intr, pose, layout.markers)
    visible = visible_markers(intr, pose, layout, cfg)
    r = layout.marker_diameter / 2
    ring = np.linspace(0, 2 * np.pi, 48, endpoint=False)
    s = cfg.supersample
    offs = (np.arange(s) + 0.5) / s - 0.5
    contrast = cfg.foreground_level - cfg.background_level
    for j, c in enumerate(centers):
        if not visible[j]:
            continue
        rim = project_points(intr, pose, layout.markers[j] + r * np.column_stack([np.cos(ring), np.sin(ring)]))
        u_lo = max(int(np.floor(rim[:, 0].min())) - 1, 0)
        u_hi = min(int(np.ceil(rim[:, 0].max())) + 1, w - 1)
        v_lo = max(int(np.floor(rim[:, 1].min())) - 1, 0)
        v_hi = min(int(np.ceil(rim[:, 1].max())) + 1, h - 1)
        if u_lo > u_hi or v_lo > v_hi:
            continue
        uu = np.arange(u_lo, u_hi + 1)[None, :, None, None] + offs[None, None, None, :]
        vv = np.arange(v_lo, v_hi + 1)[:, None, None, None] + offs[None, None, :, None]
        uu, vv = np.broadcast_arrays(uu, vv)
        plane = H.inverse_apply(np.column_stack([uu.ravel(), vv.ravel()]))
        inside = np.hypot(*(plane - layout.markers[j]).T) <= r
        cover = inside.reshape(uu.shape).mean(axis=(2, 3))
        img[v_lo:v_hi + 1, u_lo:u_hi + 1] += contrast * cover
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng([cfg.rng_seed, frame])
        img += rng.normal(0.0, cfg.noise_sigma, img.shape)
    return GrayImage(np.rint(np.clip(img, 0, 255)).astype(np.uint8))


def bilateral_filter(a: np.ndarray, spatial_sigma: float, range_sigma: float) -> np.ndarray:
    """Float bilateral filter with the window truncated at 3 spatial sigmas."""
    if spatial_sigma <= 0 or range_sigma <= 0:
        raise ValueError("sigmas must be positive")
    a = np.asarray(a)
    as_bytes = a.dtype == np.uint8
    f = a.astype(np.float32 if as_bytes else np.float64)
    rad = int(np.ceil(3 * spatial_sigma))
    p = np.pad(f, rad, mode="reflect")
    num = np.zeros_like(f)
    den = np.zeros_like(f)
    H, W = f.shape
    if as_bytes:
        lut = np.exp(-np.arange(256.0) ** 2 / (2 * range_sigma ** 2)).astype(np.float32)
        ai = a.astype(np.int16)
        pi = np.pad(ai, rad, mode="reflect")
    for dy in range(-rad, rad + 1):
        for dx in range(-rad, rad + 1):
            ws = np.exp(-(dx * dx + dy * dy) / (2 * spatial_sigma ** 2))
            nb = p[rad + dy:rad + dy + H, rad + dx:rad + dx + W]
            if as_bytes:
                diff = np.abs(pi[rad + dy:rad + dy + H, rad + dx:rad + dx + W] - ai)
                wgt = lut[diff] * f.dtype.type(ws)
            else:
                wgt = ws * np.exp(-((nb - f) ** 2) / (2 * range_sigma ** 2))
            num += wgt * nb
            den += wgt
    return num / den


def denoise(img: GrayImage, spatial_sigma: float = 0.6, range_sigma: float = 20.0) -> GrayImage:
    """Edge-preserving smoothing; output stays 8-bit and the same size."""
    out = bilateral_filter(img.data, spatial_sigma, range_sigma)
    return GrayImage(np.rint(np.clip(out, 0, 255)).astype(np.uint8))


_EIGHT = np.ones((3, 3), dtype=bool)


def inertia_ratio(rows, cols) -> float:
    """Minor/major second-moment ratio of a pixel set; 1 for a disk, 0 for a line."""
    if len(rows) < 2:
        return 1.0
    cov = np.cov(np.vstack([cols, rows]).astype(float))
    ev = np.linalg.eigvalsh(cov)
    if ev[1] <= 0:
        return 1.0
    return float(max(ev[0], 0.0) / ev[1])


def detect_blobs(img: GrayImage, params: BlobParams) -> np.ndarray:
    """Sub-pixel centres (N, 2) of bright blobs, listed bottom-to-top.

    Components of the thresholded image (8-connected) are kept when their
    area and circularity pass ``params``. Circularity is the inertia ratio of
    the component. The centre is the intensity-weighted centroid over the
    component grown by one pixel, using intensity above the image median so
    that partially covered rim pixels contribute.
    """
    a = img.data.astype(np.float64)
    labels, n = ndimage.label(a > params.threshold, structure=_EIGHT)
    if n == 0:
        return np.empty((0, 2))
    hist = np.cumsum(np.bincount(img.data.ravel(), minlength=256))
    background = float(np.searchsorted(hist, hist[-1] / 2))
    centres = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        comp = labels[sl] == k
        area = int(comp.sum())
        if area < params.min_area or area > params.max_area:
            continue
        rr, cc = np.nonzero(comp)
        if inertia_ratio(rr, cc) < params.min_circularity:
            continue
        r0 = max(sl[0].start - 1, 0)
        c0 = max(sl[1].start - 1, 0)
        r1 = min(sl[0].stop + 1, a.shape[0])
        c1 = min(sl[1].stop + 1, a.shape[1])
        grown = ndimage.binary_dilation(labels[r0:r1, c0:c1] == k, structure=_EIGHT)
        wgt = np.where(grown, np.clip(a[r0:r1, c0:c1] - background, 0, None), 0.0)
        total = wgt.sum()
        vv, uu = np.mgrid[r0:r1, c0:c1]
        centres.append(((wgt * uu).sum() / total, (wgt * vv).sum() / total))
    if not centres:
        return np.empty((0, 2))
    c = np.array(centres)
    return c[np.lexsort((c[:, 0], -c[:, 1]))]


def write_pgm(path, img: GrayImage) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.data.tobytes())


def read_pgm(path) -> GrayImage:
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while raw[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    pos += 1  # single whitespace after maxval
    data = np.frombuffer(raw[pos:pos + w * h], dtype=np.uint8)
    if data.size != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return GrayImage(data.reshape(h, w))
