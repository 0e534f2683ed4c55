"""Deterministic schematic face renderer and its analytic geometry.

Every geometric quantity (silhouette, mouth box, landmarks, crop grids)
comes from one `FaceGeometry`, so masks and landmarks agree with rendered
pixels by construction. The mouth is rasterized with a smooth sigmoid
falloff; the same formula runs under numpy (renderer) and torch (the
differentiable path used by the lip-reading loss).
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
from scipy import ndimage
from scipy.special import expit

from .maps import maps_for
from .types import MOUTH_DIM, Frame

SOFT_K = 8.0  # sigmoid sharpness of the mouth rasterizer

MESH_BG = 0.15
MESH_FACE = 0.62
MESH_EYE = 0.12
MESH_BROW = 0.25

CROP_H, CROP_W = 16, 24
CROP_XSPAN, CROP_YSPAN = 7.8, 5.2  # canonical crop half-extents, in face units


def _sigmoid(x):
    if isinstance(x, torch.Tensor):
        return torch.sigmoid(x)
    return expit(np.asarray(x, dtype=np.float64))


def mouth_params(beta_mouth):
    """Map mouth coefficients to (half-width, half-opening, shade).

    Works on numpy arrays and torch tensors; trailing dim is 32.
    """
    width = 3.8 + 2.4 * _sigmoid(beta_mouth[..., 1])
    opening = 0.6 + 3.0 * _sigmoid(beta_mouth[..., 0])
    shade = 0.08 + 0.30 * _sigmoid(-beta_mouth[..., 2])
    return width, opening, shade


def mouth_alpha(dx, dy, width, opening):
    """Smooth inside-mouth indicator at offsets (dx, dy) from the center."""
    q = (dx / width) ** 2 + (dy / opening) ** 2
    return _sigmoid(SOFT_K * (1.0 - q))


@dataclass
class FaceGeometry:
    """All derived pixel-space geometry for one frame."""

    size: int
    unit: float  # scaled pixel unit: (size/64) * (1 + pose scale)
    cx: float
    cy: float
    ax_up: float
    ay_up: float
    ax_low: float
    ay_low: float
    eye_y: float
    eye_dx: float
    eye_h: float
    brow_y: float
    mouth_cx: float
    mouth_cy: float
    mouth_w: float  # half-width in pixels
    mouth_o: float  # half-opening in pixels
    mouth_shade: float


def geometry_of(cfg, alpha, beta_t, pose_t) -> FaceGeometry:
    size = cfg["world.image_size"]
    u = size / 64.0
    scale = 1.0 + float(pose_t[2])
    us = u * scale
    cx = size / 2.0 + float(pose_t[0]) * u
    cy = size / 2.0 + float(pose_t[1]) * u

    ax_up = us * (15.0 + 2.5 * math.tanh(0.55 * alpha[0]))
    ay_up = us * (20.0 + 3.0 * math.tanh(0.55 * alpha[1]))
    ax_low = ax_up * (1.0 + 0.16 * math.tanh(0.5 * alpha[2]))
    ay_low = ay_up * (1.0 + 0.13 * math.tanh(0.5 * alpha[3]))

    maps_cache = getattr(geometry_of, "_dirs", None)
    key = cfg["world.map_seed"]
    if maps_cache is None or maps_cache[0] != key:
        maps = maps_for(cfg)
        geometry_of._dirs = (key, maps.brow_dir, maps.eye_dir)
    _, brow_dir, eye_dir = geometry_of._dirs

    beta_g = np.asarray(beta_t)[MOUTH_DIM:]
    eye_h = us * (0.55 + 1.1 * float(_sigmoid(beta_g @ eye_dir)))
    brow_lift = 2.0 * us * math.tanh(0.5 * float(beta_g @ brow_dir))

    beta_m = np.asarray(beta_t)[:MOUTH_DIM]
    width, opening, shade = mouth_params(beta_m)

    return FaceGeometry(
        size=size,
        unit=us,
        cx=cx,
        cy=cy,
        ax_up=ax_up,
        ay_up=ay_up,
        ax_low=ax_low,
        ay_low=ay_low,
        eye_y=cy - 5.0 * us,
        eye_dx=6.5 * us,
        eye_h=eye_h,
        brow_y=cy - 8.6 * us - brow_lift,
        mouth_cx=cx,
        mouth_cy=cy + 8.5 * us,
        mouth_w=float(width) * us,
        mouth_o=float(opening) * us,
        mouth_shade=float(shade),
    )


def _grid(size: int):
    ys, xs = np.mgrid[0:size, 0:size]
    return xs.astype(np.float64), ys.astype(np.float64)


def _silhouette_raw(geo: FaceGeometry) -> np.ndarray:
    xs, ys = _grid(geo.size)
    upper = ys < geo.cy
    ax = np.where(upper, geo.ax_up, geo.ax_low)
    ay = np.where(upper, geo.ay_up, geo.ay_low)
    q = ((xs - geo.cx) / ax) ** 2 + ((ys - geo.cy) / ay) ** 2
    return q <= 1.0


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return mask
    span = np.arange(-radius, radius + 1)
    disk = (span[:, None] ** 2 + span[None, :] ** 2) <= radius**2
    return ndimage.binary_dilation(mask, structure=disk)


def analytic_silhouette(cfg, alpha, pose_t, dilate: int | None = None) -> Frame:
    """Head silhouette of the toy face; `dilate` defaults to the configured radius."""
    geo = geometry_of(cfg, alpha, np.zeros(64), pose_t)
    radius = cfg["world.dilate_radius"] if dilate is None else dilate
    mask = _dilate(_silhouette_raw(geo), radius)
    return Frame(pixels=mask.astype(np.float32), kind="mask")


def _stamp_window(canvas_shape, cx, cy, half_w, half_h):
    y0 = max(int(math.floor(cy - half_h)), 0)
    y1 = min(int(math.ceil(cy + half_h)) + 1, canvas_shape[0])
    x0 = max(int(math.floor(cx - half_w)), 0)
    x1 = min(int(math.ceil(cx + half_w)) + 1, canvas_shape[1])
    return y0, y1, x0, x1


def _blend_patch(layer, alpha_patch, color, y0, y1, x0, x1):
    region = layer[y0:y1, x0:x1]
    a = alpha_patch[..., None]
    layer[y0:y1, x0:x1] = region * (1.0 - a) + np.asarray(color)[None, None, :] * a


def _eye_alpha(geo, xs, ys, ex):
    q = ((xs - ex) / (1.9 * geo.unit)) ** 2 + ((ys - geo.eye_y) / geo.eye_h) ** 2
    return _sigmoid(SOFT_K * (1.0 - q))


def _brow_alpha(geo, xs, ys, ex):
    ax = _sigmoid(SOFT_K * (1.0 - ((xs - ex) / (3.2 * geo.unit)) ** 2))
    ay = _sigmoid(SOFT_K * (1.0 - ((ys - geo.brow_y) / (0.75 * geo.unit)) ** 2))
    return ax * ay


def _draw_features(layer, geo: FaceGeometry, eye_color, brow_color, mouth_color):
    shape = layer.shape[:2]
    # eyes and brows live strictly above the face midline, the mouth below;
    # windows are fixed-size so global-expression edits stay local
    for ex in (geo.cx - geo.eye_dx, geo.cx + geo.eye_dx):
        y0, y1, x0, x1 = _stamp_window(shape, ex, geo.eye_y, 3.2 * geo.unit, 3.2 * geo.unit)
        xs, ys = np.meshgrid(np.arange(x0, x1, dtype=np.float64),
                             np.arange(y0, y1, dtype=np.float64))
        _blend_patch(layer, _eye_alpha(geo, xs, ys, ex), eye_color, y0, y1, x0, x1)
        yb0, yb1, xb0, xb1 = _stamp_window(shape, ex, geo.brow_y, 4.5 * geo.unit, 3.0 * geo.unit)
        xs, ys = np.meshgrid(np.arange(xb0, xb1, dtype=np.float64),
                             np.arange(yb0, yb1, dtype=np.float64))
        _blend_patch(layer, _brow_alpha(geo, xs, ys, ex), brow_color, yb0, yb1, xb0, xb1)

    y0, y1, x0, x1 = _stamp_window(shape, geo.mouth_cx, geo.mouth_cy, 10 * geo.unit, 6 * geo.unit)
    xs, ys = np.meshgrid(np.arange(x0, x1, dtype=np.float64),
                         np.arange(y0, y1, dtype=np.float64))
    a = mouth_alpha(xs - geo.mouth_cx, ys - geo.mouth_cy, geo.mouth_w, geo.mouth_o)
    _blend_patch(layer, a, mouth_color, y0, y1, x0, x1)


def render_mesh(cfg, alpha, beta_t, pose_t) -> Frame:
    """Textureless gray render of the face geometry alone."""
    geo = geometry_of(cfg, alpha, beta_t, pose_t)
    size = geo.size
    layer = np.full((size, size, 3), MESH_FACE, dtype=np.float64)
    shade = geo.mouth_shade
    _draw_features(layer, geo, (MESH_EYE,) * 3, (MESH_BROW,) * 3, (shade,) * 3)
    sil = _silhouette_raw(geo)
    canvas = np.where(sil[..., None], layer, MESH_BG)
    return Frame(
        pixels=canvas.astype(np.float32),
        kind="rendered_mesh",
        geometry=(np.asarray(alpha, dtype=np.float64).copy(),
                  np.asarray(beta_t, dtype=np.float64).copy(),
                  np.asarray(pose_t, dtype=np.float64).copy()),
    )


def render_background(cfg, background_id: int) -> Frame:
    """Smooth procedural background selected by id."""
    from ..seeding import rng

    size = cfg["world.image_size"]
    g = rng(cfg["world.map_seed"], "background", background_id)
    base = g.uniform(0.25, 0.75, size=3)
    gx = g.uniform(-0.3, 0.3, size=3)
    gy = g.uniform(-0.3, 0.3, size=3)
    fx = g.uniform(0.5, 2.0, size=3)
    fy = g.uniform(0.5, 2.0, size=3)
    ph = g.uniform(0, 2 * np.pi, size=3)
    xs, ys = _grid(size)
    nx, ny = xs / size - 0.5, ys / size - 0.5
    px = (
        base[None, None, :]
        + gx[None, None, :] * nx[..., None]
        + gy[None, None, :] * ny[..., None]
        + 0.02 * np.sin(2 * np.pi * (fx[None, None, :] * nx[..., None]
                                     + fy[None, None, :] * ny[..., None]) + ph[None, None, :])
    )
    return Frame(pixels=np.clip(px, 0.0, 1.0).astype(np.float32), kind="background")


def render_textured(cfg, alpha, beta_t, pose_t, appearance, background_id: int) -> Frame:
    """Appearance-colored render composited over a procedural background."""
    geo = geometry_of(cfg, alpha, beta_t, pose_t)
    size = geo.size
    app = np.asarray(appearance, dtype=np.float64)

    skin = np.array([0.78, 0.62, 0.52]) + 0.12 * np.tanh(app[0:3])
    hair = 0.15 + 0.5 * _sigmoid(app[3:6])
    eye_color = 0.10 + 0.25 * _sigmoid(app[6:9])
    mouth_color = np.array([0.35, 0.15, 0.15]) + 0.10 * np.tanh(app[9:12])

    layer = np.tile(skin[None, None, :], (size, size, 1))
    xs, ys = _grid(size)
    hairline = geo.cy - 0.55 * geo.ay_up
    layer[ys < hairline] = hair
    _draw_features(layer, geo, eye_color, hair * 0.7, mouth_color)

    sil = _silhouette_raw(geo)
    bg = render_background(cfg, background_id).pixels.astype(np.float64)
    canvas = np.where(sil[..., None], layer, bg)
    return Frame(
        pixels=canvas.astype(np.float32),
        kind="textured",
        geometry=(np.asarray(alpha, dtype=np.float64).copy(),
                  np.asarray(beta_t, dtype=np.float64).copy(),
                  np.asarray(pose_t, dtype=np.float64).copy()),
    )


def mouth_mask(cfg, alpha, beta_t, pose_t, dilate: int | None = None) -> Frame:
    """Binary box over the mouth's analytic extent, dilated by `dilate` pixels."""
    geo = geometry_of(cfg, alpha, beta_t, pose_t)
    radius = cfg["world.dilate_radius"] if dilate is None else dilate
    x0 = int(math.floor(geo.mouth_cx - geo.mouth_w)) - radius
    x1 = int(math.ceil(geo.mouth_cx + geo.mouth_w)) + radius
    y0 = int(math.floor(geo.mouth_cy - geo.mouth_o)) - radius
    y1 = int(math.ceil(geo.mouth_cy + geo.mouth_o)) + radius
    mask = np.zeros((geo.size, geo.size), dtype=np.float32)
    mask[max(y0, 0): y1 + 1, max(x0, 0): x1 + 1] = 1.0
    return Frame(pixels=mask, kind="mask")


def mouth_landmarks(cfg, alpha, beta_t, pose_t) -> np.ndarray:
    """Analytic (x, y) positions of left/right corners and top/bottom lips."""
    geo = geometry_of(cfg, alpha, beta_t, pose_t)
    return np.array(
        [
            [geo.mouth_cx - geo.mouth_w, geo.mouth_cy],
            [geo.mouth_cx + geo.mouth_w, geo.mouth_cy],
            [geo.mouth_cx, geo.mouth_cy - geo.mouth_o],
            [geo.mouth_cx, geo.mouth_cy + geo.mouth_o],
        ]
    )


def mouth_opening_pixels(cfg, alpha, beta_t, pose_t) -> int:
    """Number of pixels inside the mouth (alpha >= 0.5), from shared geometry."""
    geo = geometry_of(cfg, alpha, beta_t, pose_t)
    xs, ys = _grid(geo.size)
    a = mouth_alpha(xs - geo.mouth_cx, ys - geo.mouth_cy, geo.mouth_w, geo.mouth_o)
    return int(np.count_nonzero(a >= 0.5))


# ---------------------------------------------------------------------------
# Canonical mouth crops (the lip-reading expert's input domain)

def _canonical_grid(dtype=torch.float64):
    ys = torch.linspace(-CROP_YSPAN, CROP_YSPAN, CROP_H, dtype=dtype)
    xs = torch.linspace(-CROP_XSPAN, CROP_XSPAN, CROP_W, dtype=dtype)
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    return gx, gy


def mouth_crops_from_coeffs(beta_mouth: torch.Tensor) -> torch.Tensor:
    """Differentiable canonical darkness crops from mouth coefficients.

    beta_mouth: (..., 32) tensor; returns (..., 16, 24) darkness in [0, 1],
    matching (skin - pixel)/skin of a mesh render around the mouth.
    """
    width, opening, shade = mouth_params(beta_mouth)
    gx, gy = _canonical_grid(beta_mouth.dtype)
    shape = beta_mouth.shape[:-1] + (1, 1)
    a = mouth_alpha(gx, gy, width.reshape(shape), opening.reshape(shape))
    return a * (1.0 - shade.reshape(shape) / MESH_FACE)


def _bilinear(gray: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    h, w = gray.shape
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 2)
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 2)
    fx = np.clip(xs - x0, 0.0, 1.0)
    fy = np.clip(ys - y0, 0.0, 1.0)
    top = gray[y0, x0] * (1 - fx) + gray[y0, x0 + 1] * fx
    bot = gray[y0 + 1, x0] * (1 - fx) + gray[y0 + 1, x0 + 1] * fx
    return top * (1 - fy) + bot * fy


def extract_mouth_crops(cfg, frames, coeffs) -> np.ndarray:
    """Resample the mouth region of rendered/generated frames onto the
    canonical crop grid and normalize to darkness units.

    frames: list of Frame (length L); coeffs: FaceCoefficients giving the
    mouth center (the expected location; generated frames follow it).
    """
    crops = np.zeros((len(frames), CROP_H, CROP_W), dtype=np.float64)
    gx, gy = _canonical_grid()
    gx, gy = gx.numpy(), gy.numpy()
    for t, frame in enumerate(frames):
        geo = geometry_of(cfg, coeffs.alpha, coeffs.beta[t], coeffs.pose[t])
        us = geo.unit
        xs = geo.mouth_cx + gx * us
        ys = geo.mouth_cy + gy * us
        gray = frame.gray().astype(np.float64)
        vals = _bilinear(gray, xs, ys)
        skin_est = np.percentile(vals, 80)
        crops[t] = np.clip((skin_est - vals) / max(skin_est, 1e-6), 0.0, 1.0)
    return crops
