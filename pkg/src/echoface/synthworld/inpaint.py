"""Background recovery by harmonic fill (the inpainting stand-in)."""

import numpy as np

from .types import Frame

TOLERANCE = 1e-4
MAX_ITERS = 20000


def toy_inpaint(frame: Frame, mask: Frame) -> Frame:
    """Fill the masked region by diffusing border colors inward.

    Red-black Gauss-Seidel with over-relaxation on the masked pixels;
    iterates until the largest per-pixel update drops below 1e-4.
    Unmasked pixels are copied bit-exactly.
    """
    pixels = frame.pixels
    if pixels.ndim == 2:
        pixels = pixels[..., None]
    m = mask.pixels >= 0.5
    out = pixels.astype(np.float64).copy()
    if not m.any():
        result = out if frame.pixels.ndim == 3 else out[..., 0]
        return Frame(pixels=result.astype(frame.pixels.dtype), kind="background")

    h, w, _ = out.shape
    # init the hole with the mean of the un-masked border ring
    border = _hole_border(m)
    fill = out[border].mean(axis=0) if border.any() else out[~m].mean(axis=0)
    out[m] = fill

    ys, xs = np.nonzero(m)
    red = ((ys + xs) % 2) == 0
    omega = 1.9
    pad = np.pad(out, ((1, 1), (1, 1), (0, 0)), mode="edge")
    for _ in range(MAX_ITERS):
        max_delta = 0.0
        for phase in (red, ~red):
            yy, xx = ys[phase], xs[phase]
            neigh = (
                pad[yy, xx + 1] + pad[yy + 2, xx + 1] + pad[yy + 1, xx] + pad[yy + 1, xx + 2]
            ) * 0.25
            cur = pad[yy + 1, xx + 1]
            new = cur + omega * (neigh - cur)
            delta = np.abs(new - cur).max() if len(yy) else 0.0
            max_delta = max(max_delta, float(delta))
            pad[yy + 1, xx + 1] = new
        if max_delta < TOLERANCE:
            break
    out[ys, xs] = pad[ys + 1, xs + 1]
    # re-copy the untouched region so it is bit-identical to the input
    out[~m] = pixels.astype(np.float64)[~m]
    result = out if frame.pixels.ndim == 3 else out[..., 0]
    return Frame(pixels=result.astype(frame.pixels.dtype), kind="background")


def _hole_border(mask: np.ndarray) -> np.ndarray:
    grown = np.zeros_like(mask)
    grown[:-1] |= mask[1:]
    grown[1:] |= mask[:-1]
    grown[:, :-1] |= mask[:, 1:]
    grown[:, 1:] |= mask[:, :-1]
    return grown & ~mask
