"""Pure-numpy reference implementations of the hot kernels.

Arithmetic here is normative: the compiled backend mirrors these expression
trees exactly so both produce byte-identical output. All rounding is half-up
(``floor(x + 0.5)``); pooling uses exact integer arithmetic.
"""

import numpy as np


def _pad_even(a):
    """Edge-replicate to even height/width.

    For mean and max pooling, replicating the edge is exactly equivalent to
    reducing over only the pixels present in a partial 2x2 block.
    """
    h, w = a.shape[:2]
    pad = [(0, h % 2), (0, w % 2)] + [(0, 0)] * (a.ndim - 2)
    if h % 2 or w % 2:
        a = np.pad(a, pad, mode="edge")
    return a


def avg_pool2(img):
    """2x2 mean pooling with half-up rounding; output dims = ceil(dims / 2)."""
    a = _pad_even(np.ascontiguousarray(img))
    h, w = a.shape[:2]
    a = a.reshape(h // 2, 2, w // 2, 2, -1).astype(np.uint16)
    s = a[:, 0, :, 0] + a[:, 0, :, 1] + a[:, 1, :, 0] + a[:, 1, :, 1]
    out = ((s + 2) // 4).astype(np.uint8)
    if img.ndim == 2:
        out = out[:, :, 0]
    return out


def max_pool2(plane):
    """2x2 max pooling; output dims = ceil(dims / 2)."""
    a = _pad_even(np.ascontiguousarray(plane))
    h, w = a.shape
    a = a.reshape(h // 2, 2, w // 2, 2)
    return a.max(axis=(1, 3))


def density_u8(rgb, lut):
    """Stain density plane from an RGB image via a per-channel lookup table.

    ``lut`` has shape (3, 256), float64: lut[c][v] is the optical density of
    channel value v projected on the stain axis and divided by the density
    cap, so the pixel density is the clamped sum over channels.
    """
    d = lut[0][rgb[:, :, 0]] + lut[1][rgb[:, :, 1]] + lut[2][rgb[:, :, 2]]
    d = np.clip(d, 0.0, 1.0)
    return np.floor(255.0 * d + 0.5).astype(np.uint8)


def blend_u8(orig, dens, target, b_eff):
    """Composite one region: original RGB, density plane, target color, blend.

    b_eff in [0, 0.5] interpolates original -> overlay (density-alpha target
    over original); (0.5, 1] interpolates overlay -> importance-only
    (white -> target by density).
    """
    d = dens.astype(np.float64) * (1.0 / 255.0)
    out = np.empty(orig.shape, np.uint8)
    for c in range(3):
        t = float(target[c])
        oc = orig[:, :, c].astype(np.float64)
        ov = d * t + (1.0 - d) * oc
        if b_eff <= 0.5:
            f = b_eff * 2.0
            v = (1.0 - f) * oc + f * ov
        else:
            f = (b_eff - 0.5) * 2.0
            imp = (1.0 - d) * 255.0 + d * t
            v = (1.0 - f) * ov + f * imp
        out[:, :, c] = np.floor(v + 0.5).astype(np.uint8)
    return out
