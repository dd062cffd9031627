"""Orthonormal 2-d Haar transform and direct wavelet sensing.

The detail coefficients form three quadtrees (one per orientation subband,
degree 4); direct sensing runs the same threshold traversal as the
dictionary-based procedure over those trees, with the scaling coefficient
and the coarsest details always measured.
"""

from __future__ import annotations

import numpy as np

from .sensing import SensingConfig, _threshold_traversal

__all__ = [
    "haar2",
    "ihaar2",
    "quadtree_children",
    "wavelet_sense",
    "wavelet_reconstruct",
]


def _check_side(side):
    if side < 1 or side & (side - 1):
        raise ValueError(f"side must be a power of two, got {side}")


def haar2(img):
    """Full orthonormal 2-d Haar analysis of a square power-of-two image."""
    img = np.asarray(img, dtype=float)
    side = img.shape[0]
    if img.shape != (side, side):
        raise ValueError("image must be square")
    _check_side(side)
    out = img.copy()
    s = side
    while s > 1:
        b = out[:s, :s]
        a00, a01 = b[0::2, 0::2].copy(), b[0::2, 1::2].copy()
        a10, a11 = b[1::2, 0::2].copy(), b[1::2, 1::2].copy()
        h = s // 2
        out[:h, :h] = (a00 + a01 + a10 + a11) / 2
        out[:h, h:s] = (a00 - a01 + a10 - a11) / 2
        out[h:s, :h] = (a00 + a01 - a10 - a11) / 2
        out[h:s, h:s] = (a00 - a01 - a10 + a11) / 2
        s = h
    return out


def ihaar2(coeffs):
    """Inverse of haar2."""
    coeffs = np.asarray(coeffs, dtype=float)
    side = coeffs.shape[0]
    if coeffs.shape != (side, side):
        raise ValueError("coefficient array must be square")
    _check_side(side)
    out = coeffs.copy()
    s = 1
    while s < side:
        t = 2 * s
        a = out[:s, :s].copy()
        h = out[:s, s:t].copy()
        v = out[s:t, :s].copy()
        d = out[s:t, s:t].copy()
        out[0:t:2, 0:t:2] = (a + h + v + d) / 2
        out[0:t:2, 1:t:2] = (a - h + v - d) / 2
        out[1:t:2, 0:t:2] = (a + h - v - d) / 2
        out[1:t:2, 1:t:2] = (a - h - v + d) / 2
        s = t
    return out


def _flat(band, s, i, j, side):
    # band 0 = scaling, 1 = horizontal, 2 = vertical, 3 = diagonal detail
    if band == 0:
        return 0
    if band == 1:
        r, c = i, s + j
    elif band == 2:
        r, c = s + i, j
    else:
        r, c = s + i, s + j
    return r * side + c


def quadtree_children(side):
    """children map (flat coefficient index -> tuple of flat child indices)
    for the three detail quadtrees of a side x side Haar decomposition."""
    _check_side(side)
    children = {0: ()}
    for band in (1, 2, 3):
        s = 1
        while s <= side // 2:
            for i in range(s):
                for j in range(s):
                    node = _flat(band, s, i, j, side)
                    if 2 * s <= side // 2:
                        kids = tuple(_flat(band, 2 * s, 2 * i + di, 2 * j + dj, side)
                                     for di in (0, 1) for dj in (0, 1))
                    else:
                        kids = ()
                    children[node] = kids
            s *= 2
    return children


def wavelet_sense(image, cfg, rng):
    """Direct wavelet sensing: threshold traversal over the Haar quadtrees.

    The scaling coefficient and the three coarsest details are always
    measured; descent into finer details is gated by the significance test.
    Node ids in the log are flat row-major indices into the coefficient array.
    """
    image = np.asarray(image, dtype=float)
    side = image.shape[0]
    if image.shape != (side, side):
        raise ValueError("image must be square")
    _check_side(side)
    coeffs = haar2(image)
    flat = coeffs.ravel()
    children = quadtree_children(side)
    roots = [0] if side == 1 else [0, _flat(1, 1, 0, 0, side),
                                   _flat(2, 1, 0, 0, side), _flat(3, 1, 0, 0, side)]
    return _threshold_traversal(
        project=lambda node: float(flat[node]),
        children_of=lambda node: children[node],
        roots=roots,
        cfg=cfg,
        rng=rng,
    )


def wavelet_reconstruct(outcome, side, beta):
    """Inverse transform of the significant measured coefficients / beta."""
    if beta == 0:
        raise ValueError("beta must be nonzero")
    coeffs = np.zeros((side, side))
    for e in outcome.log.entries:
        if e.node in outcome.support_estimate:
            coeffs[divmod(e.node, side)] = e.y / beta
    return ihaar2(coeffs)
