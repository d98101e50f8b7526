"""Minimum-error-boundary-cut compositing of synthesized patches."""

from __future__ import annotations

import numpy as np


def overlap_error(canvas: np.ndarray, patch: np.ndarray) -> np.ndarray:
    """Per-pixel squared RGB difference between two equally shaped tensors."""
    d = canvas - patch
    return (d * d).sum(axis=0)


def min_cut_seam(err: np.ndarray, orientation: str = "vertical"):
    """Dynamic-programming seam through an error surface.

    A vertical seam holds one column index per row with drift <= 1 between
    consecutive rows; horizontal is the transpose. Ties break toward the
    smaller index. Returns (path, total cost).
    """
    err = np.asarray(err, dtype=np.float64)
    if orientation == "horizontal":
        path, cost = min_cut_seam(err.T, "vertical")
        return path, cost
    if orientation != "vertical":
        raise ValueError(f"unknown orientation {orientation!r}")
    if err.size == 0:
        raise ValueError("empty overlap band")
    h, w = err.shape
    cost = np.empty((h, w))
    cost[0] = err[0]
    for i in range(1, h):
        for j in range(w):
            lo, hi = max(0, j - 1), min(w, j + 2)
            cost[i, j] = err[i, j] + cost[i - 1, lo:hi].min()
    path = np.empty(h, dtype=int)
    path[-1] = int(np.argmin(cost[-1]))
    for i in range(h - 2, -1, -1):
        j = path[i + 1]
        lo = max(0, j - 1)
        hi = min(w, j + 2)
        path[i] = lo + int(np.argmin(cost[i, lo:hi]))
    return path, float(cost[-1].min())


def composite_patch(canvas: np.ndarray, patch: np.ndarray, position,
                    overlap: int, hole_mask: np.ndarray) -> np.ndarray:
    """Blend a patch into the canvas with seams over the left and top bands.

    position is the (y, x) of the patch's top-left corner; hole_mask is
    boolean (H, W), True where pixels may be written (inside the hole).
    Pixels where both seams vote to keep existing content keep it.
    """
    y, x = position
    c, ph, pw = patch.shape
    if y < 0 or x < 0 or y + ph > canvas.shape[1] or x + pw > canvas.shape[2]:
        raise ValueError("patch placement out of canvas bounds")
    if overlap < 0 or overlap >= min(ph, pw):
        if overlap != 0:
            raise ValueError("overlap must be in [0, patch size)")

    existing = canvas[:, y : y + ph, x : x + pw]
    take = np.ones((ph, pw), dtype=bool)
    if overlap > 0:
        vpath, _ = min_cut_seam(
            overlap_error(existing[:, :, :overlap], patch[:, :, :overlap]),
            "vertical")
        cols = np.arange(pw)
        take &= cols[None, :] >= np.where(cols[None, :] < overlap,
                                          vpath[:, None], 0)
        hpath, _ = min_cut_seam(
            overlap_error(existing[:, :overlap, :], patch[:, :overlap, :]),
            "horizontal")
        rows = np.arange(ph)
        take &= rows[:, None] >= np.where(rows[:, None] < overlap,
                                          hpath[None, :], 0)
    take &= hole_mask[y : y + ph, x : x + pw]

    out = canvas.copy()
    region = out[:, y : y + ph, x : x + pw]
    region[:, take] = patch[:, take]
    return out
