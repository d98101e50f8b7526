"""Reference patch lookup on a stride grid, ranked by masked-Gramian distance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import FeatureNetwork, MaskPyramid, forward
from .statistics import masked_gramian, masked_gramians_of


@dataclass
class SearchGrid:
    """Candidate patches of one image: admissible top-left positions on a
    stride grid, with cached per-candidate feature activations."""

    image: np.ndarray                  # (3, H, W) source tensor
    patch_size: tuple                  # (height, width)
    stride: int
    positions: list                    # (y, x) tuples, sorted lexicographically
    _feature_cache: dict = field(default_factory=dict, repr=False)

    def candidate(self, pos) -> np.ndarray:
        y, x = pos
        ph, pw = self.patch_size
        return self.image[:, y : y + ph, x : x + pw]

    def features(self, pos, net: FeatureNetwork, layers) -> dict:
        key = (pos, layers)
        if key not in self._feature_cache:
            trace = forward(net, self.candidate(pos), layers=layers)
            self._feature_cache[key] = trace.activations
        return self._feature_cache[key]


def build_search_grid(image: np.ndarray, forbidden: np.ndarray,
                      patch_size: int, stride: int,
                      fallback: np.ndarray | None = None,
                      minimal_overlap: bool = False) -> SearchGrid:
    """Grid of stride-spaced positions whose patches avoid the forbidden mask.

    If no position qualifies and a (less strict) fallback mask is given, the
    grid is rebuilt against it. With minimal_overlap, a final fallback keeps
    the positions overlapping the fallback mask the least, so small images
    never end up without candidates (and never self-match the query window).
    """
    if stride <= 0:
        raise ValueError("stride must be positive")
    if isinstance(patch_size, int):
        patch_size = (patch_size, patch_size)
    ph, pw = patch_size
    h, w = image.shape[1], image.shape[2]
    if ph > h or pw > w:
        raise ValueError("patch larger than the image")

    def overlaps(bad):
        # summed-area table makes the per-position overlap count O(1)
        ii = np.zeros((h + 1, w + 1))
        ii[1:, 1:] = np.cumsum(np.cumsum(bad.astype(np.float64), 0), 1)
        out = []
        for y in range(0, h - ph + 1, stride):
            for x in range(0, w - pw + 1, stride):
                s = (ii[y + ph, x + pw] - ii[y, x + pw]
                     - ii[y + ph, x] + ii[y, x])
                out.append(((y, x), s))
        return out

    positions = [p for p, s in overlaps(np.asarray(forbidden, dtype=bool))
                 if s == 0]
    if not positions and fallback is not None:
        counts = overlaps(np.asarray(fallback, dtype=bool))
        positions = [p for p, s in counts if s == 0]
        if not positions and minimal_overlap and counts:
            smallest = min(s for _, s in counts)
            positions = [p for p, s in counts if s == smallest]
    return SearchGrid(image, patch_size, stride, positions)


def find_reference(query: np.ndarray, pyramid: MaskPyramid, grid: SearchGrid,
                   net: FeatureNetwork):
    """Admissible candidate minimizing the masked-Gramian distance.

    Returns (position, patch, distance); ties break toward the smallest
    (y, x) position.
    """
    if not grid.positions:
        raise ValueError("no admissible reference positions")
    layers = tuple(pyramid.layer_masks)
    query_grams = masked_gramians_of(query, pyramid, net)
    best_pos = None
    best_dist = np.inf
    for pos in sorted(grid.positions):
        acts = grid.features(pos, net, layers)
        dist = 0.0
        for name in layers:
            g = masked_gramian(acts[name], pyramid.layer_masks[name])
            dist += ((g - query_grams[name]) ** 2).sum()
        if dist < best_dist:
            best_dist = dist
            best_pos = pos
    return best_pos, grid.candidate(best_pos).copy(), float(best_dist)
