import itertools

import numpy as np
import pytest

from texinpaint.quilting import composite_patch, min_cut_seam, overlap_error


def seam_oracle(err):
    """Enumerate every monotone (drift <= 1) vertical seam, return min cost."""
    h, w = err.shape
    best = None
    for first in range(w):
        stack = [(0, first, err[0, first])]
        while stack:
            i, j, cost = stack.pop()
            if i == h - 1:
                if best is None or cost < best:
                    best = cost
                continue
            for nj in (j - 1, j, j + 1):
                if 0 <= nj < w:
                    stack.append((i + 1, nj, cost + err[i + 1, nj]))
    return best


def test_overlap_error_sums_channels():
    a = np.zeros((3, 2, 2))
    b = np.ones((3, 2, 2))
    assert np.allclose(overlap_error(a, b), 3.0)


def test_seam_follows_zero_cost_column():
    err = np.ones((6, 5))
    err[:, 3] = 0.0
    path, cost = min_cut_seam(err)
    assert np.all(path == 3)
    assert cost == 0.0


def test_seam_constant_surface_cost():
    err = np.full((7, 4), 2.5)
    path, cost = min_cut_seam(err)
    assert np.isclose(cost, 7 * 2.5)
    assert np.all(path == 0)  # ties break toward the smaller index


def test_seam_drift_limited_to_one():
    rngl = np.random.default_rng(7)
    err = rngl.uniform(size=(12, 6))
    path, _ = min_cut_seam(err)
    assert np.abs(np.diff(path)).max() <= 1


def test_seam_matches_enumeration_oracle():
    rngl = np.random.default_rng(99)
    for _ in range(20):
        err = rngl.uniform(size=(4, 8))
        _, cost = min_cut_seam(err)
        assert np.isclose(cost, seam_oracle(err))


def test_horizontal_seam_is_transpose():
    rngl = np.random.default_rng(3)
    err = rngl.uniform(size=(5, 9))
    pv, cv = min_cut_seam(err.T, "vertical")
    ph, ch = min_cut_seam(err, "horizontal")
    assert np.array_equal(pv, ph)
    assert cv == ch


def test_seam_rejects_empty_and_bad_orientation():
    with pytest.raises(ValueError):
        min_cut_seam(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        min_cut_seam(np.zeros((3, 3)), "diagonal")


# ---------------------------------------------------------------------------
# compositing

def test_composite_identical_patch_is_noop():
    canvas = np.arange(3 * 8 * 8, dtype=float).reshape(3, 8, 8)
    patch = canvas[:, 2:6, 2:6].copy()
    out = composite_patch(canvas, patch, (2, 2), 2, np.ones((8, 8), dtype=bool))
    assert np.array_equal(out, canvas)


def test_composite_zero_overlap_writes_whole_patch():
    canvas = np.zeros((3, 8, 8))
    patch = np.full((3, 4, 4), 9.0)
    out = composite_patch(canvas, patch, (1, 1), 0, np.ones((8, 8), dtype=bool))
    assert np.all(out[:, 1:5, 1:5] == 9.0)
    assert np.all(out[:, 0, :] == 0.0)


def test_composite_respects_hole_mask():
    canvas = np.zeros((3, 8, 8))
    patch = np.full((3, 4, 4), 9.0)
    hole = np.zeros((8, 8), dtype=bool)
    hole[2:4, 2:4] = True
    out = composite_patch(canvas, patch, (1, 1), 0, hole)
    assert np.all(out[:, 2:4, 2:4] == 9.0)
    writable = np.zeros((8, 8), dtype=bool)
    writable[2:4, 2:4] = True
    assert np.all(out[:, ~writable] == 0.0)


def test_composite_seam_splits_matching_halves():
    """Existing content matches the patch in the left half of the overlap, so
    the zero-cost seam runs down the middle: everything from one source or the
    other, no third value appears."""
    canvas = np.full((3, 8, 12), 5.0)
    patch = np.full((3, 8, 8), 7.0)
    patch[:, :, :2] = 5.0  # agrees with canvas in the first half of the band
    out = composite_patch(canvas, patch, (0, 4), 4, np.ones((8, 12), dtype=bool))
    vals = np.unique(out)
    assert set(vals) <= {5.0, 7.0}
    # the right part of the patch footprint is certainly patch content
    assert np.all(out[:, :, 8:] == 7.0)


def test_composite_every_pixel_from_one_source(rng):
    canvas = rng.uniform(0, 255, (3, 16, 16))
    patch = rng.uniform(0, 255, (3, 8, 8))
    out = composite_patch(canvas, patch, (4, 4), 2,
                          np.ones((16, 16), dtype=bool))
    foot = out[:, 4:12, 4:12]
    from_canvas = np.all(foot == canvas[:, 4:12, 4:12], axis=0)
    from_patch = np.all(foot == patch, axis=0)
    assert np.all(from_canvas | from_patch)
    # untouched outside the footprint
    probe = out.copy()
    probe[:, 4:12, 4:12] = canvas[:, 4:12, 4:12]
    assert np.array_equal(probe, canvas)


def test_composite_rejects_out_of_bounds():
    with pytest.raises(ValueError):
        composite_patch(np.zeros((3, 8, 8)), np.zeros((3, 4, 4)), (6, 6), 0,
                        np.ones((8, 8), dtype=bool))
