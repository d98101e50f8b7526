import numpy as np
import pytest

from texinpaint.network import propagate_mask
from texinpaint.search import build_search_grid, find_reference
from texinpaint.statistics import masked_gramian, masked_gramians_of

from conftest import checkerboard, tiny_net


def grid_positions(h, w, p, stride):
    return [(y, x) for y in range(0, h - p + 1, stride)
            for x in range(0, w - p + 1, stride)]


def test_grid_enumerates_all_positions_without_holes(rng):
    img = rng.uniform(0, 255, (3, 32, 32))
    grid = build_search_grid(img, np.zeros((32, 32), dtype=bool), 16, 8)
    assert grid.positions == grid_positions(32, 32, 16, 8)


def test_grid_excludes_hole_overlapping_positions(rng):
    img = rng.uniform(0, 255, (3, 32, 32))
    forbidden = np.zeros((32, 32), dtype=bool)
    forbidden[0:8, 0:8] = True
    grid = build_search_grid(img, forbidden, 16, 8)
    expected = [p for p in grid_positions(32, 32, 16, 8)
                if p[0] >= 8 or p[1] >= 8]
    assert grid.positions == expected


def test_grid_fallback_mask(rng):
    img = rng.uniform(0, 255, (3, 16, 16))
    everything = np.ones((16, 16), dtype=bool)
    fallback = np.zeros((16, 16), dtype=bool)
    fallback[4:12, 4:12] = True
    # strict mask forbids every position; the fallback admits none either at
    # patch 16, so minimal overlap keeps the (single) least-overlapping one
    grid = build_search_grid(img, everything, 16, 8, fallback=fallback,
                             minimal_overlap=True)
    assert grid.positions == [(0, 0)]


def test_grid_minimal_overlap_prefers_least_hole(rng):
    img = rng.uniform(0, 255, (3, 24, 24))
    everything = np.ones((24, 24), dtype=bool)
    fallback = np.zeros((24, 24), dtype=bool)
    fallback[0:20, 0:20] = True  # only the bottom-right corner is clean-ish
    grid = build_search_grid(img, everything, 16, 8, fallback=fallback,
                             minimal_overlap=True)
    assert grid.positions == [(8, 8)]


def test_grid_rejects_bad_arguments(rng):
    img = rng.uniform(0, 255, (3, 16, 16))
    with pytest.raises(ValueError):
        build_search_grid(img, np.zeros((16, 16), dtype=bool), 16, 0)
    with pytest.raises(ValueError):
        build_search_grid(img, np.zeros((16, 16), dtype=bool), 32, 8)


def test_self_match_has_zero_distance(rng):
    net = tiny_net()
    img = rng.uniform(0, 255, (3, 32, 32))
    grid = build_search_grid(img, np.zeros((32, 32), dtype=bool), 16, 8)
    pyr = propagate_mask(net, np.ones((16, 16)), (0, 0, 0))
    query = img[:, 8:24, 8:24]
    pos, patch, dist = find_reference(query, pyr, grid, net)
    assert pos == (8, 8)
    assert dist == 0.0
    assert np.array_equal(patch, query)


def test_find_reference_matches_exhaustive_oracle(rng):
    net = tiny_net()
    img = np.asarray(checkerboard(64, 8), dtype=float).transpose(2, 0, 1)
    img += rng.uniform(-20, 20, img.shape)
    forbidden = np.zeros((64, 64), dtype=bool)
    forbidden[24:40, 24:40] = True
    grid = build_search_grid(img, forbidden, 16, 8)
    mask = np.ones((16, 16))
    mask[4:12, 4:12] = 0.0
    pyr = propagate_mask(net, mask, (1, 1, 1))
    query = rng.uniform(0, 255, (3, 16, 16))

    qg = masked_gramians_of(query, pyr, net)
    best = None
    for pos in grid.positions:
        cg = masked_gramians_of(grid.candidate(pos), pyr, net)
        d = sum(((cg[n] - qg[n]) ** 2).sum() for n in cg)
        if best is None or d < best[1]:
            best = (pos, d)
    pos, _, dist = find_reference(query, pyr, grid, net)
    assert pos == best[0]
    assert np.isclose(dist, best[1])


def test_tie_break_prefers_smallest_position(rng):
    net = tiny_net()
    img = np.tile(rng.uniform(0, 255, (3, 16, 16)), (1, 2, 2))  # 2x2 repeats
    grid = build_search_grid(img, np.zeros((32, 32), dtype=bool), 16, 16)
    pyr = propagate_mask(net, np.ones((16, 16)), (0, 0, 0))
    query = img[:, 16:32, 16:32]
    pos, _, dist = find_reference(query, pyr, grid, net)
    assert pos == (0, 0)  # all four tiles tie at distance 0
    assert dist == 0.0


def test_reference_never_contains_hole_pixels(rng):
    net = tiny_net()
    img = rng.uniform(0, 255, (3, 48, 48))
    forbidden = np.zeros((48, 48), dtype=bool)
    forbidden[16:32, 16:32] = True
    grid = build_search_grid(img, forbidden, 16, 8)
    for pos in grid.positions:
        y, x = pos
        assert not forbidden[y : y + 16, x : x + 16].any()


def test_find_reference_empty_grid_raises(rng):
    net = tiny_net()
    img = rng.uniform(0, 255, (3, 16, 16))
    grid = build_search_grid(img, np.ones((16, 16), dtype=bool), 16, 8)
    pyr = propagate_mask(net, np.ones((16, 16)), (0, 0, 0))
    with pytest.raises(ValueError):
        find_reference(img, pyr, grid, net)


def test_feature_cache_returns_consistent_results(rng):
    net = tiny_net()
    img = rng.uniform(0, 255, (3, 32, 32))
    grid = build_search_grid(img, np.zeros((32, 32), dtype=bool), 16, 8)
    layers = ("conv1_1", "pool1", "conv3_1")
    first = grid.features((8, 8), net, layers)
    second = grid.features((8, 8), net, layers)
    assert first is second  # cached
    for n in layers:
        assert np.array_equal(first[n], second[n])
