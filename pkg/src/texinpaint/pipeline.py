"""Coarse-to-fine patch-wise inpainting orchestration.

The hole is mean-filled, a coarse pass optimizes each patch against pooled
global statistics, the hole is converted to greyscale structure, and a fine
pass re-synthesizes detail patch by patch with quilted compositing.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from .image import (ImageBuffer, RegionSpec, fill_with_channel_means,
                    image_to_tensor, tensor_to_image, to_greyscale_region,
                    write_png)
from .lbfgs import OptimizerConfig, minimize
from .network import (DEFAULT_STATISTICS_LAYERS, FeatureNetwork, _avg_pool,
                      forward, propagate_mask)
from .statistics import (GramianSet, LossWeights, combined_loss,
                         compute_statistics, total_loss)
from .quilting import composite_patch
from .search import build_search_grid, find_reference

DEFAULT_DELTA = (6, 6, 5, 4, 3)
DEFAULT_EXPAND = (1, 1, 2, 3, 2)


@dataclass
class InpaintJob:
    image: ImageBuffer
    region: RegionSpec | None
    network: FeatureNetwork
    weights: LossWeights = field(default_factory=LossWeights)
    q: int = 2
    patch_size: int = 256
    overlap: int | None = None          # defaults to patch_size // 4
    stride: int = 64
    detail_layers: tuple = DEFAULT_STATISTICS_LAYERS
    global_layers: tuple = DEFAULT_STATISTICS_LAYERS
    delta: tuple = DEFAULT_DELTA
    expand: tuple = DEFAULT_EXPAND
    coarse_iterations: int = 200
    fine_iterations: int = 400
    coarse_wb: float | None = None      # None: reuse weights.wb in the coarse pass
    greyscale_after_coarse: bool = True
    seed: int = 0
    dump_dir: str | None = None

    def __post_init__(self):
        if self.overlap is None:
            self.overlap = self.patch_size // 4
        if self.patch_size % (1 << self.q):
            raise ValueError("patch size must be divisible by 2^q")
        if not (0 <= self.overlap < self.patch_size):
            raise ValueError("overlap must be smaller than the patch")
        if not self.detail_layers or not self.global_layers:
            raise ValueError("layer sets must be nonempty")


@dataclass
class PatchSchedule:
    placements: list           # (y, x) tuples, row-major
    patch_size: int
    overlap: int


@dataclass
class RunReport:
    lines: list = field(default_factory=list)
    patches: list = field(default_factory=list)

    def log(self, line: str):
        self.lines.append(line)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


# ---------------------------------------------------------------------------
# scheduling and pooled embedding

def _axis_placements(omega_start, omega_extent, patch, overlap, limit, align):
    stride = patch - overlap
    if patch > limit:
        raise ValueError("patch larger than the image")
    first = max(0, min(omega_start - overlap, limit - patch))
    first = (first // align) * align
    pos = [first]
    while pos[-1] + patch < omega_start + omega_extent:
        nxt = (min(pos[-1] + stride, limit - patch) // align) * align
        if nxt <= pos[-1]:
            nxt = pos[-1] + align
            if nxt > limit - patch:
                break
        pos.append(nxt)
    return pos


def build_schedule(region: RegionSpec, patch: int, overlap: int,
                   align: int = 1) -> PatchSchedule:
    """Row-major placements covering omega, anchored `overlap` pixels up-left
    of its corner, at stride (patch - overlap), clamped into the image."""
    if overlap >= patch:
        raise ValueError("overlap must be smaller than the patch")
    x, y, w, h = region.omega
    iw, ih = region.image_size
    xs = _axis_placements(x, w, patch, overlap, iw, align)
    ys = _axis_placements(y, h, patch, overlap, ih, align)
    return PatchSchedule([(py, px) for py in ys for px in xs], patch, overlap)


def avg_pool_q(x: np.ndarray, q: int) -> np.ndarray:
    for _ in range(q):
        x = _avg_pool(x)
    return x


def embed_pooled(x_d: np.ndarray, window: np.ndarray, q: int,
                 position) -> np.ndarray:
    """Pool the window q times and write the pooled patch into its slot.

    position is the patch's (y, x) inside the window, in native coordinates,
    and must be 2^q aligned.
    """
    y, x = position
    a = 1 << q
    c, ph, pw = x_d.shape
    if y % a or x % a:
        raise ValueError("patch position not 2^q aligned inside the window")
    if y < 0 or x < 0 or y + ph > window.shape[1] or x + pw > window.shape[2]:
        raise ValueError("window does not contain the patch")
    pooled = avg_pool_q(window, q)
    pooled[:, y // a : (y + ph) // a, x // a : (x + pw) // a] = avg_pool_q(x_d, q)
    return pooled


def embed_adjoint(cot: np.ndarray, q: int, position, patch_shape) -> np.ndarray:
    """Adjoint of embed_pooled restricted to the optimized patch."""
    y, x = position
    a = 1 << q
    c, ph, pw = patch_shape
    slot = cot[:, y // a : (y + ph) // a, x // a : (x + pw) // a]
    up = np.repeat(np.repeat(slot, a, axis=1), a, axis=2)
    return up / float(4 ** q)


def _layer_vector(values, layers):
    """Map a per-statistics-layer vector onto a (possibly shorter) layer set."""
    values = tuple(values)
    if len(values) >= len(layers):
        return values[: len(layers)]
    return values + (values[-1],) * (len(layers) - len(values))


# ---------------------------------------------------------------------------
# per-patch objective

class PatchObjective:
    """total_loss over a flattened patch, for the minimizer."""

    def __init__(self, net, refs_d, refs_g, window, q, pos_in_window,
                 x_b, local_mask, weights, detail_layers, global_layers):
        self.net = net
        self.refs_d = refs_d
        self.refs_g = refs_g
        self.q = q
        self.pos = pos_in_window
        self.x_b = x_b
        self.mask = local_mask
        self.w = weights
        self.detail_layers = detail_layers
        self.global_layers = global_layers
        self.shape = x_b.shape
        self.window = window
        a = 1 << q
        y, x = pos_in_window
        self._base = avg_pool_q(window, q) if weights.wg != 0.0 else None
        self._slot = (slice(None), slice(y // a, (y + self.shape[1]) // a),
                      slice(x // a, (x + self.shape[2]) // a))

    def embedded(self, x_d):
        out = self._base.copy()
        out[self._slot] = avg_pool_q(x_d, self.q)
        return out

    def __call__(self, flat):
        x_d = flat.reshape(self.shape)
        x_g = self.embedded(x_d) if self.w.wg != 0.0 else None
        loss, grad = total_loss(
            self.net, self.refs_d, self.refs_g, x_d, x_g, self.x_b,
            self.mask, self.w, self.detail_layers, self.global_layers,
            lambda c: embed_adjoint(c, self.q, self.pos, self.shape))
        return loss, grad.ravel()

    def detail_loss(self, x_d):
        trace = forward(self.net, x_d, layers=self.detail_layers)
        val, _ = combined_loss(self.refs_d, trace, self.w)
        return val


# ---------------------------------------------------------------------------
# pipeline state and passes

@dataclass
class PipelineState:
    canvas: np.ndarray
    hole: np.ndarray            # boolean (H, W), True inside omega
    schedule: PatchSchedule
    window_origin: tuple        # (y, x), 2^q aligned
    window_size: tuple          # (h, w), 2^q aligned
    refs_g: GramianSet
    deltas_d: tuple
    deltas_g: tuple
    expand_d: tuple
    expand_g: tuple
    report: RunReport


def _aligned_window(job: InpaintJob, schedule: PatchSchedule):
    """Smallest 2^q-aligned rectangle containing omega, the psi band and every
    scheduled patch footprint, clamped to an aligned crop of the image."""
    a = 1 << job.q
    x, y, w, h = job.region.omega
    b = job.region.psi_band
    x0, y0 = x - b, y - b
    x1, y1 = x + w + b, y + h + b
    p = schedule.patch_size
    for py, px in schedule.placements:
        x0, y0 = min(x0, px), min(y0, py)
        x1, y1 = max(x1, px + p), max(y1, py + p)
    iw, ih = job.region.image_size
    x0, y0 = max(0, (x0 // a) * a), max(0, (y0 // a) * a)
    x1, y1 = min((iw // a) * a, -(-x1 // a) * a), min((ih // a) * a, -(-y1 // a) * a)
    return (y0, x0), (y1 - y0, x1 - x0)


def _global_reference(job: InpaintJob, canvas, hole, origin, size, report):
    """Pooled reference window for the global branch, found once per run."""
    a = 1 << job.q
    pooled_image = avg_pool_q(canvas, job.q)
    (wy, wx), (wh, ww) = origin, size
    psize = (wh // a, ww // a)

    hole_p = _pool_bool(hole, job.q)
    forbid_strict = _pool_bool(~job.region.phi_mask(), job.q)
    stride = max(1, job.stride // a)
    grid = build_search_grid(pooled_image, forbid_strict, psize, stride,
                             fallback=hole_p, minimal_overlap=True)
    if grid.positions and _overlap_count(hole_p, grid.positions[0], psize):
        report.log("global reference overlaps the hole (image too small for "
                   "a hole-free window); masked distance discounts it")

    query = avg_pool_q(canvas[:, wy : wy + wh, wx : wx + ww], job.q)
    local_known = (~hole[wy : wy + wh, wx : wx + ww])
    local_known = _pool_min(local_known.astype(np.float64), job.q)
    exp_g = _layer_vector(job.expand, job.global_layers)
    pyramid = propagate_mask(job.network, local_known, exp_g,
                             layers=job.global_layers)
    pos, patch, dist = find_reference(query, pyramid, grid, job.network)
    report.log(f"global-ref pos=({pos[0]},{pos[1]}) distance={dist:.6g}")
    deltas_g = _layer_vector(job.delta, job.global_layers)
    trace = forward(job.network, patch, layers=job.global_layers)
    return compute_statistics(trace, deltas_g), patch


def _overlap_count(mask, pos, patch_size):
    y, x = pos
    ph, pw = patch_size
    return int(np.asarray(mask, dtype=bool)[y : y + ph, x : x + pw].sum())


def _pool_bool(mask, q):
    """q-times 2x2 pooling of a boolean mask; a pooled cell is True if any
    covered cell is True."""
    m = mask.astype(np.float64)
    for _ in range(q):
        h2, w2 = m.shape[0] // 2, m.shape[1] // 2
        m = m[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2).max(axis=(1, 3))
    return m.astype(bool)


def _pool_min(mask, q):
    for _ in range(q):
        h2, w2 = mask.shape[0] // 2, mask.shape[1] // 2
        mask = mask[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2).min(axis=(1, 3))
    return mask


def _write_hole_only(canvas, patch, pos, hole):
    y, x = pos
    c, ph, pw = patch.shape
    sel = hole[y : y + ph, x : x + pw]
    region = canvas[:, y : y + ph, x : x + pw]
    region[:, sel] = patch[:, sel]


def _dump(job, canvas, name):
    if job.dump_dir:
        os.makedirs(job.dump_dir, exist_ok=True)
        write_png(tensor_to_image(canvas), os.path.join(job.dump_dir, name))


def _optimize_patch(job, objective, x0, iterations):
    cfg = OptimizerConfig(max_iterations=iterations, lower=0.0, upper=255.0)
    return minimize(objective, x0.ravel(), cfg)


def coarse_pass(job: InpaintJob, state: PipelineState) -> PipelineState:
    """Global-statistics-only synthesis of every scheduled patch, then
    greyscale conversion of the hole."""
    w = LossWeights(ws=job.weights.ws, wcc=job.weights.wcc, wd=0.0, wg=1.0,
                    wb=job.weights.wb if job.coarse_wb is None else job.coarse_wb)
    (wy, wx) = state.window_origin
    for i, (py, px) in enumerate(state.schedule.placements):
        t0 = time.perf_counter()
        p = state.schedule.patch_size
        x0 = state.canvas[:, py : py + p, px : px + p].copy()
        local_known = (~state.hole[py : py + p, px : px + p]).astype(np.float64)
        window = state.canvas[:, wy : wy + state.window_size[0],
                              wx : wx + state.window_size[1]].copy()
        obj = PatchObjective(job.network, None, state.refs_g, window, job.q,
                             (py - wy, px - wx), x0.copy(), local_known, w,
                             job.detail_layers, job.global_layers)
        v0, _ = obj(x0.ravel())
        rep = _optimize_patch(job, obj, x0, job.coarse_iterations)
        _write_hole_only(state.canvas, rep.x.reshape(x0.shape), (py, px),
                         state.hole)
        dt = time.perf_counter() - t0
        state.report.log(
            f"coarse patch={i} pos=({py},{px}) loss0={v0:.6g} "
            f"loss1={rep.value:.6g} iters={rep.iterations} "
            f"reason={rep.reason} time={dt:.2f}s")
        state.report.patches.append(
            dict(stage="coarse", index=i, pos=(py, px), loss0=v0,
                 loss1=rep.value, iterations=rep.iterations))
        _dump(job, state.canvas, f"coarse_{i:02d}.png")
    if job.greyscale_after_coarse:
        state.canvas = to_greyscale_region(state.canvas, job.region)
        _dump(job, state.canvas, "grey.png")
    return state


def fine_pass(job: InpaintJob, state: PipelineState) -> PipelineState:
    """Detail-branch synthesis with per-patch reference lookup and quilting."""
    w = LossWeights(ws=job.weights.ws, wcc=job.weights.wcc, wd=1.0,
                    wg=job.weights.wg, wb=job.weights.wb)
    forbid_strict = ~job.region.phi_mask()
    grid = build_search_grid(state.canvas, forbid_strict,
                             state.schedule.patch_size, job.stride,
                             fallback=state.hole, minimal_overlap=True)
    if grid.positions and _overlap_count(state.hole, grid.positions[0],
                                         (state.schedule.patch_size,) * 2):
        state.report.log("reference grid fallback: candidates minimally "
                         "overlap the inpainting region")
    (wy, wx) = state.window_origin
    exp_d = _layer_vector(job.expand, job.detail_layers)
    for i, (py, px) in enumerate(state.schedule.placements):
        t0 = time.perf_counter()
        p = state.schedule.patch_size
        query = state.canvas[:, py : py + p, px : px + p].copy()
        local_known = (~state.hole[py : py + p, px : px + p]).astype(np.float64)
        pyramid = propagate_mask(job.network, local_known, exp_d,
                                 layers=job.detail_layers)
        ref_pos, x_d, dist = find_reference(query, pyramid, grid, job.network)
        trace = forward(job.network, x_d, layers=job.detail_layers)
        refs_d = compute_statistics(trace, state.deltas_d)
        window = state.canvas[:, wy : wy + state.window_size[0],
                              wx : wx + state.window_size[1]].copy()
        obj = PatchObjective(job.network, refs_d, state.refs_g, window, job.q,
                             (py - wy, px - wx), query.copy(), local_known, w,
                             job.detail_layers, job.global_layers)
        d0 = obj.detail_loss(query)
        v0, _ = obj(query.ravel())
        rep = _optimize_patch(job, obj, query, job.fine_iterations)
        result = rep.x.reshape(query.shape)
        d1 = obj.detail_loss(result)
        state.canvas = composite_patch(state.canvas, result, (py, px),
                                       state.schedule.overlap, state.hole)
        dt = time.perf_counter() - t0
        state.report.log(
            f"fine patch={i} pos=({py},{px}) ref=({ref_pos[0]},{ref_pos[1]}) "
            f"loss0={v0:.6g} loss1={rep.value:.6g} detail0={d0:.6g} "
            f"detail1={d1:.6g} iters={rep.iterations} reason={rep.reason} "
            f"time={dt:.2f}s")
        state.report.patches.append(
            dict(stage="fine", index=i, pos=(py, px), ref=ref_pos, loss0=v0,
                 loss1=rep.value, detail0=d0, detail1=d1,
                 iterations=rep.iterations))
        _dump(job, state.canvas, f"fine_{i:02d}.png")
    return state


def prepare(job: InpaintJob) -> PipelineState:
    """Mean-fill the hole and set up schedule, window and global reference."""
    t = image_to_tensor(job.image)
    t = fill_with_channel_means(t, job.region, job.region.phi_mask())
    hole = job.region.omega_mask()
    schedule = build_schedule(job.region, job.patch_size, job.overlap,
                              align=1 << job.q)
    origin, size = _aligned_window(job, schedule)
    report = RunReport()
    report.log(f"schedule patches={len(schedule.placements)} "
               f"patch={job.patch_size} overlap={job.overlap}")
    report.log(f"window origin=({origin[0]},{origin[1]}) "
               f"size=({size[0]},{size[1]})")
    refs_g, _ = _global_reference(job, t, hole, origin, size, report)
    return PipelineState(
        canvas=t, hole=hole, schedule=schedule, window_origin=origin,
        window_size=size, refs_g=refs_g,
        deltas_d=_layer_vector(job.delta, job.detail_layers),
        deltas_g=_layer_vector(job.delta, job.global_layers),
        expand_d=_layer_vector(job.expand, job.detail_layers),
        expand_g=_layer_vector(job.expand, job.global_layers),
        report=report)


def inpaint(job: InpaintJob):
    """Run the full coarse + fine procedure. Returns (image, report)."""
    if job.region is None or not job.region.omega_mask().any():
        report = RunReport()
        report.log("empty inpainting region; nothing to do")
        return job.image, report
    state = prepare(job)
    state = coarse_pass(job, state)
    state = fine_pass(job, state)
    _dump(job, state.canvas, "final.png")
    out = state.canvas.copy()
    known = ~state.hole
    original = image_to_tensor(job.image)
    out[:, known] = original[:, known]  # guarantee bit-exact known pixels
    return tensor_to_image(out), state.report
