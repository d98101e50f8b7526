"""Gramian summary statistics, loss terms and the masked patch distance.

All losses return (value, per-layer feature cotangents); the cotangents are
fed to network.backward to obtain input-space gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import ActivationTrace, FeatureNetwork, backward, forward


@dataclass
class LossWeights:
    ws: float = 1e6     # plain Gramian term inside the combined loss
    wcc: float = 1e7    # shifted-Gramian (cross-correlation) term
    wd: float = 1.0     # detail branch
    wg: float = 0.05    # global branch
    wb: float = 10.0    # boundary term in pixel space

    def __post_init__(self):
        for name in ("ws", "wcc", "wd", "wg", "wb"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass
class LayerStatistics:
    gram: np.ndarray
    n: int
    m: int
    delta: int = 0
    gram_x: np.ndarray | None = None
    gram_y: np.ndarray | None = None
    m_x: int = 0
    m_y: int = 0


@dataclass
class GramianSet:
    """Per-statistics-layer Gramians (plain and shifted) of one texture."""

    layers: dict = field(default_factory=dict)  # name -> LayerStatistics


def gramian(f: np.ndarray) -> np.ndarray:
    """Inner products between feature maps: G_ij = sum_k F_ik F_jk."""
    flat = f.reshape(f.shape[0], -1)
    return flat @ flat.T


def shifted_gramians(f: np.ndarray, delta: int):
    """Gramians between +delta and -delta translated copies of the maps.

    Horizontal: columns delta.. of map i against columns ..w-delta of map j;
    vertical analogous over rows.
    """
    n, h, w = f.shape
    if delta >= min(h, w):
        raise ValueError(f"shift {delta} exceeds spatial extent {(h, w)}")
    ax = f[:, :, delta:].reshape(n, -1)
    bx = f[:, :, : w - delta].reshape(n, -1)
    ay = f[:, delta:, :].reshape(n, -1)
    by = f[:, : h - delta, :].reshape(n, -1)
    return ax @ bx.T, ay @ by.T


def masked_gramian(f: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Gramian restricted to unmasked locations: sum_k m_k F_ik F_jk."""
    if mask.shape != f.shape[1:]:
        raise ValueError(
            f"mask shape {mask.shape} does not match feature maps {f.shape[1:]}")
    flat = f.reshape(f.shape[0], -1)
    return (flat * mask.reshape(-1)) @ flat.T


def effective_delta(delta: int, h: int, w: int) -> int:
    """Clamp a shift so it stays valid on small feature maps."""
    return min(delta, min(h, w) - 1)


def compute_statistics(trace: ActivationTrace, deltas=None) -> GramianSet:
    """Plain (and, with deltas, shifted) Gramians of every captured layer."""
    names = list(trace.activations)
    if deltas is not None and len(deltas) != len(names):
        raise ValueError(f"expected {len(names)} shifts, got {len(deltas)}")
    out = GramianSet()
    for i, name in enumerate(names):
        f = trace.activations[name]
        n, h, w = f.shape
        stats = LayerStatistics(gram=gramian(f), n=n, m=h * w)
        if deltas is not None:
            d = effective_delta(int(deltas[i]), h, w)
            stats.delta = d
            gx, gy = shifted_gramians(f, d)
            stats.gram_x, stats.gram_y = gx, gy
            stats.m_x = h * (w - d)
            stats.m_y = (h - d) * w
        out.layers[name] = stats
    return out


def _check_layers(ref: GramianSet, trace: ActivationTrace):
    if set(ref.layers) != set(trace.activations):
        raise ValueError(
            f"statistics layers {sorted(ref.layers)} do not match "
            f"trace layers {sorted(trace.activations)}")


def synthesis_loss(ref: GramianSet, trace: ActivationTrace):
    """Squared Gramian mismatch, normalized by 2 N^2 M^2 per layer."""
    _check_layers(ref, trace)
    loss = 0.0
    cots = {}
    for name, stats in ref.layers.items():
        f = trace.activations[name]
        n, h, w = f.shape
        if (n, h * w) != (stats.n, stats.m):
            raise ValueError(f"layer {name}: feature shape mismatch")
        g_hat = gramian(f)
        diff = g_hat - stats.gram
        norm = 1.0 / (2.0 * n * n * stats.m * stats.m)
        loss += norm * (diff * diff).sum()
        # d/dF of sum (FF^T - G)^2 is 4 (FF^T - G) F for symmetric G
        cots[name] = (4.0 * norm * diff @ f.reshape(n, -1)).reshape(f.shape)
    return loss, cots


def cross_correlation_loss(ref: GramianSet, trace: ActivationTrace):
    """Squared shifted-Gramian mismatch; normalization uses the cropped sizes."""
    _check_layers(ref, trace)
    loss = 0.0
    cots = {}
    for name, stats in ref.layers.items():
        if stats.gram_x is None:
            raise ValueError(f"layer {name}: reference has no shifted Gramians")
        f = trace.activations[name]
        n, h, w = f.shape
        d = stats.delta
        cot = np.zeros_like(f)

        ax = f[:, :, d:].reshape(n, -1)
        bx = f[:, :, : w - d].reshape(n, -1)
        diff = ax @ bx.T - stats.gram_x
        cx = 1.0 / (4.0 * n * n * stats.m_x * stats.m_x)
        loss += cx * (diff * diff).sum()
        cot[:, :, d:] += (2.0 * cx * diff @ bx).reshape(n, h, w - d)
        cot[:, :, : w - d] += (2.0 * cx * diff.T @ ax).reshape(n, h, w - d)

        ay = f[:, d:, :].reshape(n, -1)
        by = f[:, : h - d, :].reshape(n, -1)
        diff = ay @ by.T - stats.gram_y
        cy = 1.0 / (4.0 * n * n * stats.m_y * stats.m_y)
        loss += cy * (diff * diff).sum()
        cot[:, d:, :] += (2.0 * cy * diff @ by).reshape(n, h - d, w)
        cot[:, : h - d, :] += (2.0 * cy * diff.T @ ay).reshape(n, h - d, w)

        cots[name] = cot
    return loss, cots


def combined_loss(ref: GramianSet, trace: ActivationTrace, w: LossWeights):
    """w_s * synthesis + w_cc * cross-correlation, with merged cotangents."""
    loss = 0.0
    cots = {name: np.zeros_like(f) for name, f in trace.activations.items()}
    if w.ws != 0.0:
        ls, cs = synthesis_loss(ref, trace)
        loss += w.ws * ls
        for name, c in cs.items():
            cots[name] += w.ws * c
    if w.wcc != 0.0:
        lcc, cc = cross_correlation_loss(ref, trace)
        loss += w.wcc * lcc
        for name, c in cc.items():
            cots[name] += w.wcc * c
    return loss, cots


def boundary_loss(x_ref: np.ndarray, x_hat: np.ndarray, mask: np.ndarray):
    """Mean squared pixel difference over the known part of the patch.

    Returns the loss and its gradient with respect to x_hat.
    """
    if x_ref.shape != x_hat.shape:
        raise ValueError("boundary loss operands must have equal shapes")
    p = x_hat.size
    diff = mask[None, :, :] * (x_ref - x_hat)
    loss = (diff * diff).sum() / p
    grad = -2.0 / p * mask[None, :, :] * (x_ref - x_hat)
    return loss, grad


def total_loss(net: FeatureNetwork, refs_d: GramianSet, refs_g: GramianSet,
               x_hat_d: np.ndarray, x_hat_g: np.ndarray, x_b: np.ndarray,
               mask: np.ndarray, w: LossWeights, detail_layers, global_layers,
               global_adjoint):
    """Two-branch objective: detail statistics + embedded global statistics
    + boundary anchoring. Returns (loss, gradient w.r.t. x_hat_d).

    global_adjoint maps an input-space gradient of the global window back to
    patch space (the adjoint of the pooled embedding); only the detail patch
    is optimized.
    """
    loss = 0.0
    grad = np.zeros_like(x_hat_d)
    if w.wd != 0.0:
        trace_d = forward(net, x_hat_d, layers=detail_layers)
        ld, cots = combined_loss(refs_d, trace_d, w)
        loss += w.wd * ld
        grad += w.wd * backward(net, trace_d, cots)
    if w.wg != 0.0:
        trace_g = forward(net, x_hat_g, layers=global_layers)
        lg, cots = combined_loss(refs_g, trace_g, w)
        loss += w.wg * lg
        grad += w.wg * global_adjoint(backward(net, trace_g, cots))
    if w.wb != 0.0:
        lb, gb = boundary_loss(x_b, x_hat_d, mask)
        loss += w.wb * lb
        grad += w.wb * gb
    return loss, grad


def patch_distance(a: np.ndarray, b: np.ndarray, pyramid, net: FeatureNetwork) -> float:
    """Masked-Gramian distance between two patches over the statistics layers."""
    if a.shape != b.shape:
        raise ValueError("patches must have equal shapes")
    layers = tuple(pyramid.layer_masks)
    ga = masked_gramians_of(a, pyramid, net)
    gb = masked_gramians_of(b, pyramid, net)
    return float(sum(((ga[n] - gb[n]) ** 2).sum() for n in layers))


def masked_gramians_of(x: np.ndarray, pyramid, net: FeatureNetwork) -> dict:
    """Per-layer masked Gramians of one patch (shared by patch search)."""
    layers = tuple(pyramid.layer_masks)
    trace = forward(net, x, layers=layers)
    return {n: masked_gramian(trace.activations[n], pyramid.layer_masks[n])
            for n in layers}
