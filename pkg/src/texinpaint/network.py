"""Feed-forward analysis network: conv+ReLU / pooling stacks with manual
forward and backward passes, mask propagation, and TXW1 weight file I/O.

The network is a plain ordered list of layers. Statistics are captured
post-ReLU at conv layers and post-pool at pooling layers.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import minimum_filter

TXW1_MAGIC = b"TXW1"
KIND_CONV = 1
KIND_POOL = 2

DEFAULT_STATISTICS_LAYERS = ("conv1_1", "pool1", "pool2", "pool3", "pool4")
STOCHASTIC_GLOBAL_LAYERS = ("pool3", "pool4", "pool5")


@dataclass
class ConvLayer:
    """3x3 (or any odd-sized) convolution with zero padding, followed by ReLU."""

    name: str
    weights: np.ndarray  # (out_ch, in_ch, kh, kw) float64
    biases: np.ndarray   # (out_ch,) float64
    relu: bool = True    # False gives a linear layer (test-only mode)

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]


@dataclass
class PoolLayer:
    """2x2 stride-2 pooling; average by default, max as a config switch."""

    name: str
    mode: str = "avg"


@dataclass
class FeatureNetwork:
    layers: list
    channel_means: np.ndarray  # (3,) subtracted from the input channels
    statistics_layers: tuple = DEFAULT_STATISTICS_LAYERS

    def __post_init__(self):
        names = [ly.name for ly in self.layers]
        if len(set(names)) != len(names):
            raise ValueError("duplicate layer names")
        in_ch = None
        for ly in self.layers:
            if isinstance(ly, ConvLayer):
                if in_ch is not None and ly.in_channels != in_ch:
                    raise ValueError(
                        f"layer {ly.name}: in_channels {ly.in_channels} "
                        f"does not match previous out_channels {in_ch}")
                in_ch = ly.out_channels
        self.statistics_layers = tuple(
            n for n in self.statistics_layers if n in names)

    def layer_names(self) -> list:
        return [ly.name for ly in self.layers]


@dataclass
class ActivationTrace:
    """Everything the backward pass needs from one forward evaluation."""

    input_shape: tuple
    records: list                # (layer, aux) pairs in execution order
    activations: dict            # statistics layer name -> captured tensor
    layer_sizes: dict            # name -> (N_l, M_l)


@dataclass
class MaskPyramid:
    """Binary hole mask at input resolution plus its per-layer adaptations."""

    mask: np.ndarray             # (H, W), 0.0 = hole, 1.0 = known
    layer_masks: dict            # statistics layer name -> (h_l, w_l) mask
    expansions: tuple | None     # per-layer dilation radii, None for exact masks


# ---------------------------------------------------------------------------
# topologies and construction

def vgg19_topology(widths=(64, 128, 256, 512, 512)):
    """(kind, name, out_channels) triples for the VGG-19 feature stack.

    widths can be shrunk to build fast desk-scale networks with the same
    layer naming.
    """
    convs_per_block = (2, 2, 4, 4, 4)
    topo = []
    for b, (n_conv, w) in enumerate(zip(convs_per_block, widths), start=1):
        for c in range(1, n_conv + 1):
            topo.append(("conv", f"conv{b}_{c}", w))
        topo.append(("pool", f"pool{b}", 0))
    return topo


def small_topology(widths=(8, 8, 16), pools_after=(1, 2)):
    """Tiny conv/pool mix for tests: convN after each width, pools interleaved."""
    topo = []
    for i, w in enumerate(widths, start=1):
        topo.append(("conv", f"conv{i}_1", w))
        if i in pools_after:
            topo.append(("pool", f"pool{i}", 0))
    return topo


def random_network(seed, topology, kernel_size=3, channel_means=None,
                   statistics_layers=None, pool_mode="avg",
                   base_std=1.0) -> FeatureNetwork:
    """Deterministic random filter bank: weights ~ N(0, base_std^2/fan_in)."""
    rng = np.random.default_rng(seed)
    layers = []
    in_ch = 3
    for kind, name, out_ch in topology:
        if kind == "conv":
            fan_in = in_ch * kernel_size * kernel_size
            w = rng.standard_normal((out_ch, in_ch, kernel_size, kernel_size))
            w *= base_std / np.sqrt(fan_in)
            b = rng.standard_normal(out_ch) * 0.1
            layers.append(ConvLayer(name, w, b))
            in_ch = out_ch
        elif kind == "pool":
            layers.append(PoolLayer(name, mode=pool_mode))
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
    if channel_means is None:
        channel_means = np.zeros(3)
    if statistics_layers is None:
        statistics_layers = [n for _, n, _ in topology]
    return FeatureNetwork(layers, np.asarray(channel_means, dtype=np.float64),
                          tuple(statistics_layers))


# ---------------------------------------------------------------------------
# forward / backward

def _conv2d(x, weights, biases):
    """Same-padding correlation of (C, H, W) with (O, C, kh, kw)."""
    out_ch, in_ch, kh, kw = weights.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    cols = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # (C, H, W, kh, kw)
    h, w = x.shape[1], x.shape[2]
    cols = cols.transpose(1, 2, 0, 3, 4).reshape(h * w, in_ch * kh * kw)
    y = cols @ weights.reshape(out_ch, -1).T + biases
    return y.T.reshape(out_ch, h, w)


def _conv2d_transpose(g, weights):
    """Adjoint of _conv2d w.r.t. its input (bias has no input gradient)."""
    wt = weights.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1].copy()
    return _conv2d(g, wt, np.zeros(wt.shape[0]))


def _avg_pool(x):
    c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    v = x[:, : 2 * h2, : 2 * w2].reshape(c, h2, 2, w2, 2)
    return v.mean(axis=(2, 4))


def _avg_pool_backward(g, in_shape):
    c, h, w = in_shape
    h2, w2 = g.shape[1], g.shape[2]
    out = np.zeros(in_shape)
    out[:, : 2 * h2, : 2 * w2] = np.repeat(np.repeat(g, 2, axis=1), 2, axis=2) / 4.0
    return out


def _max_pool(x):
    c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    v = x[:, : 2 * h2, : 2 * w2].reshape(c, h2, 2, w2, 2)
    v = v.transpose(0, 1, 3, 2, 4).reshape(c, h2, w2, 4)
    idx = v.argmax(axis=3)
    return v.max(axis=3), idx


def _max_pool_backward(g, idx, in_shape):
    c, h, w = in_shape
    h2, w2 = g.shape[1], g.shape[2]
    scatter = np.zeros((c, h2, w2, 4))
    np.put_along_axis(scatter, idx[..., None], g[..., None], axis=3)
    scatter = scatter.reshape(c, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4)
    out = np.zeros(in_shape)
    out[:, : 2 * h2, : 2 * w2] = scatter.reshape(c, 2 * h2, 2 * w2)
    return out


def forward(net: FeatureNetwork, x: np.ndarray, layers=None) -> ActivationTrace:
    """Run the stack up to the deepest requested statistics layer."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != 3:
        raise ValueError(f"expected a (3, H, W) input, got shape {x.shape}")
    wanted = tuple(layers) if layers is not None else net.statistics_layers
    names = net.layer_names()
    for n in wanted:
        if n not in names:
            raise ValueError(f"unknown statistics layer {n!r}")
    deepest = max(names.index(n) for n in wanted)

    cur = x - net.channel_means[:, None, None]
    records = []
    activations = {}
    layer_sizes = {}
    for ly in net.layers[: deepest + 1]:
        if isinstance(ly, ConvLayer):
            if min(cur.shape[1], cur.shape[2]) < 1:
                raise ValueError(f"input exhausted before layer {ly.name}")
            z = _conv2d(cur, ly.weights, ly.biases)
            if ly.relu:
                gate = z > 0
                cur = np.where(gate, z, 0.0)
            else:
                gate = None
                cur = z
            records.append((ly, gate, cur.shape))
        else:
            if cur.shape[1] < 2 or cur.shape[2] < 2:
                raise ValueError(f"input too small to pool at layer {ly.name}")
            if ly.mode == "avg":
                aux = cur.shape
                cur = _avg_pool(cur)
            else:
                pooled, idx = _max_pool(cur)
                aux = (cur.shape, idx)
                cur = pooled
            records.append((ly, aux, cur.shape))
        if ly.name in wanted:
            activations[ly.name] = cur
            layer_sizes[ly.name] = (cur.shape[0], cur.shape[1] * cur.shape[2])
    return ActivationTrace(x.shape, records, activations, layer_sizes)


def backward(net: FeatureNetwork, trace: ActivationTrace, cotangents: dict) -> np.ndarray:
    """Backpropagate per-layer cotangents down to an input-space gradient."""
    for name, c in cotangents.items():
        if name not in trace.activations:
            raise ValueError(f"cotangent for uncaptured layer {name!r}")
        if c.shape != trace.activations[name].shape:
            raise ValueError(f"cotangent shape mismatch at {name!r}")
    g = None
    for ly, aux, out_shape in reversed(trace.records):
        if g is None:
            g = np.zeros(out_shape)
        if ly.name in cotangents:
            g = g + cotangents[ly.name]
        if isinstance(ly, ConvLayer):
            g = _conv2d_transpose(g if aux is None else np.where(aux, g, 0.0),
                                  ly.weights)
        elif ly.mode == "avg":
            g = _avg_pool_backward(g, aux)
        else:
            in_shape, idx = aux
            g = _max_pool_backward(g, idx, in_shape)
    return g if g is not None else np.zeros(trace.input_shape)


# ---------------------------------------------------------------------------
# mask propagation

def _min_pool(m):
    h2, w2 = m.shape[0] // 2, m.shape[1] // 2
    v = m[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2)
    return v.min(axis=(1, 3))


def _dilate_zeros(m, radius):
    """Grow the zero region by `radius` pixels in Chebyshev distance."""
    if radius <= 0:
        return m
    return minimum_filter(m, size=2 * radius + 1, mode="constant", cval=1.0)


def propagate_mask(net: FeatureNetwork, m: np.ndarray, e, layers=None) -> MaskPyramid:
    """Adapt the hole mask to each statistics layer: min-pool through the
    poolings seen so far, then dilate the hole by the layer's expansion radius."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 3:
        m = m[0]
    wanted = tuple(layers) if layers is not None else net.statistics_layers
    e = tuple(e)
    if len(e) != len(wanted):
        raise ValueError(
            f"expected {len(wanted)} expansion entries, got {len(e)}")
    radii = dict(zip(wanted, e))
    layer_masks = {}
    cur = m
    for ly in net.layers:
        if isinstance(ly, PoolLayer):
            cur = _min_pool(cur)
        if ly.name in radii:
            layer_masks[ly.name] = _dilate_zeros(cur, radii[ly.name])
        if len(layer_masks) == len(wanted):
            break
    return MaskPyramid(m, layer_masks, e)


def exact_mask(net: FeatureNetwork, m: np.ndarray, layers=None) -> MaskPyramid:
    """Mask a unit iff its exact receptive field intersects the hole.

    Stricter than propagate_mask; used as the reference behavior in tests.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 3:
        m = m[0]
    wanted = tuple(layers) if layers is not None else net.statistics_layers
    layer_masks = {}
    cur = m
    for ly in net.layers:
        if isinstance(ly, ConvLayer):
            cur = _dilate_zeros(cur, ly.weights.shape[2] // 2)
        else:
            cur = _min_pool(cur)
        if ly.name in wanted:
            layer_masks[ly.name] = cur
        if len(layer_masks) == len(wanted):
            break
    return MaskPyramid(m, layer_masks, None)


# ---------------------------------------------------------------------------
# TXW1 weight file I/O

class WeightFormatError(ValueError):
    pass


def write_weights(net: FeatureNetwork, path) -> None:
    buf = io.BytesIO()
    buf.write(TXW1_MAGIC)
    buf.write(struct.pack("<I", len(net.layers)))
    buf.write(struct.pack("<3d", *net.channel_means))
    for ly in net.layers:
        name = ly.name.encode("utf-8")
        if isinstance(ly, ConvLayer):
            buf.write(struct.pack("<B", KIND_CONV))
            buf.write(struct.pack("<H", len(name)))
            buf.write(name)
            o, i, kh, kw = ly.weights.shape
            buf.write(struct.pack("<4I", o, i, kh, kw))
            buf.write(ly.weights.astype("<f4").tobytes())
            buf.write(ly.biases.astype("<f4").tobytes())
        else:
            buf.write(struct.pack("<B", KIND_POOL))
            buf.write(struct.pack("<H", len(name)))
            buf.write(name)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def _read_exact(f, n, what):
    data = f.read(n)
    if len(data) != n:
        raise WeightFormatError(f"truncated weight file while reading {what}")
    return data


def load_weights(path, statistics_layers=DEFAULT_STATISTICS_LAYERS,
                 pool_mode="avg") -> FeatureNetwork:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != TXW1_MAGIC:
            raise WeightFormatError(f"bad magic {magic!r}")
        (n_layers,) = struct.unpack("<I", _read_exact(f, 4, "layer count"))
        means = np.array(struct.unpack("<3d", _read_exact(f, 24, "channel means")))
        layers = []
        in_ch = 3
        for k in range(n_layers):
            (kind,) = struct.unpack("<B", _read_exact(f, 1, "layer kind"))
            (name_len,) = struct.unpack("<H", _read_exact(f, 2, "name length"))
            name = _read_exact(f, name_len, "layer name").decode("utf-8")
            if kind == KIND_CONV:
                o, i, kh, kw = struct.unpack("<4I", _read_exact(f, 16, name))
                if i != in_ch:
                    raise WeightFormatError(
                        f"layer {name}: in_channels {i}, expected {in_ch}")
                w = np.frombuffer(
                    _read_exact(f, 4 * o * i * kh * kw, f"{name} weights"),
                    dtype="<f4").astype(np.float64).reshape(o, i, kh, kw)
                b = np.frombuffer(
                    _read_exact(f, 4 * o, f"{name} biases"),
                    dtype="<f4").astype(np.float64)
                layers.append(ConvLayer(name, w, b))
                in_ch = o
            elif kind == KIND_POOL:
                layers.append(PoolLayer(name, mode=pool_mode))
            else:
                raise WeightFormatError(f"unknown layer kind {kind}")
        if f.read(1):
            raise WeightFormatError("trailing bytes after last layer")
    return FeatureNetwork(layers, means, tuple(statistics_layers))
