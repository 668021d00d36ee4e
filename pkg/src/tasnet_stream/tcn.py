"""Temporal convolutional mask estimator.

The network follows the Conv-TasNet separation block: input layer norm,
1x1 bottleneck, ``X * R`` dilated depthwise-separable blocks with residual and
skip outputs, and a PReLU + 1x1 mask head. Blocks are numbered in stack order
(repeat-major, dilation-minor); the first ``noncausal_layers`` of them see
``dilation * (P - 1) / 2`` future frames, the rest only the past.

Both an offline path (whole ``C x T`` matrices) and a frame-by-frame path
(:class:`TcnStream`) are provided; they compute the same function.
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import NumericalDivergence, ShapeMismatch

NORM_EPS = 1e-8
ACTIVATIONS = ("sigmoid", "identity")
NORMS = ("cln", "gln")


@dataclass(frozen=True)
class TcnConfig:
    bottleneck: int = 128
    hidden: int = 512
    kernel: int = 3
    blocks: int = 8
    repeats: int = 3
    skip: int = 128
    noncausal_layers: int = 0
    mask_activation: str = "sigmoid"
    num_sources: int = 2
    norm: str = "cln"

    def __post_init__(self):
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("kernel size must be odd so noncausal padding is symmetric")
        if not 0 <= self.noncausal_layers <= self.num_layers:
            raise ValueError(
                f"noncausal_layers must lie in [0, {self.num_layers}], got {self.noncausal_layers}")
        if self.mask_activation not in ACTIVATIONS:
            raise ValueError(f"mask_activation must be one of {ACTIVATIONS}")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")
        if self.num_sources < 1:
            raise ValueError("num_sources must be >= 1")

    @property
    def num_layers(self):
        return self.blocks * self.repeats

    def dilation(self, layer):
        return 2 ** (layer % self.blocks)

    def is_causal(self, layer):
        return layer >= self.noncausal_layers

    def lookahead(self, layer):
        """Future frames read by the depthwise convolution of ``layer``."""
        if self.is_causal(layer):
            return 0
        return self.dilation(layer) * (self.kernel - 1) // 2


@dataclass(frozen=True)
class MaskSet:
    masks: np.ndarray  # K x N x T

    @property
    def num_sources(self):
        return self.masks.shape[0]

    def __getitem__(self, k):
        return self.masks[k]


def conv_future_reach(config):
    return sum(config.lookahead(i) for i in range(config.num_layers))


def future_reach(config, overlap_ratio):
    """Future frames accessed when emitting one output frame.

    With any noncausal layer this is the convolutional reach plus the
    ``L / hop`` hops spanned by one frame (3 frames of convolutional delay
    at 1/2 overlap gives 5). A fully causal stack reports
    the current hop only, which gives one hop of look-ahead.
    """
    conv = conv_future_reach(config)
    if conv == 0:
        return 1
    return conv + frames_per_window(overlap_ratio)


def frames_per_window(overlap_ratio):
    """``L / hop`` for a given overlap ratio (1/2 -> 2, 2/3 -> 3)."""
    value = 1.0 / (1.0 - float(overlap_ratio))
    rounded = round(value)
    if abs(value - rounded) > 1e-6:
        raise ValueError(f"overlap ratio {overlap_ratio} does not give an integer L/hop")
    return int(rounded)


def tensor_specs(config, size):
    """Ordered ``(name, shape, fan_in)`` list; ``fan_in=None`` marks constant-initialised tensors."""
    B, H, P, Sc = config.bottleneck, config.hidden, config.kernel, config.skip
    N, K = size, config.num_sources
    specs = [
        ("tcn.in_norm.gain", (N,), None),
        ("tcn.in_norm.bias", (N,), None),
        ("tcn.bottleneck.weight", (B, N), N),
        ("tcn.bottleneck.bias", (B,), N),
    ]
    for i in range(config.num_layers):
        p = f"tcn.blocks.{i}."
        specs += [
            (p + "in_conv.weight", (H, B), B),
            (p + "in_conv.bias", (H,), B),
            (p + "prelu1", (1,), None),
            (p + "norm1.gain", (H,), None),
            (p + "norm1.bias", (H,), None),
            (p + "dconv.weight", (H, P), P),
            (p + "dconv.bias", (H,), P),
            (p + "prelu2", (1,), None),
            (p + "norm2.gain", (H,), None),
            (p + "norm2.bias", (H,), None),
            (p + "res_conv.weight", (B, H), H),
            (p + "res_conv.bias", (B,), H),
            (p + "skip_conv.weight", (Sc, H), H),
            (p + "skip_conv.bias", (Sc,), H),
        ]
    specs += [
        ("tcn.head.prelu", (1,), None),
        ("tcn.head.conv.weight", (K * N, Sc), Sc),
        ("tcn.head.conv.bias", (K * N,), Sc),
    ]
    return specs


def constant_init(name, shape):
    if name.endswith("gain"):
        return np.ones(shape, dtype=np.float32)
    if "prelu" in name:
        return np.full(shape, 0.25, dtype=np.float32)
    return np.zeros(shape, dtype=np.float32)


def param_count(config, size):
    return sum(math.prod(shape) for _, shape, _ in tensor_specs(config, size))


# ---------------------------------------------------------------- offline path

def prelu(x, slope):
    return np.where(x >= 0, x, slope * x)


def cumulative_layer_norm(x, gain, bias):
    """Normalise frame ``t`` with statistics over all channels of frames ``<= t``."""
    C = x.shape[0]
    count = C * np.arange(1, x.shape[1] + 1)
    mean = np.cumsum(x.sum(axis=0)) / count
    power = np.cumsum((x * x).sum(axis=0)) / count
    var = np.maximum(power - mean * mean, 0.0)
    return (x - mean) / np.sqrt(var + NORM_EPS) * gain[:, None] + bias[:, None]


def global_layer_norm(x, gain, bias):
    mean = x.mean()
    var = ((x - mean) ** 2).mean()
    return (x - mean) / np.sqrt(var + NORM_EPS) * gain[:, None] + bias[:, None]


def _norm(kind):
    return cumulative_layer_norm if kind == "cln" else global_layer_norm


def depthwise_conv(x, weight, bias, dilation, causal):
    """Per-channel dilated convolution with zero padding outside ``[0, T)``."""
    C, T = x.shape
    P = weight.shape[1]
    shift = P - 1 if causal else (P - 1) // 2
    out = np.repeat(bias[:, None], T, axis=1)
    for j in range(P):
        offset = (j - shift) * dilation
        lo, hi = max(0, -offset), min(T, T - offset)
        if lo < hi:
            out[:, lo:hi] += weight[:, j:j + 1] * x[:, lo + offset:hi + offset]
    return out


def _f64(weights, name):
    return np.asarray(weights[name], dtype=np.float64)


def conv_block_forward(x, weights, layer, dilation, causal, norm="cln"):
    """One TCN block over a ``B x T`` input; returns ``(residual_output, skip_output)``."""
    p = f"tcn.blocks.{layer}."
    w_in = _f64(weights, p + "in_conv.weight")
    if x.shape[0] != w_in.shape[1]:
        raise ShapeMismatch(f"block {layer} expects {w_in.shape[1]} channels, got {x.shape[0]}")
    normalize = _norm(norm)
    h = w_in @ x + _f64(weights, p + "in_conv.bias")[:, None]
    h = prelu(h, _f64(weights, p + "prelu1")[0])
    h = normalize(h, _f64(weights, p + "norm1.gain"), _f64(weights, p + "norm1.bias"))
    h = depthwise_conv(h, _f64(weights, p + "dconv.weight"), _f64(weights, p + "dconv.bias"),
                       dilation, causal)
    h = prelu(h, _f64(weights, p + "prelu2")[0])
    h = normalize(h, _f64(weights, p + "norm2.gain"), _f64(weights, p + "norm2.bias"))
    res = _f64(weights, p + "res_conv.weight") @ h + _f64(weights, p + "res_conv.bias")[:, None]
    skip = _f64(weights, p + "skip_conv.weight") @ h + _f64(weights, p + "skip_conv.bias")[:, None]
    return x + res, skip


def _check(x, layer):
    if not np.all(np.isfinite(x)):
        raise NumericalDivergence(f"non-finite activations at layer {layer}", layer=layer)


def activate(x, kind):
    if kind == "sigmoid":
        # numerically stable for large |x|
        return 0.5 * (1.0 + np.tanh(0.5 * x))
    return x


def mask_head(skip_sum, weights, config, size):
    h = prelu(skip_sum, _f64(weights, "tcn.head.prelu")[0])
    out = _f64(weights, "tcn.head.conv.weight") @ h + _f64(weights, "tcn.head.conv.bias")[:, None]
    return activate(out, config.mask_activation).reshape(config.num_sources, size, -1)


def separation_forward(w_input, config, weights):
    """Masks ``M_k`` for a ``N x T`` input representation (array or Representation)."""
    x = np.asarray(getattr(w_input, "data", w_input), dtype=np.float64)
    size = x.shape[0]
    expected = weights["tcn.in_norm.gain"].shape[0]
    if size != expected:
        raise ShapeMismatch(f"separator expects {expected} input rows, got {size}")
    normalize = _norm(config.norm)
    h = normalize(x, _f64(weights, "tcn.in_norm.gain"), _f64(weights, "tcn.in_norm.bias"))
    h = _f64(weights, "tcn.bottleneck.weight") @ h + _f64(weights, "tcn.bottleneck.bias")[:, None]
    skip_sum = 0.0
    for i in range(config.num_layers):
        h, skip = conv_block_forward(h, weights, i, config.dilation(i), config.is_causal(i),
                                     config.norm)
        _check(h, i)
        skip_sum = skip_sum + skip
    masks = mask_head(skip_sum, weights, config, size)
    _check(masks, config.num_layers)
    return MaskSet(masks)


# ----------------------------------------------------------- frame-by-frame path

class CumulativeNormState:
    def __init__(self, gain, bias):
        self.gain, self.bias = gain, bias
        self.total = 0.0
        self.power = 0.0
        self.count = 0

    def __call__(self, x):
        self.total += x.sum()
        self.power += (x * x).sum()
        self.count += x.shape[0]
        mean = self.total / self.count
        var = max(self.power / self.count - mean * mean, 0.0)
        return (x - mean) / np.sqrt(var + NORM_EPS) * self.gain + self.bias


class DepthwiseStream:
    """Dilated depthwise convolution fed one frame at a time.

    Keeps a fixed ring of ``(P - 1) * dilation + 1`` input frames and emits
    output frame ``t`` once input frame ``t + lookahead`` has arrived.
    """

    def __init__(self, weight, bias, dilation, causal):
        self.weight, self.bias, self.dilation = weight, bias, dilation
        P = weight.shape[1]
        self.shift = P - 1 if causal else (P - 1) // 2
        self.lookahead = (P - 1 - self.shift) * dilation
        self.span = (P - 1) * dilation + 1
        self.ring = np.zeros((self.span, weight.shape[0]))
        self.received = 0
        self.emitted = 0

    def _tap(self, index):
        if index < 0 or index >= self.received:
            return None
        return self.ring[index % self.span]

    def _output(self, t):
        out = self.bias.copy()
        for j in range(self.weight.shape[1]):
            frame = self._tap(t + (j - self.shift) * self.dilation)
            if frame is not None:
                out += self.weight[:, j] * frame
        self.emitted += 1
        return out

    def push(self, frame):
        self.ring[self.received % self.span] = frame
        self.received += 1
        t = self.received - 1 - self.lookahead
        return [self._output(t)] if t >= 0 else []

    def finish(self):
        return [self._output(t) for t in range(self.emitted, self.received)]


class BlockStream:
    def __init__(self, weights, layer, dilation, causal):
        p = f"tcn.blocks.{layer}."
        g = lambda name: _f64(weights, p + name)
        self.w_in, self.b_in = g("in_conv.weight"), g("in_conv.bias")
        self.a1, self.a2 = g("prelu1")[0], g("prelu2")[0]
        self.norm1 = CumulativeNormState(g("norm1.gain"), g("norm1.bias"))
        self.norm2 = CumulativeNormState(g("norm2.gain"), g("norm2.bias"))
        self.dconv = DepthwiseStream(g("dconv.weight"), g("dconv.bias"), dilation, causal)
        self.w_res, self.b_res = g("res_conv.weight"), g("res_conv.bias")
        self.w_skip, self.b_skip = g("skip_conv.weight"), g("skip_conv.bias")
        # inputs waiting for their residual branch; at most lookahead + 1 deep
        self.pending = []

    def _finish_frames(self, frames):
        out = []
        for v in frames:
            h = self.norm2(prelu(v, self.a2))
            x = self.pending.pop(0)
            out.append((x + self.w_res @ h + self.b_res, self.w_skip @ h + self.b_skip))
        return out

    def push(self, x):
        self.pending.append(x)
        u = self.norm1(prelu(self.w_in @ x + self.b_in, self.a1))
        return self._finish_frames(self.dconv.push(u))

    def finish(self):
        return self._finish_frames(self.dconv.finish())


class TcnStream:
    """Frame-by-frame evaluation of :func:`separation_forward` (cumulative norm only)."""

    def __init__(self, config, weights):
        if config.norm != "cln":
            raise ValueError("frame-by-frame evaluation needs cumulative layer norm")
        self.config = config
        self.weights = weights
        self.size = weights["tcn.in_norm.gain"].shape[0]
        self.in_norm = CumulativeNormState(_f64(weights, "tcn.in_norm.gain"),
                                           _f64(weights, "tcn.in_norm.bias"))
        self.w_bn = _f64(weights, "tcn.bottleneck.weight")
        self.b_bn = _f64(weights, "tcn.bottleneck.bias")
        self.blocks = [BlockStream(weights, i, config.dilation(i), config.is_causal(i))
                       for i in range(config.num_layers)]
        self.head_slope = _f64(weights, "tcn.head.prelu")[0]
        self.w_head = _f64(weights, "tcn.head.conv.weight")
        self.b_head = _f64(weights, "tcn.head.conv.bias")
        self.lookahead = conv_future_reach(config)
        self.skips = {}
        self.frames_in = 0
        self.frames_out = 0

    def _head(self, skip_sum):
        out = self.w_head @ prelu(skip_sum, self.head_slope) + self.b_head
        return activate(out, self.config.mask_activation).reshape(self.config.num_sources,
                                                                  self.size)

    def _run(self, start, frames):
        """Feed block outputs from ``start`` onward; returns finished mask frames."""
        for i in range(start, len(self.blocks)):
            nxt = []
            for h in frames:
                nxt.extend(self.blocks[i].push(h))
            frames = self._collect(i, nxt)
        return frames

    def _collect(self, layer, outputs):
        frames = []
        for h, skip in outputs:
            t = self.blocks[layer].dconv.emitted - len(outputs) + len(frames)
            self.skips[t] = self.skips.get(t, 0.0) + skip
            frames.append(h)
        if layer == len(self.blocks) - 1:
            first = self.frames_out
            masks = []
            for n in range(len(outputs)):
                masks.append(self._head(self.skips.pop(first + n)))
            self.frames_out += len(outputs)
            return masks
        return frames

    def push(self, frame):
        """Consume one ``N``-vector; returns a list of ``K x N`` mask frames (0 or 1)."""
        self.frames_in += 1
        h = self.in_norm(np.asarray(frame, dtype=np.float64))
        h = self.w_bn @ h + self.b_bn
        return self._run(0, [h])

    def finish(self):
        """Drain all delayed frames, zero-padding every noncausal convolution."""
        masks = []
        for i, block in enumerate(self.blocks):
            frames = self._collect(i, block.finish())
            if i == len(self.blocks) - 1:
                masks.extend(frames)
            else:
                masks.extend(self._run(i + 1, frames))
        return masks
