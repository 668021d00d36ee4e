"""One-hop-in, one-hop-out inference, look-ahead accounting and causality probing."""
from dataclasses import dataclass, field
import math
import time

import numpy as np

from . import model as model_lib
from .dsp import AudioSignal
from .errors import ChunkSizeMismatch, StreamingUnsupported
from .tcn import TcnStream, conv_future_reach, future_reach

CONVENTION = (
    "noncausal stacks count the convolutional reach plus the L/hop hops of one frame; "
    "fully causal stacks count the current hop only"
)


class StreamState:
    """Mutable state of one streaming session.

    Push exactly ``hop`` samples at a time. Output hop ``j`` is emitted by the
    push that delivers input hop ``j + delay``, where
    ``delay = conv_reach + L/hop - 1`` (see :func:`analyze_latency`).
    """

    def __init__(self, config, weights):
        if config.tcn.norm != "cln":
            raise StreamingUnsupported("global layer norm looks at the whole utterance")
        self.config = config
        self.weights = weights
        self.analysis = config.analysis
        self.hop = config.hop
        self.L = config.frame_length
        self.K = config.num_sources
        self.window = self.analysis.window_array()
        self.pad = self.analysis.pad
        self.tcn = TcnStream(config.tcn, weights)
        self.future_reach = future_reach(config.tcn, config.overlap)
        self.delay = conv_future_reach(config.tcn) + math.ceil(self.L / self.hop) - 1
        # framing: padded-domain samples not yet consumed, starting at buffer_start
        self.buffer = np.zeros(self.pad)
        self.buffer_start = 0
        self.frames_formed = 0
        # encoder outputs waiting for their masks
        self.pending = []
        # overlap-add accumulator covering padded positions [ola_start, ola_start + L)
        self.ola = np.zeros((self.K, self.L))
        self.ola_start = 0
        self.frames_decoded = 0
        self.samples_in = 0
        self.samples_out = 0
        self.pushes = 0
        self.flushed = False

    @property
    def t(self):
        return self.pushes

    # ------------------------------------------------------------ internals

    def _feed(self, samples):
        """Append padded-domain samples; returns masks of any frames completed."""
        self.buffer = np.concatenate([self.buffer, samples])
        masks = []
        while True:
            start = self.frames_formed * self.hop - self.buffer_start
            if start + self.L > self.buffer.shape[0]:
                break
            masks.extend(self._new_frame(self.buffer[start:start + self.L] * self.window))
            drop = self.frames_formed * self.hop - self.buffer_start
            self.buffer = self.buffer[drop:]
            self.buffer_start += drop
        return masks

    def _new_frame(self, frame):
        W, W_input = model_lib.encode_frames(frame[:, None], self.config, self.weights)
        self.pending.append(W[:, 0])
        self.frames_formed += 1
        return self.tcn.push(W_input[:, 0])

    def _decode(self, masks):
        for mask in masks:
            W = self.pending.pop(0)
            frames = model_lib.decode_frames((mask * W).T, self.config, self.weights)
            offset = self.frames_decoded * self.hop - self.ola_start
            if offset + self.L > self.ola.shape[1]:
                grow = offset + self.L - self.ola.shape[1]
                self.ola = np.concatenate([self.ola, np.zeros((self.K, grow))], axis=1)
            self.ola[:, offset:offset + self.L] += frames.T
            self.frames_decoded += 1

    def _norm(self, positions, num_frames):
        norm = np.zeros(positions.shape[0])
        for i, m in enumerate(positions):
            first = max(0, -(-(m - self.L + 1) // self.hop))
            last = min(m // self.hop, num_frames - 1)
            for t in range(first, last + 1):
                norm[i] += self.window[m - t * self.hop]
        return norm

    def _emit(self, upto, num_frames):
        """Release padded positions below ``upto`` from the accumulator."""
        n = upto - self.ola_start
        if n <= 0:
            return np.zeros((self.K, 0))
        positions = np.arange(self.ola_start, upto)
        norm = self._norm(positions, num_frames)
        out = np.divide(self.ola[:, :n], norm, out=np.zeros((self.K, n)), where=norm > 1e-12)
        self.ola = np.concatenate([self.ola[:, n:], np.zeros((self.K, max(0, self.L - self.ola.shape[1] + n)))], axis=1)
        self.ola_start = upto
        # drop the leading analysis padding
        skip = max(0, self.pad - (upto - n))
        out = out[:, min(skip, n):]
        self.samples_out += out.shape[1]
        return out

    # ------------------------------------------------------------ public

    def push(self, chunk):
        if self.flushed:
            raise RuntimeError("stream already flushed")
        chunk = np.asarray(getattr(chunk, "samples", chunk), dtype=np.float64)
        if chunk.ndim != 1 or chunk.shape[0] != self.hop:
            raise ChunkSizeMismatch(f"expected exactly {self.hop} samples, got {chunk.shape}")
        if not np.all(np.isfinite(chunk)):
            AudioSignal(chunk)  # raises NonFiniteInput
        self.pushes += 1
        self.samples_in += self.hop
        self._decode(self._feed(chunk))
        return self._emit(self.frames_decoded * self.hop, self.frames_decoded)

    def flush(self):
        """Drain the delayed tail; total output length then equals total input length."""
        if self.flushed or self.samples_in == 0:
            self.flushed = True
            return np.zeros((self.K, 0))
        total = self.analysis.num_frames(self.samples_in)
        masks = []
        while self.frames_formed < total:
            masks.extend(self._feed(np.zeros(self.hop)))
        self._decode(masks)
        self._decode(self.tcn.finish())
        self.flushed = True
        out = self._emit(self.analysis.padded_length(total), total)
        keep = out.shape[1] - (self.samples_out - self.samples_in)
        self.samples_out = self.samples_in
        return out[:, :keep]


def stream_create(config, weights):
    return StreamState(config, weights)


def stream_push(state, hop_samples):
    return state.push(hop_samples)


def stream_flush(state):
    return state.flush()


def stream_signal(signal, config, weights):
    """Run a whole signal through a fresh stream (zero-padding the last partial hop)."""
    x = np.asarray(getattr(signal, "samples", signal), dtype=np.float64)
    state = stream_create(config, weights)
    hop = config.hop
    n_hops = -(-x.shape[0] // hop)
    padded = np.zeros(n_hops * hop)
    padded[:x.shape[0]] = x
    pieces = [state.push(padded[i * hop:(i + 1) * hop]) for i in range(n_hops)]
    pieces.append(state.flush())
    out = np.concatenate(pieces, axis=1)[:, :x.shape[0]]
    return [AudioSignal(o, config.sample_rate) for o in out]


@dataclass
class LatencyReport:
    future_frames: int
    hop_ms: float
    lookahead_ms: float
    breakdown: dict = field(default_factory=dict)
    streaming_delay_hops: int = 0
    physical_lookahead_samples: int = 0
    bounded: bool = True
    convention: str = CONVENTION

    def lines(self):
        rows = [
            ("future_frames", self.future_frames),
            ("hop_ms", _fmt(self.hop_ms)),
            ("lookahead_ms", _fmt(self.lookahead_ms)),
        ]
        rows += [(f"breakdown.{k}", v) for k, v in self.breakdown.items()]
        rows += [
            ("streaming_delay_hops", self.streaming_delay_hops),
            ("physical_lookahead_samples", self.physical_lookahead_samples),
            ("bounded", str(self.bounded).lower()),
            ("convention", self.convention),
        ]
        return [f"{k}={v}" for k, v in rows]


def _fmt(x):
    return f"{x:g}"


def analyze_latency(config):
    """Look-ahead of ``config`` in frames and milliseconds.

    The breakdown always sums to ``future_frames``. ``frame_completion`` (the
    ``L/hop - 1`` further hops a frame spans) is only counted when the stack
    has noncausal layers; this reproduces 5 frames for 3 frames of
    convolutional delay at 1/2 overlap, and 33 / 1 ms (Conv-TasNet) and
    40 / 4 ms (STFT-TCN) for the streaming and causal presets.
    ``physical_lookahead_samples`` is the true sample-level reach,
    ``conv * hop + L - 1``.
    """
    conv = conv_future_reach(config.tcn)
    per_frame = math.ceil(config.frame_length / config.hop)
    completion = per_frame - 1 if conv > 0 else 0
    frames = future_reach(config.tcn, config.overlap)
    breakdown = {
        "noncausal_convolutions": conv,
        "frame_completion": completion,
        "current_hop": 1,
    }
    assert sum(breakdown.values()) == frames
    bounded = config.tcn.norm == "cln"
    return LatencyReport(
        future_frames=frames,
        hop_ms=config.hop_ms,
        lookahead_ms=frames * config.hop_ms if bounded else math.inf,
        breakdown=breakdown,
        streaming_delay_hops=conv + per_frame - 1,
        physical_lookahead_samples=conv * config.hop + config.frame_length - 1,
        bounded=bounded,
    )


@dataclass
class ProbeResult:
    future_frames: int
    conv_frames: int
    reach_samples: int
    positions: list


def probe_causality(config, weights, num_probes=4, seed=0, length=None):
    """Measure future dependence by perturbing single input samples.

    For each probe position ``p`` the earliest output sample ``n`` that
    changes (bitwise) is located; ``p - n`` maximised over probes is the
    sample-level reach. It is converted to convolutional frames by removing
    the ``L - 1`` samples a frame spans and then reported with the same
    framing convention as :func:`analyze_latency`.
    """
    hop, L = config.hop, config.frame_length
    per_frame = math.ceil(L / hop)
    declared = conv_future_reach(config.tcn)
    span = declared * hop + L
    if length is None:
        length = max(3 * span + 8 * hop, 64 * hop)
    rng = np.random.default_rng(seed)
    x = 0.1 * rng.standard_normal(length)
    reference = np.stack([s.samples for s in model_lib.enhance_offline(x, config, weights)])
    lo, hi = span // hop + 1, (length - hop) // hop
    hops = rng.choice(np.arange(lo, hi), size=min(num_probes, hi - lo), replace=False)
    # the last sample of a hop sits at frame position L - 1 of the oldest frame holding it
    positions = sorted(int(j) * hop + hop - 1 for j in hops)
    reach = 0
    for p in positions:
        y = x.copy()
        y[p] += 1.0
        out = np.stack([s.samples for s in model_lib.enhance_offline(y, config, weights)])
        changed = np.nonzero(np.any(out != reference, axis=0))[0]
        if changed.size:
            reach = max(reach, p - int(changed[0]))
    conv = max(0, -(-(reach - (L - 1)) // hop))
    frames = conv + per_frame if conv > 0 else 1
    return ProbeResult(frames, conv, reach, positions)


@dataclass
class BenchReport:
    hop_ms: float
    mean_ms: float
    std_ms: float
    p50_ms: float
    p95_ms: float
    frames: int

    def lines(self):
        return [f"{k}={_fmt(v) if isinstance(v, float) else v}" for k, v in self.__dict__.items()]


def bench_per_frame(config, weights, signal, warmup=5):
    """Wall time of each ``push`` over a whole utterance."""
    x = np.asarray(getattr(signal, "samples", signal), dtype=np.float64)
    hop = config.hop
    state = stream_create(config, weights)
    times = []
    for i in range(x.shape[0] // hop):
        chunk = x[i * hop:(i + 1) * hop]
        start = time.perf_counter()
        state.push(chunk)
        elapsed = time.perf_counter() - start
        if i >= warmup:
            times.append(elapsed * 1000.0)
    times = np.asarray(times)
    return BenchReport(
        hop_ms=config.hop_ms,
        mean_ms=float(times.mean()),
        std_ms=float(times.std()),
        p50_ms=float(np.percentile(times, 50)),
        p95_ms=float(np.percentile(times, 95)),
        frames=int(times.shape[0]),
    )
