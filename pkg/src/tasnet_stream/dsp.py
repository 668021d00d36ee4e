"""Framing, overlap-add and the fixed Fourier bases used by both model families.

Frames are stored column-wise (``L x T``) and representations row-stacked
(``N x T``), the first ``N/2`` rows holding real parts (or amplitudes) and the
remaining rows imaginary parts (or phases).
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import (
    EmptyInput,
    InvalidBasisSize,
    LayoutMismatch,
    NonFiniteInput,
    ShapeMismatch,
)

WINDOWS = ("rectangular", "hann")
LAYOUTS = ("real-imag", "amp-phase")

# below this amplitude the phase is reported as 0
PHASE_FLOOR = 1e-12


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ShapeMismatch(f"expected 1-D samples, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise NonFiniteInput("signal contains NaN or Inf")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self):
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class AnalysisConfig:
    """Frame length, hop and analysis window.

    Tapered windows vanish at the frame start, so signals analysed with them
    are padded by ``L - hop`` zeros on both sides; every original sample is
    then covered by ``L / hop`` frames. Rectangular framing uses no leading
    padding.
    """

    frame_length: int
    hop: int
    window: str = "hann"

    def __post_init__(self):
        if not 1 <= self.hop <= self.frame_length:
            raise ValueError(f"need 1 <= hop <= L, got hop={self.hop}, L={self.frame_length}")
        if self.window not in WINDOWS:
            raise ValueError(f"unknown window {self.window!r}; expected one of {WINDOWS}")

    @property
    def overlap(self):
        return self.frame_length - self.hop

    @property
    def overlap_ratio(self):
        return self.overlap / self.frame_length

    @property
    def pad(self):
        return 0 if self.window == "rectangular" else self.overlap

    def window_array(self):
        return make_window(self.window, self.frame_length)

    def num_frames(self, length):
        total = max(length + 2 * self.pad, self.frame_length)
        return math.ceil((total - self.frame_length) / self.hop) + 1

    def padded_length(self, num_frames):
        return (num_frames - 1) * self.hop + self.frame_length


def make_window(kind, length):
    if kind == "rectangular":
        return np.ones(length)
    if kind == "hann":
        n = np.arange(length)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)
    raise ValueError(f"unknown window {kind!r}")


def is_cola(config, rtol=1e-10):
    """True when shifted copies of the window sum to a constant at ``config.hop``."""
    w = config.window_array()
    acc = np.zeros(config.hop)
    for start in range(0, config.frame_length, config.hop):
        seg = w[start:start + config.hop]
        acc[:seg.shape[0]] += seg
    return bool(np.ptp(acc) <= rtol * np.max(np.abs(acc)))


@dataclass(frozen=True)
class FrameMatrix:
    data: np.ndarray
    config: AnalysisConfig
    length: int = None
    sample_rate: int = 16000

    @property
    def num_frames(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class BasisPair:
    analysis: np.ndarray
    synthesis: np.ndarray

    @property
    def size(self):
        return self.analysis.shape[0]


@dataclass(frozen=True)
class Representation:
    data: np.ndarray
    layout: str = "real-imag"

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.data.ndim != 2 or self.data.shape[0] % 2:
            raise ShapeMismatch(f"representation must be N x T with even N, got {self.data.shape}")

    @property
    def half(self):
        return self.data.shape[0] // 2

    def complex(self):
        """Complex ``N/2 x T`` view of a real-imag representation."""
        if self.layout != "real-imag":
            raise LayoutMismatch("complex view requires real-imag layout")
        return self.data[:self.half] + 1j * self.data[self.half:]


def _as_samples(signal):
    if isinstance(signal, AudioSignal):
        return signal.samples, signal.sample_rate
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeMismatch(f"expected 1-D samples, got shape {x.shape}")
    return x, 16000


def frame_signal(signal, config):
    """Cut ``signal`` into windowed, overlapping columns.

    The tail is zero-padded so the final frame is complete.
    """
    x, sr = _as_samples(signal)
    if x.shape[0] == 0:
        raise EmptyInput("cannot frame an empty signal")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("signal contains NaN or Inf")
    L, hop = config.frame_length, config.hop
    T = config.num_frames(x.shape[0])
    padded = np.zeros(config.padded_length(T))
    padded[config.pad:config.pad + x.shape[0]] = x
    view = np.lib.stride_tricks.sliding_window_view(padded, L)[::hop]
    data = (view * config.window_array()).T.copy()
    return FrameMatrix(data, config, x.shape[0], sr)


def window_sum(config, num_frames):
    """Per-sample sum of the analysis window over the padded support."""
    w = config.window_array()
    return _ola(np.repeat(w[:, None], num_frames, axis=1), config.hop)


def _ola(data, hop):
    L, T = data.shape
    buf = np.zeros(T * hop + L)
    # one vectorised pass per hop-sized slice of the frame
    for offset in range(0, L, hop):
        seg = data[offset:offset + hop]
        view = buf[offset:offset + T * hop].reshape(T, hop)
        view[:, :seg.shape[0]] += seg.T
    return buf[:(T - 1) * hop + L]


def overlap_add(frames, length=None):
    """Overlap-add the columns of ``frames`` and undo the analysis window.

    Each sample is divided by the sum of analysis-window values covering it,
    so edge samples covered by fewer frames are restored as well.
    """
    if not isinstance(frames, FrameMatrix):
        raise TypeError("overlap_add expects a FrameMatrix")
    config = frames.config
    data = np.asarray(frames.data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] != config.frame_length:
        raise ShapeMismatch(f"expected {config.frame_length} x T frames, got {data.shape}")
    T = data.shape[1]
    summed = _ola(data, config.hop)
    norm = window_sum(config, T)
    out = np.divide(summed, norm, out=np.zeros_like(summed), where=norm > 1e-12)
    if length is None:
        length = frames.length
    out = out[config.pad:]
    if length is not None:
        out = out[:length]
    return AudioSignal(out, frames.sample_rate)


def frame_adjoint(grad_frames, config, length):
    """Adjoint of :func:`frame_signal`: maps a gradient on frames to samples."""
    g = np.asarray(grad_frames, dtype=np.float64) * config.window_array()[:, None]
    summed = _ola(g, config.hop)
    return summed[config.pad:config.pad + length]


def make_stft_basis(config, size):
    """DFT analysis/synthesis matrices in stacked real/imaginary layout.

    ``size`` is the representation size ``N``; the DFT length is ``N/2`` and
    frames shorter than that are implicitly zero-padded. Synthesis carries the
    ``2/N`` normalisation so that ``synthesis @ analysis`` is the identity on
    frames.
    """
    if size <= 0 or size % 2:
        raise InvalidBasisSize(f"representation size must be positive and even, got {size}")
    bins = size // 2
    L = config.frame_length
    if bins < L:
        raise InvalidBasisSize(f"N/2={bins} is shorter than the frame length {L}")
    k = np.arange(bins)[:, None]
    n = np.arange(L)[None, :]
    angle = 2.0 * np.pi * ((k * n) % bins) / bins
    cos, sin = np.cos(angle), np.sin(angle)
    analysis = np.vstack([cos, -sin])
    synthesis = np.hstack([cos.T, -sin.T]) / bins
    return BasisPair(analysis, synthesis)


def to_amp_phase(spec):
    if spec.layout != "real-imag":
        raise LayoutMismatch(f"expected real-imag layout, got {spec.layout}")
    half = spec.half
    re, im = spec.data[:half], spec.data[half:]
    amp = np.hypot(re, im)
    phase = np.where(amp < PHASE_FLOOR, 0.0, np.arctan2(im, re))
    return Representation(np.vstack([amp, phase]), "amp-phase")


def from_amp_phase(rep):
    if rep.layout != "amp-phase":
        raise LayoutMismatch(f"expected amp-phase layout, got {rep.layout}")
    half = rep.half
    amp, phase = rep.data[:half], rep.data[half:]
    return Representation(np.vstack([amp * np.cos(phase), amp * np.sin(phase)]), "real-imag")


def stft(signal, config, basis):
    """Frame ``signal`` and project onto ``basis``; returns a real-imag Representation."""
    frames = frame_signal(signal, config)
    return Representation(basis.analysis @ frames.data, "real-imag"), frames


def istft(rep, config, basis, length, sample_rate=16000):
    if rep.layout != "real-imag":
        raise LayoutMismatch("istft needs a real-imag representation")
    frames = FrameMatrix(basis.synthesis @ rep.data, config, length, sample_rate)
    return overlap_add(frames)
