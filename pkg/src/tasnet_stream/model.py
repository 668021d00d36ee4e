"""Conv-TasNet and STFT-TCN assembled from the framing, basis and TCN pieces."""
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np

from . import tcn as tcn_lib
from .dsp import (
    AnalysisConfig,
    AudioSignal,
    FrameMatrix,
    Representation,
    frame_signal,
    make_stft_basis,
    overlap_add,
    to_amp_phase,
)
from .errors import SampleRateMismatch, ShapeMismatch, WeightsConfigMismatch

ENCODERS = ("learned", "stft")
INPUT_LAYOUTS = ("real-imag", "amp-phase")


@dataclass(frozen=True)
class ModelConfig:
    encoder: str = "learned"
    frame_length: int = 32
    size: int = 512
    overlap: Fraction = Fraction(1, 2)
    input_layout: str = "amp-phase"
    tcn: tcn_lib.TcnConfig = field(default_factory=tcn_lib.TcnConfig)
    sample_rate: int = 16000

    def __post_init__(self):
        object.__setattr__(self, "overlap", Fraction(self.overlap).limit_denominator(1000))
        if self.encoder not in ENCODERS:
            raise ValueError(f"encoder must be one of {ENCODERS}")
        if self.input_layout not in INPUT_LAYOUTS:
            raise ValueError(f"input_layout must be one of {INPUT_LAYOUTS}")
        if not 0 <= self.overlap < 1:
            raise ValueError("overlap must lie in [0, 1)")
        hop = self.frame_length * (1 - self.overlap)
        if hop.denominator != 1:
            raise ValueError(f"frame length {self.frame_length} is not divisible by the hop implied "
                             f"by overlap {self.overlap}")
        if self.encoder == "stft":
            # raises InvalidBasisSize early
            make_stft_basis(self.analysis, self.size)

    @property
    def hop(self):
        return int(self.frame_length * (1 - self.overlap))

    @property
    def num_sources(self):
        return self.tcn.num_sources

    @property
    def analysis(self):
        window = "rectangular" if self.encoder == "learned" else "hann"
        return AnalysisConfig(self.frame_length, self.hop, window)

    @property
    def hop_ms(self):
        return 1000.0 * self.hop / self.sample_rate


def conv_tasnet_config(noncausal_layers=5, num_sources=2, **tcn_overrides):
    """Learned encoder/decoder, L=32, N=512, 1/2 overlap."""
    t = tcn_lib.TcnConfig(noncausal_layers=noncausal_layers, num_sources=num_sources,
                      mask_activation="sigmoid", **tcn_overrides)
    return ModelConfig("learned", 32, 512, Fraction(1, 2), "real-imag", t)


def stft_tcn_config(noncausal_layers=3, num_sources=2, input_layout="amp-phase",
                    **tcn_overrides):
    """Fixed DFT bases, L=192, N=512, 2/3 overlap, unbounded (identity) masks."""
    t = tcn_lib.TcnConfig(noncausal_layers=noncausal_layers, num_sources=num_sources,
                      mask_activation="identity", **tcn_overrides)
    return ModelConfig("stft", 192, 512, Fraction(2, 3), input_layout, t)


def with_tcn(config, **changes):
    return replace(config, tcn=replace(config.tcn, **changes))


@lru_cache(maxsize=16)
def _basis(analysis, size):
    return make_stft_basis(analysis, size)


def stft_basis(config):
    return _basis(config.analysis, config.size)


class ModelWeights(dict):
    """Ordered mapping of tensor name to float32 array."""

    def validate(self, config):
        expected = dict(tensor_specs(config))
        missing = sorted(set(expected) - set(self))
        extra = sorted(set(self) - set(expected))
        if missing or extra:
            raise WeightsConfigMismatch(f"missing tensors {missing[:3]}, unexpected {extra[:3]}")
        for name, shape in expected.items():
            if tuple(self[name].shape) != tuple(shape):
                raise WeightsConfigMismatch(
                    f"{name}: expected shape {tuple(shape)}, got {tuple(self[name].shape)}")
            if not np.all(np.isfinite(self[name])):
                raise WeightsConfigMismatch(f"{name} contains non-finite values")
        return self

    @property
    def num_params(self):
        return sum(int(v.size) for v in self.values())


def tensor_specs(config):
    """``(name, shape)`` pairs in initialisation order."""
    specs = []
    if config.encoder == "learned":
        specs += [("encoder.U", (config.size, config.frame_length)),
                  ("decoder.V", (config.frame_length, config.size))]
    specs += [(name, shape) for name, shape, _ in tcn_lib.tensor_specs(config.tcn, config.size)]
    return specs


def param_count(config):
    """Trainable parameters; the STFT bases contribute nothing."""
    return sum(math.prod(shape) for _, shape in tensor_specs(config))


def init_random(config, seed):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights; norms start at identity, PReLU at 0.25."""
    rng = np.random.default_rng(seed)
    weights = ModelWeights()

    def uniform(shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape).astype(np.float32)

    if config.encoder == "learned":
        weights["encoder.U"] = uniform((config.size, config.frame_length), config.frame_length)
        weights["decoder.V"] = uniform((config.frame_length, config.size), config.size)
    for name, shape, fan_in in tcn_lib.tensor_specs(config.tcn, config.size):
        if fan_in is None:
            weights[name] = tcn_lib.constant_init(name, shape)
        else:
            weights[name] = uniform(shape, fan_in)
    return weights


def _samples(signal, config):
    if isinstance(signal, AudioSignal):
        if signal.sample_rate != config.sample_rate:
            raise SampleRateMismatch(
                f"signal is {signal.sample_rate} Hz, model expects {config.sample_rate} Hz")
        return signal
    return AudioSignal(signal, config.sample_rate)


def encode_frames(frame_data, config, weights):
    """Encoder applied to ``L x T`` frame data; returns ``(W, W_input)`` arrays."""
    if config.encoder == "learned":
        W = np.asarray(weights["encoder.U"], dtype=np.float64) @ frame_data
        return W, W
    W = stft_basis(config).analysis @ frame_data
    if config.input_layout == "amp-phase":
        return W, to_amp_phase(Representation(W, "real-imag")).data
    return W, W


def decode_frames(Z, config, weights):
    """Decoder applied to an ``N x T`` representation; returns ``L x T`` frames."""
    if config.encoder == "learned":
        return np.asarray(weights["decoder.V"], dtype=np.float64) @ Z
    return stft_basis(config).synthesis @ Z


def encode(signal, config, weights):
    """Returns ``(W, W_input)`` Representations; ``W`` is ``W_SPEC`` for the STFT encoder."""
    signal = _samples(signal, config)
    frames = frame_signal(signal, config.analysis)
    W, W_input = encode_frames(frames.data, config, weights)
    layout = "amp-phase" if config.encoder == "stft" and config.input_layout == "amp-phase" \
        else "real-imag"
    return Representation(W, "real-imag"), Representation(W_input, layout)


def apply_masks(W, masks):
    data = W.data if isinstance(W, Representation) else np.asarray(W)
    stack = masks.masks if isinstance(masks, tcn_lib.MaskSet) else np.asarray(masks)
    if stack.ndim == 2:
        stack = stack[None]
    if stack.shape[1:] != data.shape:
        raise ShapeMismatch(f"mask shape {stack.shape[1:]} does not match representation {data.shape}")
    return [Representation(m * data, "real-imag") for m in stack]


def decode(Z, config, weights, length):
    """Decode each masked representation and overlap-add back to ``length`` samples."""
    out = []
    for z in Z:
        data = z.data if isinstance(z, Representation) else np.asarray(z)
        if data.shape[0] != config.size:
            raise ShapeMismatch(f"expected {config.size} rows, got {data.shape[0]}")
        frames = FrameMatrix(decode_frames(data, config, weights), config.analysis, length,
                             config.sample_rate)
        out.append(overlap_add(frames))
    return out


def enhance_offline(signal, config, weights):
    """Full-utterance enhancement; returns ``K`` signals ordered (speech, noise)."""
    signal = _samples(signal, config)
    W, W_input = encode(signal, config, weights)
    masks = tcn_lib.separation_forward(W_input, config.tcn, weights)
    return decode(apply_masks(W, masks), config, weights, len(signal))
