"""WAV files, the binary weights container and YAML run configurations."""
from dataclasses import asdict, fields, replace
from fractions import Fraction
import struct
import wave

import numpy as np
import yaml

from .dsp import AnalysisConfig, AudioSignal
from .errors import (
    ConfigError,
    MalformedContainer,
    MalformedWav,
    UnsupportedChannels,
    UnsupportedEncoding,
    UnsupportedRate,
)
from .losses import LossConfig
from .model import ModelWeights, conv_tasnet_config, stft_tcn_config
from .tcn import TcnConfig

SAMPLE_RATE = 16000
MAGIC = b"TCNW"
FORMAT_VERSION = 1


# ------------------------------------------------------------------- audio

def read_wav(path):
    """Read 16 kHz mono PCM16 into samples scaled by 1/32768."""
    try:
        with wave.open(str(path), "rb") as f:
            channels, width, rate = f.getnchannels(), f.getsampwidth(), f.getframerate()
            raw = f.readframes(f.getnframes())
    except wave.Error as exc:
        if "unknown format" in str(exc):
            raise UnsupportedEncoding(f"{path}: {exc}") from exc
        raise MalformedWav(f"{path}: {exc}") from exc
    except (EOFError, struct.error) as exc:
        raise MalformedWav(f"{path}: truncated header") from exc
    if channels != 1:
        raise UnsupportedChannels(f"{path}: {channels} channels, only mono is supported")
    if width != 2:
        raise UnsupportedEncoding(f"{path}: {8 * width}-bit samples, only PCM16 is supported")
    if rate != SAMPLE_RATE:
        raise UnsupportedRate(f"{path}: {rate} Hz, only {SAMPLE_RATE} Hz is supported")
    if len(raw) % 2:
        raise MalformedWav(f"{path}: odd number of data bytes")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioSignal(samples, rate)


def write_wav(path, signal):
    x = np.asarray(getattr(signal, "samples", signal), dtype=np.float64)
    rate = getattr(signal, "sample_rate", SAMPLE_RATE)
    if rate != SAMPLE_RATE:
        raise UnsupportedRate(f"refusing to write {rate} Hz audio")
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(rate)
        f.writeframes(pcm.tobytes())


# ----------------------------------------------------------------- weights

def save_weights(path, weights):
    """Write tensors as ``TCNW`` | version | count | (name, rank, dims, float32 data)*, little endian."""
    names = list(weights)
    if len(set(names)) != len(names):
        raise ValueError("tensor names must be unique")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(names))]
    for name in names:
        data = np.ascontiguousarray(weights[name], dtype="<f4")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)) + encoded)
        parts.append(struct.pack(f"<I{data.ndim}I", data.ndim, *data.shape))
        parts.append(data.tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


class _Reader:
    def __init__(self, blob):
        self.blob, self.pos = blob, 0

    def take(self, n):
        if self.pos + n > len(self.blob):
            raise MalformedContainer("weights file is truncated")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, count=1):
        return struct.unpack(f"<{count}I", self.take(4 * count))


def load_weights(path, config=None):
    with open(path, "rb") as f:
        blob = f.read()
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise MalformedContainer("bad magic, not a weights container")
    version, count = r.u32(2)
    if version != FORMAT_VERSION:
        raise MalformedContainer(f"unsupported container version {version}")
    weights = ModelWeights()
    for _ in range(count):
        (length,) = r.u32()
        try:
            name = r.take(length).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedContainer("tensor name is not UTF-8") from exc
        (rank,) = r.u32()
        dims = r.u32(rank) if rank else ()
        size = int(np.prod(dims, dtype=np.int64))
        data = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(dims).astype(np.float32)
        if name in weights:
            raise MalformedContainer(f"duplicate tensor {name}")
        weights[name] = data
    if r.pos != len(blob):
        raise MalformedContainer("trailing bytes after the last tensor")
    if config is not None:
        weights.validate(config)
    return weights


# ----------------------------------------------------------------- configs

PRESETS = {"conv-tasnet": conv_tasnet_config, "stft-tcn": stft_tcn_config}
_MODEL_KEYS = {"preset", "encoder", "frame_length", "size", "overlap", "input_layout",
               "sample_rate", "tcn"}
_TCN_KEYS = {f.name for f in fields(TcnConfig)}
_LOSS_KEYS = {"beta", "gamma", "frame_length", "hop", "window", "size", "floor", "per_bin_mean"}


def _reject_unknown(section, given, allowed):
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")


def _model_from_dict(d):
    d = dict(d or {})
    _reject_unknown("model", d, _MODEL_KEYS)
    preset = d.pop("preset", "conv-tasnet")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    base = PRESETS[preset]()
    tcn_d = d.pop("tcn", None) or {}
    _reject_unknown("model.tcn", tcn_d, _TCN_KEYS)
    if "overlap" in d:
        d["overlap"] = Fraction(str(d["overlap"]))
    try:
        return replace(base, tcn=replace(base.tcn, **tcn_d), **d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _loss_from_dict(d):
    d = dict(d or {})
    _reject_unknown("loss", d, _LOSS_KEYS)
    base = LossConfig()
    analysis = AnalysisConfig(d.pop("frame_length", base.analysis.frame_length),
                              d.pop("hop", base.analysis.hop),
                              d.pop("window", base.analysis.window))
    try:
        return replace(base, analysis=analysis, **d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


class RunConfig:
    def __init__(self, model=None, loss=None, seed=0):
        self.model = model or conv_tasnet_config()
        self.loss = loss or LossConfig()
        self.seed = int(seed)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a mapping")
        _reject_unknown("top level", d, {"model", "loss", "seed"})
        return cls(_model_from_dict(d.get("model")), _loss_from_dict(d.get("loss")),
                   d.get("seed", 0))

    def to_dict(self):
        m = self.model
        model = {
            "encoder": m.encoder,
            "frame_length": m.frame_length,
            "size": m.size,
            "overlap": f"{m.overlap.numerator}/{m.overlap.denominator}",
            "input_layout": m.input_layout,
            "sample_rate": m.sample_rate,
            "tcn": asdict(m.tcn),
        }
        loss = {
            "beta": self.loss.beta,
            "gamma": self.loss.gamma,
            "frame_length": self.loss.analysis.frame_length,
            "hop": self.loss.analysis.hop,
            "window": self.loss.analysis.window,
            "size": self.loss.size,
            "floor": self.loss.floor,
            "per_bin_mean": self.loss.per_bin_mean,
        }
        return {"model": model, "loss": loss, "seed": self.seed}


def load_config(path):
    with open(path) as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return RunConfig.from_dict(data or {})


def save_config(path, run_config):
    with open(path, "w") as f:
        yaml.safe_dump(run_config.to_dict(), f, sort_keys=False)
