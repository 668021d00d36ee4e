"""Feature extractors for the feature-matching loss term.

Any callable mapping a 1-D signal to a ``Q x R`` array can be plugged in;
:class:`FilterbankExtractor` is the bundled stand-in (log energies of a
triangular mel filterbank), not a learned speech encoder.
"""
from dataclasses import dataclass
from typing import Protocol

import numpy as np


class FeatureExtractor(Protocol):
    def __call__(self, samples: np.ndarray) -> np.ndarray: ...


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def triangular_filterbank(num_bands, n_fft, sample_rate, fmin=0.0, fmax=None):
    fmax = sample_rate / 2 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), num_bands + 2))
    freqs = np.linspace(0, sample_rate / 2, n_fft // 2 + 1)
    bank = np.zeros((num_bands, freqs.shape[0]))
    for b in range(num_bands):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        bank[b] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


@dataclass(frozen=True)
class FilterbankExtractor:
    num_bands: int = 40
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    sample_rate: int = 16000
    n_fft: int = 512
    offset: float = 1e-8

    def __call__(self, samples):
        x = np.asarray(getattr(samples, "samples", samples), dtype=np.float64)
        frame = int(round(self.frame_ms * self.sample_rate / 1000))
        hop = int(round(self.hop_ms * self.sample_rate / 1000))
        if x.shape[0] < frame:
            x = np.pad(x, (0, frame - x.shape[0]))
        count = 1 + (x.shape[0] - frame) // hop
        frames = np.lib.stride_tricks.sliding_window_view(x, frame)[::hop][:count]
        power = np.abs(np.fft.rfft(frames * np.hanning(frame), self.n_fft, axis=1)) ** 2
        bank = triangular_filterbank(self.num_bands, self.n_fft, self.sample_rate)
        return np.log(power @ bank.T + self.offset).T
