"""
Framing, Fourier bases and perfect reconstruction
==================================================

Split a signal into overlapping windowed frames, analyse each frame with the
fixed real DFT basis, synthesise and overlap-add back.
"""

import numpy as np

from tasnet_stream.dsp import AnalysisConfig, frame_signal, is_cola, istft, make_stft_basis, stft

rng = np.random.default_rng(0)
x = rng.uniform(-1, 1, 16000)

# the STFT-TCN analysis: 12 ms periodic Hann frames every 4 ms (2/3 overlap)
cfg = AnalysisConfig(frame_length=192, hop=64, window="hann")
print("COLA:", is_cola(cfg), " edge padding:", cfg.pad, "samples")

frames = frame_signal(x, cfg)
print("frames:", frames.data.shape)

# N = 512 rows: 256 cosine rows stacked on 256 negative-sine rows
basis = make_stft_basis(cfg, 512)
W, _ = stft(x, cfg, basis)
y = istft(W, cfg, basis, len(x)).samples
print("round-trip max error: %.2e" % np.max(np.abs(y - x)))

# a pure tone lands in bin k and its mirror 256 - k
tone = np.cos(2 * np.pi * 20 * np.arange(256) / 256)
spectrum = make_stft_basis(AnalysisConfig(256, 256, "rectangular"), 512).analysis @ tone
print("strongest bins:", np.argsort(np.abs(spectrum[:256]))[-2:])
