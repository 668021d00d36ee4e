"""
Training objectives as measurements
===================================

Evaluate the four losses on a clean/noisy pair, compare an analytic gradient
with central differences, and report the two quality metrics.
"""

import numpy as np

from tasnet_stream.losses import (
    compute_loss, loss_gradient, pcmse_bins, si_snr_metric, snr_loss, ssnr_metric,
)

rng = np.random.default_rng(3)
t = np.arange(16000) / 16000
clean = 0.5 * np.sin(2 * np.pi * 220 * t) * (1 + 0.5 * np.sin(2 * np.pi * 3 * t))
noisy = clean + 0.05 * rng.standard_normal(clean.shape[0])

for kind in ["sisnr", "snr", "pcmse", "pasemse"]:
    print(f"{kind:8s} {compute_loss(kind, clean, noisy).value:10.4f}")

print("SI-SNR %.2f dB, SSNR %.2f dB" % (si_snr_metric(clean, noisy), ssnr_metric(clean, noisy)))

# scale matters for SNR but not for SI-SNR
print("SNR loss at 0.5x: %.2f" % snr_loss(clean, 0.5 * noisy).value)
print("SI-SNR loss at 0.5x: %.2f" % compute_loss("sisnr", clean, 0.5 * noisy).value)

# compression keeps the phase, so a sign flip costs the full complex distance
print("PCMSE single bin, -1 vs 1:", pcmse_bins([-1 + 0j], [1 + 0j]))

s, e = rng.standard_normal(256), rng.standard_normal(256)
g = loss_gradient("pcmse", s, e)
h, i = 1e-4, 17
up, down = e.copy(), e.copy()
up[i] += h
down[i] -= h
fd = (compute_loss("pcmse", s, up).value - compute_loss("pcmse", s, down).value) / (2 * h)
print("d PCMSE / d e[17]: analytic %.6f, finite difference %.6f" % (g[i], fd))
