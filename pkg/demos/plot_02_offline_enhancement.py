"""
Offline enhancement with seeded weights
=======================================

Build both presets, count their parameters and run a whole utterance
through encoder, mask estimator and decoder. The weights are random, so the
"speech" estimate is not meaningful; the point is the data flow.
"""

import numpy as np

from tasnet_stream.model import (
    conv_tasnet_config, encode, enhance_offline, init_random, param_count, stft_tcn_config,
)
from tasnet_stream.tcn import separation_forward

x = 0.1 * np.random.default_rng(1).standard_normal(16000)

for name, cfg in [("Conv-TasNet", conv_tasnet_config()), ("STFT-TCN", stft_tcn_config())]:
    weights = init_random(cfg, seed=42)
    print(f"{name}: {param_count(cfg):,} parameters, hop {cfg.hop_ms:g} ms")

    W, W_input = encode(x, cfg, weights)
    masks = separation_forward(W_input, cfg.tcn, weights).masks
    print(f"  representation {W.data.shape}, masks {masks.shape}, "
          f"range [{masks.min():.2f}, {masks.max():.2f}]")

    speech, noise = enhance_offline(x, cfg, weights)
    print(f"  outputs: {len(speech)} + {len(noise)} samples")

# the sigmoid head keeps Conv-TasNet masks in [0, 1]; the identity head of
# STFT-TCN lets masks go negative, which is how it can flip the phase of a bin
