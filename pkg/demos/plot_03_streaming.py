"""
One hop in, one hop out
=======================

Feed a stream hop by hop, watch when the first output appears and check
that the concatenated stream equals the offline result.
"""

import numpy as np

from tasnet_stream.model import enhance_offline, init_random, stft_tcn_config
from tasnet_stream.streaming import stream_create

cfg = stft_tcn_config(bottleneck=32, hidden=64, skip=32)   # narrow TCN, same timing
weights = init_random(cfg, seed=42)
x = 0.1 * np.random.default_rng(2).standard_normal(cfg.hop * 100)

state = stream_create(cfg, weights)
print("declared delay:", state.delay, "hops")

pieces = []
for i in range(100):
    out = state.push(x[i * cfg.hop:(i + 1) * cfg.hop])
    if out.shape[1] and not any(p.shape[1] for p in pieces):
        print("first output after push", i + 1)
    pieces.append(out)
pieces.append(state.flush())

streamed = np.concatenate(pieces, axis=1)
offline = np.stack([s.samples for s in enhance_offline(x, cfg, weights)])
print("samples in/out:", len(x), streamed.shape[1])
print("max |stream - offline| = %.1e" % np.max(np.abs(streamed - offline)))
