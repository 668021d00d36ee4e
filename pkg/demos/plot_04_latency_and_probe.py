"""
Look-ahead: declared versus measured
====================================

Count the future frames each configuration needs, then measure the same
quantity by perturbing single input samples and watching which outputs move.
"""

from tasnet_stream.model import conv_tasnet_config, init_random, stft_tcn_config
from tasnet_stream.streaming import analyze_latency, probe_causality

small = dict(bottleneck=16, hidden=32, skip=16)   # reach depends on dilations, not widths

for name, cfg in [
    ("Conv-TasNet, 5 noncausal layers", conv_tasnet_config(5, **small)),
    ("Conv-TasNet, causal", conv_tasnet_config(0, **small)),
    ("STFT-TCN, 3 noncausal layers", stft_tcn_config(3, **small)),
    ("STFT-TCN, causal", stft_tcn_config(0, **small)),
]:
    report = analyze_latency(cfg)
    probe = probe_causality(cfg, init_random(cfg, seed=0), num_probes=3)
    print(f"{name}: {report.future_frames} frames = {report.lookahead_ms:g} ms; "
          f"measured {probe.future_frames} frames ({probe.reach_samples} samples)")
    print("   ", report.breakdown)

# the small worked example: two noncausal layers at 1/2 overlap
print("two noncausal layers:", analyze_latency(conv_tasnet_config(2)).future_frames, "frames")
