import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tasnet_stream.errors import ChunkSizeMismatch, NonFiniteInput, StreamingUnsupported
from tasnet_stream.model import conv_tasnet_config, enhance_offline, init_random, stft_tcn_config
from tasnet_stream.streaming import (
    analyze_latency,
    bench_per_frame,
    probe_causality,
    stream_create,
    stream_flush,
    stream_push,
    stream_signal,
)

from conftest import noise, small_conv_tasnet, small_stft_tcn

# reference look-ahead: (config factory, noncausal layers, frames, ms)
TABLE_LATENCY = [
    (conv_tasnet_config, 5, 33, 33.0),
    (conv_tasnet_config, 0, 1, 1.0),
    (stft_tcn_config, 3, 10, 40.0),
    (stft_tcn_config, 0, 1, 4.0),
]


def stream_all(config, weights, x):
    state = stream_create(config, weights)
    hop = config.hop
    pieces = [stream_push(state, x[i:i + hop]) for i in range(0, len(x), hop)]
    pieces.append(stream_flush(state))
    return np.concatenate(pieces, axis=1), pieces


class TestEquivalence:
    @pytest.mark.parametrize("cfg_fn,nc", [(small_conv_tasnet, 5), (small_conv_tasnet, 0),
                                           (small_stft_tcn, 3), (small_stft_tcn, 0),
                                           (small_stft_tcn, 10)])
    def test_stream_equals_offline(self, cfg_fn, nc):
        config = cfg_fn(nc)
        weights = init_random(config, 42)
        x = noise(config.hop * 120, seed=nc)
        streamed, _ = stream_all(config, weights, x)
        offline = np.stack([s.samples for s in enhance_offline(x, config, weights)])
        assert streamed.shape == offline.shape
        assert np.max(np.abs(streamed - offline)) <= 1e-10

    @settings(max_examples=8, deadline=None)
    @given(st.integers(1, 700))
    def test_stream_signal_any_length(self, n):
        config = small_stft_tcn(1)
        weights = init_random(config, 0)
        x = noise(n, seed=n)
        streamed = stream_signal(x, config, weights)
        offline = enhance_offline(x, config, weights)
        for a, b in zip(streamed, offline):
            assert len(a) == n
            # the final partial hop is zero-padded before streaming, which the
            # look-ahead can see; compare the part both runs agree on exactly
            keep = max(0, n - config.hop - analyze_latency(config).physical_lookahead_samples)
            np.testing.assert_allclose(a.samples[:keep], b.samples[:keep], atol=1e-10)

    def test_stream_signal_exact_multiple(self):
        config = small_conv_tasnet(2)
        weights = init_random(config, 0)
        x = noise(16 * 50)
        for a, b in zip(stream_signal(x, config, weights), enhance_offline(x, config, weights)):
            np.testing.assert_allclose(a.samples, b.samples, atol=1e-10)


class TestEmission:
    @pytest.mark.parametrize("cfg_fn,nc,delay", [(small_conv_tasnet, 5, 32),
                                                 (small_conv_tasnet, 0, 1),
                                                 (small_stft_tcn, 3, 9),
                                                 (small_stft_tcn, 0, 2)])
    def test_emitted_counts(self, cfg_fn, nc, delay):
        config = cfg_fn(nc)
        x = noise(config.hop * 60)
        _, pieces = stream_all(config, init_random(config, 0), x)
        sizes = [p.shape[1] for p in pieces[:-1]]
        for F, size in enumerate(sizes, start=1):
            assert size == (config.hop if F > delay else 0)
        assert pieces[-1].shape[1] == delay * config.hop
        assert analyze_latency(config).streaming_delay_hops == delay

    def test_chunk_size(self):
        config = small_stft_tcn()
        state = stream_create(config, init_random(config, 0))
        with pytest.raises(ChunkSizeMismatch):
            state.push(np.zeros(63))

    def test_non_finite_chunk(self):
        config = small_stft_tcn()
        state = stream_create(config, init_random(config, 0))
        chunk = np.zeros(64)
        chunk[0] = np.inf
        with pytest.raises(NonFiniteInput):
            state.push(chunk)

    def test_gln_cannot_stream(self):
        config = small_stft_tcn(norm="gln")
        with pytest.raises(StreamingUnsupported):
            stream_create(config, init_random(config, 0))

    def test_empty_flush(self):
        config = small_stft_tcn()
        state = stream_create(config, init_random(config, 0))
        assert state.flush().shape == (2, 0)

    def test_push_after_flush(self):
        config = small_stft_tcn()
        state = stream_create(config, init_random(config, 0))
        state.push(np.zeros(64))
        state.flush()
        with pytest.raises(RuntimeError):
            state.push(np.zeros(64))


class TestLatency:
    @pytest.mark.parametrize("fn,nc,frames,ms", TABLE_LATENCY)
    def test_reference_values(self, fn, nc, frames, ms):
        report = analyze_latency(fn(nc))
        assert report.future_frames == frames
        assert report.lookahead_ms == ms
        assert sum(report.breakdown.values()) == frames

    def test_two_noncausal_layers_give_five_frames(self):
        assert analyze_latency(conv_tasnet_config(2)).future_frames == 5

    def test_lookahead_is_frames_times_hop(self):
        for nc in range(0, 25, 4):
            r = analyze_latency(stft_tcn_config(nc))
            assert r.lookahead_ms == r.future_frames * 4.0

    def test_gln_is_unbounded(self):
        r = analyze_latency(stft_tcn_config(norm="gln"))
        assert not r.bounded and math.isinf(r.lookahead_ms)

    def test_lines(self):
        lines = analyze_latency(conv_tasnet_config()).lines()
        assert "future_frames=33" in lines and "lookahead_ms=33" in lines


class TestProbe:
    @pytest.mark.parametrize("fn,nc,frames,ms", TABLE_LATENCY)
    def test_probe_matches_declared(self, fn, nc, frames, ms):
        config = (small_conv_tasnet if fn is conv_tasnet_config else small_stft_tcn)(nc)
        result = probe_causality(config, init_random(config, 1), num_probes=3)
        assert result.future_frames == frames

    def test_probe_sample_reach_is_physical(self):
        config = small_stft_tcn(3)
        result = probe_causality(config, init_random(config, 2), num_probes=6, seed=3)
        assert result.reach_samples <= analyze_latency(config).physical_lookahead_samples

    @pytest.mark.parametrize("cfg_fn", [small_conv_tasnet, small_stft_tcn])
    def test_causal_future_never_changes_emitted_output(self, cfg_fn):
        config = cfg_fn(0)
        weights = init_random(config, 5)
        rng = np.random.default_rng(11)
        hop = config.hop
        x = noise(hop * 40, seed=12)
        base, _ = stream_all(config, weights, x)
        for _ in range(20):
            F = int(rng.integers(1, 39))
            state = stream_create(config, weights)
            emitted = np.concatenate([state.push(x[i * hop:(i + 1) * hop]) for i in range(F)],
                                     axis=1)
            np.testing.assert_array_equal(emitted, base[:, :emitted.shape[1]])
            # a different future cannot reach back
            y = x.copy()
            y[F * hop:] += rng.standard_normal(len(x) - F * hop)
            changed, _ = stream_all(config, weights, y)
            np.testing.assert_array_equal(changed[:, :emitted.shape[1]], emitted)


def test_bench_reports_hop():
    config = small_stft_tcn()
    report = bench_per_frame(config, init_random(config, 0), noise(64 * 20), warmup=2)
    assert report.hop_ms == 4.0 and report.frames == 18
    assert report.mean_ms > 0
