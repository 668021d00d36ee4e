import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tasnet_stream.errors import NumericalDivergence, ShapeMismatch
from tasnet_stream.model import init_random
from tasnet_stream.tcn import (
    TcnConfig,
    TcnStream,
    conv_future_reach,
    cumulative_layer_norm,
    depthwise_conv,
    frames_per_window,
    future_reach,
    global_layer_norm,
    param_count,
    separation_forward,
    tensor_specs,
)

from conftest import small_conv_tasnet, small_stft_tcn

TINY = dict(bottleneck=8, hidden=12, skip=8, blocks=4, repeats=2)


def naive_depthwise(x, w, b, d, causal):
    C, T = x.shape
    P = w.shape[1]
    out = np.zeros((C, T))
    for c in range(C):
        for t in range(T):
            acc = b[c]
            for j in range(P):
                # causal taps t - (P-1-j)d; noncausal taps centred on t
                src = t - (P - 1 - j) * d if causal else t + (j - (P - 1) // 2) * d
                if 0 <= src < T:
                    acc += w[c, j] * x[c, src]
            out[c, t] = acc
    return out


def tiny_weights(config, size=6, seed=0):
    rng = np.random.default_rng(seed)
    return {name: (rng.uniform(-0.5, 0.5, shape) if fan_in else
                   np.ones(shape) if name.endswith("gain") else np.full(shape, 0.25)
                   if "prelu" in name else np.zeros(shape))
            for name, shape, fan_in in tensor_specs(config, size)}


class TestConfig:
    def test_dilation_pattern(self):
        cfg = TcnConfig()
        assert [cfg.dilation(i) for i in range(24)] == [2 ** (i % 8) for i in range(24)]

    def test_noncausal_layers_are_first(self):
        cfg = TcnConfig(noncausal_layers=5)
        assert [cfg.is_causal(i) for i in range(7)] == [False] * 5 + [True] * 2
        assert [cfg.lookahead(i) for i in range(6)] == [1, 2, 4, 8, 16, 0]

    def test_reach(self):
        assert conv_future_reach(TcnConfig(noncausal_layers=5)) == 31
        assert conv_future_reach(TcnConfig(noncausal_layers=3)) == 7
        assert conv_future_reach(TcnConfig(noncausal_layers=0)) == 0
        assert conv_future_reach(TcnConfig(noncausal_layers=24)) == 3 * 255

    def test_future_reach_convention(self):
        assert future_reach(TcnConfig(noncausal_layers=2), 0.5) == 5
        assert future_reach(TcnConfig(noncausal_layers=5), 0.5) == 33
        assert future_reach(TcnConfig(noncausal_layers=3), 2 / 3) == 10
        assert future_reach(TcnConfig(noncausal_layers=0), 0.5) == 1

    def test_frames_per_window(self):
        assert frames_per_window(0.5) == 2
        assert frames_per_window(2 / 3) == 3
        with pytest.raises(ValueError):
            frames_per_window(0.4)

    @pytest.mark.parametrize("bad", [dict(kernel=2), dict(noncausal_layers=25),
                                     dict(mask_activation="relu"), dict(norm="bn"),
                                     dict(num_sources=0)])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            TcnConfig(**bad)

    def test_param_count_formula(self):
        cfg = TcnConfig()
        B, H, P, Sc, N, K = 128, 512, 3, 128, 512, 2
        block = H * B + H + 1 + 2 * H + H * P + H + 1 + 2 * H + B * H + B + Sc * H + Sc
        expected = 2 * N + B * N + B + 24 * block + 1 + K * N * Sc + K * N
        assert param_count(cfg, N) == expected


class TestLayers:
    @pytest.mark.parametrize("causal", [True, False])
    @pytest.mark.parametrize("d", [1, 2, 4])
    def test_depthwise_matches_naive(self, causal, d):
        rng = np.random.default_rng(d)
        x, w, b = rng.standard_normal((3, 20)), rng.standard_normal((3, 3)), rng.standard_normal(3)
        np.testing.assert_allclose(depthwise_conv(x, w, b, d, causal),
                                   naive_depthwise(x, w, b, d, causal), atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 19), st.sampled_from([1, 2, 4, 8]), st.booleans())
    def test_depthwise_reach(self, t, d, causal):
        rng = np.random.default_rng(t)
        x, w, b = rng.standard_normal((2, 20)), rng.standard_normal((2, 3)), np.zeros(2)
        y = x.copy()
        y[:, t] += 1.0
        changed = np.nonzero(np.any(depthwise_conv(x, w, b, d, causal)
                                    != depthwise_conv(y, w, b, d, causal), axis=0))[0]
        reach = 0 if causal else d
        assert changed.min() >= t - reach

    def test_cumulative_norm_oracle(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((4, 7))
        g, b = rng.standard_normal(4), rng.standard_normal(4)
        out = cumulative_layer_norm(x, g, b)
        for t in range(7):
            past = x[:, :t + 1]
            ref = (x[:, t] - past.mean()) / np.sqrt(past.var() + 1e-8) * g + b
            np.testing.assert_allclose(out[:, t], ref, atol=1e-10)

    def test_global_norm_oracle(self):
        x = np.random.default_rng(1).standard_normal((4, 7))
        out = global_layer_norm(x, np.ones(4), np.zeros(4))
        np.testing.assert_allclose(out, (x - x.mean()) / np.sqrt(x.var() + 1e-8), atol=1e-12)


class TestForward:
    @pytest.mark.parametrize("act", ["sigmoid", "identity"])
    def test_mask_shape(self, act):
        cfg = TcnConfig(mask_activation=act, **TINY)
        masks = separation_forward(np.ones((6, 9)), cfg, tiny_weights(cfg))
        assert masks.masks.shape == (2, 6, 9)
        assert masks.num_sources == 2

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 1000), st.floats(0.01, 100))
    def test_sigmoid_range(self, seed, scale):
        cfg = TcnConfig(mask_activation="sigmoid", **TINY)
        x = scale * np.random.default_rng(seed).standard_normal((6, 12))
        m = separation_forward(x, cfg, tiny_weights(cfg, seed=seed)).masks
        assert np.all((m >= 0) & (m <= 1))

    def test_identity_can_go_negative(self):
        cfg = TcnConfig(mask_activation="identity", **TINY)
        x = np.random.default_rng(3).standard_normal((6, 12))
        assert np.any(separation_forward(x, cfg, tiny_weights(cfg)).masks < 0)

    def test_wrong_input_rows(self):
        cfg = TcnConfig(**TINY)
        with pytest.raises(ShapeMismatch):
            separation_forward(np.ones((5, 9)), cfg, tiny_weights(cfg))

    def test_divergence_reports_layer(self):
        cfg = TcnConfig(**TINY)
        w = tiny_weights(cfg)
        w["tcn.blocks.2.res_conv.bias"] = np.full_like(w["tcn.blocks.2.res_conv.bias"], np.inf)
        with pytest.raises(NumericalDivergence) as info:
            separation_forward(np.ones((6, 9)), cfg, w)
        assert info.value.layer == 2

    @pytest.mark.parametrize("noncausal", [0, 1, 3, 8])
    def test_mask_causality(self, noncausal):
        """Mask frame t must not depend on input frames beyond t + conv reach."""
        cfg = TcnConfig(noncausal_layers=noncausal, **TINY)
        reach = conv_future_reach(cfg)
        w = tiny_weights(cfg)
        x = np.random.default_rng(4).standard_normal((6, 40))
        base = separation_forward(x, cfg, w).masks
        for t in [10, 25, 39]:
            y = x.copy()
            y[:, t] += 1.0
            changed = np.nonzero(np.any(separation_forward(y, cfg, w).masks != base,
                                        axis=(0, 1)))[0]
            assert changed.min() == max(0, t - reach)

    def test_gln_makes_past_depend_on_future(self):
        cfg = TcnConfig(norm="gln", **TINY)
        w = tiny_weights(cfg)
        x = np.random.default_rng(5).standard_normal((6, 20))
        y = x.copy()
        y[:, -1] += 1.0
        assert np.any(separation_forward(x, cfg, w).masks[:, :, 0]
                      != separation_forward(y, cfg, w).masks[:, :, 0])


class TestStream:
    @pytest.mark.parametrize("cfg_fn,nc", [(small_conv_tasnet, 5), (small_conv_tasnet, 0),
                                           (small_stft_tcn, 3), (small_stft_tcn, 24)])
    def test_frame_by_frame_equals_offline(self, cfg_fn, nc):
        config = cfg_fn(nc)
        weights = init_random(config, 7)
        x = np.random.default_rng(0).standard_normal((config.size, 50))
        offline = separation_forward(x, config.tcn, weights).masks
        stream = TcnStream(config.tcn, weights)
        masks = []
        for t in range(50):
            masks.extend(stream.push(x[:, t]))
            assert len(masks) == max(0, t + 1 - conv_future_reach(config.tcn))
        masks.extend(stream.finish())
        np.testing.assert_allclose(np.stack(masks, axis=-1), offline, atol=1e-10)

    def test_gln_rejected(self):
        cfg = TcnConfig(norm="gln", **TINY)
        with pytest.raises(ValueError):
            TcnStream(cfg, tiny_weights(cfg))
