import numpy as np
import pytest

from tasnet_stream.model import conv_tasnet_config, init_random, stft_tcn_config

# a narrow TCN keeps per-test runtime low while exercising every code path
SMALL = dict(bottleneck=16, hidden=32, skip=16)


def small_conv_tasnet(noncausal_layers=5, **kw):
    return conv_tasnet_config(noncausal_layers, **{**SMALL, **kw})


def small_stft_tcn(noncausal_layers=3, **kw):
    return stft_tcn_config(noncausal_layers, **{**SMALL, **kw})


def noise(n, seed=0, scale=0.1):
    return scale * np.random.default_rng(seed).standard_normal(n)


@pytest.fixture(scope="session")
def conv_tasnet_default():
    cfg = conv_tasnet_config()
    return cfg, init_random(cfg, 42)


@pytest.fixture(scope="session")
def stft_tcn_default():
    cfg = stft_tcn_config()
    return cfg, init_random(cfg, 42)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
