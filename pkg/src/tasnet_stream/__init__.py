"""Streaming TCN speech enhancement: Conv-TasNet and STFT-TCN in NumPy."""
from .dsp import (
    AnalysisConfig,
    AudioSignal,
    BasisPair,
    FrameMatrix,
    Representation,
    frame_signal,
    from_amp_phase,
    make_stft_basis,
    overlap_add,
    to_amp_phase,
)
from .losses import (
    LossConfig,
    LossReport,
    loss_gradient,
    pase_feature_mse,
    pasemse_loss,
    pcmse_loss,
    si_snr_loss,
    si_snr_metric,
    snr_loss,
    ssnr_metric,
)
from .model import (
    ModelConfig,
    ModelWeights,
    apply_masks,
    conv_tasnet_config,
    decode,
    encode,
    enhance_offline,
    init_random,
    param_count,
    stft_tcn_config,
)
from .streaming import (
    analyze_latency,
    bench_per_frame,
    probe_causality,
    stream_create,
    stream_flush,
    stream_push,
    stream_signal,
)
from .tcn import MaskSet, TcnConfig, future_reach, separation_forward

__version__ = "0.1.0"
