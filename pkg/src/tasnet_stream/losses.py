"""Training objectives evaluated as measurements, their gradients, and quality metrics.

All losses take ``K`` clean references and ``K`` estimates (a single 1-D
array counts as ``K = 1``) and average over sources; source ``k`` of the
estimate is always compared with source ``k`` of the reference.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dsp import AnalysisConfig, frame_adjoint, frame_signal, make_stft_basis
from .errors import DegenerateReference, ExtractorInconsistent, GradientUndefined, ShapeMismatch
from .features import FilterbankExtractor

DB = 10.0 / np.log(10.0)
ENERGY_FLOOR = 1e-30
COMPRESSION = 0.3

SSNR_FRAME_MS = 32.0
SSNR_HOP_MS = 16.0
SSNR_RANGE = (-10.0, 35.0)
SSNR_SILENCE = 1e-8


@dataclass(frozen=True)
class LossConfig:
    beta: float = 0.5
    gamma: float = 0.25
    analysis: AnalysisConfig = field(default_factory=lambda: AnalysisConfig(192, 64, "hann"))
    size: int = 512
    floor: float = 1e-8
    per_bin_mean: bool = False

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.gamma < 0 or self.floor < 0:
            raise ValueError("gamma and floor must be non-negative")


@dataclass
class LossReport:
    value: float
    per_source: list
    alpha: list = None
    perfect: list = None

    @property
    def status(self):
        return "PerfectEstimate" if self.perfect and any(self.perfect) else "ok"


def _sources(clean, est):
    def stack(x):
        if isinstance(x, (list, tuple)):
            x = [getattr(s, "samples", s) for s in x]
        x = np.asarray(getattr(x, "samples", x), dtype=np.float64)
        return x[None] if x.ndim == 1 else x

    s, e = stack(clean), stack(est)
    if s.shape != e.shape:
        raise ShapeMismatch(f"clean {s.shape} and estimate {e.shape} differ")
    return s, e


def _energy(x):
    return float(np.dot(x, x))


def _reference_energy(s):
    energy = _energy(s)
    if energy < ENERGY_FLOOR:
        raise DegenerateReference("clean reference has zero energy")
    return energy


@lru_cache(maxsize=8)
def _loss_basis(analysis, size):
    return make_stft_basis(analysis, size)


def _report(values, perfect, alpha=None):
    K = len(values)
    return LossReport(float(sum(values) / K), values, alpha, perfect)


# ------------------------------------------------------------------ SNR family

def si_snr_loss(clean, est):
    """Negative scale-invariant SNR in dB, no mean removal."""
    S, E = _sources(clean, est)
    values, perfect, alphas = [], [], []
    for s, e in zip(S, E):
        alpha = np.dot(s, e) / _reference_energy(s)
        target = alpha * s
        error = _energy(target - e)
        alphas.append(float(alpha))
        perfect.append(error < ENERGY_FLOOR)
        if perfect[-1]:
            values.append(-np.inf)
        else:
            with np.errstate(divide="ignore"):
                values.append(float(-DB * np.log(_energy(target) / error)))
    return _report(values, perfect, alphas)


def snr_loss(clean, est):
    """Negative SNR in dB; unlike SI-SNR this penalises scale errors."""
    S, E = _sources(clean, est)
    values, perfect = [], []
    for s, e in zip(S, E):
        ref = _reference_energy(s)
        error = _energy(s - e)
        perfect.append(error < ENERGY_FLOOR)
        values.append(-np.inf if perfect[-1] else float(-DB * np.log(ref / error)))
    return _report(values, perfect)


# ---------------------------------------------------------------------- PCMSE

def _spectrum(x, cfg, basis):
    frames = frame_signal(x, cfg.analysis)
    stacked = basis.analysis @ frames.data
    half = stacked.shape[0] // 2
    return stacked[:half] + 1j * stacked[half:]


def compress(Y, p=COMPRESSION):
    """``|Y|**p * exp(j angle(Y))``; zero stays zero."""
    mag = np.abs(Y)
    scale = np.zeros_like(mag)
    np.power(mag, p - 1.0, out=scale, where=mag > 0)
    return Y * scale


def _pcmse_terms(Y_est, Y_ref, beta):
    amp = (np.abs(Y_est) ** COMPRESSION - np.abs(Y_ref) ** COMPRESSION) ** 2
    cplx = np.abs(compress(Y_est) - compress(Y_ref)) ** 2
    return beta * amp + (1.0 - beta) * cplx


def pcmse_loss(clean, est, cfg=None):
    """Power-compressed spectral MSE on re-analysed signals.

    Both waveforms go through the loss-side STFT, so the compared spectra are
    always consistent. Bins are summed (``cfg.per_bin_mean`` averages them).
    """
    cfg = cfg or LossConfig()
    S, E = _sources(clean, est)
    basis = _loss_basis(cfg.analysis, cfg.size)
    values = []
    for s, e in zip(S, E):
        terms = _pcmse_terms(_spectrum(e, cfg, basis), _spectrum(s, cfg, basis), cfg.beta)
        values.append(float(terms.mean() if cfg.per_bin_mean else terms.sum()))
    return _report(values, [False] * len(values))


def pcmse_bins(est_bins, ref_bins, beta=0.5):
    """PCMSE summed over explicitly given complex bins (no framing)."""
    return float(_pcmse_terms(np.asarray(est_bins, dtype=complex),
                              np.asarray(ref_bins, dtype=complex), beta).sum())


# ---------------------------------------------------------- feature matching

def pase_feature_mse(clean, est, extractor=None):
    extractor = extractor or FilterbankExtractor()
    S, E = _sources(clean, est)
    total = 0.0
    for s, e in zip(S, E):
        P, P_hat = np.asarray(extractor(s)), np.asarray(extractor(e))
        if P.shape != P_hat.shape:
            raise ExtractorInconsistent(f"feature shapes {P.shape} and {P_hat.shape} differ")
        total += float(np.mean((P - P_hat) ** 2))
    return total / S.shape[0]


def pasemse_loss(clean, est, cfg=None, extractor=None):
    """``gamma * feature MSE + PCMSE``."""
    cfg = cfg or LossConfig()
    pc = pcmse_loss(clean, est, cfg)
    feat = pase_feature_mse(clean, est, extractor) if cfg.gamma else 0.0
    return LossReport(cfg.gamma * feat + pc.value, pc.per_source, None, pc.perfect)


# ------------------------------------------------------------------ gradients

def _si_snr_grad(s, e):
    alpha = np.dot(s, e) / _reference_energy(s)
    target = alpha * s
    error = e - target
    pt, pe = _energy(target), _energy(error)
    if pt < ENERGY_FLOOR or pe < ENERGY_FLOOR:
        raise GradientUndefined("SI-SNR gradient is undefined for orthogonal or perfect estimates")
    return -DB * (2.0 * target / pt - 2.0 * error / pe)


def _snr_grad(s, e):
    _reference_energy(s)
    diff = e - s
    pe = _energy(diff)
    if pe < ENERGY_FLOOR:
        raise GradientUndefined("SNR gradient is undefined for a perfect estimate")
    return DB * 2.0 * diff / pe


def _pcmse_grad(s, e, cfg, basis):
    if cfg.floor <= 0:
        raise GradientUndefined("PCMSE gradient needs a positive magnitude floor")
    Y = _spectrum(e, cfg, basis)
    W = _spectrum(s, cfg, basis)
    r = np.abs(Y)
    m = np.maximum(r, cfg.floor)
    active = r >= cfg.floor
    a, b = Y.real, Y.imag
    p = COMPRESSION
    # magnitude term; flat below the floor
    g_amp = 2.0 * cfg.beta * (m ** p - np.abs(W) ** p) * p * m ** (p - 2.0) * active
    # complex term: Jacobian of Y -> Y * m**(p - 1)
    D = compress(Y) - compress(W)
    proj = (a * D.real + b * D.imag) * m ** (p - 3.0) * (1.0 - p) * active
    scale = m ** (p - 1.0)
    g_re = g_amp * a + 2.0 * (1.0 - cfg.beta) * (scale * D.real - proj * a)
    g_im = g_amp * b + 2.0 * (1.0 - cfg.beta) * (scale * D.imag - proj * b)
    if cfg.per_bin_mean:
        g_re, g_im = g_re / Y.size, g_im / Y.size
    grad_frames = basis.analysis.T @ np.vstack([g_re, g_im])
    return frame_adjoint(grad_frames, cfg.analysis, e.shape[0])


def loss_gradient(kind, clean, est, cfg=None):
    """Analytic gradient of a loss w.r.t. the estimate samples, shaped like ``est``."""
    S, E = _sources(clean, est)
    K = S.shape[0]
    if kind == "sisnr":
        grads = [_si_snr_grad(s, e) for s, e in zip(S, E)]
    elif kind == "snr":
        grads = [_snr_grad(s, e) for s, e in zip(S, E)]
    elif kind == "pcmse":
        cfg = cfg or LossConfig()
        basis = _loss_basis(cfg.analysis, cfg.size)
        grads = [_pcmse_grad(s, e, cfg, basis) for s, e in zip(S, E)]
    else:
        raise ValueError(f"no analytic gradient for loss {kind!r}")
    out = np.stack(grads) / K
    est_arr = np.asarray(getattr(est, "samples", est)) if not isinstance(est, (list, tuple)) else None
    return out[0] if est_arr is not None and est_arr.ndim == 1 else out


LOSSES = {
    "sisnr": lambda c, e, cfg, ex: si_snr_loss(c, e),
    "snr": lambda c, e, cfg, ex: snr_loss(c, e),
    "pcmse": lambda c, e, cfg, ex: pcmse_loss(c, e, cfg),
    "pasemse": lambda c, e, cfg, ex: pasemse_loss(c, e, cfg, ex),
}


def compute_loss(kind, clean, est, cfg=None, extractor=None):
    if kind not in LOSSES:
        raise ValueError(f"unknown loss {kind!r}; choose from {sorted(LOSSES)}")
    return LOSSES[kind](clean, est, cfg, extractor)


# -------------------------------------------------------------------- metrics

def si_snr_metric(clean, est):
    return -si_snr_loss(clean, est).value


def ssnr_metric(clean, est, sample_rate=16000):
    """Segmental SNR: clamped per-frame SNR averaged over non-silent frames."""
    S, E = _sources(clean, est)
    frame = int(SSNR_FRAME_MS * sample_rate / 1000)
    hop = int(SSNR_HOP_MS * sample_rate / 1000)
    cfg = AnalysisConfig(frame, hop, "rectangular")
    lo, hi = SSNR_RANGE
    scores = []
    for s, e in zip(S, E):
        ref = frame_signal(s, cfg).data
        err = ref - frame_signal(e, cfg).data
        ref_energy = (ref ** 2).sum(axis=0)
        err_energy = (err ** 2).sum(axis=0)
        voiced = ref_energy >= SSNR_SILENCE
        if not np.any(voiced):
            raise DegenerateReference("no frame of the reference exceeds the silence threshold")
        with np.errstate(divide="ignore"):
            snr = DB * (np.log(ref_energy[voiced]) - np.log(err_energy[voiced]))
        scores.append(float(np.mean(np.clip(snr, lo, hi))))
    return float(np.mean(scores))
