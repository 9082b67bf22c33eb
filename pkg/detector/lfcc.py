from dataclasses import dataclass
from functools import lru_cache

import gin
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft, signal

from .exceptions import InputTooShort

"""
LFCC front-end: waveform -> (1, n_lfcc, N) cepstral feature map

frames (Hann) -> |rfft|^2 -> linear triangular filterbank -> log -> DCT-II

Every function accepts extra leading axes, so one call handles a batch
of waveforms (B, L).
"""


@gin.configurable
@dataclass(frozen=True)
class LfccConfig:
    sample_rate: int = 16000
    win_ms: float = 25
    hop_ms: float = 10
    n_fft: int = 512
    n_filters: int = 80
    n_lfcc: int = 80
    f_min: float = 0.0
    f_max: float = 8000.0
    log_floor: float = 1e-10  # on power, before the log

    def __post_init__(self):
        if self.win_len > self.n_fft:
            raise ValueError(f"window of {self.win_len} samples > n_fft {self.n_fft}")
        if self.n_lfcc > self.n_filters:
            raise ValueError("n_lfcc cannot exceed n_filters")
        if not 0 <= self.f_min < self.f_max <= self.sample_rate / 2:
            raise ValueError(f"bad filterbank range [{self.f_min}, {self.f_max}]")

    @property
    def win_len(self):
        return int(round(self.sample_rate * self.win_ms / 1000))

    @property
    def hop_len(self):
        return int(round(self.sample_rate * self.hop_ms / 1000))

    def nb_frames(self, length):
        """N = 1 + floor((length - win_len) / hop_len)"""
        if length < self.win_len:
            raise InputTooShort(f"{length} samples < window of {self.win_len}")
        return 1 + (length - self.win_len) // self.hop_len


@lru_cache(maxsize=8)
def hann_window(win_len):
    """periodic Hann window, read-only"""
    window = signal.get_window("hann", win_len, fftbins=True)
    window.setflags(write=False)
    return window


def frame_and_window(samples, cfg):
    """Cuts (..., L) waveforms into Hann-windowed frames

    samples (float array): waveform(s), last axis is time
    cfg (LfccConfig): framing parameters

    Returns:
        (float64 array): (..., F, win_len) with F = cfg.nb_frames(L)
    """
    samples = np.asarray(samples, dtype=np.float64)
    cfg.nb_frames(samples.shape[-1])  # length check
    frames = sliding_window_view(samples, cfg.win_len, axis=-1)[..., :: cfg.hop_len, :]
    return frames * hann_window(cfg.win_len)


def power_spectrum(frames, n_fft=512):
    """|DFT|^2 of zero-padded frames, bins 0..n_fft/2

    Returns:
        (float64 array): (..., F, n_fft // 2 + 1)
    """
    spectrum = np.fft.rfft(frames, n=n_fft, axis=-1)
    return spectrum.real ** 2 + spectrum.imag ** 2


@lru_cache(maxsize=8)
def linear_filterbank(cfg):
    """Triangular filters with centers evenly spaced on the linear Hz axis

    Filter i rises on [edge_i, edge_i+1] and falls on [edge_i+1, edge_i+2],
    evaluated at the bin frequencies k * sample_rate / n_fft.
    Computed once per config and shared read-only.

    Returns:
        (float64 array): (n_filters, n_fft // 2 + 1)
    """
    edges = np.linspace(cfg.f_min, cfg.f_max, cfg.n_filters + 2)
    freqs = np.arange(cfg.n_fft // 2 + 1) * cfg.sample_rate / cfg.n_fft
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (center - lower)
    falling = (upper - freqs) / (upper - center)
    bank = np.maximum(0.0, np.minimum(rising, falling))
    bank.setflags(write=False)
    return bank


def log_filterbank_energies(samples, cfg):
    """log(max(filterbank . power, floor)), (..., F, n_filters)"""
    power = power_spectrum(frame_and_window(samples, cfg), cfg.n_fft)
    energies = power @ linear_filterbank(cfg).T
    return np.log(np.maximum(energies, cfg.log_floor))


def lfcc(samples, cfg=None):
    """LFCC feature map of one waveform or a batch of waveforms

    samples (float array): (L,) or (B, L) waveform(s)
    cfg (LfccConfig): front-end parameters (gin defaults if None)

    Returns:
        (float32 array): (1, n_lfcc, N) or (B, 1, n_lfcc, N)
    """
    cfg = cfg or LfccConfig()
    log_energies = log_filterbank_energies(samples, cfg)
    coeffs = fft.dct(log_energies, type=2, norm="ortho", axis=-1)[..., : cfg.n_lfcc]
    coeffs = np.swapaxes(coeffs, -1, -2)
    return np.ascontiguousarray(coeffs[..., None, :, :], dtype=np.float32)
