"""STFT and Slaney-mel log-spectrogram extraction.

Parameterization follows the HiFi-GAN feature convention: 1024-point FFT,
1024-sample periodic Hann window, 256-sample hop, reflection padding of
(n_fft - hop)/2 samples on each side, no internal centering, 80 Slaney-scale
area-normalized mel bands over 0-8000 Hz, and natural-log amplitudes clamped
at 1e-5.
"""

from __future__ import annotations

import functools
import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window

from .audio import Waveform

BLOB_MAGIC = b"LMSB"

# Slaney mel scale: linear below 1 kHz (3 mel per 200 Hz), logarithmic above.
_MEL_BREAK_HZ = 1000.0
_MEL_BREAK = 15.0
_MEL_LOG_STEP = np.log(6.4) / 27.0


@dataclass(frozen=True)
class StftConfig:
    n_fft: int = 1024
    win_length: int = 1024
    hop: int = 256

    def __post_init__(self):
        if self.n_fft < self.win_length:
            raise ValueError("n_fft must be >= win_length")
        if self.hop > self.win_length:
            raise ValueError("hop must be <= win_length")
        if (self.n_fft - self.hop) % 2:
            raise ValueError("n_fft - hop must be even for symmetric padding")

    @property
    def pad(self) -> int:
        return (self.n_fft - self.hop) // 2

    def n_frames(self, n_samples: int) -> int:
        return (n_samples + 2 * self.pad - self.n_fft) // self.hop + 1


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = 80
    f_min: float = 0.0
    f_max: float = 8000.0
    clamp_floor: float = 1e-5

    def __post_init__(self):
        if not self.f_min < self.f_max:
            raise ValueError("f_min must be below f_max")
        if self.n_mels < 2:
            raise ValueError("need at least 2 mel bands")
        if self.clamp_floor <= 0:
            raise ValueError("clamp_floor must be positive")


@dataclass
class LogMelSpectrogram:
    """Natural-log mel amplitudes, bands x frames, with frame timing metadata."""

    values: np.ndarray
    hop: int = 256
    sample_rate: int = 22050

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D bands x frames matrix")

    @property
    def n_bands(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_frames * self.hop / self.sample_rate


def hz_to_mel(f):
    """Slaney mel scale: mel = 3f/200 below 1 kHz, 15 + 27*ln(f/1000)/ln(6.4) above."""
    f = np.asarray(f, dtype=np.float64)
    mel = 3.0 * f / 200.0
    above = f >= _MEL_BREAK_HZ
    if np.any(above):
        mel = np.where(above, _MEL_BREAK + np.log(np.maximum(f, _MEL_BREAK_HZ) / _MEL_BREAK_HZ) / _MEL_LOG_STEP, mel)
    return mel if mel.ndim else float(mel)


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    f = 200.0 * m / 3.0
    above = m >= _MEL_BREAK
    if np.any(above):
        f = np.where(above, _MEL_BREAK_HZ * np.exp(_MEL_LOG_STEP * (m - _MEL_BREAK)), f)
    return f if f.ndim else float(f)


def reflect_pad(x: np.ndarray, pad: int) -> np.ndarray:
    """Reflection padding without edge duplication, valid for any pad width.

    Matches numpy's mode='reflect' when pad < len(x); longer pads keep
    bouncing between the signal ends with period 2*(len(x)-1).
    """
    n = x.size
    if pad == 0:
        return x
    if n == 1:
        return np.full(n + 2 * pad, x[0])
    idx = np.arange(-pad, n + pad)
    period = 2 * (n - 1)
    idx = np.mod(idx, period)
    idx = np.where(idx >= n, period - idx, idx)
    return x[idx]


def stft(w: Waveform, cfg: StftConfig | None = None) -> np.ndarray:
    """Complex STFT, bins x frames, with K = n_fft/2 + 1 bins.

    The signal is reflection-padded by (n_fft - hop)/2 samples on each side
    and cut into n_fft-sample frames every hop samples; each frame is
    multiplied by a periodic Hann window before the real-input FFT.  The
    frame count is (len + 2*pad - n_fft)//hop + 1.
    """
    cfg = cfg or StftConfig()
    x = w.samples
    if x.size < cfg.hop:
        raise ValueError("signal shorter than one hop")
    xp = reflect_pad(x, cfg.pad)
    frames = np.lib.stride_tricks.sliding_window_view(xp, cfg.n_fft)[:: cfg.hop]
    window = get_window("hann", cfg.win_length, fftbins=True)
    if cfg.win_length < cfg.n_fft:
        lpad = (cfg.n_fft - cfg.win_length) // 2
        window = np.pad(window, (lpad, cfg.n_fft - cfg.win_length - lpad))
    return np.fft.rfft(frames * window, axis=1).T


@functools.lru_cache(maxsize=8)
def _cached_filterbank(n_mels, f_min, f_max, clamp_floor, sample_rate, n_fft):
    return mel_filterbank(
        MelConfig(n_mels=n_mels, f_min=f_min, f_max=f_max, clamp_floor=clamp_floor),
        sample_rate,
        n_fft,
    )


def mel_filterbank(cfg: MelConfig, sample_rate: int, n_fft: int) -> np.ndarray:
    """Triangular Slaney-scale mel filterbank, bands x FFT bins.

    Band edges are spaced uniformly on the Slaney mel scale and each filter
    is area-normalized by 2/(right_hz - left_hz) so that energy is equalized
    across bands.  A filter with no FFT bin under its support is an error.
    """
    if cfg.f_max > sample_rate / 2:
        raise ValueError("f_max exceeds the Nyquist frequency")
    n_bins = n_fft // 2 + 1
    fft_hz = np.linspace(0.0, sample_rate / 2.0, n_bins)
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max), cfg.n_mels + 2))
    weights = np.zeros((cfg.n_mels, n_bins))
    for i in range(cfg.n_mels):
        left, center, right = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        up = (fft_hz - left) / (center - left)
        down = (right - fft_hz) / (right - center)
        weights[i] = np.maximum(0.0, np.minimum(up, down)) * (2.0 / (right - left))
    if (weights.sum(axis=1) <= 0).any():
        raise ValueError("mel filterbank has bands with empty FFT-bin support")
    return weights


def filter_centers_hz(cfg: MelConfig) -> np.ndarray:
    """Center frequency of each mel filter in Hz."""
    return mel_to_hz(np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max), cfg.n_mels + 2))[1:-1]


def log_mel(
    w: Waveform,
    stft_cfg: StftConfig | None = None,
    mel_cfg: MelConfig | None = None,
) -> LogMelSpectrogram:
    """Log-mel spectrogram: ln(max(Mel @ |STFT|, clamp_floor))."""
    stft_cfg = stft_cfg or StftConfig()
    mel_cfg = mel_cfg or MelConfig()
    spec = np.abs(stft(w, stft_cfg))
    fb = _cached_filterbank(
        mel_cfg.n_mels, mel_cfg.f_min, mel_cfg.f_max, mel_cfg.clamp_floor,
        w.sample_rate, stft_cfg.n_fft,
    )
    values = np.log(np.maximum(fb @ spec, mel_cfg.clamp_floor))
    return LogMelSpectrogram(values, hop=stft_cfg.hop, sample_rate=w.sample_rate)


def write_blob(s: LogMelSpectrogram, path) -> None:
    """Write the spectrogram as little-endian float32 with a 16-byte header.

    Header layout: 4-byte magic, uint32 band count, uint32 frame count,
    4 reserved zero bytes.  Values follow row-major (band-major).
    """
    header = BLOB_MAGIC + struct.pack("<IIi", s.n_bands, s.n_frames, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(s.values, dtype="<f4").tobytes())


def read_blob(path, hop: int = 256, sample_rate: int = 22050) -> LogMelSpectrogram:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != BLOB_MAGIC:
            raise ValueError(f"not a log-mel blob: {path!s}")
        n_bands, n_frames, _ = struct.unpack("<IIi", header[4:])
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != n_bands * n_frames:
        raise ValueError(f"truncated log-mel blob: {path!s}")
    return LogMelSpectrogram(data.reshape(n_bands, n_frames), hop=hop, sample_rate=sample_rate)


def write_csv(s: LogMelSpectrogram, path) -> None:
    """Write the spectrogram as CSV, one row per mel band."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in s.values:
            fh.write(",".join(format(v, ".9g") for v in row))
            fh.write("\n")
