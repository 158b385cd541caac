"""WAV ingestion and waveform preprocessing.

The preprocessing chain brings every utterance to a common footing before
feature extraction: resample to the target rate, cap long silences, remove
low-frequency rumble, and normalize the active-speech level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile
from scipy.signal import butter, resample_poly, sosfiltfilt

# Frame-energy gate used for silence detection: 20 ms frames, 10 ms hop.
GATE_FRAME_S = 0.020
GATE_HOP_S = 0.010

# Zero-phase Butterworth order for the high-pass stage.  Order 6 applied
# forward-backward attenuates a tone one octave below the cutoff by ~72 dB;
# order 4 would only reach ~48 dB, which is not enough to treat sub-cutoff
# content as removed.
HIGHPASS_ORDER = 6

_DB_FLOOR = 1e-12


class SilentSignalError(ValueError):
    """Raised when a signal contains no frames above the silence gate."""


@dataclass
class Waveform:
    """Mono audio samples in [-1, 1] with their sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("Waveform samples must be one-dimensional")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class PreprocessConfig:
    """Parameters of the preprocessing chain.

    ``cap_long_silence`` selects what happens to silence runs longer than
    ``silence_trim_ms``: shorten them to exactly that length (default), or
    delete them entirely.  ``target_level_dbfs`` of None disables the level
    normalization stage.
    """

    target_rate: int = 22050
    silence_trim_ms: float = 200.0
    silence_threshold_db: float = -45.0
    highpass_hz: float = 60.0
    target_level_dbfs: float | None = -22.0
    cap_long_silence: bool = True

    def __post_init__(self):
        if self.target_rate <= 2 * self.highpass_hz:
            raise ValueError("target_rate must exceed twice the high-pass cutoff")
        if self.silence_trim_ms <= 0:
            raise ValueError("silence_trim_ms must be positive")


def load_wav(path) -> Waveform:
    """Read a RIFF WAV file (PCM16 or IEEE float32) as a mono Waveform.

    Multichannel input is averaged down to mono; integer samples are scaled
    to [-1, 1].  The sample rate is passed through unchanged; resampling is
    the preprocessing stage's job.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except (ValueError, EOFError) as exc:
        raise ValueError(f"unreadable WAV file {path!s}: {exc}") from exc
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(np.float64)
    else:
        raise ValueError(
            f"unsupported WAV encoding {data.dtype} in {path!s}; expected PCM16 or float32"
        )
    if x.ndim == 2:
        x = x.mean(axis=1)
    if x.size == 0:
        raise ValueError(f"zero-length audio in {path!s}")
    if not np.isfinite(x).all():
        raise ValueError(f"non-finite samples in {path!s}")
    return Waveform(x, int(rate))


def rms_dbfs(x: np.ndarray) -> float:
    """RMS level in dB relative to full scale (RMS of 1.0 = 0 dBFS)."""
    rms = float(np.sqrt(np.mean(np.square(x)))) if x.size else 0.0
    return 20.0 * math.log10(max(rms, _DB_FLOOR))


def silence_mask(x: np.ndarray, rate: int, threshold_db: float) -> np.ndarray:
    """Boolean per-sample mask, True where the frame-energy gate reads silence.

    Each 10 ms hop block takes the verdict of the 20 ms frame starting at it;
    the tail beyond the last full frame inherits the last verdict.
    """
    frame = max(1, int(round(rate * GATE_FRAME_S)))
    hop = max(1, int(round(rate * GATE_HOP_S)))
    n = x.size
    if n < frame:
        return np.full(n, rms_dbfs(x) < threshold_db)
    n_frames = 1 + (n - frame) // hop
    starts = np.arange(n_frames) * hop
    windows = np.lib.stride_tricks.sliding_window_view(x, frame)[::hop]
    frame_db = 10.0 * np.log10(np.maximum(np.mean(np.square(windows), axis=1), _DB_FLOOR**2))
    silent = frame_db < threshold_db
    mask = np.empty(n, dtype=bool)
    for i in range(n_frames):
        end = starts[i] + hop if i < n_frames - 1 else n
        mask[starts[i] : end] = silent[i]
    return mask


def _silent_runs(mask: np.ndarray):
    """Yield (start, end) of maximal True runs in a boolean mask."""
    if mask.size == 0:
        return
    edges = np.flatnonzero(np.diff(mask.astype(np.int8)))
    starts = ([0] if mask[0] else []) + (edges[mask[edges + 1]] + 1).tolist()
    ends = (edges[~mask[edges + 1]] + 1).tolist() + ([mask.size] if mask[-1] else [])
    yield from zip(starts, ends)


def _cap_silences(x: np.ndarray, mask: np.ndarray, max_len: int, cap: bool) -> np.ndarray:
    keep = np.ones(x.size, dtype=bool)
    for start, end in _silent_runs(mask):
        run = end - start
        if run <= max_len:
            continue
        if not cap:
            keep[start:end] = False
        elif start == 0:
            # leading run: keep the tail adjacent to speech
            keep[start : end - max_len] = False
        elif end == x.size:
            keep[start + max_len : end] = False
        else:
            head = max_len // 2
            keep[start + head : end - (max_len - head)] = False
    return x[keep]


def _highpass(x: np.ndarray, rate: int, cutoff_hz: float) -> np.ndarray:
    sos = butter(HIGHPASS_ORDER, cutoff_hz, btype="highpass", fs=rate, output="sos")
    # pad by a few cutoff periods so edge transients settle inside the padding
    padlen = min(x.size - 1, int(round(3.0 * rate / cutoff_hz)))
    return sosfiltfilt(sos, x, padlen=padlen)


def resample(x: np.ndarray, rate: int, target_rate: int) -> np.ndarray:
    """Polyphase resampling with a Kaiser (beta 8.6) windowed-sinc filter."""
    if rate == target_rate:
        return np.asarray(x, dtype=np.float64)
    g = math.gcd(target_rate, rate)
    return resample_poly(x, target_rate // g, rate // g, window=("kaiser", 8.6))


def preprocess(w: Waveform, cfg: PreprocessConfig | None = None) -> Waveform:
    """Run the full preprocessing chain on a waveform.

    Stages, in order: resample to ``cfg.target_rate``; shorten silence runs
    longer than ``cfg.silence_trim_ms`` (detected by the frame-energy gate);
    zero-phase Butterworth high-pass at ``cfg.highpass_hz``; gain to
    ``cfg.target_level_dbfs`` RMS measured over non-silent samples.  If the
    high-pass leaves nothing above the gate (e.g. a pure stopband tone), the
    normalization stage is skipped and the attenuated signal is returned.

    Raises SilentSignalError when the input has no content above the gate.
    """
    cfg = cfg or PreprocessConfig()
    if len(w) == 0:
        raise ValueError("empty waveform")
    x = resample(w.samples, w.sample_rate, cfg.target_rate)
    rate = cfg.target_rate

    mask = silence_mask(x, rate, cfg.silence_threshold_db)
    if mask.all():
        raise SilentSignalError("signal entirely silent after trimming")
    max_len = int(round(cfg.silence_trim_ms * rate / 1000.0))
    x = _cap_silences(x, mask, max_len, cfg.cap_long_silence)

    x = _highpass(x, rate, cfg.highpass_hz)

    if cfg.target_level_dbfs is not None:
        active = ~silence_mask(x, rate, cfg.silence_threshold_db)
        if active.any():
            gain_db = cfg.target_level_dbfs - rms_dbfs(x[active])
            x = x * 10.0 ** (gain_db / 20.0)
    if not np.isfinite(x).all():
        raise ValueError("preprocessing produced non-finite samples")
    return Waveform(x, rate)
