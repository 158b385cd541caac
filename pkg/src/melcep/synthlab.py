"""Synthetic degradation generator and monotonicity harness.

Controlled spectral smoothing makes the oversmoothing metrics testable
without any trained TTS model: smoothing a spectrogram along the mel axis
must never increase any of the four metrics relative to the unsmoothed
original.  The harness checks that framewise, over a fixed-seed suite of
noise spectrograms, for every degradation kind and strength.

Smoothed-to-smoothed comparisons (say width 9 against width 15) are NOT
monotone in general: moving-average transfer functions have interleaved
nulls, so neither filter dominates the other at every quefrency.  The suite
therefore compares each strength against the identity baseline, which is the
property the metrics are designed around.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d

from .cepstral import mel_cepstrogram, quefrency_power
from .osmetrics import (
    MetricConfig,
    ccentroid_series,
    croll95_series,
    cslope_series,
    hqer_series,
)
from .spectral import LogMelSpectrogram

KINDS = ("mel_moving_average", "mel_gaussian_blur", "variance_shrink")
DEFAULT_SEED = 0xA5C
FILTER_STRENGTHS = (1, 3, 5, 9, 15)
SHRINK_STRENGTHS = (1.0, 0.7, 0.4, 0.1)

# Slack allowed when comparing a degraded frame's metric against the
# baseline: metric(degraded) <= metric(original) + tolerance.
MONOTONICITY_TOLERANCES = {
    "hqer": 1e-9,
    "cslope": 1e-6,
    "ccentroid": 1e-9,
    "croll95": 0.0,
}

# variance_shrink scales quefrency power by factor^2, which can push
# near-null bins into the epsilon floor of the slope's dB computation; the
# floor lifts those bins and drifts the slope by up to ~1e-4 dB/bin at
# factor 0.1.  The slope tolerance for this kind covers that drift; the
# ratio metrics stay exactly scale-invariant and keep the strict bounds.
SHRINK_CSLOPE_TOLERANCE = 1e-3

_LOG_FLOOR = float(np.log(1e-5))


@dataclass(frozen=True)
class DegradationSpec:
    """A degradation kind plus its strength.

    Filter kinds take an odd integer width in mel bins (1 = identity);
    variance_shrink takes a factor in [0, 1] (1.0 = identity, 0 collapses
    every frame to its mean) that pulls each frame toward its mean.
    """

    kind: str
    strength: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown degradation kind {self.kind!r}")
        if self.kind == "variance_shrink":
            if not 0.0 <= self.strength <= 1.0:
                raise ValueError("variance_shrink factor must be in [0, 1]")
        else:
            width = int(self.strength)
            if width != self.strength or width < 1 or width % 2 == 0:
                raise ValueError("filter width must be an odd integer >= 1")


def _gaussian_kernel(width: int) -> np.ndarray:
    sigma = width / 5.0
    k = np.arange(width) - width // 2
    kernel = np.exp(-0.5 * np.square(k / sigma))
    return kernel / kernel.sum()


def degrade(s: LogMelSpectrogram, spec: DegradationSpec) -> LogMelSpectrogram:
    """Apply a degradation along the mel axis, reflective boundaries.

    mel_moving_average and mel_gaussian_blur convolve each frame's mel-bin
    profile with the corresponding kernel; variance_shrink maps each frame
    toward its mean: s' = mean + factor * (s - mean).
    """
    values = s.values
    if spec.kind == "variance_shrink":
        mean = values.mean(axis=0, keepdims=True)
        out = mean + spec.strength * (values - mean)
    else:
        width = int(spec.strength)
        if width == 1:
            out = values.copy()
        else:
            kernel = (
                np.full(width, 1.0 / width)
                if spec.kind == "mel_moving_average"
                else _gaussian_kernel(width)
            )
            # ndimage's "mirror" is reflection without edge duplication
            out = convolve1d(values, kernel, axis=0, mode="mirror")
    return LogMelSpectrogram(out, hop=s.hop, sample_rate=s.sample_rate)


def synth_harmonic_spectrogram(
    n_frames: int,
    period_bins: float,
    amplitude: float,
    n_mels: int = 80,
    base_level: float = -6.0,
    hop: int = 256,
    sample_rate: int = 22050,
) -> LogMelSpectrogram:
    """Frames of sinusoidal ripple across mel bins.

    The ripple has a known quefrency concentration near q = n_mels /
    period_bins; the phase advances per frame so frames are not identical.
    Amplitude 0 produces constant frames, which the transform flags
    degenerate.
    """
    if not 2 <= period_bins <= n_mels / 2:
        raise ValueError("period_bins must lie in [2, n_mels/2]")
    b = np.arange(n_mels)[:, None]
    m = np.arange(n_frames)[None, :]
    values = base_level + amplitude * np.cos(2.0 * np.pi * b / period_bins + 0.7 * m)
    return LogMelSpectrogram(np.maximum(values, _LOG_FLOOR), hop=hop, sample_rate=sample_rate)


def noise_spectrogram(rng: np.random.Generator, n_frames: int = 30, n_mels: int = 80) -> LogMelSpectrogram:
    """White-noise log-mel spectrogram clamped at the log floor."""
    values = rng.normal(loc=-6.0, scale=1.2, size=(n_mels, n_frames))
    return LogMelSpectrogram(np.maximum(values, _LOG_FLOOR))


_SERIES_FNS = {
    "hqer": hqer_series,
    "cslope": cslope_series,
    "ccentroid": ccentroid_series,
    "croll95": croll95_series,
}


def _metric_table(s: LogMelSpectrogram, cfg: MetricConfig, series_fns) -> tuple[dict, np.ndarray]:
    qp = quefrency_power(mel_cepstrogram(s))
    ok = ~qp.degenerate & (qp.power[1:, :].sum(axis=0) > 0)
    return {name: fn(qp.power, cfg) for name, fn in series_fns.items()}, ok


@dataclass
class StrengthResult:
    kind: str
    strength: float
    frames_checked: int
    violations: dict[str, int]
    max_excess: dict[str, float]

    @property
    def passed(self) -> bool:
        return sum(self.violations.values()) == 0


@dataclass
class SuiteReport:
    results: list[StrengthResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_csv(self) -> str:
        names = list(MONOTONICITY_TOLERANCES)
        header = ["kind", "strength", "frames"]
        header += [f"violations_{n}" for n in names] + [f"max_excess_{n}" for n in names]
        lines = [",".join(header)]
        for r in self.results:
            row = [r.kind, format(r.strength, ".6g"), str(r.frames_checked)]
            row += [str(r.violations[n]) for n in names]
            row += [format(r.max_excess[n], ".6g") for n in names]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def run_monotonicity_suite(
    n_spectrograms: int = 100,
    n_frames: int = 30,
    seed: int = DEFAULT_SEED,
    kinds=KINDS,
    filter_strengths=FILTER_STRENGTHS,
    shrink_strengths=SHRINK_STRENGTHS,
    metric_config: MetricConfig | None = None,
    series_fns: dict | None = None,
) -> SuiteReport:
    """Check framewise metric monotonicity under degradation.

    For every noise spectrogram in the fixed-seed suite and every
    (kind, strength) with strength beyond identity, each metric of the
    degraded spectrogram must not exceed the identity baseline's value by
    more than its tolerance, on every frame non-degenerate in both versions.

    ``series_fns`` lets tests inject a fake metric as a negative control.
    """
    cfg = metric_config or MetricConfig()
    fns = series_fns or _SERIES_FNS
    names = list(fns)
    results: dict[tuple, StrengthResult] = {}
    for kind in kinds:
        strengths = shrink_strengths if kind == "variance_shrink" else filter_strengths
        for strength in strengths:
            if strength == (1.0 if kind == "variance_shrink" else 1):
                continue
            results[(kind, strength)] = StrengthResult(
                kind, float(strength), 0,
                {n: 0 for n in names}, {n: 0.0 for n in names},
            )

    rng = np.random.default_rng(seed)
    for _ in range(n_spectrograms):
        base = noise_spectrogram(rng, n_frames=n_frames)
        base_metrics, base_ok = _metric_table(base, cfg, fns)
        for (kind, strength), res in results.items():
            deg_metrics, deg_ok = _metric_table(degrade(base, DegradationSpec(kind, strength)), cfg, fns)
            ok = base_ok & deg_ok
            res.frames_checked += int(ok.sum())
            for name in names:
                tol = MONOTONICITY_TOLERANCES.get(name, 0.0)
                if kind == "variance_shrink" and name == "cslope":
                    tol = SHRINK_CSLOPE_TOLERANCE
                excess = deg_metrics[name][ok] - base_metrics[name][ok]
                bad = excess > tol
                res.violations[name] += int(bad.sum())
                if bad.any():
                    res.max_excess[name] = max(res.max_excess[name], float(excess[bad].max()))
    return SuiteReport(list(results.values()))
