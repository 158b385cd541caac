"""Acceptance gate: one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail line
per criterion.  Criterion 7 needs a local copy of the evaluation corpus and
is skipped when MELCEP_ASC_DIR is unset; the speedup half of criterion 9
needs at least 4 CPU cores.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from melcep.audio import Waveform, load_wav, preprocess, rms_dbfs
from melcep.cepstral import mel_cepstrogram, mel_window, quefrency_power
from melcep.cli import main
from melcep.compare import (
    PitchContour,
    UtteranceBundle,
    dtw_align,
    mel_distances,
    metric_curve_mae,
    pitch_metrics,
    utterance_deltas,
)
from melcep.osmetrics import (
    MetricConfig,
    ccentroid,
    croll95,
    croll95_soft,
    cslope,
    hqer,
    utterance_metrics,
)
from melcep.spectral import LogMelSpectrogram, log_mel, stft
from melcep.stats import UtteranceStats, exact_p, mann_whitney_u, normal_p, summarize
from melcep.synthlab import DegradationSpec, degrade, run_monotonicity_suite, synth_harmonic_spectrogram
from scipy.stats import rankdata

from conftest import SR, speechlike, speechy_frame, tone, write_wav_bytes
from oracles import dtw_enum_min_cost, mw_exact_p_bruteforce, naive_rdft_matrix


def _report(n, text):
    print(f"\nACCEPTANCE {n}: PASS - {text}")


def test_criterion_1_fft_oracle_equivalence(rng):
    start = time.perf_counter()
    frames = np.vstack(
        [np.array([speechy_frame(rng) for _ in range(300)]), rng.normal(-6, 1.5, (700, 80))]
    )
    coeffs = mel_cepstrogram(LogMelSpectrogram(frames.T)).coeffs
    twiddle = naive_rdft_matrix(80)
    window = mel_window(80)
    worst = 0.0
    for m, frame in enumerate(frames):
        windowed = (frame - frame.mean()) * window
        expected = twiddle @ windowed
        worst = max(worst, float(np.abs(coeffs[:, m] - expected).max()))
    elapsed = time.perf_counter() - start
    assert worst < 1e-9, f"max abs error {worst}"
    assert elapsed < 5.0, f"runtime {elapsed:.2f} s"
    _report(1, f"1000-frame transform vs naive DFT, max err {worst:.2e}, {elapsed:.2f} s")


def test_criterion_2_dtw_oracle_equivalence():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    for _ in range(200):
        n1 = int(rng.integers(1, 11))
        n2 = int(rng.integers(1, 11))
        a = rng.normal(0, 1, (n1, 3))
        b = rng.normal(0, 1, (n2, 3))
        for dist in ("l2", "cosine"):
            path, cost = dtw_align(a, b, dist)
            if dist == "l2":
                d = np.sqrt(np.square(a[:, None, :] - b[None, :, :]).sum(axis=2))
            else:
                an = a / np.linalg.norm(a, axis=1, keepdims=True)
                bn = b / np.linalg.norm(b, axis=1, keepdims=True)
                d = np.maximum(1.0 - an @ bn.T, 0.0)
            assert cost == dtw_enum_min_cost(d)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"runtime {elapsed:.2f} s"
    _report(2, f"200 random pairs equal exhaustive enumeration exactly, {elapsed:.2f} s")


def test_criterion_3_mann_whitney_oracle():
    rng = np.random.default_rng(303)
    for _ in range(50):
        x = rng.normal(0.0, 1.0, 4)
        y = rng.normal(0.6, 1.0, 4)
        assert np.unique(np.concatenate([x, y])).size == 8
        u, p = mann_whitney_u(x, y)
        u_ref, p_ref = mw_exact_p_bruteforce(x, y)
        assert u == u_ref
        assert abs(p - p_ref) < 1e-12

    worst = 0.0
    checked = 0
    for _ in range(60):
        x = rng.normal(0.0, 1.0, 6)
        y = rng.normal(0.7, 1.0, 6)
        pooled = np.concatenate([x, y])
        if np.unique(pooled).size != 12:
            continue
        u, _ = mann_whitney_u(x, y)
        worst = max(worst, abs(normal_p(u, 6, 6, rankdata(pooled)) - exact_p(u, 6, 6)))
        checked += 1
    assert checked >= 50
    assert worst < 0.03, f"normal vs exact deviation {worst}"
    _report(3, f"exact branch within 1e-12 of enumeration; normal branch within {worst:.4f} of exact")


def test_criterion_4_frame_rate_reproduction():
    w = Waveform(np.zeros(SR), SR)
    frames = stft(w).shape[1]
    assert frames == 86
    mel = log_mel(Waveform(speechlike(np.random.default_rng(4), 1.0), SR))
    assert mel.n_frames == 86
    _report(4, "1 s at 22050 Hz yields exactly 86 frames")


def test_criterion_5_monotonicity_suite():
    start = time.perf_counter()
    report = run_monotonicity_suite(n_spectrograms=100, n_frames=30)
    elapsed = time.perf_counter() - start
    total_frames = sum(r.frames_checked for r in report.results)
    violations = {
        (r.kind, r.strength): r.violations for r in report.results if not r.passed
    }
    assert report.passed, f"monotonicity violations: {violations}"
    assert elapsed < 30.0, f"runtime {elapsed:.2f} s"
    _report(5, f"zero violations over {total_frames} degraded-frame checks, {elapsed:.2f} s")


def test_criterion_6_trivial_value_suite(rng, tmp_path):
    q = 41
    uniform = np.ones(q)
    uniform[0] = 0.0
    cfg = MetricConfig()

    # metric trivials
    assert hqer(uniform, cfg) == pytest.approx(0.775, abs=1e-12)
    point3 = np.zeros(q)
    point3[3] = 1.0
    assert hqer(point3, cfg) == 0.0
    assert cslope(np.full(q, 2.0), cfg) == pytest.approx(0.0, abs=1e-9)
    line = 10.0 ** (-np.arange(q, dtype=float) / 10.0)
    assert cslope(line, cfg) == pytest.approx(-1.0, abs=1e-6)
    point7 = np.zeros(q)
    point7[7] = 2.0
    assert ccentroid(point7, cfg) == pytest.approx(7.0)
    assert ccentroid(uniform, cfg) == pytest.approx(20.5, abs=1e-12)
    point1 = np.zeros(q)
    point1[1] = 1.0
    assert croll95(point1, cfg) == 1
    assert croll95(uniform, cfg) == 38
    assert croll95_soft(uniform, MetricConfig(soft_tau=0.0)) == pytest.approx(20.5)

    # transform trivials
    const = mel_cepstrogram(LogMelSpectrogram(np.full((80, 1), 3.3)))
    assert np.abs(const.coeffs).max() < 1e-12
    zero_power = quefrency_power(const)
    assert np.abs(zero_power.power).max() < 1e-24
    from melcep.cepstral import MelCepstrogram

    coeffs = np.zeros((q, 1), dtype=complex)
    coeffs[4, 0] = 3.0 + 4.0j
    assert quefrency_power(MelCepstrogram(coeffs, np.zeros(1, bool))).power[4, 0] == pytest.approx(25.0)

    # spectral trivials
    assert np.all(stft(Waveform(np.zeros(2048), SR)) == 0.0)
    floor = log_mel(Waveform(np.zeros(SR), SR))
    assert np.all(floor.values == math.log(1e-5))
    x = speechlike(rng, 0.4)
    s1, s2 = log_mel(Waveform(x, SR)), log_mel(Waveform(2 * x, SR))
    above = s1.values > math.log(1e-5) + 0.7
    assert np.allclose((s2.values - s1.values)[above], math.log(2.0), atol=1e-9)

    # audio trivials
    t30 = tone(30, 2.0, -10)
    assert rms_dbfs(preprocess(Waveform(t30, SR)).samples) - rms_dbfs(t30) < -60
    t440 = tone(440, 1.0, -10)
    assert abs(rms_dbfs(preprocess(Waveform(t440, SR)).samples) + 22.0) < 0.1

    # comparison trivials
    frames = [speechy_frame(rng) for _ in range(10)]
    mel = LogMelSpectrogram(np.asarray(frames).T)
    ident = mel_distances(mel, mel)
    assert ident == (0.0, 0.0, 0.0)
    offset = LogMelSpectrogram(mel.values + 1.0)
    shifted = mel_distances(mel, offset)
    assert shifted.l1 == pytest.approx(1.0, abs=1e-12)
    assert shifted.l2 == pytest.approx(1.0, abs=1e-12)

    f0 = np.array([110.0, 118.0, 0.0, 125.0, 131.0])
    voiced = f0 > 0
    ref = PitchContour(f0, voiced)
    same = pitch_metrics(ref, ref)
    assert same == (0.0, pytest.approx(1.0), 0.0)
    plus5 = pitch_metrics(ref, PitchContour(np.where(voiced, f0 + 5, 0.0), voiced))
    assert plus5.f0_rmse == pytest.approx(5.0)
    assert plus5.pearson_r == pytest.approx(1.0)
    assert plus5.vuv_error == 0.0
    mismatch = pitch_metrics(
        PitchContour(np.array([1000.0, 2.0, 0.0, 0.0]), np.array([True, True, False, False])),
        PitchContour(np.array([1000.0, 0.0, 1.0, 0.0]), np.array([True, False, True, False])),
    )
    assert mismatch.vuv_error == pytest.approx(0.5)

    um = utterance_metrics(quefrency_power(mel_cepstrogram(mel)), cfg)
    assert metric_curve_mae(um, um) == (0.0, 0.0, 0.0, 0.0)
    bundle = UtteranceBundle(duration_s=1.0, metrics=um, pitch=ref, token_count=12)
    deltas = utterance_deltas(bundle, bundle)
    assert deltas.delta_mu_f0 == 0.0 and deltas.delta_spr == 0.0 and deltas.delta_hqer == 0.0
    scaled = UtteranceBundle(
        duration_s=1.0,
        metrics=um,
        pitch=PitchContour(np.where(voiced, f0 * 1.1, 0.0), voiced),
        token_count=12,
    )
    d = utterance_deltas(bundle, scaled)
    assert d.delta_mu_f0 == pytest.approx(0.1 * f0[voiced].mean())
    assert d.delta_sigma_f0 == pytest.approx(0.1 * f0[voiced].std())

    a = np.random.default_rng(6).normal(0, 1, (5, 3))
    path, cost = dtw_align(a, a, "l2")
    assert cost == 0.0 and np.array_equal(path.i, path.j)
    b = np.insert(a, 2, a[2], axis=0)
    _, cost = dtw_align(a, b, "l2")
    assert cost == 0.0

    # stats trivials
    s = summarize([UtteranceStats("a", duration_s=4.0), UtteranceStats("b", duration_s=6.0)])
    assert s.measures["duration_s"].mean == 5.0 and s.measures["duration_s"].std == 1.0
    single = summarize([UtteranceStats("a", duration_s=3.0)])
    assert single.measures["duration_s"].std == 0.0
    _, p = mann_whitney_u([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert p >= 0.99

    # synthlab trivials
    noise = LogMelSpectrogram(np.random.default_rng(7).normal(-6, 1.2, (80, 6)))
    assert np.array_equal(degrade(noise, DegradationSpec("mel_moving_average", 1)).values, noise.values)
    collapsed = degrade(noise, DegradationSpec("variance_shrink", 0.0))
    qp = quefrency_power(mel_cepstrogram(collapsed))
    assert qp.degenerate.all() and np.abs(qp.power).max() < 1e-12
    flat = synth_harmonic_spectrogram(4, 16, 0.0)
    assert quefrency_power(mel_cepstrogram(flat)).degenerate.all()

    # CLI trivials
    manifest = tmp_path / "empty.csv"
    manifest.write_text("utterance_id,ref_wav\n")
    assert main(["features", "--manifest", str(manifest), "--out", str(tmp_path / "o")]) == 1
    silent = tmp_path / "silent.wav"
    write_wav_bytes(silent, np.zeros(SR), SR, "pcm16")
    manifest.write_text(f"utterance_id,ref_wav\nsil,{silent}\n")
    assert main(["features", "--manifest", str(manifest), "--out", str(tmp_path / "o2")]) == 2
    assert main(["synthlab", "--out", str(tmp_path / "lab"), "--spectrograms", "3", "--inject-fault"]) == 3

    _report(6, "all stated trivial examples hold at their exact values")


@pytest.mark.skipif(
    "MELCEP_ASC_DIR" not in os.environ,
    reason="set MELCEP_ASC_DIR to the evaluation corpus test-set wav directory",
)
def test_criterion_7_corpus_reproduction():
    corpus_dir = Path(os.environ["MELCEP_ASC_DIR"])
    wavs = sorted(corpus_dir.rglob("*.wav"))
    assert wavs, f"no wav files under {corpus_dir}"
    cfg = MetricConfig()
    durations = []
    means = {"hqer": [], "cslope": [], "ccentroid": [], "croll95": []}
    for wav in wavs:
        w = preprocess(load_wav(wav))
        durations.append(w.duration_s)
        um = utterance_metrics(quefrency_power(mel_cepstrogram(log_mel(w))), cfg)
        for name in means:
            means[name].append(um.means[name])
    duration_mean = float(np.mean(durations))
    observed = {name: float(np.mean(v)) for name, v in means.items()}
    targets = {"hqer": 0.139, "cslope": -0.406, "ccentroid": 5.09, "croll95": 23.8}
    for name, target in targets.items():
        assert abs(observed[name] - target) <= 0.10 * abs(target), (
            f"{name}: observed {observed[name]:.4g}, target {target} +- 10%"
        )
    assert abs(duration_mean - 8.99) <= 0.25, f"duration mean {duration_mean:.3f}"
    _report(7, f"test-set means reproduce reference values: {observed}, duration {duration_mean:.2f} s")


def test_criterion_8_desk_scale_exclusions_documented(rng, tmp_path):
    """Trained-model outcomes (reference L1 0.746, MAE(HQER) 5.82% and the
    training curves) need GPU model training and are out of desk scope; the
    compare pipeline is instead validated on fixture pairs with analytically
    known distances (criteria 1-6) and on the aggregate-table format here."""
    frames = [speechy_frame(rng) for _ in range(8)]
    mel = LogMelSpectrogram(np.asarray(frames).T)
    assert mel_distances(mel, mel) == (0.0, 0.0, 0.0)
    offset = LogMelSpectrogram(mel.values + 0.5)
    assert mel_distances(mel, offset).l1 == pytest.approx(0.5, abs=1e-12)

    x = 0.08 * np.random.default_rng(8).normal(0, 1, int(0.5 * SR))
    ref, syn = tmp_path / "r.wav", tmp_path / "s.wav"
    write_wav_bytes(ref, x, SR, "float32")
    write_wav_bytes(syn, x, SR, "float32")
    manifest = tmp_path / "m.csv"
    manifest.write_text(f"utterance_id,ref_wav,syn_wav\npair,{ref},{syn}\n")
    out = tmp_path / "out"
    assert main(["compare", "--manifest", str(manifest), "--out", str(out)]) == 0
    labels = [line.split(",")[0] for line in (out / "aggregate.csv").read_text().splitlines()[1:]]
    assert labels == [
        "L1", "L2", "SConv", "f0_RMSE/Hz", "Pearson r", "E_V/UV",
        "MAE(HQER)/%", "MAE(CSlope)/dB/bin", "MAE(CCentroid)/bin", "MAE(CRoll95)/bin",
    ]
    _report(8, "trained-model values excluded; compare pipeline validated on analytic fixtures")


@pytest.fixture(scope="module")
def throughput_corpus(tmp_path_factory):
    """About 18 minutes of audio: 120 utterances of 9 s each."""
    root = tmp_path_factory.mktemp("throughput")
    rng = np.random.default_rng(99)
    rows = ["utterance_id,ref_wav"]
    for k in range(120):
        wav = root / f"u{k:03d}.wav"
        write_wav_bytes(wav, speechlike(rng, 9.0), SR, "float32")
        rows.append(f"u{k:03d},{wav}")
    manifest = root / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n")
    return root, manifest


def test_criterion_9_throughput_and_determinism(throughput_corpus, tmp_path):
    root, manifest = throughput_corpus
    out_serial = tmp_path / "serial"
    start = time.perf_counter()
    assert main(["features", "--manifest", str(manifest), "--out", str(out_serial)]) == 0
    serial_s = time.perf_counter() - start
    assert serial_s < 60.0, f"single-threaded run took {serial_s:.1f} s"

    out_par = tmp_path / "par"
    start = time.perf_counter()
    assert main(["features", "--manifest", str(manifest), "--out", str(out_par), "--workers", "4"]) == 0
    par_s = time.perf_counter() - start

    for k in range(120):
        for suffix in (".lmel", ".metrics.csv"):
            name = f"u{k:03d}{suffix}"
            assert (out_serial / name).read_bytes() == (out_par / name).read_bytes()

    if os.cpu_count() and os.cpu_count() >= 4:
        assert serial_s / par_s >= 3.0, f"speedup {serial_s / par_s:.2f}x"
        note = f"speedup {serial_s / par_s:.2f}x at 4 workers"
    else:
        note = f"speedup check skipped ({os.cpu_count()} core(s) available)"
    _report(9, f"18 min of audio in {serial_s:.1f} s single-threaded; byte-identical parallel output; {note}")
