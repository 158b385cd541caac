"""Corpus-level descriptive statistics and the Mann-Whitney U test.

The summary table mirrors the usual corpus-comparison layout: one row per
measure (duration, phonemes per utterance, speaking rate, pitch mean and
std, and the four oversmoothing metrics), reported as mean, std, median and
count.  Two corpora are compared measure-by-measure with a two-sided
Mann-Whitney U test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

MEASURES = (
    "duration_s",
    "phonemes_per_utterance",
    "spr",
    "mu_f0",
    "sigma_f0",
    "hqer",
    "cslope",
    "ccentroid",
    "croll95",
)

# Largest combined sample size handled by exact enumeration (untied samples).
EXACT_MAX_N = 12


@dataclass
class UtteranceStats:
    """Per-utterance measures entering a corpus summary; None marks missing."""

    utterance_id: str
    duration_s: float | None = None
    phonemes_per_utterance: float | None = None
    spr: float | None = None
    mu_f0: float | None = None
    sigma_f0: float | None = None
    hqer: float | None = None
    cslope: float | None = None
    ccentroid: float | None = None
    croll95: float | None = None


@dataclass
class MeasureSummary:
    mean: float
    std: float
    median: float
    count: int


@dataclass
class CorpusSummary:
    measures: dict[str, MeasureSummary] = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["measure,mean,std,median,count"]
        for name in MEASURES:
            if name in self.measures:
                m = self.measures[name]
                lines.append(f"{name},{m.mean:.6g},{m.std:.6g},{m.median:.6g},{m.count}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            name: {
                "mean": float(format(m.mean, ".6g")),
                "std": float(format(m.std, ".6g")),
                "median": float(format(m.median, ".6g")),
                "count": m.count,
            }
            for name, m in self.measures.items()
        }
        return json.dumps(payload)


def measure_values(corpus: list[UtteranceStats], name: str) -> np.ndarray:
    vals = [getattr(u, name) for u in corpus if getattr(u, name) is not None]
    return np.asarray(vals, dtype=np.float64)


def summarize(corpus: list[UtteranceStats], ddof: int = 0) -> CorpusSummary:
    """Per-measure mean/std/median/count over a corpus of utterances.

    Utterances missing a measure are skipped for that measure only; the
    count records how many contributed.  The std divisor is N by default
    (population std), configurable through ``ddof``.
    """
    if not corpus:
        raise ValueError("empty corpus")
    summary = CorpusSummary()
    for name in MEASURES:
        vals = measure_values(corpus, name)
        if vals.size == 0:
            continue
        summary.measures[name] = MeasureSummary(
            mean=float(np.mean(vals)),
            std=float(np.std(vals, ddof=ddof)) if vals.size > ddof else 0.0,
            median=float(np.median(vals)),
            count=int(vals.size),
        )
    return summary


def _u_statistic(x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """U for x (count of (x, y) pairs with x > y, ties counted half)."""
    n1 = x.size
    ranked = rankdata(np.concatenate([x, y]))
    r1 = ranked[:n1].sum()
    return r1 - n1 * (n1 + 1) / 2.0, ranked

def exact_u_counts(n1: int, n2: int) -> np.ndarray:
    """Null distribution of U: counts[u] = number of rank assignments with U = u.

    Built by dynamic programming over the ranks: c[j][u] counts the ways to
    pick j of the first i ranks so that the chosen ranks exceed u = sum - j(j+1)/2
    smaller unchosen ones.
    """
    total_u = n1 * n2
    counts = np.zeros((n1 + 1, total_u + 1), dtype=np.float64)
    counts[0, 0] = 1.0
    for i in range(1, n1 + n2 + 1):
        for j in range(min(i, n1), 0, -1):
            # picking rank i as the j-th chosen item adds i - j to U
            add = i - j
            if add > total_u:
                continue
            counts[j, add:] += counts[j - 1, : total_u + 1 - add]
    return counts[n1]


def exact_p(u: float, n1: int, n2: int) -> float:
    """Two-sided exact p: probability of a U at least as extreme as observed."""
    counts = exact_u_counts(n1, n2)
    total = counts.sum()
    lo = min(u, n1 * n2 - u)
    hi = n1 * n2 - lo
    u_values = np.arange(counts.size)
    p = (counts[u_values <= lo].sum() + counts[u_values >= hi].sum()) / total
    return min(1.0, float(p))


def normal_p(u: float, n1: int, n2: int, ranked: np.ndarray) -> float:
    """Two-sided normal approximation with tie-corrected variance and
    continuity correction 0.5 (deviations smaller than the correction are
    treated as zero)."""
    n = n1 + n2
    _, tie_counts = np.unique(ranked, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts))
    t_factor = 1.0 - tie_term / (n**3 - n)
    if t_factor <= 0.0:
        return 1.0
    sd = math.sqrt(t_factor * n1 * n2 * (n + 1) / 12.0)
    z = max(0.0, abs(u - n1 * n2 / 2.0) - 0.5) / sd
    return math.erfc(z / math.sqrt(2.0))


def mann_whitney_u(x, y) -> tuple[float, float]:
    """Mann-Whitney U statistic and two-sided p-value.

    U counts the (x, y) pairs with x above y (midranks for ties).  The
    p-value comes from exact enumeration of the null U distribution when the
    combined sample has at most 12 untied values, and otherwise from the
    tie-corrected normal approximation with continuity correction.  When all
    values are identical the p-value is 1 by convention.

    Returns
    -------
    (U, p)
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n1, n2 = x.size, y.size
    if n1 < 1 or n2 < 1:
        raise ValueError("both samples must be non-empty")
    u, ranked = _u_statistic(x, y)
    pooled = np.concatenate([x, y])
    has_ties = np.unique(pooled).size < pooled.size
    if not has_ties and n1 + n2 <= EXACT_MAX_N:
        return float(u), exact_p(u, n1, n2)
    return float(u), normal_p(u, n1, n2, ranked)
