"""Chart complexity vectors and their corpus-level statistics.

A complexity vector has ten binary attributes grouped as visual
(annotation, color, legend, pattern), data-interpretation (axis, element,
scale, formula) and structural (subplot, type) difficulty. The marginal
frequencies, pairwise co-occurrence and score histogram of these vectors
are the quantities the chart sampler tries to preserve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptySet, EmptyDomain, MissingCCV, NonBinaryValue, UnknownDomain, WrongArity

# Fixed attribute order; annotation files list their ten values in this order.
DIMENSIONS = (
    "annotation", "color", "legend", "pattern",
    "axis", "element", "scale", "formula",
    "subplot", "type",
)
N_DIMS = len(DIMENSIONS)


@dataclass(frozen=True)
class CCVector:
    """Ten binary complexity attributes (1 = complex)."""

    annotation: int
    color: int
    legend: int
    pattern: int
    axis: int
    element: int
    scale: int
    formula: int
    subplot: int
    type: int

    def __post_init__(self):
        for name in DIMENSIONS:
            v = getattr(self, name)
            if v not in (0, 1):
                raise NonBinaryValue("<inline>", v)

    @classmethod
    def from_bits(cls, bits: Sequence[int], chart_id: str = "<inline>") -> "CCVector":
        if len(bits) != N_DIMS:
            raise WrongArity(len(bits))
        for v in bits:
            if v not in (0, 1):
                raise NonBinaryValue(chart_id, v)
        return cls(*[int(v) for v in bits])

    def bits(self) -> tuple[int, ...]:
        return tuple(getattr(self, name) for name in DIMENSIONS)


def complexity_score(v: CCVector) -> int:
    """Overall complexity: the number of attributes set, in [0, 10]."""
    return sum(v.bits())


@dataclass(frozen=True)
class CCVStats:
    """Marginal, pairwise and score-histogram statistics over a chart set."""

    n: int
    marginals: tuple[float, ...]            # P(bit k = 1), length 10
    pairwise: tuple[tuple[float, ...], ...] # P(bit i = 1 and bit j = 1), 10x10
    histogram: tuple[int, ...]              # counts of scores 0..10, length 11


def _bit_matrix(charts: Iterable) -> np.ndarray:
    rows = []
    for chart in charts:
        if chart.ccv is None:
            raise MissingCCV(chart.chart_id)
        rows.append(chart.ccv.bits())
    if not rows:
        raise EmptySet("cannot compute statistics over zero charts")
    return np.asarray(rows, dtype=np.float64)


def compute_stats(charts: Iterable) -> CCVStats:
    """Tally marginals, joint both-set frequencies and the score histogram."""
    m = _bit_matrix(charts)
    n = m.shape[0]
    marginals = m.mean(axis=0)
    pairwise = (m.T @ m) / n
    scores = m.sum(axis=1).astype(int)
    histogram = np.bincount(scores, minlength=N_DIMS + 1)
    return CCVStats(
        n=n,
        marginals=tuple(float(x) for x in marginals),
        pairwise=tuple(tuple(float(x) for x in row) for row in pairwise),
        histogram=tuple(int(x) for x in histogram),
    )


def domain_profile(corpus, domain: str, sample_size: int, rng_seed: int = 0) -> tuple[float, ...]:
    """Per-dimension mean complexity over a seeded sample of one domain.

    The sample is uniform without replacement and capped at the number of
    annotated charts available, so requesting more than exist degrades to
    the full-domain mean. Values are Bernoulli means, already in [0, 1];
    no further rescaling is applied.
    """
    in_domain = [c for c in corpus.charts() if c.domain == domain]
    if not in_domain:
        raise UnknownDomain(domain)
    annotated = [c for c in in_domain if c.ccv is not None]
    if not annotated:
        raise EmptyDomain(domain)
    annotated.sort(key=lambda c: c.chart_id)
    k = min(sample_size, len(annotated))
    rng = np.random.default_rng(rng_seed)
    idx = rng.choice(len(annotated), size=k, replace=False)
    m = _bit_matrix(annotated[i] for i in sorted(idx))
    return tuple(float(x) for x in m.mean(axis=0))


@dataclass(frozen=True)
class DistanceReport:
    """Per-dimension marginal gaps between a sample and its corpus."""

    gaps: tuple[float, ...]
    max_gap: float
    mean_pairwise_gap: float


def distribution_distance(sample_stats: CCVStats, corpus_stats: CCVStats) -> DistanceReport:
    s = np.asarray(sample_stats.marginals)
    c = np.asarray(corpus_stats.marginals)
    gaps = np.abs(s - c)
    pair_gap = np.abs(np.asarray(sample_stats.pairwise) - np.asarray(corpus_stats.pairwise))
    return DistanceReport(
        gaps=tuple(float(x) for x in gaps),
        max_gap=float(gaps.max()),
        mean_pairwise_gap=float(pair_gap.mean()),
    )
