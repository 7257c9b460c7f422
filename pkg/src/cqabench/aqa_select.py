"""Chart-abstract selection: per-model relevance ranking plus cross-model vote.

For each paper, every configured model summarizes each candidate chart and
rates how directly it reflects the paper's abstract and conclusion; the
models' argmax picks are then combined by strict majority. Disagreement
escalates to one extra tie-breaking model, and only then to a manual flag.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .corpus import ChartRecord, PaperRecord
from .errors import ProviderError, ProviderFailure, UnparseableRelevance
from .gateway import Gateway, ProviderRef, Request
from .qa_gen import load_template


@dataclass
class ModelPick:
    model_id: str
    chart_id: str
    relevance: dict[str, float]   # chart_id -> score in [0, 100]
    summaries: dict[str, str]


@dataclass
class AbstractSelection:
    paper_id: str
    per_model_picks: list[ModelPick] = field(default_factory=list)
    winner: Optional[str] = None
    vote_counts: dict[str, int] = field(default_factory=dict)
    escalated: bool = False
    flagged: Optional[str] = None  # None | "manual" | "skipped"
    failures: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "paper_id": self.paper_id,
            "winner": self.winner,
            "votes": dict(sorted(self.vote_counts.items())),
            "escalated": self.escalated,
            "flagged": self.flagged,
            "picks": [
                {"model": p.model_id, "chart_id": p.chart_id} for p in self.per_model_picks
            ],
        }


_RELEVANCE = re.compile(r"RELEVANCE:\s*([-+]?\d+(?:\.\d+)?)")
_SUMMARY = re.compile(r"SUMMARY:\s*(.*?)(?:\n[A-Z_]+:|\Z)", re.S)


def model_pick(
    paper: PaperRecord,
    charts: list[ChartRecord],
    provider: ProviderRef,
    gateway: Gateway,
) -> ModelPick:
    """One model's argmax over the paper's charts; ties go to the lowest index."""
    if not charts:
        raise ValueError("paper has no charts to rank")
    _, body = load_template("abstract_pick.md")
    relevance: dict[str, float] = {}
    summaries: dict[str, str] = {}
    for chart in charts:
        prompt = body.format(
            abstract=paper.abstract_text,
            conclusion=paper.conclusion_text,
            caption=chart.caption,
        )
        exchange = gateway.complete(provider, Request(system="", user=prompt, expects="structured"))
        text = exchange.response.text
        m = _RELEVANCE.search(text)
        if not m:
            raise UnparseableRelevance(chart.chart_id, text[:200])
        score = float(m.group(1))
        if not 0 <= score <= 100:
            score = min(100.0, max(0.0, score))
        relevance[chart.chart_id] = score
        s = _SUMMARY.search(text)
        summaries[chart.chart_id] = s.group(1).strip() if s else ""
    best = max(range(len(charts)), key=lambda i: (relevance[charts[i].chart_id], -i))
    return ModelPick(
        model_id=provider.provider_id,
        chart_id=charts[best].chart_id,
        relevance=relevance,
        summaries=summaries,
    )


def majority_vote(picks: list[str]) -> Optional[str]:
    """Strict majority (> half the votes), else None."""
    if not picks:
        raise ValueError("majority_vote needs at least one pick")
    counts = Counter(picks)
    chart_id, top = counts.most_common(1)[0]
    if top * 2 > len(picks):
        return chart_id
    return None


def select_chart_abstract(
    paper: PaperRecord,
    charts: list[ChartRecord],
    providers: list[ProviderRef],
    gateway: Gateway,
    escalation_provider: Optional[ProviderRef] = None,
) -> AbstractSelection:
    if len(providers) < 2:
        raise ValueError("chart-abstract selection needs at least 2 providers")
    sel = AbstractSelection(paper_id=paper.paper_id)
    for provider in providers:
        try:
            sel.per_model_picks.append(model_pick(paper, charts, provider, gateway))
        except ProviderError as exc:
            sel.failures.append(f"{provider.provider_id}: {exc}")
    if not sel.per_model_picks:
        sel.flagged = "skipped"
        return sel

    votes = [p.chart_id for p in sel.per_model_picks]
    sel.vote_counts = dict(Counter(votes))
    winner = majority_vote(votes)
    if winner is None and escalation_provider is not None:
        sel.escalated = True
        try:
            extra = model_pick(paper, charts, escalation_provider, gateway)
            sel.per_model_picks.append(extra)
            votes.append(extra.chart_id)
            sel.vote_counts = dict(Counter(votes))
            winner = majority_vote(votes)
        except ProviderError as exc:
            sel.failures.append(f"{escalation_provider.provider_id}: {exc}")
    sel.winner = winner
    if winner is None:
        sel.flagged = "manual"
    return sel
