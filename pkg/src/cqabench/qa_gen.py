"""Question-answer pair generation from selected charts.

Prompts are versioned template files under prompts/; each provider call
yields one draft pair so that reruns resume cheaply from the response
cache. Quotas are expressed per category (optionally per aspect) and are
honored exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .corpus import ChartRecord
from .errors import (
    EmptyGeneration,
    MissingPaperContext,
    QuotaInfeasible,
    UnknownCategory,
    UnparseableOutput,
    ValidationError,
)
from .gateway import Gateway, ProviderRef, Request

PROMPTS_DIR = Path(__file__).parent / "prompts"

TIER_FQA = "FQA"
TIER_AQA = "AQA"

CATEGORIES = ("Visual", "Data", "Inference", "ChartDescription", "KBInference")
ASPECTS = {
    "Visual": ("Color", "Style", "Text", "Layout"),
    "Data": ("Point", "Interval", "Calculation"),
}
# Published aspect mix used to split a bare category quota across aspects.
ASPECT_WEIGHTS = {
    "Visual": {"Color": 211, "Style": 133, "Text": 213, "Layout": 45},
    "Data": {"Point": 130, "Interval": 102, "Calculation": 84},
}
TEMPLATE_FILES = {
    "Visual": "visual.md",
    "Data": "data.md",
    "Inference": "inference.md",
    "ChartDescription": "chart_description.md",
    "KBInference": "kb_inference.md",
}

STATUSES = ("Draft", "Filtered", "UnderReview", "Valid", "Flawed")


def answer_kind_for(category: str, aspect: Optional[str]) -> str:
    if category == "Data":
        return "numeric-derivation" if aspect == "Calculation" else "numeric-retrieval"
    return "open-ended"


@dataclass
class QAPair:
    qa_id: str
    chart_id: str
    tier: str                      # FQA | AQA
    category: str
    question: str
    reference_answer: str
    aspect: Optional[str] = None
    answer_kind: str = "open-ended"
    status: str = "Draft"
    axis_id: Optional[str] = None  # required at scoring time for numeric kinds
    selection_method: Optional[str] = None
    provenance: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.category not in CATEGORIES:
            raise UnknownCategory(self.category)
        if (self.tier == TIER_AQA) != (self.category == "KBInference"):
            raise ValidationError(
                f"{self.qa_id}: tier {self.tier} inconsistent with category {self.category}"
            )
        has_aspect = self.aspect is not None
        if has_aspect != (self.category in ASPECTS):
            raise ValidationError(f"{self.qa_id}: aspect must be present iff category is Visual or Data")
        if has_aspect and self.aspect not in ASPECTS[self.category]:
            raise ValidationError(f"{self.qa_id}: unknown aspect {self.aspect!r} for {self.category}")
        if self.answer_kind != answer_kind_for(self.category, self.aspect):
            raise ValidationError(f"{self.qa_id}: answer_kind {self.answer_kind!r} not allowed here")
        if self.status not in STATUSES:
            raise ValidationError(f"{self.qa_id}: unknown status {self.status!r}")
        if not self.question.strip() or not self.reference_answer.strip():
            raise ValidationError(f"{self.qa_id}: question and reference answer must be non-empty")

    def to_record(self) -> dict:
        rec = {
            "qa_id": self.qa_id,
            "chart_id": self.chart_id,
            "tier": self.tier,
            "category": self.category,
            "aspect": self.aspect,
            "question": self.question,
            "reference_answer": self.reference_answer,
            "answer_kind": self.answer_kind,
            "status": self.status,
            "axis_id": self.axis_id,
            "provenance": self.provenance,
        }
        if self.selection_method:
            rec["selection_method"] = self.selection_method
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "QAPair":
        pair = cls(
            qa_id=rec["qa_id"],
            chart_id=rec["chart_id"],
            tier=rec["tier"],
            category=rec["category"],
            aspect=rec.get("aspect"),
            question=rec["question"],
            reference_answer=rec["reference_answer"],
            answer_kind=rec.get("answer_kind", answer_kind_for(rec["category"], rec.get("aspect"))),
            status=rec.get("status", "Draft"),
            axis_id=rec.get("axis_id"),
            selection_method=rec.get("selection_method"),
            provenance=rec.get("provenance", {}),
        )
        pair.validate()
        return pair


def load_template(name: str) -> tuple[str, str]:
    """Return (version, body) for a template file under prompts/."""
    text = (PROMPTS_DIR / name).read_text(encoding="utf-8")
    head, _, body = text.partition("\n---\n")
    version = head.split(":", 1)[1].strip() if head.startswith("version:") else "0"
    return version, body.lstrip("\n")


def render_prompt(
    category: str,
    chart: ChartRecord,
    paper_context: Optional[str] = None,
    aspect: Optional[str] = None,
    axis_id: Optional[str] = None,
    variant: Optional[tuple[int, int]] = None,
) -> tuple[str, str]:
    """Fill the category template; returns (prompt text, prompt version)."""
    if category not in TEMPLATE_FILES:
        raise UnknownCategory(category)
    if category == "KBInference" and not (paper_context and paper_context.strip()):
        raise MissingPaperContext()
    version, body = load_template(TEMPLATE_FILES[category])
    variant_note = ""
    if variant is not None:
        i, total = variant
        variant_note = (
            f"\nThis is request {i} of {total} for this chart and category; "
            "make it distinct from the others.\n"
        )
    prompt = body.format(
        caption=chart.caption,
        aspect=aspect or "",
        axis_id=axis_id or "",
        paper_context=paper_context or "",
        variant_note=variant_note,
    )
    return prompt, version


_QA_BLOCK = re.compile(r"QUESTION:\s*(.+?)\s*ANSWER:\s*(.+?)\s*(?=QUESTION:|$)", re.S)

RETRY_SUFFIX = (
    "\n\nYour previous reply could not be parsed. Reply again using exactly "
    "the two labeled lines:\nQUESTION: ...\nANSWER: ..."
)


def parse_qa_blocks(text: str) -> list[tuple[str, str]]:
    return [(q.strip(), a.strip()) for q, a in _QA_BLOCK.findall(text)]


def generate_qa(
    chart: ChartRecord,
    category: str,
    provider: ProviderRef,
    gateway: Gateway,
    paper_context: Optional[str] = None,
    aspect: Optional[str] = None,
    variant: Optional[tuple[int, int]] = None,
    qa_id: str = "draft",
) -> list[QAPair]:
    """One provider call -> one or more draft pairs; one reprompt on garbage."""
    if category == "KBInference" and not chart.is_chart_abstract:
        raise ValidationError(
            f"chart {chart.chart_id!r} was not selected as a chart abstract; "
            "knowledge-based generation is restricted to chart abstracts"
        )
    axis_id = None
    if category == "Data":
        # Numeric pairs are scored against an axis; bind the first one by id.
        if not chart.axes:
            raise QuotaInfeasible(f"chart {chart.chart_id!r} has no axis metadata for Data questions")
        axis_id = sorted(ax.axis_id for ax in chart.axes)[0]

    prompt, version = render_prompt(
        category, chart, paper_context=paper_context, aspect=aspect,
        axis_id=axis_id, variant=variant,
    )
    exchange = gateway.complete(provider, Request(system="", user=prompt, expects="structured"))
    blocks = parse_qa_blocks(exchange.response.text)
    if not blocks:
        retry = gateway.complete(
            provider, Request(system="", user=prompt + RETRY_SUFFIX, expects="structured")
        )
        blocks = parse_qa_blocks(retry.response.text)
        if not blocks:
            raise UnparseableOutput(retry.response.text[:200])
    pairs = []
    for i, (question, answer) in enumerate(blocks):
        if not question or not answer:
            raise EmptyGeneration()
        pair = QAPair(
            qa_id=qa_id if len(blocks) == 1 else f"{qa_id}-{i}",
            chart_id=chart.chart_id,
            tier=TIER_AQA if category == "KBInference" else TIER_FQA,
            category=category,
            aspect=aspect,
            question=question,
            reference_answer=answer,
            answer_kind=answer_kind_for(category, aspect),
            axis_id=axis_id,
            provenance={"provider": provider.provider_id, "prompt_version": version},
        )
        pair.validate()
        pairs.append(pair)
    return pairs


def expand_quotas(quotas: dict[str, int]) -> dict[tuple[str, Optional[str]], int]:
    """Normalize quota keys to (category, aspect) counts.

    Bare "Visual" or "Data" totals are split across their aspects with the
    published mix, largest remainder first, so the category total is hit
    exactly.
    """
    expanded: dict[tuple[str, Optional[str]], int] = {}
    for key, count in quotas.items():
        if count < 0:
            raise QuotaInfeasible(f"negative quota for {key!r}")
        if "/" in key:
            category, aspect = key.split("/", 1)
            if category not in CATEGORIES:
                raise UnknownCategory(category)
            if category not in ASPECTS or aspect not in ASPECTS[category]:
                raise QuotaInfeasible(f"category {category!r} has no aspect {aspect!r}")
            expanded[(category, aspect)] = expanded.get((category, aspect), 0) + count
        elif key in ASPECTS:
            weights = ASPECT_WEIGHTS[key]
            total_w = sum(weights.values())
            shares = {a: count * w / total_w for a, w in weights.items()}
            base = {a: int(shares[a]) for a in weights}
            leftover = count - sum(base.values())
            by_remainder = sorted(weights, key=lambda a: (-(shares[a] - base[a]), a))
            for a in by_remainder[:leftover]:
                base[a] += 1
            for a, c in base.items():
                if c:
                    expanded[(key, a)] = expanded.get((key, a), 0) + c
        elif key in CATEGORIES:
            expanded[(key, None)] = expanded.get((key, None), 0) + count
        else:
            raise UnknownCategory(key)
    return {k: v for k, v in expanded.items() if v > 0}


def generate_benchmark(
    fqa_charts: list[ChartRecord],
    aqa_charts: list[tuple[ChartRecord, str]],
    quotas: dict[str, int],
    provider: ProviderRef,
    seed: int,
    gateway: Gateway,
) -> list[QAPair]:
    """Emit draft pairs honoring the quotas exactly, round-robin over charts."""
    expanded = expand_quotas(quotas)
    rng = np.random.default_rng(seed)

    fqa_order = sorted(fqa_charts, key=lambda c: c.chart_id)
    aqa_order = sorted(aqa_charts, key=lambda pair: pair[0].chart_id)
    fqa_order = [fqa_order[i] for i in rng.permutation(len(fqa_order))]
    aqa_order = [aqa_order[i] for i in rng.permutation(len(aqa_order))]

    pairs: list[QAPair] = []
    counter = 0
    for (category, aspect) in sorted(expanded, key=lambda k: (CATEGORIES.index(k[0]), k[1] or "")):
        count = expanded[(category, aspect)]
        if category == "KBInference":
            pool = aqa_order
        else:
            pool = [(c, None) for c in fqa_order]
            if category == "Data":
                pool = [(c, ctx) for c, ctx in pool if c.axes]
        if not pool:
            raise QuotaInfeasible(f"no eligible charts for {category}" + (f"/{aspect}" if aspect else ""))
        per_chart: dict[str, int] = {}
        for i in range(count):
            chart, context = pool[i % len(pool)]
            per_chart[chart.chart_id] = per_chart.get(chart.chart_id, 0) + 1
        seen: dict[str, int] = {}
        for i in range(count):
            chart, context = pool[i % len(pool)]
            seen[chart.chart_id] = seen.get(chart.chart_id, 0) + 1
            counter += 1
            generated = generate_qa(
                chart,
                category,
                provider,
                gateway,
                paper_context=context,
                aspect=aspect,
                variant=(seen[chart.chart_id], per_chart[chart.chart_id]),
                qa_id=f"qa{counter:05d}",
            )
            pair = generated[0]  # one call, one pair
            pair.selection_method = "abstract" if category == "KBInference" else "sampled"
            pairs.append(pair)
    return pairs
