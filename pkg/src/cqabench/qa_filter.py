"""Automated validity filter for draft pairs, and filter-vs-human agreement.

The filter checks two criteria: grounding in the chart's visual content,
and (for knowledge-tier pairs only) whether domain knowledge is actually
required. Deleted pairs are archived with a rationale, never discarded.
Agreement with human labels is summarized by a confusion matrix with
Delete as the positive class, plus accuracy/precision/recall and Cohen's
kappa with chance agreement from the marginal products.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Optional

from .corpus import ChartRecord
from .errors import DegenerateMarginals, IdMismatch, UnparseableVerdict
from .gateway import Gateway, ProviderRef, Request
from .qa_gen import QAPair, load_template

KEEP = "Keep"
DELETE = "Delete"


@dataclass
class FilterVerdict:
    qa_id: str
    decision: str                                 # Keep | Delete
    grounded_in_chart: bool
    needs_domain_knowledge: Optional[bool]        # None = n/a (FQA)
    rationale: str

    def to_record(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "decision": self.decision,
            "grounded_in_chart": self.grounded_in_chart,
            "needs_domain_knowledge": self.needs_domain_knowledge,
            "rationale": self.rationale,
        }


_DECISION = re.compile(r"DECISION:\s*(KEEP|DELETE)", re.I)
_GROUNDED = re.compile(r"GROUNDED:\s*(yes|no)", re.I)
_DOMAIN = re.compile(r"DOMAIN_KNOWLEDGE:\s*(yes|no|n/a)", re.I)
_RATIONALE = re.compile(r"RATIONALE:\s*(.*?)(?:\n[A-Z_]+:|\Z)", re.S)

RETRY_SUFFIX = (
    "\n\nYour previous reply could not be parsed. Answer again using exactly the "
    "labeled lines DECISION / GROUNDED / DOMAIN_KNOWLEDGE / RATIONALE."
)


def _parse_verdict(text: str, pair: QAPair) -> Optional[FilterVerdict]:
    dm = _DECISION.search(text)
    gm = _GROUNDED.search(text)
    if not dm or not gm:
        return None
    decision = KEEP if dm.group(1).upper() == "KEEP" else DELETE
    grounded = gm.group(1).lower() == "yes"
    needs: Optional[bool]
    if pair.tier == "FQA":
        needs = None  # criterion does not apply below the knowledge tier
    else:
        nm = _DOMAIN.search(text)
        if not nm:
            return None
        token = nm.group(1).lower()
        needs = None if token == "n/a" else token == "yes"
    rm = _RATIONALE.search(text)
    rationale = rm.group(1).strip() if rm else ""
    # A delete without a failed criterion is not a coherent verdict.
    if decision == DELETE and grounded and needs is not False:
        return None
    return FilterVerdict(
        qa_id=pair.qa_id,
        decision=decision,
        grounded_in_chart=grounded,
        needs_domain_knowledge=needs,
        rationale=rationale,
    )


def filter_qa(
    pair: QAPair,
    chart: ChartRecord,
    provider: ProviderRef,
    gateway: Gateway,
) -> FilterVerdict:
    """One verdict per draft pair; a Keep promotes the pair to Filtered."""
    _, body = load_template("filter.md")
    prompt = body.format(
        caption=chart.caption,
        question=pair.question,
        answer=pair.reference_answer,
        tier=pair.tier,
    )
    exchange = gateway.complete(provider, Request(system="", user=prompt, expects="structured"))
    verdict = _parse_verdict(exchange.response.text, pair)
    if verdict is None:
        retry = gateway.complete(
            provider, Request(system="", user=prompt + RETRY_SUFFIX, expects="structured")
        )
        verdict = _parse_verdict(retry.response.text, pair)
        if verdict is None:
            raise UnparseableVerdict(retry.response.text[:200])
    if verdict.decision == KEEP:
        pair.status = "Filtered"
    return verdict


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion_matrix(
    filter_labels: Mapping[str, str], human_labels: Mapping[str, str]
) -> Confusion:
    """Counts with Delete as the positive class; id sets must match exactly."""
    left = set(filter_labels)
    right = set(human_labels)
    if left != right:
        raise IdMismatch(left - right, right - left)
    tp = fp = fn = tn = 0
    for qa_id in left:
        f_del = filter_labels[qa_id] == DELETE
        h_del = human_labels[qa_id] == DELETE
        if f_del and h_del:
            tp += 1
        elif f_del and not h_del:
            fp += 1
        elif not f_del and h_del:
            fn += 1
        else:
            tn += 1
    return Confusion(tp, fp, fn, tn)


@dataclass(frozen=True)
class AgreementStats:
    confusion: Confusion
    accuracy: float
    precision: Optional[float]
    recall: Optional[float]
    p_o: float
    p_e: float
    kappa: float

    def to_record(self) -> dict:
        c = self.confusion
        return {
            "confusion": {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn},
            "accuracy": round(self.accuracy, 3),
            "precision": None if self.precision is None else round(self.precision, 3),
            "recall": None if self.recall is None else round(self.recall, 3),
            "p_o": round(self.p_o, 5),
            "p_e": round(self.p_e, 5),
            "kappa": round(self.kappa, 4),
        }


def agreement_stats(confusion: Confusion) -> AgreementStats:
    n = confusion.n
    if n < 1:
        raise ValueError("agreement needs at least one labeled pair")
    tp, fp, fn, tn = confusion.tp, confusion.fp, confusion.fn, confusion.tn
    accuracy = (tp + tn) / n
    precision = tp / (tp + fp) if (tp + fp) else None
    recall = tp / (tp + fn) if (tp + fn) else None
    p_o = accuracy
    p_e = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n)
    if p_e == 1.0:
        raise DegenerateMarginals()
    kappa = (p_o - p_e) / (1 - p_e)
    return AgreementStats(
        confusion=confusion,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        p_o=p_o,
        p_e=p_e,
        kappa=kappa,
    )
