"""Scoring of model answers against the benchmark.

Numeric retrieval answers are scored by axis-normalized relative error
with a hard 10% gate; derivation answers need an exact multiset match;
open-ended answers go to an LLM judge (and optionally to the lexical
overlap metrics). Per-pair results aggregate into a per-category
leaderboard.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from math import log10
from typing import Optional

import numpy as np

from .corpus import AxisMeta, Corpus
from .errors import (
    LengthMismatch,
    MissingAxis,
    NonPositiveOnLogAxis,
    UnknownQaId,
    UnparseableScore,
    ZeroVariance,
)
from .gateway import Gateway, ProviderRef, Request
from .qa_gen import ASPECTS, CATEGORIES, QAPair, load_template
from .textmetrics import bleu_4, rouge_l

# Thousands-grouped first so "1,234.5" is one number; a sign is consumed
# only when not glued to a preceding digit (so "1-2" reads as 1 and 2).
_NUMBER = re.compile(
    r"""
    (?<![\d.])
    [-+]?
    (?:
        \d{1,3}(?:,\d{3})+(?:\.\d+)?
      | \d+\.?\d*
      | \.\d+
    )
    (?:[eE][-+]?\d+)?
    """,
    re.X,
)


def extract_numbers(text: str) -> list[float]:
    """All numeric literals in reading order; unit words are simply skipped."""
    out = []
    for m in _NUMBER.finditer(text):
        token = m.group(0).replace(",", "")
        try:
            out.append(float(token))
        except ValueError:
            continue
    return out


def _axis_transform(value: float, axis: AxisMeta) -> float:
    if axis.scale == "logarithmic":
        if value <= 0:
            raise NonPositiveOnLogAxis(value)
        return log10(value)
    return value


def _axis_range(axis: AxisMeta) -> float:
    if axis.scale == "logarithmic":
        return log10(axis.max) - log10(axis.min)
    return axis.max - axis.min


def score_numeric_retrieval(
    reference_values: list[float],
    predicted_values: list[float],
    axis: Optional[AxisMeta],
) -> tuple[float, list[float]]:
    """Axis-normalized scoring; returns (final score, per-pair scores).

    Fewer predictions than references is an automatic zero. Surplus
    predictions collapse to their mean, which is then paired against every
    reference. On a logarithmic axis both sides are log10-transformed and
    the axis length is measured in log space. Each pair scores 1-R only
    when that exceeds 0.9 (strictly), else 0; the final score is the mean.
    """
    if not reference_values:
        raise ValueError("reference values must be non-empty")
    if axis is None:
        raise MissingAxis()
    if len(reference_values) > len(predicted_values):
        return 0.0, []
    preds = predicted_values
    if len(preds) > len(reference_values):
        mean = sum(preds) / len(preds)
        preds = [mean] * len(reference_values)
    d_range = _axis_range(axis)
    per_pair = []
    for truth, pred in zip(reference_values, preds):
        r = abs(_axis_transform(truth, axis) - _axis_transform(pred, axis)) / d_range
        s = (1 - r) if (1 - r) > 0.9 else 0.0
        per_pair.append(s)
    return sum(per_pair) / len(per_pair), per_pair


def score_exact_derivation(reference_values: list[float], predicted_values: list[float]) -> int:
    """1 iff the extracted values agree as multisets (order-free), else 0."""
    if not reference_values:
        raise ValueError("reference values must be non-empty")
    return int(sorted(reference_values) == sorted(predicted_values))


_SCORE = re.compile(r"SCORE:\s*([-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)")

JUDGE_RETRY_SUFFIX = (
    "\n\nYour previous reply could not be parsed. Reply again and finish with "
    "a line of the form SCORE: <number between 0 and 1>."
)


def judge_open_ended(
    question: str,
    reference_answer: str,
    answer: str,
    judge_provider: ProviderRef,
    gateway: Gateway,
) -> tuple[float, str]:
    """Two-phase key-point judging; returns (score, audit note)."""
    _, body = load_template("judge.md")
    prompt = body.format(question=question, reference_answer=reference_answer, answer=answer)
    exchange = gateway.complete(judge_provider, Request(system="", user=prompt, expects="structured"))
    m = _SCORE.search(exchange.response.text)
    if not m:
        retry = gateway.complete(
            judge_provider, Request(system="", user=prompt + JUDGE_RETRY_SUFFIX, expects="structured")
        )
        m = _SCORE.search(retry.response.text)
        if not m:
            raise UnparseableScore(retry.response.text[:200])
    score = float(m.group(1))
    audit = ""
    if score < 0 or score > 1:
        clamped = min(1.0, max(0.0, score))
        audit = f"judge returned {score}, clamped to {clamped}"
        score = clamped
    return score, audit


@dataclass
class EvalResult:
    qa_id: str
    model_id: str
    raw_answer: str
    method: str                      # numeric-retrieval | numeric-derivation | judge | rouge-l | bleu-4
    final_score: float
    extracted_values: list[float] = field(default_factory=list)
    per_pair_scores: list[float] = field(default_factory=list)
    audit: str = ""

    def to_record(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "model_id": self.model_id,
            "method": self.method,
            "final_score": self.final_score,
            "extracted_values": self.extracted_values,
            "per_pair_scores": self.per_pair_scores,
            "audit": self.audit,
            "raw_answer": self.raw_answer,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "EvalResult":
        return cls(
            qa_id=rec["qa_id"],
            model_id=rec["model_id"],
            raw_answer=rec.get("raw_answer", ""),
            method=rec["method"],
            final_score=float(rec["final_score"]),
            extracted_values=list(rec.get("extracted_values", [])),
            per_pair_scores=list(rec.get("per_pair_scores", [])),
            audit=rec.get("audit", ""),
        )


def evaluate_answer(
    pair: QAPair,
    model_id: str,
    answer: str,
    corpus: Optional[Corpus] = None,
    judge_provider: Optional[ProviderRef] = None,
    gateway: Optional[Gateway] = None,
    metrics: tuple[str, ...] = ("numeric", "judge"),
) -> list[EvalResult]:
    """Score one answer with every applicable requested metric."""
    results = []
    if pair.answer_kind == "numeric-retrieval" and "numeric" in metrics:
        ref_vals = extract_numbers(pair.reference_answer)
        pred_vals = extract_numbers(answer)
        axis = None
        if corpus is not None and pair.axis_id:
            axis = corpus.get_chart(pair.chart_id).axis(pair.axis_id)
        if axis is None:
            raise MissingAxis(pair.qa_id)
        try:
            score, per_pair = score_numeric_retrieval(ref_vals, pred_vals, axis)
            audit = ""
        except NonPositiveOnLogAxis as exc:
            score, per_pair, audit = 0.0, [], f"scored 0: {exc}"
        results.append(
            EvalResult(
                qa_id=pair.qa_id, model_id=model_id, raw_answer=answer,
                method="numeric-retrieval", final_score=score,
                extracted_values=pred_vals, per_pair_scores=per_pair, audit=audit,
            )
        )
    elif pair.answer_kind == "numeric-derivation" and "numeric" in metrics:
        ref_vals = extract_numbers(pair.reference_answer)
        pred_vals = extract_numbers(answer)
        score = score_exact_derivation(ref_vals, pred_vals)
        results.append(
            EvalResult(
                qa_id=pair.qa_id, model_id=model_id, raw_answer=answer,
                method="numeric-derivation", final_score=float(score),
                extracted_values=pred_vals,
            )
        )
    elif pair.answer_kind == "open-ended":
        if "judge" in metrics:
            if judge_provider is None or gateway is None:
                raise ValueError("judge metric requested without a judge provider")
            score, audit = judge_open_ended(
                pair.question, pair.reference_answer, answer, judge_provider, gateway
            )
            results.append(
                EvalResult(
                    qa_id=pair.qa_id, model_id=model_id, raw_answer=answer,
                    method="judge", final_score=score, audit=audit,
                )
            )
        if "rouge" in metrics:
            results.append(
                EvalResult(
                    qa_id=pair.qa_id, model_id=model_id, raw_answer=answer,
                    method="rouge-l", final_score=rouge_l(pair.reference_answer, answer),
                )
            )
        if "bleu" in metrics:
            results.append(
                EvalResult(
                    qa_id=pair.qa_id, model_id=model_id, raw_answer=answer,
                    method="bleu-4", final_score=bleu_4(pair.reference_answer, answer),
                )
            )
    return results


def evaluate_answers(
    benchmark: dict[str, QAPair],
    answers: list[dict],
    corpus: Optional[Corpus] = None,
    judge_provider: Optional[ProviderRef] = None,
    gateway: Optional[Gateway] = None,
    metrics: tuple[str, ...] = ("numeric", "judge"),
) -> list[EvalResult]:
    results = []
    for entry in answers:
        qa_id = entry["qa_id"]
        if qa_id not in benchmark:
            raise UnknownQaId(qa_id)
        results.extend(
            evaluate_answer(
                benchmark[qa_id],
                entry["model_id"],
                entry["answer"],
                corpus=corpus,
                judge_provider=judge_provider,
                gateway=gateway,
                metrics=metrics,
            )
        )
    return results


def correlate_with_humans(machine_scores: list[float], human_scores: list[float]) -> dict:
    """Pearson, Spearman (average ranks on ties) and mean absolute error."""
    if len(machine_scores) != len(human_scores):
        raise LengthMismatch(len(machine_scores), len(human_scores))
    if len(machine_scores) < 2:
        raise ValueError("correlation needs at least 2 paired scores")
    x = np.asarray(machine_scores, dtype=float)
    y = np.asarray(human_scores, dtype=float)
    if x.std() == 0 or y.std() == 0:
        raise ZeroVariance()

    def _pearson(a: np.ndarray, b: np.ndarray) -> float:
        a = a - a.mean()
        b = b - b.mean()
        return float((a * b).sum() / np.sqrt((a * a).sum() * (b * b).sum()))

    def _avg_ranks(a: np.ndarray) -> np.ndarray:
        order = np.argsort(a, kind="stable")
        ranks = np.empty(len(a), dtype=float)
        i = 0
        while i < len(a):
            j = i
            while j + 1 < len(a) and a[order[j + 1]] == a[order[i]]:
                j += 1
            ranks[order[i : j + 1]] = (i + j) / 2 + 1
            i = j + 1
        return ranks

    return {
        "pearson": _pearson(x, y),
        "spearman": _pearson(_avg_ranks(x), _avg_ranks(y)),
        "mae": float(np.abs(x - y).mean()),
    }


# Leaderboard column layout: category "All" first, then its aspects.
LEADERBOARD_COLUMNS = (
    ("Visual", None), ("Visual", "Color"), ("Visual", "Style"), ("Visual", "Text"), ("Visual", "Layout"),
    ("Data", None), ("Data", "Point"), ("Data", "Interval"), ("Data", "Calculation"),
    ("Inference", None), ("ChartDescription", None), ("KBInference", None),
)


@dataclass
class Leaderboard:
    models: list[str]
    cells: dict[str, dict[tuple[str, Optional[str]], Optional[float]]]
    overall: dict[str, float]
    warnings: list[str] = field(default_factory=list)

    def header(self) -> list[str]:
        cols = ["Model"]
        for category, aspect in LEADERBOARD_COLUMNS:
            cols.append(f"{category}/{aspect}" if aspect else f"{category}/All")
        cols.append("All")
        return cols

    def rows(self) -> list[list]:
        out = []
        for model in self.models:
            row: list = [model]
            for col in LEADERBOARD_COLUMNS:
                v = self.cells[model].get(col)
                row.append("" if v is None else f"{v:.2f}")
            row.append(f"{self.overall[model]:.2f}")
            out.append(row)
        return out

    def to_csv(self) -> str:
        lines = [",".join(self.header())]
        for row in self.rows():
            lines.append(",".join(str(c) for c in row))
        return "\n".join(lines) + "\n"


def build_leaderboard(
    results: list[EvalResult],
    benchmark: dict[str, QAPair],
    open_ended_method: str = "judge",
) -> Leaderboard:
    """Per-model category/aspect means as percentages, Table-style layout.

    Numeric methods always feed the Data cells; open-ended cells use the
    requested method so lexical-metric tables share this exact layout.
    """
    picked: dict[tuple[str, str], EvalResult] = {}
    for res in results:
        if res.qa_id not in benchmark:
            raise UnknownQaId(res.qa_id)
        pair = benchmark[res.qa_id]
        if pair.answer_kind == "open-ended":
            if res.method != open_ended_method:
                continue
        elif res.method not in ("numeric-retrieval", "numeric-derivation"):
            continue
        picked[(res.model_id, res.qa_id)] = res

    models = sorted({m for m, _ in picked})
    warnings: list[str] = []
    cells: dict[str, dict[tuple[str, Optional[str]], Optional[float]]] = {}
    overall: dict[str, float] = {}
    for model in models:
        scores: dict[tuple[str, Optional[str]], list[float]] = {}
        for (m, qa_id), res in picked.items():
            if m != model:
                continue
            pair = benchmark[qa_id]
            scores.setdefault((pair.category, None), []).append(res.final_score)
            if pair.aspect:
                scores.setdefault((pair.category, pair.aspect), []).append(res.final_score)
        cells[model] = {}
        for col in LEADERBOARD_COLUMNS:
            vals = scores.get(col)
            if vals:
                cells[model][col] = round(100 * sum(vals) / len(vals), 2)
            else:
                cells[model][col] = None
                category, aspect = col
                in_benchmark = any(
                    p.category == category and (aspect is None or p.aspect == aspect)
                    for p in benchmark.values()
                )
                if in_benchmark:
                    warnings.append(f"{model}: no answers for {category}/{aspect or 'All'}")
        answered = [res.final_score for (m, _), res in picked.items() if m == model]
        overall[model] = round(100 * sum(answered) / len(answered), 2) if answered else 0.0
    return Leaderboard(models=models, cells=cells, overall=overall, warnings=warnings)
