import math

import numpy as np
import pytest

from cqabench.corpus import AxisMeta, Corpus
from cqabench.errors import (
    LengthMismatch,
    MissingAxis,
    NonPositiveOnLogAxis,
    UnknownQaId,
    UnparseableScore,
    ZeroVariance,
)
from cqabench.evaluate import (
    EvalResult,
    build_leaderboard,
    correlate_with_humans,
    evaluate_answers,
    extract_numbers,
    judge_open_ended,
    score_exact_derivation,
    score_numeric_retrieval,
)
from cqabench.gateway import Gateway
from cqabench.qa_gen import QAPair

from conftest import LINEAR_AXIS, LOG_AXIS, make_chart


# --- extraction ---------------------------------------------------------------

def test_extract_simple():
    assert extract_numbers("The peak is at 5.2 kHz") == [5.2]


def test_extract_scientific_and_decimal():
    assert extract_numbers("between 1.5e-3 and 0.02") == [0.0015, 0.02]


def test_extract_none():
    assert extract_numbers("no clear trend") == []


def test_extract_signs_thousands_order():
    assert extract_numbers("first -3, then +4.5, total 1,234,567.89") == [-3.0, 4.5, 1234567.89]


def test_extract_leading_dot_and_e_notation():
    assert extract_numbers("about .5 or 2E+2") == [0.5, 200.0]


# --- numeric retrieval ----------------------------------------------------------

def test_retrieval_exact_match():
    score, per = score_numeric_retrieval([5.0], [5.0], LINEAR_AXIS)
    assert score == 1.0


def test_retrieval_two_percent_error():
    score, per = score_numeric_retrieval([5.0], [5.2], LINEAR_AXIS)
    assert score == pytest.approx(0.98)


def test_retrieval_fifteen_percent_error_gated_to_zero():
    score, _ = score_numeric_retrieval([5.0], [6.5], LINEAR_AXIS)
    assert score == 0.0


def test_retrieval_count_rule():
    score, _ = score_numeric_retrieval([3.0, 7.0], [4.0], LINEAR_AXIS)
    assert score == 0.0


def test_retrieval_surplus_predictions_collapse_to_mean():
    # mean(4, 6) = 5 paired against both references
    score, per = score_numeric_retrieval([5.0, 5.5], [4.0, 6.0, 5.0], AxisMeta("y", 0, 100, "linear"))
    r1 = abs(5.0 - 5.0) / 100
    r2 = abs(5.5 - 5.0) / 100
    assert per == pytest.approx([1 - r1, 1 - r2])
    assert score == pytest.approx((2 - r1 - r2) / 2)


def test_retrieval_log_axis_hand_value():
    # log10 space: range = 3; ref 100 -> 2, pred 120 -> log10(120)
    score, _ = score_numeric_retrieval([100.0], [120.0], LOG_AXIS)
    r = abs(2 - math.log10(120)) / 3.0
    assert score == pytest.approx(1 - r)


def test_retrieval_log_axis_rejects_nonpositive():
    with pytest.raises(NonPositiveOnLogAxis):
        score_numeric_retrieval([100.0], [-5.0], LOG_AXIS)


def test_retrieval_missing_axis():
    with pytest.raises(MissingAxis):
        score_numeric_retrieval([1.0], [1.0], None)


def test_gate_discontinuity_at_ten_percent():
    axis = LINEAR_AXIS  # range 10
    just_under, _ = score_numeric_retrieval([5.0], [5.0 + 0.0999 * 10], axis)
    just_over, _ = score_numeric_retrieval([5.0], [5.0 + 0.1001 * 10], axis)
    exactly, _ = score_numeric_retrieval([5.0], [5.0 + 0.1000 * 10], axis)
    assert just_under > 0
    assert just_over == 0.0
    assert exactly == 0.0  # strict inequality: 10.0% error scores 0


def test_scale_covariance():
    rng = np.random.default_rng(1)
    for _ in range(50):
        lo, hi = sorted(rng.uniform(-50, 50, size=2))
        if hi - lo < 1e-6:
            continue
        axis = AxisMeta("y", lo, hi, "linear")
        ref = list(rng.uniform(lo, hi, size=3))
        pred = list(rng.uniform(lo, hi, size=3))
        lam = rng.uniform(0.1, 10)
        scaled_axis = AxisMeta("y", lo * lam, hi * lam, "linear") if lam > 0 else axis
        s1, _ = score_numeric_retrieval(ref, pred, axis)
        s2, _ = score_numeric_retrieval([r * lam for r in ref], [p * lam for p in pred], scaled_axis)
        assert s1 == pytest.approx(s2, abs=1e-9)


def straight_line_score(ref, pred, lo, hi, logscale):
    """Independent rewrite of the scoring rule used as the property oracle."""
    if len(ref) > len(pred):
        return 0.0
    if len(pred) > len(ref):
        m = sum(pred) / len(pred)
        pred = [m] * len(ref)
    if logscale:
        ref = [math.log10(v) for v in ref]
        pred = [math.log10(v) for v in pred]
        rng = math.log10(hi) - math.log10(lo)
    else:
        rng = hi - lo
    total = 0.0
    for t, p in zip(ref, pred):
        r = abs(t - p) / rng
        total += (1 - r) if (1 - r) > 0.9 else 0.0
    return total / len(ref)


def test_against_straight_line_reimplementation():
    rng = np.random.default_rng(7)
    for _ in range(2000):
        logscale = bool(rng.integers(2))
        if logscale:
            lo = float(rng.uniform(0.1, 10))
            hi = lo * float(rng.uniform(2, 1000))
        else:
            lo, hi = sorted(rng.uniform(-100, 100, size=2))
            if hi - lo < 1e-3:
                continue
        n_ref = int(rng.integers(1, 4))
        n_pred = int(rng.integers(0, 5))
        if logscale:
            ref = list(rng.uniform(lo, hi, size=n_ref))
            pred = list(rng.uniform(lo, hi, size=n_pred))
        else:
            ref = list(rng.uniform(lo - 10, hi + 10, size=n_ref))
            pred = list(rng.uniform(lo - 10, hi + 10, size=n_pred))
        axis = AxisMeta("y", lo, hi, "logarithmic" if logscale else "linear")
        got, _ = score_numeric_retrieval(ref, pred, axis)
        assert got == pytest.approx(straight_line_score(ref, pred, lo, hi, logscale), abs=1e-12)


# --- exact derivation -------------------------------------------------------------

def test_derivation_exact():
    assert score_exact_derivation([4.0], [4.0]) == 1
    assert score_exact_derivation([4.0], [5.0]) == 0
    assert score_exact_derivation([2.0, 3.0], [3.0, 2.0]) == 1  # multisets
    assert score_exact_derivation([2.0, 2.0], [2.0]) == 0


# --- judge ----------------------------------------------------------------------

def test_judge_scripted_score(mock_script):
    provider = mock_script(default="REFERENCE_POINTS: a\nANSWER_POINTS: a\nMATCHING: same\nSCORE: 0.75")
    score, audit = judge_open_ended("Q?", "ref", "ans", provider, Gateway())
    assert score == 0.75
    assert audit == ""


def test_judge_clamps_out_of_range(mock_script):
    provider = mock_script(default="SCORE: 1.3")
    score, audit = judge_open_ended("Q?", "ref", "ans", provider, Gateway())
    assert score == 1.0
    assert "clamped" in audit


def test_judge_identity_answer_scores_one(mock_script):
    provider = mock_script(
        rules=[{"regex": r"Model answer:\n(.*)\n\nWork", "response": "SCORE: 1.0"}],
        default="SCORE: 0.0",
    )
    score, _ = judge_open_ended("Q?", "same text", "same text", provider, Gateway())
    assert score == 1.0


def test_judge_unparseable(mock_script):
    provider = mock_script(default="I think it is quite good")
    with pytest.raises(UnparseableScore):
        judge_open_ended("Q?", "ref", "ans", provider, Gateway())


# --- correlation -------------------------------------------------------------------

def test_correlation_identity():
    out = correlate_with_humans([0.1, 0.5, 0.9], [0.1, 0.5, 0.9])
    assert out["pearson"] == pytest.approx(1.0)
    assert out["spearman"] == pytest.approx(1.0)
    assert out["mae"] == 0.0


def test_correlation_reversed_ranks():
    out = correlate_with_humans([1.0, 2.0, 3.0, 4.0], [9.0, 7.0, 5.0, 1.0])
    assert out["spearman"] == pytest.approx(-1.0)


def test_correlation_hand_fixture():
    x = [0.1, 0.4, 0.35, 0.8, 0.9]
    y = [0.2, 0.3, 0.5, 0.7, 1.0]
    n = 5
    sx = sum(x); sy = sum(y)
    sxx = sum(v * v for v in x); syy = sum(v * v for v in y)
    sxy = sum(a * b for a, b in zip(x, y))
    pearson = (n * sxy - sx * sy) / math.sqrt((n * sxx - sx * sx) * (n * syy - sy * sy))
    rx = [1, 3, 2, 4, 5]
    ry = [1, 2, 3, 4, 5]
    sr = sum((a - b) ** 2 for a, b in zip(rx, ry))
    spearman = 1 - 6 * sr / (n * (n * n - 1))  # no ties, so this closed form holds
    out = correlate_with_humans(x, y)
    assert out["pearson"] == pytest.approx(pearson)
    assert out["spearman"] == pytest.approx(spearman)
    assert out["mae"] == pytest.approx(sum(abs(a - b) for a, b in zip(x, y)) / n)


def test_correlation_with_ties_uses_average_ranks():
    out = correlate_with_humans([1.0, 1.0, 2.0], [1.0, 2.0, 3.0])
    # ranks x = [1.5, 1.5, 3]; ranks y = [1, 2, 3]
    rx = np.array([1.5, 1.5, 3.0]); ry = np.array([1.0, 2.0, 3.0])
    expect = float(np.corrcoef(rx, ry)[0, 1])
    assert out["spearman"] == pytest.approx(expect)


def test_correlation_errors():
    with pytest.raises(LengthMismatch):
        correlate_with_humans([1.0], [1.0, 2.0])
    with pytest.raises(ZeroVariance):
        correlate_with_humans([1.0, 1.0], [0.2, 0.4])


# --- evaluate + leaderboard -----------------------------------------------------------

def bench_pair(qa_id, category, aspect=None, chart_id="c1", axis_id=None):
    tier = "AQA" if category == "KBInference" else "FQA"
    from cqabench.qa_gen import answer_kind_for

    return QAPair(
        qa_id=qa_id, chart_id=chart_id, tier=tier, category=category, aspect=aspect,
        question="Q?", reference_answer="The value is 5.0",
        answer_kind=answer_kind_for(category, aspect), axis_id=axis_id, status="Valid",
    )


def small_corpus():
    corpus = Corpus()
    chart = make_chart("c1", bits=[0] * 10, axes=[LINEAR_AXIS])
    corpus._charts["c1"] = chart
    return corpus


def test_evaluate_numeric_and_unknown_qa(mock_script):
    benchmark = {"q1": bench_pair("q1", "Data", "Point", axis_id="y")}
    answers = [{"qa_id": "q1", "model_id": "m", "answer": "it reads 5.2"}]
    results = evaluate_answers(benchmark, answers, corpus=small_corpus(), metrics=("numeric",))
    assert results[0].final_score == pytest.approx(0.98)
    with pytest.raises(UnknownQaId):
        evaluate_answers(benchmark, [{"qa_id": "zz", "model_id": "m", "answer": "x"}],
                         corpus=small_corpus(), metrics=("numeric",))


def test_leaderboard_constant_scores():
    benchmark = {
        "q1": bench_pair("q1", "Visual", "Color"),
        "q2": bench_pair("q2", "Inference"),
    }
    results = [
        EvalResult(qa_id="q1", model_id="m", raw_answer="", method="judge", final_score=1.0),
        EvalResult(qa_id="q2", model_id="m", raw_answer="", method="judge", final_score=1.0),
    ]
    board = build_leaderboard(results, benchmark)
    assert board.cells["m"][("Visual", None)] == 100.0
    assert board.cells["m"][("Visual", "Color")] == 100.0
    assert board.overall["m"] == 100.0


def test_leaderboard_missing_category_marked_absent_with_warning():
    benchmark = {
        "q1": bench_pair("q1", "Visual", "Color"),
        "q2": bench_pair("q2", "Inference"),
    }
    results = [EvalResult(qa_id="q1", model_id="m", raw_answer="", method="judge", final_score=0.5)]
    board = build_leaderboard(results, benchmark)
    assert board.cells["m"][("Inference", None)] is None
    assert any("Inference" in w for w in board.warnings)
    assert board.overall["m"] == 50.0  # over answered pairs only


def test_leaderboard_hand_averages():
    benchmark = {
        "q1": bench_pair("q1", "Visual", "Color"),
        "q2": bench_pair("q2", "Visual", "Style"),
        "q3": bench_pair("q3", "Visual", "Color"),
        "q4": bench_pair("q4", "Inference"),
        "q5": bench_pair("q5", "Inference"),
        "q6": bench_pair("q6", "Inference"),
    }
    scores = {"q1": 1.0, "q2": 0.5, "q3": 0.0, "q4": 1.0, "q5": 1.0, "q6": 0.0}
    results = [
        EvalResult(qa_id=q, model_id="m", raw_answer="", method="judge", final_score=s)
        for q, s in scores.items()
    ]
    board = build_leaderboard(results, benchmark)
    assert board.cells["m"][("Visual", None)] == pytest.approx(50.0)
    assert board.cells["m"][("Visual", "Color")] == pytest.approx(50.0)
    assert board.cells["m"][("Visual", "Style")] == pytest.approx(50.0)
    assert board.cells["m"][("Inference", None)] == pytest.approx(66.67)
    assert board.overall["m"] == pytest.approx(58.33)


def test_leaderboard_all_is_weighted_category_mean():
    benchmark = {
        "q1": bench_pair("q1", "Visual", "Color"),
        "q2": bench_pair("q2", "Inference"),
        "q3": bench_pair("q3", "Inference"),
    }
    results = [
        EvalResult(qa_id="q1", model_id="m", raw_answer="", method="judge", final_score=1.0),
        EvalResult(qa_id="q2", model_id="m", raw_answer="", method="judge", final_score=0.0),
        EvalResult(qa_id="q3", model_id="m", raw_answer="", method="judge", final_score=1.0),
    ]
    board = build_leaderboard(results, benchmark)
    weighted = (1 * board.cells["m"][("Visual", None)] + 2 * board.cells["m"][("Inference", None)]) / 3
    assert board.overall["m"] == pytest.approx(weighted, abs=0.01)
