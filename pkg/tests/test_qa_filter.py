import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqabench.errors import DegenerateMarginals, IdMismatch, UnparseableVerdict
from cqabench.gateway import Gateway
from cqabench.qa_filter import (
    Confusion,
    agreement_stats,
    confusion_matrix,
    filter_qa,
)
from cqabench.qa_gen import QAPair

from conftest import make_chart


def fqa_pair(qa_id="q1"):
    return QAPair(qa_id=qa_id, chart_id="c1", tier="FQA", category="Inference",
                  question="Which line rises faster?", reference_answer="The red one.")


def aqa_pair(qa_id="q2"):
    return QAPair(qa_id=qa_id, chart_id="c1", tier="AQA", category="KBInference",
                  question="Why does the slope change?", reference_answer="Opacity shift.")


def test_keep_on_fqa_sets_na_domain_flag(mock_script):
    provider = mock_script(default="DECISION: KEEP\nGROUNDED: yes\nDOMAIN_KNOWLEDGE: yes\nRATIONALE: fine")
    pair = fqa_pair()
    verdict = filter_qa(pair, make_chart("c1"), provider, Gateway())
    assert verdict.decision == "Keep"
    assert verdict.needs_domain_knowledge is None  # n/a below the knowledge tier
    assert pair.status == "Filtered"


def test_delete_on_aqa_with_failed_domain_criterion(mock_script):
    provider = mock_script(
        default="DECISION: DELETE\nGROUNDED: yes\nDOMAIN_KNOWLEDGE: no\nRATIONALE: chart-only question"
    )
    pair = aqa_pair()
    verdict = filter_qa(pair, make_chart("c1"), provider, Gateway())
    assert verdict.decision == "Delete"
    assert verdict.needs_domain_knowledge is False
    assert verdict.rationale == "chart-only question"
    assert pair.status == "Draft"  # archived, not promoted


def test_unparseable_verdict_after_retry(mock_script):
    provider = mock_script(default="maybe")
    with pytest.raises(UnparseableVerdict):
        filter_qa(fqa_pair(), make_chart("c1"), provider, Gateway())


def test_incoherent_delete_rejected(mock_script):
    # a delete with every applicable criterion passing is not a valid verdict
    provider = mock_script(default="DECISION: DELETE\nGROUNDED: yes\nDOMAIN_KNOWLEDGE: n/a\nRATIONALE: because")
    with pytest.raises(UnparseableVerdict):
        filter_qa(fqa_pair(), make_chart("c1"), provider, Gateway())


def test_confusion_matrix_published_study_counts():
    # 200 pairs: filter deletes 19, humans delete 14, overlap 13
    filter_labels = {}
    human_labels = {}
    for i in range(200):
        qa_id = f"q{i:03d}"
        filter_labels[qa_id] = "Delete" if i < 19 else "Keep"
        human_labels[qa_id] = "Delete" if (i < 13 or i == 199) else "Keep"
    c = confusion_matrix(filter_labels, human_labels)
    assert (c.tp, c.fp, c.fn, c.tn) == (13, 6, 1, 180)


def test_confusion_matrix_perfect_agreement():
    labels = {f"q{i}": ("Delete" if i % 3 == 0 else "Keep") for i in range(9)}
    c = confusion_matrix(labels, dict(labels))
    assert c.fp == 0 and c.fn == 0


def test_confusion_matrix_hand_tally():
    f = {"a": "Delete", "b": "Keep", "c": "Delete", "d": "Keep", "e": "Keep", "g": "Delete"}
    h = {"a": "Delete", "b": "Delete", "c": "Keep", "d": "Keep", "e": "Keep", "g": "Delete"}
    c = confusion_matrix(f, h)
    assert (c.tp, c.fp, c.fn, c.tn) == (2, 1, 1, 2)


def test_confusion_matrix_id_mismatch():
    with pytest.raises(IdMismatch):
        confusion_matrix({"a": "Keep"}, {"b": "Keep"})


def test_agreement_stats_published_values():
    stats = agreement_stats(Confusion(13, 6, 1, 180))
    assert stats.accuracy == pytest.approx(0.965)
    assert stats.precision == pytest.approx(0.684, abs=5e-4)
    assert stats.recall == pytest.approx(0.929, abs=5e-4)
    assert stats.p_o == pytest.approx(0.965)
    assert stats.p_e == pytest.approx(0.84830, abs=1e-5)
    assert stats.kappa == pytest.approx(0.7693, abs=5e-3)


def test_agreement_perfect_two_class():
    stats = agreement_stats(Confusion(5, 0, 0, 5))
    assert stats.kappa == pytest.approx(1.0)


def test_agreement_degenerate_marginals():
    with pytest.raises(DegenerateMarginals):
        agreement_stats(Confusion(0, 0, 0, 12))
    with pytest.raises(DegenerateMarginals):
        agreement_stats(Confusion(7, 0, 0, 0))


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=200))
@settings(max_examples=80, deadline=None)
def test_agreement_matches_recount(label_pairs):
    filter_labels = {f"q{i}": ("Delete" if f else "Keep") for i, (f, _) in enumerate(label_pairs)}
    human_labels = {f"q{i}": ("Delete" if h else "Keep") for i, (_, h) in enumerate(label_pairs)}
    c = confusion_matrix(filter_labels, human_labels)
    n = len(label_pairs)
    agree = sum(1 for f, h in label_pairs if f == h)
    assert c.n == n
    try:
        stats = agreement_stats(c)
    except DegenerateMarginals:
        a, b = c.tp + c.fp, c.tp + c.fn
        # p_e = 1 exactly when both raters were all-Keep or both all-Delete
        assert (a == 0 and b == 0) or (a == n and b == n)
        return
    assert stats.accuracy == pytest.approx(agree / n)
    if stats.precision is not None:
        assert stats.precision == pytest.approx(c.tp / (c.tp + c.fp))
    if stats.recall is not None:
        assert stats.recall == pytest.approx(c.tp / (c.tp + c.fn))
