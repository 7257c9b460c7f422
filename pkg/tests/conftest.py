import json
from pathlib import Path

import numpy as np
import pytest


def pytest_runtest_logreport(report):
    # one visible pass/fail line per release criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        status = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\nACCEPTANCE {status}: {name}")

from cqabench.ccv import CCVector
from cqabench.corpus import AxisMeta, ChartRecord, Corpus


def make_chart(chart_id, bits=None, domain="astro", caption=None, axes=None,
               paper_id="p1", is_abstract=False):
    return ChartRecord(
        chart_id=chart_id,
        image_path=f"images/{chart_id}.png",
        caption=caption or f"caption for {chart_id}",
        paper_id=paper_id,
        domain=domain,
        axes=tuple(axes or ()),
        ccv=CCVector.from_bits(bits) if bits is not None else None,
        is_chart_abstract=is_abstract,
    )


def corpus_from_bits(bit_rows, domain="astro"):
    corpus = Corpus()
    for i, bits in enumerate(bit_rows):
        chart = make_chart(f"c{i:04d}", bits=list(bits), domain=domain)
        corpus._charts[chart.chart_id] = chart
    return corpus


def random_corpus(n, probs=None, seed=0, domain="astro"):
    rng = np.random.default_rng(seed)
    if probs is None:
        probs = rng.uniform(0.1, 0.9, size=10)
    bits = (rng.random((n, 10)) < np.asarray(probs)).astype(int)
    return corpus_from_bits(bits.tolist(), domain=domain)


LINEAR_AXIS = AxisMeta("y", 0.0, 10.0, "linear")
LOG_AXIS = AxisMeta("y", 1.0, 1000.0, "logarithmic")


@pytest.fixture
def mock_script(tmp_path):
    """Write a mock provider script file and return a ProviderRef for it."""
    from cqabench.gateway import ProviderRef

    def _make(rules=None, default=None, provider_id="mock", **kwargs):
        path = tmp_path / f"{provider_id}-script.json"
        path.write_text(json.dumps({"rules": rules or [], "default": default}))
        return ProviderRef(
            provider_id=provider_id,
            endpoint="mock:",
            model_name=f"{provider_id}-model",
            script=str(path),
            backoff=0.0,
            **kwargs,
        )

    return _make
