#!/usr/bin/env python3
"""Build the synthetic offline fixture: corpus files, mock provider scripts,
quotas, reviewers, and (optionally) model answer files for a benchmark.

Everything is deterministic under --seed, which is what the end-to-end
reproducibility tests rely on.

Usage:
  python scripts/make_synthetic_corpus.py --out fixtures/ [--n-charts 200] [--seed 11]
  python scripts/make_synthetic_corpus.py --answers-for bench.jsonl --out answers.jsonl
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

# 1x1 gray PNG, enough for the image-serving endpoints.
TINY_PNG = bytes.fromhex(
    "89504e470d0a1a0a0000000d4948445200000001000000010802000000907753de0000000c49444154"
    "789c626001000000ffff03000006000557bfabd40000000049454e44ae426082"
)

BIT_PROBS = [0.4, 0.7, 0.5, 0.5, 0.1, 0.35, 0.45, 0.3, 0.4, 0.65]
DOMAINS = ["astronomy", "biology"]


def write_jsonl(path: Path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")


def build_corpus(out: Path, n_charts: int, n_papers: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    bits = (rng.random((n_charts, 10)) < np.asarray(BIT_PROBS)).astype(int)

    charts = []
    ccv = []
    (out / "images").mkdir(parents=True, exist_ok=True)
    charts_per_paper = 5
    for i in range(n_charts):
        chart_id = f"c{i:04d}"
        domain = DOMAINS[0] if i < int(n_charts * 0.75) else DOMAINS[1]
        paper_id = f"p{i // charts_per_paper:03d}" if i < n_papers * charts_per_paper else f"px{i:04d}"
        log_axis = i % 5 == 4
        axes = [
            {"axis_id": "y", "min": 1.0 if log_axis else 0.0, "max": 1000.0 if log_axis else 10.0,
             "scale": "logarithmic" if log_axis else "linear"},
            {"axis_id": "x", "min": 0.0, "max": 100.0, "scale": "linear"},
        ]
        charts.append({
            "chart_id": chart_id,
            "image_path": f"images/{chart_id}.png",
            "caption": f"Synthetic {domain} chart {chart_id} showing flux against wavelength.",
            "paper_id": paper_id,
            "domain": domain,
            "axes": axes,
        })
        ccv.append({"chart_id": chart_id, "ccv": bits[i].tolist()})
        (out / "images" / f"{chart_id}.png").write_bytes(TINY_PNG)

    papers = []
    for p in range(n_papers):
        paper_id = f"p{p:03d}"
        chart_ids = [f"c{p * charts_per_paper + j:04d}" for j in range(charts_per_paper)]
        papers.append({
            "paper_id": paper_id,
            "abstract": (
                f"Abstract of paper {paper_id}. We analyse oscillation spectra and report "
                "a tight relation between frequency spacing and stellar mass."
            ),
            "conclusion": (
                f"Conclusion of paper {paper_id}. The measured spacing constrains interior "
                "models beyond previous surveys."
            ),
            "chart_ids": chart_ids,
            "citations": 1000 - 50 * p,
            "subfield": "solar" if p % 2 == 0 else "galaxies",
        })

    write_jsonl(out / "charts.jsonl", charts)
    write_jsonl(out / "ccv.jsonl", ccv)
    write_jsonl(out / "papers.jsonl", papers)
    return papers


def build_mocks(out: Path, papers: list[dict]) -> None:
    mocks = out / "mocks"
    mocks.mkdir(parents=True, exist_ok=True)

    # Question generation: one rule per template family, keyed on the
    # instruction block, with chart id and request counter captured so every
    # draft is distinct and reruns are byte-identical.
    gen_rules = [
        {
            "regex": r"(?s)chart (c\d{4}) showing.*?\"Point\" aspect.*?request (\d+) of (\d+)",
            "response_template": (
                "QUESTION: What is the peak flux level in chart {1} (reading {2})?\n"
                "ANSWER: The value is {2}.5 on the flux axis."
            ),
        },
        {
            "regex": r"(?s)chart (c\d{4}) showing.*?\"Interval\" aspect.*?request (\d+) of (\d+)",
            "response_template": (
                "QUESTION: Over what flux range does the main feature of chart {1} extend (reading {2})?\n"
                "ANSWER: The values span 2.0 to {2}.5."
            ),
        },
        {
            "regex": r"(?s)chart (c\d{4}) showing.*?\"Calculation\" aspect.*?request (\d+) of (\d+)",
            "response_template": (
                "QUESTION: How many peaks does chart {1} show (count {2})?\n"
                "ANSWER: There are {2} peaks."
            ),
        },
        {
            "regex": r"(?s)chart (c\d{4}) showing.*?visual design.*?request (\d+) of (\d+)",
            "response_template": (
                "QUESTION: Which color dominates the series of chart {1} (variant {2})?\n"
                "ANSWER: Blue dominates, with annotations drawn in red."
            ),
        },
        {
            "regex": r"(?s)chart (c\d{4}) showing.*?beyond reading a single value.*?request (\d+) of (\d+)",
            "response_template": (
                "QUESTION: Does the trend in chart {1} steepen or flatten at long wavelengths (variant {2})?\n"
                "ANSWER: The trend steepens beyond the midpoint of the axis."
            ),
        },
        {
            "regex": r"(?s)chart (c\d{4}) showing.*?comprehensive description.*?request (\d+) of (\d+)",
            "response_template": (
                "QUESTION: Summarize every visual element of chart {1} (variant {2}).\n"
                "ANSWER: A single-panel line chart in blue with red annotations and a linear flux axis."
            ),
        },
        {
            "regex": r"(?s)chart (c\d{4}) showing.*?genuine domain knowledge.*?request (\d+) of (\d+)",
            "response_template": (
                "QUESTION: What physical mechanism explains the spacing pattern in chart {1} (variant {2})?\n"
                "ANSWER: Acoustic oscillations set the spacing, which scales with mean stellar density."
            ),
        },
    ]
    (mocks / "gen.json").write_text(json.dumps({"rules": gen_rules, "default": None}, indent=1))

    # Validity filter: keep everything in the happy-path fixture.
    (mocks / "filter.json").write_text(json.dumps({
        "rules": [],
        "default": "DECISION: KEEP\nGROUNDED: yes\nDOMAIN_KNOWLEDGE: yes\nRATIONALE: grounded and on-topic",
    }, indent=1))

    # Judge: generic answers score low, everything else scores well.
    (mocks / "judge.json").write_text(json.dumps({
        "rules": [
            {"contains": "no clear trend", "response": "SCORE: 0.2"},
        ],
        "default": "REFERENCE_POINTS: r\nANSWER_POINTS: a\nMATCHING: close\nSCORE: 0.8",
    }, indent=1))

    # Chart-abstract voters: voter1 prefers each paper's first chart; voter2
    # disagrees on two papers; the tie-breaker sides with voter1 on one of
    # them and goes its own way on the other (leaving it unresolved).
    def voter_rules(preference):
        rules = []
        for paper in papers:
            pid = paper["paper_id"]
            for rank, chart_id in enumerate(paper["chart_ids"]):
                score = preference(pid, rank)
                rules.append({
                    "regex": rf"(?s)paper {pid}\b.*?chart {chart_id} ",
                    "response": f"SUMMARY: synthetic summary of {chart_id}\nRELEVANCE: {score}",
                })
        return rules

    disputed = {papers[-1]["paper_id"], papers[-2]["paper_id"]} if len(papers) >= 2 else set()
    unresolved = papers[-1]["paper_id"] if papers else None

    def pref_voter1(pid, rank):
        return 95 if rank == 0 else 20 + rank * 5

    def pref_voter2(pid, rank):
        if pid in disputed:
            return 97 if rank == 1 else 15 + rank * 5
        return 90 if rank == 0 else 25 + rank * 5

    def pref_escalation(pid, rank):
        if pid == unresolved:
            return 99 if rank == 2 else 10 + rank * 5
        return 93 if rank == 0 else 20 + rank * 5

    for name, pref in (("voter1", pref_voter1), ("voter2", pref_voter2), ("escalation", pref_escalation)):
        (mocks / f"{name}.json").write_text(json.dumps({"rules": voter_rules(pref), "default": None}, indent=1))

    providers = [
        {"provider_id": "gen", "endpoint": "mock:", "model_name": "gen-model", "script": "mocks/gen.json"},
        {"provider_id": "filter", "endpoint": "mock:", "model_name": "filter-model", "script": "mocks/filter.json"},
        {"provider_id": "judge", "endpoint": "mock:", "model_name": "judge-model", "script": "mocks/judge.json"},
        {"provider_id": "voter1", "endpoint": "mock:", "model_name": "voter1-model", "script": "mocks/voter1.json"},
        {"provider_id": "voter2", "endpoint": "mock:", "model_name": "voter2-model", "script": "mocks/voter2.json"},
        {"provider_id": "escalation", "endpoint": "mock:", "model_name": "escalation-model",
         "script": "mocks/escalation.json"},
    ]
    (out / "providers.json").write_text(json.dumps({"providers": providers}, indent=1))

    # Default quota profile: published category mix scaled to a tenth.
    (out / "quotas.json").write_text(json.dumps(
        {"Visual": 60, "Data": 32, "Inference": 29, "ChartDescription": 30, "KBInference": 18}, indent=1
    ))

    write_jsonl(out / "reviewers.jsonl", [
        {"reviewer_id": f"r{i}", "token": f"tok-r{i}"} for i in range(1, 5)
    ])


def build_answers(benchmark_path: Path, out_path: Path) -> None:
    """Two deterministic synthetic models: an echo model and a vague one."""
    answers = []
    with open(benchmark_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            answers.append({"qa_id": rec["qa_id"], "model_id": "echo-model",
                            "answer": rec["reference_answer"]})
            if rec["answer_kind"] == "numeric-derivation":
                vague = "There are 99 peaks."
            elif rec["answer_kind"] == "numeric-retrieval":
                vague = "The value is 9.9."
            else:
                vague = "There is no clear trend visible."
            answers.append({"qa_id": rec["qa_id"], "model_id": "vague-model", "answer": vague})
    write_jsonl(out_path, answers)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--n-charts", type=int, default=200)
    ap.add_argument("--n-papers", type=int, default=10)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--answers-for", type=Path, default=None,
                    help="Write synthetic model answers for this benchmark file instead.")
    args = ap.parse_args()

    if args.answers_for:
        build_answers(args.answers_for, args.out)
        print(f"answers -> {args.out}")
        return

    papers = build_corpus(args.out, args.n_charts, args.n_papers, args.seed)
    build_mocks(args.out, papers)
    print(f"fixture corpus ({args.n_charts} charts, {args.n_papers} papers) -> {args.out}")


if __name__ == "__main__":
    main()
