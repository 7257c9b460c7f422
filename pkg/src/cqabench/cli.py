"""Pipeline entry point.

One subcommand per stage; stage artifacts are plain files written
atomically, and every run drops a manifest (inputs, seeds, versions) next
to its primary output so reruns are diffable and reproducible. Flags win
over the optional --config file, which can carry paths, per-stage provider
bindings, seeds, quotas and sampler parameters. Exit codes: 0 success,
1 validation failure, 2 provider/transport failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click

from . import __version__, jsonl
from .aqa_select import select_chart_abstract
from .ccv import compute_stats, domain_profile
from .corpus import attach_ccv, ingest_charts, ingest_papers, load_corpus, save_corpus
from .errors import ProviderError, ValidationError
from .evaluate import EvalResult, build_leaderboard, evaluate_answers
from .fqa_select import SamplerConfig, gibbs_select_multi
from .gateway import Gateway, load_providers
from .qa_filter import agreement_stats, confusion_matrix, filter_qa
from .qa_gen import QAPair, generate_benchmark


def _write_manifest(primary_output: Path, subcommand: str, inputs: dict, seeds: dict,
                    extra: Optional[dict] = None):
    manifest = {
        "subcommand": subcommand,
        "inputs": {name: {"path": str(p), "sha256": jsonl.file_sha256(p)}
                   for name, p in inputs.items()},
        "seeds": seeds,
        "versions": {"cqabench": __version__},
    }
    if extra:
        manifest.update(extra)
    jsonl.write_text(
        Path(str(primary_output) + ".manifest.json"),
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )


@click.group()
@click.option("--config", type=click.Path(exists=True), default=None,
              help="Pipeline config file supplying defaults for unset flags.")
@click.option("--seed", type=int, default=None, help="Default seed for seeded stages.")
@click.option("--llm-cache", type=click.Path(), default=None, help="Response cache directory.")
@click.option("--data-dir", type=click.Path(), default=None, help="Default artifact directory.")
@click.pass_context
def cli(ctx, config, seed, llm_cache, data_dir):
    ctx.ensure_object(dict)
    cfg = {}
    if config:
        cfg = json.loads(Path(config).read_text(encoding="utf-8"))
    ctx.obj.update(cfg=cfg, seed=seed, llm_cache=llm_cache, data_dir=data_dir)


def _cfg(ctx, dotted: str, default=None):
    node = ctx.obj.get("cfg") or {}
    for key in dotted.split("."):
        if not isinstance(node, dict) or key not in node:
            return default
        node = node[key]
    return node


def _require(value, flag: str, cfg_path: Optional[str] = None):
    if value is None:
        hint = f"pass {flag}" + (f" or set {cfg_path} in --config" if cfg_path else "")
        raise ValidationError(f"missing required option: {hint}")
    return value


def _input_path(value, flag: str, cfg_path: Optional[str] = None) -> str:
    value = _require(value, flag, cfg_path)
    if not Path(value).exists():
        raise ValidationError(f"{flag}: no such file or directory: {value}")
    return value


def _out_path(ctx, value, default_name: str, flag: str = "--out") -> Path:
    if value is not None:
        return Path(value)
    base = ctx.obj.get("data_dir") or _cfg(ctx, "paths.output_dir")
    if base is None:
        raise ValidationError(f"missing required option: pass {flag} or set --data-dir")
    return Path(base) / default_name


def _gateway(ctx) -> Gateway:
    cache = ctx.obj.get("llm_cache") or _cfg(ctx, "paths.llm_cache")
    return Gateway(cache_dir=cache)


def _seed(ctx, local: Optional[int], stage: Optional[str] = None) -> int:
    if local is not None:
        return local
    if ctx.obj.get("seed") is not None:
        return ctx.obj["seed"]
    if stage is not None and _cfg(ctx, f"seeds.{stage}") is not None:
        return int(_cfg(ctx, f"seeds.{stage}"))
    if _cfg(ctx, "seeds.default") is not None:
        return int(_cfg(ctx, "seeds.default"))
    return 0


def _providers(ctx, providers_path):
    resolved = providers_path or _cfg(ctx, "providers.file")
    return load_providers(_input_path(resolved, "--providers", "providers.file"))


@cli.command()
@click.option("--charts", "charts_path", type=click.Path(exists=True), default=None)
@click.option("--ccv", "ccv_path", type=click.Path(exists=True), default=None)
@click.option("--papers", "papers_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def ingest(ctx, charts_path, ccv_path, papers_path, out_dir):
    """Validate and index charts, complexity annotations and paper metadata."""
    charts_path = _input_path(charts_path or _cfg(ctx, "paths.charts"), "--charts", "paths.charts")
    ccv_path = ccv_path or _cfg(ctx, "paths.annotations")
    papers_path = papers_path or _cfg(ctx, "paths.papers")
    out_dir = _out_path(ctx, out_dir or _cfg(ctx, "paths.corpus"), "corpus")

    corpus = ingest_charts(charts_path)
    if ccv_path:
        attach_ccv(corpus, ccv_path)
    if papers_path:
        ingest_papers(corpus, papers_path)
    outputs = save_corpus(corpus, out_dir)
    for w in corpus.warnings:
        click.echo(f"warning: {w}", err=True)
    inputs = {"charts": charts_path}
    if ccv_path:
        inputs["ccv"] = ccv_path
    if papers_path:
        inputs["papers"] = papers_path
    _write_manifest(Path(outputs["charts"]), "ingest", inputs, {})
    click.echo(
        f"ingested {corpus.n_charts} charts ({corpus.n_annotated} annotated), "
        f"{len(corpus.papers())} papers -> {out_dir}"
    )


def _corpus_dir(ctx, corpus_dir) -> str:
    return _input_path(corpus_dir or _cfg(ctx, "paths.corpus"), "--corpus", "paths.corpus")


@cli.command("ccv-stats")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--radar-csv", type=click.Path(), default=None,
              help="Per-domain profile rows for plotting.")
@click.option("--sample-size", type=int, default=500,
              help="Charts sampled per domain for the radar rows.")
@click.option("--seed", type=int, default=None)
@click.pass_context
def ccv_stats_cmd(ctx, corpus_dir, out_path, radar_csv, sample_size, seed):
    """Complexity marginals, pairwise co-occurrence and the score histogram."""
    corpus_dir = _corpus_dir(ctx, corpus_dir)
    out_path = _out_path(ctx, out_path, "ccv-stats.json")
    corpus = load_corpus(corpus_dir)
    stats = compute_stats(corpus.annotated_charts())
    payload = {
        "n": stats.n,
        "marginals": [round(x, 6) for x in stats.marginals],
        "pairwise": [[round(x, 6) for x in row] for row in stats.pairwise],
        "histogram": list(stats.histogram),
    }
    jsonl.write_text(out_path, json.dumps(payload, indent=2) + "\n")
    rng_seed = _seed(ctx, seed, "stats")
    if radar_csv:
        from .ccv import DIMENSIONS

        lines = ["domain," + ",".join(DIMENSIONS)]
        for domain in corpus.domains():
            try:
                profile = domain_profile(corpus, domain, sample_size, rng_seed=rng_seed)
            except ValidationError:
                continue
            lines.append(domain + "," + ",".join(f"{x:.4f}" for x in profile))
        jsonl.write_text(Path(radar_csv), "\n".join(lines) + "\n")
    _write_manifest(out_path, "ccv-stats", {"corpus": Path(corpus_dir) / "charts.jsonl"},
                    {"seed": rng_seed})
    click.echo(f"stats over {stats.n} annotated charts -> {out_path}")


@cli.command("select-fqa")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), default=None)
@click.option("--target-size", type=int, default=None)
@click.option("--epsilon", type=float, default=None)
@click.option("--max-iters", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--chains", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.pass_context
def select_fqa(ctx, corpus_dir, target_size, epsilon, max_iters, seed, chains, out_path, report_path):
    """Draw the distribution-matched chart pool for fundamental questions."""
    corpus_dir = _corpus_dir(ctx, corpus_dir)
    out_path = _out_path(ctx, out_path, "fqa-selection.txt")
    target_size = _require(target_size if target_size is not None else _cfg(ctx, "sampler.target_size"),
                           "--target-size", "sampler.target_size")
    config = SamplerConfig(
        target_size=int(target_size),
        max_iterations=int(max_iters if max_iters is not None else _cfg(ctx, "sampler.max_iterations", 10000)),
        epsilon=float(epsilon if epsilon is not None else _cfg(ctx, "sampler.epsilon", 0.05)),
        rng_seed=_seed(ctx, seed, "selection"),
        stability_window=int(_cfg(ctx, "sampler.stability_window", 3)),
    )
    chains = int(chains if chains is not None else _cfg(ctx, "sampler.chains", 1))
    corpus = load_corpus(corpus_dir)
    selected, rep = gibbs_select_multi(corpus, config, chains=chains)
    jsonl.write_text(out_path, "\n".join(selected) + "\n")
    report = {
        "iterations": rep.iterations,
        "sweeps": rep.sweeps,
        "final_gaps": [round(g, 6) for g in rep.final_gaps],
        "max_gap": round(rep.max_gap, 6),
        "converged": rep.converged,
    }
    if report_path:
        jsonl.write_text(Path(report_path), json.dumps(report, indent=2) + "\n")
    _write_manifest(
        out_path, "select-fqa", {"corpus": Path(corpus_dir) / "charts.jsonl"},
        {"seed": config.rng_seed, "chains": chains},
        extra={"convergence": report},
    )
    click.echo(
        f"selected {len(selected)} charts, max gap {rep.max_gap:.4f}, "
        f"converged={rep.converged} ({rep.iterations} iterations)"
    )


@cli.command("select-aqa")
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), default=None)
@click.option("--providers", "providers_path", type=click.Path(exists=True), default=None)
@click.option("--provider-ids", default=None, help="Comma-separated voter provider ids.")
@click.option("--escalation-provider", default=None)
@click.option("--top-percent", type=float, default=100.0,
              help="Keep only the most-cited share of papers.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def select_aqa(ctx, corpus_dir, providers_path, provider_ids, escalation_provider, top_percent, out_path):
    """Pick each paper's most conclusion-bearing chart by cross-model vote."""
    corpus_dir = _corpus_dir(ctx, corpus_dir)
    out_path = _out_path(ctx, out_path, "aqa-selection.jsonl")
    providers = _providers(ctx, providers_path)
    voter_ids = provider_ids or ",".join(_cfg(ctx, "providers.selection", []))
    voters = [providers[p.strip()] for p in _require(voter_ids, "--provider-ids",
                                                     "providers.selection").split(",") if p.strip()]
    escalation_provider = escalation_provider or _cfg(ctx, "providers.escalation")
    escal = providers[escalation_provider] if escalation_provider else None
    gateway = _gateway(ctx)
    corpus = load_corpus(corpus_dir)

    papers = [p for p in corpus.papers() if p.aqa_eligible]
    if top_percent < 100.0:
        cited = sorted(papers, key=lambda p: (-(p.citation_count or 0), p.paper_id))
        keep = max(1, int(round(len(cited) * top_percent / 100.0)))
        papers = sorted(cited[:keep], key=lambda p: p.paper_id)

    records = []
    winners = []
    for paper in papers:
        charts = [corpus.get_chart(cid) for cid in paper.chart_ids]
        sel = select_chart_abstract(paper, charts, voters, gateway, escalation_provider=escal)
        if sel.winner:
            corpus.mark_chart_abstract(sel.winner)
            winners.append(sel.winner)
        records.append(sel.to_record())
    jsonl.write_records(out_path, records)
    save_corpus(corpus, corpus_dir)  # persist is_chart_abstract flags
    _write_manifest(
        out_path, "select-aqa",
        {"corpus": Path(corpus_dir) / "charts.jsonl"},
        {}, extra={"winners": len(winners), "papers": len(papers)},
    )
    click.echo(f"{len(winners)} chart abstracts selected over {len(papers)} papers -> {out_path}")


@cli.command()
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), default=None)
@click.option("--fqa-selection", type=click.Path(exists=True), default=None,
              help="Chart ids, one per line, from select-fqa.")
@click.option("--aqa-selection", type=click.Path(exists=True), default=None,
              help="Selection records from select-aqa.")
@click.option("--quotas", "quotas_path", type=click.Path(exists=True), default=None)
@click.option("--providers", "providers_path", type=click.Path(exists=True), default=None)
@click.option("--provider", "provider_id", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def generate(ctx, corpus_dir, fqa_selection, aqa_selection, quotas_path, providers_path,
             provider_id, seed, out_path):
    """Generate draft question-answer pairs honoring the quota profile."""
    corpus_dir = _corpus_dir(ctx, corpus_dir)
    fqa_selection = _input_path(fqa_selection or _cfg(ctx, "paths.fqa_selection"),
                                "--fqa-selection", "paths.fqa_selection")
    quotas_path = _input_path(quotas_path or _cfg(ctx, "paths.quotas"), "--quotas", "paths.quotas")
    out_path = _out_path(ctx, out_path, "draft.jsonl")
    provider_id = _require(provider_id or _cfg(ctx, "providers.generation"),
                           "--provider", "providers.generation")
    corpus = load_corpus(corpus_dir)
    provider = _providers(ctx, providers_path)[provider_id]
    quotas = json.loads(Path(quotas_path).read_text(encoding="utf-8"))
    gateway = _gateway(ctx)

    fqa_ids = [line.strip() for line in Path(fqa_selection).read_text().splitlines() if line.strip()]
    fqa_charts = [corpus.get_chart(cid) for cid in fqa_ids]

    aqa_charts = []
    aqa_selection = aqa_selection or _cfg(ctx, "paths.aqa_selection")
    if aqa_selection:
        for _, rec in jsonl.read_records(aqa_selection):
            if rec.get("winner"):
                chart = corpus.get_chart(rec["winner"])
                paper = corpus.get_paper(rec["paper_id"])
                context = f"{paper.abstract_text}\n\n{paper.conclusion_text}"
                aqa_charts.append((chart, context))

    run_seed = _seed(ctx, seed, "generation")
    pairs = generate_benchmark(fqa_charts, aqa_charts, quotas, provider, run_seed, gateway)
    jsonl.write_records(out_path, (p.to_record() for p in pairs))
    _write_manifest(
        out_path, "generate",
        {"corpus": Path(corpus_dir) / "charts.jsonl", "quotas": quotas_path,
         "fqa_selection": fqa_selection},
        {"seed": run_seed}, extra={"provider": provider_id, "pairs": len(pairs)},
    )
    click.echo(f"generated {len(pairs)} draft pairs -> {out_path}")


@cli.command("filter")
@click.option("--benchmark", "benchmark_path", type=click.Path(exists=True), default=None)
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), default=None)
@click.option("--providers", "providers_path", type=click.Path(exists=True), default=None)
@click.option("--provider", "provider_id", default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--verdicts", "verdicts_path", type=click.Path(), default=None)
@click.option("--deleted", "deleted_path", type=click.Path(), default=None)
@click.pass_context
def filter_cmd(ctx, benchmark_path, corpus_dir, providers_path, provider_id, out_path,
               verdicts_path, deleted_path):
    """Apply the automated validity filter; deletions are archived, not lost."""
    corpus_dir = _corpus_dir(ctx, corpus_dir)
    benchmark_path = _input_path(benchmark_path or _cfg(ctx, "paths.draft"),
                                 "--benchmark", "paths.draft")
    out_path = _out_path(ctx, out_path, "benchmark.jsonl")
    provider_id = _require(provider_id or _cfg(ctx, "providers.filtering"),
                           "--provider", "providers.filtering")
    corpus = load_corpus(corpus_dir)
    provider = _providers(ctx, providers_path)[provider_id]
    gateway = _gateway(ctx)

    kept, deleted, verdicts = [], [], []
    for _, rec in jsonl.read_records(benchmark_path):
        pair = QAPair.from_record(rec)
        chart = corpus.get_chart(pair.chart_id)
        verdict = filter_qa(pair, chart, provider, gateway)
        verdicts.append(verdict.to_record())
        if verdict.decision == "Keep":
            kept.append(pair.to_record())
        else:
            deleted.append({**pair.to_record(), "rationale": verdict.rationale})
    jsonl.write_records(out_path, kept)
    if verdicts_path:
        jsonl.write_records(Path(verdicts_path), verdicts)
    if deleted_path:
        jsonl.write_records(Path(deleted_path), deleted)
    _write_manifest(
        out_path, "filter", {"benchmark": benchmark_path}, {},
        extra={"provider": provider_id, "kept": len(kept), "deleted": len(deleted)},
    )
    click.echo(f"kept {len(kept)}, deleted {len(deleted)} -> {out_path}")


@cli.command()
@click.option("--filter-labels", required=True, type=click.Path(exists=True),
              help="Lines of {qa_id, label} with label Keep or Delete.")
@click.option("--human-labels", required=True, type=click.Path(exists=True))
@click.pass_context
def agreement(ctx, filter_labels, human_labels):
    """Filter-vs-human confusion matrix, accuracy/precision/recall and kappa."""

    def load_labels(path):
        return {rec["qa_id"]: rec["label"] for _, rec in jsonl.read_records(path)}

    confusion = confusion_matrix(load_labels(filter_labels), load_labels(human_labels))
    stats = agreement_stats(confusion)
    click.echo(json.dumps(stats.to_record(), indent=2))


@cli.command("review-serve")
@click.option("--port", type=int, default=8800)
@click.option("--data-dir", "data_dir", type=click.Path(exists=True), default=None)
@click.option("--reviewers", "reviewers_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--mode", type=click.Choice(["validation", "pilot"]), default="validation")
@click.option("--ui-dir", type=click.Path(), default=None)
@click.pass_context
def review_serve(ctx, port, data_dir, reviewers_path, seed, mode, ui_dir):
    """Run the expert validation service (and the browser UI when built)."""
    from .review.service import serve

    data_dir = _input_path(data_dir or ctx.obj.get("data_dir"), "--data-dir")
    reviewers_path = _input_path(reviewers_path or _cfg(ctx, "paths.reviewers"),
                                 "--reviewers", "paths.reviewers")
    serve(data_dir, reviewers_path, port=port, seed=_seed(ctx, seed, "review"),
          mode=mode, ui_dir=ui_dir)


@cli.command()
@click.option("--benchmark", "benchmark_path", type=click.Path(exists=True), default=None)
@click.option("--answers", "answers_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), default=None)
@click.option("--providers", "providers_path", type=click.Path(exists=True), default=None)
@click.option("--judge-provider", default=None)
@click.option("--metrics", default="numeric,judge", help="Comma list: numeric,judge,rouge,bleu")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def evaluate(ctx, benchmark_path, answers_path, corpus_dir, providers_path,
             judge_provider, metrics, out_path):
    """Score a model-answers file against the benchmark."""
    corpus_dir = _corpus_dir(ctx, corpus_dir)
    benchmark_path = _input_path(benchmark_path or _cfg(ctx, "paths.benchmark"),
                                 "--benchmark", "paths.benchmark")
    out_path = _out_path(ctx, out_path, "results.jsonl")
    corpus = load_corpus(corpus_dir)
    benchmark = {
        rec["qa_id"]: QAPair.from_record(rec) for _, rec in jsonl.read_records(benchmark_path)
    }
    answers = [rec for _, rec in jsonl.read_records(answers_path)]
    metric_set = tuple(m.strip() for m in metrics.split(",") if m.strip())
    judge_provider = judge_provider or _cfg(ctx, "providers.judging")
    judge = None
    if judge_provider:
        judge = _providers(ctx, providers_path)[judge_provider]
    results = evaluate_answers(
        benchmark, answers, corpus=corpus, judge_provider=judge,
        gateway=_gateway(ctx), metrics=metric_set,
    )
    jsonl.write_records(out_path, (r.to_record() for r in results))
    _write_manifest(
        out_path, "evaluate",
        {"benchmark": benchmark_path, "answers": answers_path}, {},
        extra={"metrics": list(metric_set), "results": len(results)},
    )
    click.echo(f"scored {len(results)} (model, qa, metric) results -> {out_path}")


@cli.command()
@click.option("--results", "results_path", required=True, type=click.Path(exists=True))
@click.option("--benchmark", "benchmark_path", type=click.Path(exists=True), default=None)
@click.option("--open-ended-method", default="judge",
              type=click.Choice(["judge", "rouge-l", "bleu-4"]))
@click.option("--out-csv", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def report(ctx, results_path, benchmark_path, open_ended_method, out_csv, out_path):
    """Assemble the per-category leaderboard from evaluation results."""
    benchmark_path = _input_path(benchmark_path or _cfg(ctx, "paths.benchmark"),
                                 "--benchmark", "paths.benchmark")
    benchmark = {
        rec["qa_id"]: QAPair.from_record(rec) for _, rec in jsonl.read_records(benchmark_path)
    }
    results = [EvalResult.from_record(rec) for _, rec in jsonl.read_records(results_path)]
    board = build_leaderboard(results, benchmark, open_ended_method=open_ended_method)
    for w in board.warnings:
        click.echo(f"coverage warning: {w}", err=True)

    header = board.header()
    widths = [max(len(str(h)), 12) for h in header]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for row in board.rows():
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))
    table = "\n".join(lines) + "\n"
    if out_path:
        jsonl.write_text(Path(out_path), table)
    else:
        click.echo(table)
    if out_csv:
        jsonl.write_text(Path(out_csv), board.to_csv())
        _write_manifest(
            Path(out_csv), "report",
            {"results": results_path, "benchmark": benchmark_path}, {},
            extra={"open_ended_method": open_ended_method},
        )


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        # covers unknown subcommands and bad flags: usage text, exit 1
        exc.show()
        return 1
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except ProviderError as exc:
        click.echo(f"provider error: {exc}", err=True)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
