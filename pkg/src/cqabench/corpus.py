"""Chart corpus ingestion: charts, complexity annotations, paper metadata.

Files are line-delimited JSON. Ingestion validates every record up front
and builds an indexed, effectively immutable corpus; all downstream stages
only read from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from . import jsonl
from .ccv import CCVector
from .errors import (
    DanglingChartRef,
    DuplicateId,
    MalformedLine,
    MissingField,
    NonBinaryValue,
    UnknownChartId,
    WrongArity,
)

SCALES = ("linear", "logarithmic")


@dataclass(frozen=True)
class AxisMeta:
    axis_id: str
    min: float
    max: float
    scale: str  # linear | logarithmic

    def validate(self) -> Optional[str]:
        """Return a violation message, or None when sound."""
        if self.scale not in SCALES:
            return f"axis {self.axis_id!r}: scale must be one of {SCALES}"
        if not self.max > self.min:
            return f"axis {self.axis_id!r}: max must exceed min"
        if self.scale == "logarithmic" and self.min <= 0:
            return f"axis {self.axis_id!r}: logarithmic axis needs min > 0"
        return None


@dataclass(frozen=True)
class ChartRecord:
    chart_id: str
    image_path: str
    caption: str
    paper_id: str
    domain: str
    axes: tuple[AxisMeta, ...] = ()
    ccv: Optional[CCVector] = None
    is_chart_abstract: bool = False

    def axis(self, axis_id: str) -> Optional[AxisMeta]:
        for ax in self.axes:
            if ax.axis_id == axis_id:
                return ax
        return None


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    abstract_text: str
    conclusion_text: str
    chart_ids: tuple[str, ...]
    citation_count: Optional[int] = None
    subfield: Optional[str] = None

    @property
    def aqa_eligible(self) -> bool:
        return bool(self.abstract_text.strip())


@dataclass
class Corpus:
    """Indexed chart/paper store. Built once by the ingest ops, then read-only."""

    _charts: dict[str, ChartRecord] = field(default_factory=dict)
    _papers: dict[str, PaperRecord] = field(default_factory=dict)
    _chart_papers: dict[str, list[str]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def charts(self) -> list[ChartRecord]:
        return [self._charts[k] for k in sorted(self._charts)]

    def annotated_charts(self) -> list[ChartRecord]:
        return [c for c in self.charts() if c.ccv is not None]

    def papers(self) -> list[PaperRecord]:
        return [self._papers[k] for k in sorted(self._papers)]

    def get_chart(self, chart_id: str) -> ChartRecord:
        try:
            return self._charts[chart_id]
        except KeyError:
            raise UnknownChartId(chart_id) from None

    def get_paper(self, paper_id: str) -> PaperRecord:
        return self._papers[paper_id]

    def has_chart(self, chart_id: str) -> bool:
        return chart_id in self._charts

    def papers_for_chart(self, chart_id: str) -> list[str]:
        return list(self._chart_papers.get(chart_id, []))

    def domains(self) -> list[str]:
        return sorted({c.domain for c in self._charts.values()})

    def mark_chart_abstract(self, chart_id: str) -> None:
        rec = self.get_chart(chart_id)
        self._charts[chart_id] = replace(rec, is_chart_abstract=True)

    @property
    def n_charts(self) -> int:
        return len(self._charts)

    @property
    def n_annotated(self) -> int:
        return sum(1 for c in self._charts.values() if c.ccv is not None)


def _require(obj: dict, fields: Iterable[str], lineno: int) -> None:
    for f in fields:
        if f not in obj:
            raise MissingField(f, lineno)


def _parse_axes(raw, lineno: int) -> tuple[AxisMeta, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise MalformedLine(lineno, "axes must be a list")
    axes = []
    for entry in raw:
        for f in ("axis_id", "min", "max", "scale"):
            if f not in entry:
                raise MissingField(f"axes.{f}", lineno)
        ax = AxisMeta(
            axis_id=str(entry["axis_id"]),
            min=float(entry["min"]),
            max=float(entry["max"]),
            scale=str(entry["scale"]),
        )
        problem = ax.validate()
        if problem:
            raise MalformedLine(lineno, problem)
        axes.append(ax)
    return tuple(axes)


def ingest_charts(path: str | Path) -> Corpus:
    """Load and validate a chart file; duplicate ids and bad axes are fatal."""
    corpus = Corpus()
    for lineno, obj in jsonl.read_records(path):
        _require(obj, ("chart_id", "image_path", "caption", "paper_id", "domain"), lineno)
        chart_id = str(obj["chart_id"])
        if chart_id in corpus._charts:
            raise DuplicateId(chart_id)
        caption = str(obj["caption"])
        if not caption.strip():
            raise MalformedLine(lineno, f"chart {chart_id!r}: caption must be non-empty")
        rec = ChartRecord(
            chart_id=chart_id,
            image_path=str(obj["image_path"]),
            caption=caption,
            paper_id=str(obj["paper_id"]),
            domain=str(obj["domain"]),
            axes=_parse_axes(obj.get("axes"), lineno),
        )
        if obj.get("ccv") is not None:
            rec = replace(rec, ccv=CCVector.from_bits(obj["ccv"], chart_id))
        corpus._charts[chart_id] = rec
    return corpus


def attach_ccv(corpus: Corpus, annotations: str | Path) -> Corpus:
    """Attach ten-value binary annotations to existing charts.

    Charts without a line in the file simply stay unannotated; unknown
    chart ids, wrong arity and non-binary values are fatal.
    """
    for lineno, obj in jsonl.read_records(annotations):
        _require(obj, ("chart_id", "ccv"), lineno)
        chart_id = str(obj["chart_id"])
        if chart_id not in corpus._charts:
            raise UnknownChartId(chart_id)
        bits = obj["ccv"]
        if not isinstance(bits, list) or len(bits) != 10:
            raise WrongArity(len(bits) if isinstance(bits, list) else 0)
        for v in bits:
            if v not in (0, 1):
                raise NonBinaryValue(chart_id, v)
        corpus._charts[chart_id] = replace(
            corpus._charts[chart_id], ccv=CCVector.from_bits(bits, chart_id)
        )
    return corpus


def ingest_papers(corpus: Corpus, path: str | Path) -> Corpus:
    """Load paper metadata and cross-link papers to their charts."""
    for lineno, obj in jsonl.read_records(path):
        _require(obj, ("paper_id", "abstract", "conclusion", "chart_ids"), lineno)
        paper_id = str(obj["paper_id"])
        chart_ids = tuple(str(c) for c in obj["chart_ids"])
        for cid in chart_ids:
            if cid not in corpus._charts:
                raise DanglingChartRef(paper_id, cid)
        rec = PaperRecord(
            paper_id=paper_id,
            abstract_text=str(obj["abstract"]),
            conclusion_text=str(obj["conclusion"]),
            chart_ids=chart_ids,
            citation_count=obj.get("citations"),
            subfield=obj.get("subfield"),
        )
        if not rec.aqa_eligible:
            corpus.warnings.append(
                f"paper {paper_id!r} has an empty abstract; excluded from knowledge-question selection"
            )
        corpus._papers[paper_id] = rec
        for cid in chart_ids:
            corpus._chart_papers.setdefault(cid, []).append(paper_id)
    return corpus


def chart_to_record(chart: ChartRecord) -> dict:
    """Serialize in the canonical line layout (fixed key order)."""
    rec = {
        "chart_id": chart.chart_id,
        "image_path": chart.image_path,
        "caption": chart.caption,
        "paper_id": chart.paper_id,
        "domain": chart.domain,
        "axes": [
            {"axis_id": ax.axis_id, "min": ax.min, "max": ax.max, "scale": ax.scale}
            for ax in chart.axes
        ],
    }
    if chart.ccv is not None:
        rec["ccv"] = list(chart.ccv.bits())
    if chart.is_chart_abstract:
        rec["is_chart_abstract"] = True
    return rec


def paper_to_record(paper: PaperRecord) -> dict:
    return {
        "paper_id": paper.paper_id,
        "abstract": paper.abstract_text,
        "conclusion": paper.conclusion_text,
        "chart_ids": list(paper.chart_ids),
        "citations": paper.citation_count,
        "subfield": paper.subfield,
    }


def save_corpus(corpus: Corpus, out_dir: str | Path) -> dict[str, str]:
    """Write the validated corpus as charts.jsonl / papers.jsonl under out_dir."""
    out_dir = Path(out_dir)
    charts_path = out_dir / "charts.jsonl"
    papers_path = out_dir / "papers.jsonl"
    jsonl.write_records(charts_path, (chart_to_record(c) for c in corpus.charts()))
    jsonl.write_records(papers_path, (paper_to_record(p) for p in corpus.papers()))
    return {"charts": str(charts_path), "papers": str(papers_path)}


def load_corpus(corpus_dir: str | Path) -> Corpus:
    """Re-open a corpus previously written by save_corpus."""
    corpus_dir = Path(corpus_dir)
    corpus = ingest_charts(corpus_dir / "charts.jsonl")
    papers_path = corpus_dir / "papers.jsonl"
    if papers_path.exists():
        ingest_papers(corpus, papers_path)
    for _, obj in jsonl.read_records(corpus_dir / "charts.jsonl"):
        if obj.get("is_chart_abstract"):
            corpus.mark_chart_abstract(str(obj["chart_id"]))
    return corpus
