"""HTTP façade over the review store, consumed by the browser UI.

Reviewers authenticate with a static token (X-Review-Token header or a
`token` query parameter); the queue endpoint returns their pending
assignments joined with the chart, question and source-paper excerpt.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .. import jsonl
from ..corpus import Corpus, load_corpus
from ..errors import AlreadySubmitted, CommentRequired, UnknownAssignment
from ..qa_gen import QAPair
from .store import ReviewStore, aggregate_pilot


class ReviewSubmission(BaseModel):
    assignment_id: str
    label: str
    comment: Optional[str] = None


class PilotSubmission(BaseModel):
    qa_id: str
    relevance: int = Field(ge=1, le=5)
    validity: int


def load_reviewers(path: str | Path) -> dict[str, str]:
    """Token -> reviewer_id map from a jsonl file of {reviewer_id, token}."""
    tokens = {}
    for _, obj in jsonl.read_records(path):
        tokens[str(obj["token"])] = str(obj["reviewer_id"])
    return tokens


def create_app(
    data_dir: str | Path,
    reviewers_file: str | Path,
    seed: int = 0,
    mode: str = "validation",
    ui_dir: Optional[str | Path] = None,
    auto_assign: bool = True,
) -> FastAPI:
    data_dir = Path(data_dir)
    tokens = load_reviewers(reviewers_file)
    corpus: Optional[Corpus] = None
    if (data_dir / "charts.jsonl").exists():
        corpus = load_corpus(data_dir)

    benchmark: dict[str, QAPair] = {}
    qa_meta: dict[str, dict] = {}
    benchmark_path = data_dir / "benchmark.jsonl"
    if benchmark_path.exists():
        for _, rec in jsonl.read_records(benchmark_path):
            pair = QAPair.from_record(rec)
            benchmark[pair.qa_id] = pair
            domain = None
            if corpus is not None and corpus.has_chart(pair.chart_id):
                domain = corpus.get_chart(pair.chart_id).domain
            qa_meta[pair.qa_id] = {
                "domain": domain,
                "selection_method": pair.selection_method or ("abstract" if pair.tier == "AQA" else "sampled"),
            }

    store = ReviewStore(log_path=data_dir / "events.jsonl")
    if not store.reviewers:
        store.register_reviewers(sorted(set(tokens.values())))
    if auto_assign and benchmark:
        store.assign_reviewers(sorted(benchmark), seed=seed)

    app = FastAPI(title="qa review service")
    # the UI may be hosted on another origin (it is configured by base URL);
    # auth is the reviewer token, so permissive CORS is fine on a LAN tool
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store
    app.state.benchmark = benchmark
    app.state.mode = mode

    def reviewer_from(request: Request) -> str:
        token = request.headers.get("x-review-token") or request.query_params.get("token")
        if not token or token not in tokens:
            raise HTTPException(status_code=401, detail="unknown or missing reviewer token")
        return tokens[token]

    def paper_excerpt(pair: QAPair) -> str:
        if corpus is None or not corpus.has_chart(pair.chart_id):
            return ""
        chart = corpus.get_chart(pair.chart_id)
        for paper in corpus.papers():
            if paper.paper_id == chart.paper_id:
                return paper.abstract_text[:600]
        return ""

    @app.get("/queue")
    def queue(request: Request, reviewer: Optional[str] = Query(default=None)):
        me = reviewer_from(request)
        if reviewer and reviewer != me:
            raise HTTPException(status_code=403, detail="token does not match requested reviewer")
        items = []
        for a in sorted(store.pending_for_reviewer(me), key=lambda a: a.assignment_id):
            pair = benchmark.get(a.qa_id)
            if pair is None:
                continue
            items.append(
                {
                    "assignment_id": a.assignment_id,
                    "qa_id": a.qa_id,
                    "chart_image_url": f"/charts/{pair.chart_id}/image",
                    "question": pair.question,
                    "reference_answer": pair.reference_answer,
                    "paper_excerpt": paper_excerpt(pair),
                    "round": a.round,
                    "mode": mode,
                }
            )
        return {"reviewer": me, "items": items}

    @app.post("/reviews")
    def post_review(body: ReviewSubmission, request: Request):
        me = reviewer_from(request)
        a = store.assignments.get(body.assignment_id)
        if a is None:
            raise HTTPException(status_code=404, detail="unknown assignment")
        if a.reviewer_id != me:
            raise HTTPException(status_code=403, detail="assignment belongs to another reviewer")
        if body.label not in ("Valid", "Flawed"):
            raise HTTPException(status_code=422, detail="label must be Valid or Flawed")
        try:
            status = store.submit_review(body.assignment_id, body.label, body.comment)
        except AlreadySubmitted:
            raise HTTPException(status_code=409, detail="already submitted")
        except CommentRequired:
            raise HTTPException(status_code=422, detail="a Flawed label requires a comment")
        except UnknownAssignment:
            raise HTTPException(status_code=404, detail="unknown assignment")
        return {"qa_id": a.qa_id, "qa_status": status}

    @app.post("/pilot")
    def post_pilot(body: PilotSubmission, request: Request):
        me = reviewer_from(request)
        if body.validity not in (-1, 0, 1):
            raise HTTPException(status_code=422, detail="validity must be -1, 0 or 1")
        if body.qa_id not in benchmark:
            raise HTTPException(status_code=404, detail="unknown qa_id")
        store.submit_pilot(body.qa_id, me, body.relevance, body.validity)
        return {"ok": True}

    @app.get("/progress")
    def progress():
        return store.progress()

    @app.get("/pilot/summary")
    def pilot_summary():
        grouped = aggregate_pilot(store.pilot_ratings, qa_meta)
        return JSONResponse(
            [
                {"domain": k[0], "selection_method": k[1], **v}
                for k, v in grouped.items()
            ]
        )

    @app.get("/charts/{chart_id}/image")
    def chart_image(chart_id: str):
        if corpus is None or not corpus.has_chart(chart_id):
            raise HTTPException(status_code=404, detail="unknown chart")
        path = Path(corpus.get_chart(chart_id).image_path)
        if not path.is_absolute():
            path = data_dir / path
        if not path.exists():
            raise HTTPException(status_code=404, detail="image file missing")
        return FileResponse(path)

    if ui_dir and Path(ui_dir).exists():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(
    data_dir: str | Path,
    reviewers_file: str | Path,
    port: int = 8800,
    seed: int = 0,
    mode: str = "validation",
    ui_dir: Optional[str | Path] = None,
) -> None:
    import uvicorn

    app = create_app(data_dir, reviewers_file, seed=seed, mode=mode, ui_dir=ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
