"""Event-sourced state for the expert validation workflow.

Every mutation is one appended event; replaying the log reconstructs the
exact state, which is what makes the human process auditable. Round 1
assigns two distinct reviewers per pair; disagreement opens round 2 with
one previously uninvolved reviewer and majority-of-three decides. A pair
is terminal only through that consensus rule.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..errors import (
    AlreadySubmitted,
    CommentRequired,
    EmptyGroup,
    NotEnoughReviewers,
    RoundIncomplete,
    UnknownAssignment,
)

VALID = "Valid"
FLAWED = "Flawed"
LABELS = (VALID, FLAWED)


@dataclass
class Assignment:
    assignment_id: str
    qa_id: str
    reviewer_id: str
    round: int
    state: str = "Pending"           # Pending | Submitted
    label: Optional[str] = None
    comment: Optional[str] = None
    submitted_at: Optional[float] = None


@dataclass
class PilotRating:
    qa_id: str
    reviewer_id: str
    relevance: int                   # 1..5
    validity: int                    # -1 | 0 | 1

    def __post_init__(self):
        if not 1 <= self.relevance <= 5:
            raise ValueError(f"relevance must be 1..5, got {self.relevance}")
        if self.validity not in (-1, 0, 1):
            raise ValueError(f"validity must be -1, 0 or 1, got {self.validity}")


class ReviewStore:
    """In-memory review state backed by an append-only event log."""

    def __init__(self, log_path: Optional[str | Path] = None, clock: Callable[[], float] = time.time):
        self.log_path = Path(log_path) if log_path else None
        self.clock = clock
        self.assignments: dict[str, Assignment] = {}
        self.by_qa: dict[str, list[str]] = {}
        self.qa_status: dict[str, str] = {}       # UnderReview | Valid | Flawed
        self.escalation_queue: list[str] = []     # qa_ids waiting for a fresh reviewer
        self.pilot_ratings: list[PilotRating] = []
        self.reviewers: list[str] = []
        self._next_assignment = 1
        self._lock = threading.Lock()
        if self.log_path and self.log_path.exists():
            self._replay()

    # --- event plumbing ---------------------------------------------------

    def _append(self, event: dict) -> None:
        self._apply(event)
        if self.log_path:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event, ensure_ascii=False, separators=(",", ":")))
                fh.write("\n")

    def _replay(self) -> None:
        with open(self.log_path, "r", encoding="utf-8") as fh:
            for raw in fh:
                raw = raw.strip()
                if raw:
                    self._apply(json.loads(raw))

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "reviewers_registered":
            self.reviewers = list(event["reviewers"])
        elif kind == "assignment_created":
            a = Assignment(
                assignment_id=event["assignment_id"],
                qa_id=event["qa_id"],
                reviewer_id=event["reviewer_id"],
                round=event["round"],
            )
            self.assignments[a.assignment_id] = a
            self.by_qa.setdefault(a.qa_id, []).append(a.assignment_id)
            self.qa_status.setdefault(a.qa_id, "UnderReview")
            seq = int(a.assignment_id.split("-")[1])
            self._next_assignment = max(self._next_assignment, seq + 1)
            if a.qa_id in self.escalation_queue:
                self.escalation_queue.remove(a.qa_id)
        elif kind == "review_submitted":
            a = self.assignments[event["assignment_id"]]
            a.state = "Submitted"
            a.label = event["label"]
            a.comment = event.get("comment")
            a.submitted_at = event.get("submitted_at")
        elif kind == "status_resolved":
            self.qa_status[event["qa_id"]] = event["status"]
        elif kind == "escalation_queued":
            if event["qa_id"] not in self.escalation_queue:
                self.escalation_queue.append(event["qa_id"])
        elif kind == "pilot_submitted":
            self.pilot_ratings.append(
                PilotRating(
                    qa_id=event["qa_id"],
                    reviewer_id=event["reviewer_id"],
                    relevance=event["relevance"],
                    validity=event["validity"],
                )
            )
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    # --- queries ------------------------------------------------------------

    def assignments_for_qa(self, qa_id: str, round_no: Optional[int] = None) -> list[Assignment]:
        out = [self.assignments[a] for a in self.by_qa.get(qa_id, [])]
        if round_no is not None:
            out = [a for a in out if a.round == round_no]
        return out

    def pending_for_reviewer(self, reviewer_id: str) -> list[Assignment]:
        return [
            a
            for a in self.assignments.values()
            if a.reviewer_id == reviewer_id and a.state == "Pending"
        ]

    def progress(self) -> dict:
        counts = {"UnderReview": 0, "Valid": 0, "Flawed": 0}
        for status in self.qa_status.values():
            counts[status] = counts.get(status, 0) + 1
        pending = sum(1 for a in self.assignments.values() if a.state == "Pending")
        submitted = sum(1 for a in self.assignments.values() if a.state == "Submitted")
        return {
            "qa_status": counts,
            "pending_assignments": pending,
            "submitted_assignments": submitted,
            "escalation_queue": len(self.escalation_queue),
            "pilot_ratings": len(self.pilot_ratings),
        }

    # --- operations -----------------------------------------------------------

    def register_reviewers(self, reviewer_ids: list[str]) -> None:
        self._append({"event": "reviewers_registered", "reviewers": sorted(reviewer_ids)})

    def assign_reviewers(
        self,
        qa_ids: list[str],
        reviewers: Optional[list[str]] = None,
        seed: int = 0,
        authors: Optional[dict[str, str]] = None,
    ) -> list[Assignment]:
        """Create round-1 assignments: two distinct reviewers per pair.

        Load balancing is greedy lowest-count-first with a seeded shuffle
        as the tie-break, which keeps per-reviewer loads within one of
        each other and is reproducible under the seed.
        """
        with self._lock:
            pool = list(reviewers if reviewers is not None else self.reviewers)
            if len(pool) < 2:
                raise NotEnoughReviewers(len(pool))
            if reviewers is not None and not self.reviewers:
                self.register_reviewers(pool)
            rng = np.random.default_rng(seed)
            order = {r: i for i, r in enumerate(rng.permutation(sorted(pool)))}
            load = {r: 0 for r in pool}
            for a in self.assignments.values():
                if a.reviewer_id in load:
                    load[a.reviewer_id] += 1
            created = []
            for qa_id in sorted(qa_ids):
                if self.assignments_for_qa(qa_id, round_no=1):
                    continue  # idempotent: keep existing round-1 assignments
                author = (authors or {}).get(qa_id)
                eligible = [r for r in pool if r != author]
                if len(eligible) < 2:
                    raise NotEnoughReviewers(len(eligible))
                chosen = sorted(eligible, key=lambda r: (load[r], order[r]))[:2]
                for reviewer in chosen:
                    a = self._create_assignment(qa_id, reviewer, round_no=1)
                    created.append(a)
                    load[reviewer] += 1
            return created

    def _create_assignment(self, qa_id: str, reviewer_id: str, round_no: int) -> Assignment:
        assignment_id = f"a-{self._next_assignment:06d}"
        self._append(
            {
                "event": "assignment_created",
                "assignment_id": assignment_id,
                "qa_id": qa_id,
                "reviewer_id": reviewer_id,
                "round": round_no,
            }
        )
        return self.assignments[assignment_id]

    def submit_review(self, assignment_id: str, label: str, comment: Optional[str] = None) -> str:
        """Store a label; when the round completes, resolve the pair's status."""
        with self._lock:
            a = self.assignments.get(assignment_id)
            if a is None:
                raise UnknownAssignment(assignment_id)
            if a.state == "Submitted":
                raise AlreadySubmitted(assignment_id)
            if label not in LABELS:
                raise ValueError(f"label must be one of {LABELS}, got {label!r}")
            if label == FLAWED and not (comment and comment.strip()):
                raise CommentRequired()
            self._append(
                {
                    "event": "review_submitted",
                    "assignment_id": assignment_id,
                    "label": label,
                    "comment": comment,
                    "submitted_at": self.clock(),
                }
            )
            round_assignments = self.assignments_for_qa(a.qa_id, round_no=a.round)
            if all(x.state == "Submitted" for x in round_assignments):
                self._resolve(a.qa_id)
            return self.qa_status[a.qa_id]

    def resolve_status(self, qa_id: str) -> str:
        """Public resolve: requires the current round to be fully submitted."""
        with self._lock:
            current_round = max(a.round for a in self.assignments_for_qa(qa_id))
            round_assignments = self.assignments_for_qa(qa_id, round_no=current_round)
            if any(a.state != "Submitted" for a in round_assignments):
                raise RoundIncomplete(qa_id)
            return self._resolve(qa_id)

    def _resolve(self, qa_id: str) -> str:
        allp = self.assignments_for_qa(qa_id)
        labels = [a.label for a in sorted(allp, key=lambda a: a.assignment_id) if a.label]
        rounds = max(a.round for a in allp)
        if rounds == 1:
            first, second = labels[0], labels[1]
            if first == second:
                self._append({"event": "status_resolved", "qa_id": qa_id, "status": first})
                return first
            fresh = self._fresh_reviewer(qa_id)
            if fresh is None:
                self._append({"event": "escalation_queued", "qa_id": qa_id, "round": 2})
                return "UnderReview"
            self._create_assignment(qa_id, fresh, round_no=2)
            return "UnderReview"
        # majority of three settles it; counts are 2-1 at worst
        majority = VALID if labels.count(VALID) > labels.count(FLAWED) else FLAWED
        self._append({"event": "status_resolved", "qa_id": qa_id, "status": majority})
        return majority

    def _fresh_reviewer(self, qa_id: str) -> Optional[str]:
        used = {a.reviewer_id for a in self.assignments_for_qa(qa_id)}
        load: dict[str, int] = {r: 0 for r in self.reviewers}
        for a in self.assignments.values():
            if a.reviewer_id in load:
                load[a.reviewer_id] += 1
        candidates = [r for r in self.reviewers if r not in used]
        if not candidates:
            return None
        return sorted(candidates, key=lambda r: (load[r], r))[0]

    def retry_escalations(self) -> int:
        """Drain the escalation queue where a fresh reviewer is now available."""
        with self._lock:
            drained = 0
            for qa_id in list(self.escalation_queue):
                fresh = self._fresh_reviewer(qa_id)
                if fresh is not None:
                    self._create_assignment(qa_id, fresh, round_no=2)
                    drained += 1
            return drained

    def submit_pilot(self, qa_id: str, reviewer_id: str, relevance: int, validity: int) -> None:
        with self._lock:
            rating = PilotRating(qa_id=qa_id, reviewer_id=reviewer_id, relevance=relevance, validity=validity)
            self._append(
                {
                    "event": "pilot_submitted",
                    "qa_id": rating.qa_id,
                    "reviewer_id": rating.reviewer_id,
                    "relevance": rating.relevance,
                    "validity": rating.validity,
                }
            )
            # In pilot mode the rating completes the reviewer's assignment.
            for a in self.assignments_for_qa(qa_id):
                if a.reviewer_id == reviewer_id and a.state == "Pending":
                    self._apply(
                        {
                            "event": "review_submitted",
                            "assignment_id": a.assignment_id,
                            "label": None,
                            "submitted_at": self.clock(),
                        }
                    )

    def snapshot(self, path: str | Path) -> None:
        """Write a compacted state snapshot next to the event log."""
        state = {
            "assignments": [
                {
                    "assignment_id": a.assignment_id,
                    "qa_id": a.qa_id,
                    "reviewer_id": a.reviewer_id,
                    "round": a.round,
                    "state": a.state,
                    "label": a.label,
                    "comment": a.comment,
                }
                for a in sorted(self.assignments.values(), key=lambda a: a.assignment_id)
            ],
            "qa_status": dict(sorted(self.qa_status.items())),
            "escalation_queue": list(self.escalation_queue),
            "progress": self.progress(),
        }
        Path(path).write_text(json.dumps(state, indent=2, ensure_ascii=False), encoding="utf-8")


def aggregate_pilot(
    ratings: list[PilotRating],
    qa_meta: dict[str, dict],
    group_key: tuple[str, str] = ("domain", "selection_method"),
) -> dict[tuple, dict]:
    """Mean relevance and validity per group, to 2 decimals.

    qa_meta maps qa_id to a dict providing the grouping fields.
    """
    groups: dict[tuple, list[PilotRating]] = {}
    for r in ratings:
        meta = qa_meta.get(r.qa_id, {})
        key = tuple(meta.get(k) for k in group_key)
        groups.setdefault(key, []).append(r)
    out = {}
    for key, rs in sorted(groups.items(), key=lambda kv: tuple(str(x) for x in kv[0])):
        if not rs:
            raise EmptyGroup(key)
        out[key] = {
            "n": len(rs),
            "mean_relevance": round(sum(r.relevance for r in rs) / len(rs), 2),
            "mean_validity": round(sum(r.validity for r in rs) / len(rs), 2),
        }
    return out
