"""HTTP API for blinded ranking sessions.

Raters see opaque image ids only; the method bindings stay in the plan file
on the server. Submissions go through the append-only store, so duplicate
protection and resume-after-restart both come from the log itself.
"""

from __future__ import annotations

import hashlib
import random
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from lesionforge.errors import (
    DuplicateSubmissionError,
    EmptyStoreError,
    InvalidPermutationError,
    UnknownSetError,
)

from .report import rankings_report, report_text
from .sets import ReviewPlan, ReviewSet
from .store import RankingRecord, RankingStore

_STATUS = {
    UnknownSetError: 404,
    DuplicateSubmissionError: 409,
    EmptyStoreError: 409,
    InvalidPermutationError: 422,
}


def _session_order(plan: ReviewPlan, session_id: str) -> list[str]:
    """Per-rater set order: a seeded shuffle of the plan's set ids."""
    ids = [s.set_id for s in plan.sets]
    digest = hashlib.sha256(f"{plan.seed}:order:{session_id}".encode()).digest()
    random.Random(int.from_bytes(digest[:8], "big")).shuffle(ids)
    return ids


def _display_order(plan: ReviewPlan, session_id: str, review_set: ReviewSet) -> list[str]:
    """Blinded image order, fixed per (session, set)."""
    ids = review_set.blinded_ids()
    digest = hashlib.sha256(f"{plan.seed}:display:{session_id}:{review_set.set_id}".encode()).digest()
    random.Random(int.from_bytes(digest[:8], "big")).shuffle(ids)
    return ids


def _check_rank_keys(given: Mapping[str, int], expected: set[str], label: str) -> None:
    if set(given) != expected:
        raise InvalidPermutationError(f"{label} ranks must cover exactly the set's {len(expected)} images")
    values = sorted(int(v) for v in given.values())
    if values != list(range(1, len(expected) + 1)):
        raise InvalidPermutationError(f"{label} ranks must be a permutation of 1..{len(expected)}")


class RankingSubmission(BaseModel):
    session: str = Field(min_length=1)
    set_id: str = Field(min_length=1)
    naturalness: dict[str, int]
    similarity: dict[str, int] = {}


def create_app(plan: ReviewPlan, store: RankingStore, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="lesionforge review")

    def _error_response(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=_STATUS[type(exc)], content={"detail": str(exc)})

    for exc_type in _STATUS:
        app.add_exception_handler(exc_type, _error_response)

    @app.get("/sets/next")
    def next_set(session: str) -> dict:
        completed = store.completed_sets(session)
        order = _session_order(plan, session)
        progress = {"completed": len(completed & set(order)), "total": len(order)}
        for set_id in order:
            if set_id in completed:
                continue
            review_set = plan.set_by_id(set_id)
            display = _display_order(plan, session, review_set)
            sim_ids = {review_set.method_to_image[m] for m in plan.similarity_methods}
            return {
                "done": False,
                "set_id": set_id,
                "images": display,
                "similarity_images": [i for i in display if i in sim_ids],
                "background": review_set.background_image,
                "reference": review_set.reference_image,
                "progress": progress,
            }
        return {"done": True, "set_id": None, "progress": progress}

    @app.get("/image/{opaque_id}")
    def image(opaque_id: str) -> FileResponse:
        path = plan.images.get(opaque_id)
        if path is None or not Path(path).is_file():
            raise UnknownSetError(f"unknown image id {opaque_id!r}")
        suffix = Path(path).suffix.lower()
        media = "image/jpeg" if suffix in (".jpg", ".jpeg") else "image/png"
        return FileResponse(path, media_type=media)

    @app.post("/rankings")
    def submit(body: RankingSubmission) -> dict:
        review_set = plan.set_by_id(body.set_id)
        if review_set is None:
            raise UnknownSetError(f"unknown set id {body.set_id!r}")
        if body.set_id in store.completed_sets(body.session):
            raise DuplicateSubmissionError(
                f"session {body.session!r} already ranked set {body.set_id!r}"
            )
        by_image = {oid: method for method, oid in review_set.method_to_image.items()}
        sim_expected = {review_set.method_to_image[m] for m in plan.similarity_methods}
        _check_rank_keys(body.naturalness, set(by_image), "naturalness")
        _check_rank_keys(body.similarity, sim_expected, "similarity")
        record = RankingRecord(
            session_id=body.session,
            set_id=body.set_id,
            naturalness={by_image[oid]: int(r) for oid, r in body.naturalness.items()},
            similarity={by_image[oid]: int(r) for oid, r in body.similarity.items()},
        )
        store.append(record)
        completed = store.completed_sets(body.session)
        return {
            "stored": True,
            "set_id": body.set_id,
            "progress": {"completed": len(completed), "total": len(plan.sets)},
        }

    @app.get("/report")
    def report() -> dict:
        return rankings_report(store.records(), plan.alignment_by_method)

    @app.get("/report.txt")
    def report_as_text() -> PlainTextResponse:
        return PlainTextResponse(report_text(rankings_report(store.records(), plan.alignment_by_method)))

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
