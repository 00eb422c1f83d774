"""Local HTTP service for the side-panel UI and other clients.

Routes live under /api/v1. Scans are synchronous below a size cutoff;
larger documents get a pollable job id. No request content is written
to disk unless audit logging is explicitly enabled; the whole point of
the service is that review happens on the user's machine.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
import uuid
from typing import Optional

from fastapi import BackgroundTasks, FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .pipeline import ClauseFinding, Engine, ScanConfig, findings_to_json
from .taxonomy import CATEGORIES

DEFAULT_SYNC_LIMIT = 200_000  # bytes of content handled synchronously
DEFAULT_HARD_CAP = 5_000_000
DEFAULT_JOB_TTL_S = 600.0
DEFAULT_MAX_SIMILAR_CAP = 20


class ScanOptions(BaseModel):
    categories: Optional[list[str]] = None
    detection_threshold: Optional[float] = None
    include_similar: bool = True
    max_similar: int = 5


class ScanRequest(BaseModel):
    content: str = Field(min_length=1)
    content_type: str = "html"
    options: ScanOptions = Field(default_factory=ScanOptions)


class _JobStore:
    def __init__(self, ttl_s: float):
        self.ttl_s = ttl_s
        self.jobs: dict[str, dict] = {}

    def purge(self) -> None:
        cutoff = time.monotonic() - self.ttl_s
        stale = [job_id for job_id, job in self.jobs.items() if job["created"] < cutoff]
        for job_id in stale:
            del self.jobs[job_id]

    def create(self) -> str:
        self.purge()
        job_id = uuid.uuid4().hex
        self.jobs[job_id] = {"status": "pending", "created": time.monotonic(), "body": None}
        return job_id

    def finish(self, job_id: str, body: str, status: str = "done") -> None:
        if job_id in self.jobs:
            self.jobs[job_id].update(status=status, body=body)

    def get(self, job_id: str) -> Optional[dict]:
        self.purge()
        return self.jobs.get(job_id)


def _error(status: int, message: str, extra: Optional[dict] = None) -> JSONResponse:
    body = {"error": message}
    if extra:
        body.update(extra)
    return JSONResponse(status_code=status, content=body)


def _all_classification_failed(findings: list[ClauseFinding], categories) -> bool:
    if not findings:
        return False
    for finding in findings:
        errored = {e["task"] for e in finding.errors}
        for category in categories:
            if f"{category}-classify" not in errored:
                return False
    return True


def create_app(
    engine: Engine,
    sync_limit: int = DEFAULT_SYNC_LIMIT,
    hard_cap: int = DEFAULT_HARD_CAP,
    job_ttl_s: float = DEFAULT_JOB_TTL_S,
    max_similar_cap: int = DEFAULT_MAX_SIMILAR_CAP,
) -> FastAPI:
    app = FastAPI(title="tosguard", version="1")
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=".*",
        allow_methods=["*"],
        allow_headers=["*"],
    )
    jobs = _JobStore(job_ttl_s)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        fields = ", ".join(
            ".".join(str(p) for p in err["loc"] if p != "body") for err in exc.errors()
        )
        return _error(400, f"malformed request: {fields}")

    def scan_config(options: ScanOptions) -> ScanConfig:
        base = engine.config
        categories = base.categories
        if options.categories is not None:
            bad = [c for c in options.categories if c not in CATEGORIES]
            if bad:
                raise ValueError(f"unknown categories: {bad}")
            categories = tuple(options.categories)
        if options.max_similar > max_similar_cap:
            raise ValueError(f"max_similar exceeds cap of {max_similar_cap}")
        return dataclasses.replace(
            base,
            categories=categories,
            threshold=(
                options.detection_threshold
                if options.detection_threshold is not None
                else base.threshold
            ),
            include_similar=options.include_similar,
            max_similar=options.max_similar,
        )

    def run_scan(request: ScanRequest) -> Response:
        config = scan_config(request.options)
        findings = engine.with_config(config).scan(request.content, request.content_type)
        body = findings_to_json(findings)
        if _all_classification_failed(findings, config.categories):
            return Response(
                content=json.dumps(
                    {"error": "providers unreachable", "partial": json.loads(body)},
                    ensure_ascii=False,
                    sort_keys=True,
                ),
                status_code=503,
                media_type="application/json",
            )
        return Response(content=body, media_type="application/json")

    @app.post("/api/v1/scan")
    def scan(request: ScanRequest, background: BackgroundTasks):
        if request.content_type not in ("html", "text"):
            return _error(400, f"invalid field content_type: {request.content_type!r}")
        if len(request.content.encode("utf-8")) > hard_cap:
            return _error(413, f"content exceeds hard cap of {hard_cap} bytes")
        try:
            if len(request.content.encode("utf-8")) > sync_limit:
                job_id = jobs.create()

                def work() -> None:
                    try:
                        response = run_scan(request)
                        jobs.finish(
                            job_id,
                            response.body.decode("utf-8"),
                            "done" if response.status_code == 200 else "error",
                        )
                    except Exception as exc:  # job errors surface on poll
                        jobs.finish(job_id, json.dumps({"error": str(exc)}), "error")

                background.add_task(work)
                return JSONResponse(status_code=202, content={"job_id": job_id})
            return run_scan(request)
        except ValueError as exc:
            return _error(400, str(exc))

    @app.get("/api/v1/scan/{job_id}")
    def scan_job(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            return _error(404, f"unknown job {job_id}")
        if job["status"] == "pending":
            return {"status": "pending"}
        return Response(
            content=json.dumps(
                {"status": job["status"], "result": json.loads(job["body"])},
                ensure_ascii=False,
                sort_keys=True,
            ),
            media_type="application/json",
        )

    @app.get("/api/v1/labels")
    def labels(response: Response):
        entries = [
            {
                "code": label.code,
                "display_name": label.display_name,
                "category": label.category,
                "legal_ref_url": label.legal_ref_url,
                "explanation": label.explanation,
            }
            for label in engine.taxonomy
        ]
        body = json.dumps({"labels": entries}, ensure_ascii=False, sort_keys=True)
        etag = hashlib.sha256(body.encode("utf-8")).hexdigest()[:16]
        return Response(content=body, media_type="application/json", headers={"ETag": etag})

    @app.get("/api/v1/similar")
    def similar(clause_text: str = "", k: int = 5):
        if not clause_text.strip():
            return _error(400, "clause_text must be nonempty")
        if k < 1 or k > max_similar_cap:
            return _error(400, f"k must be in [1, {max_similar_cap}]")
        try:
            results = engine.similar(clause_text, k)
        except Exception as exc:
            return _error(503, f"retrieval failed: {exc}")
        return {
            "similar": [
                {
                    "clause_id": s.clause_id,
                    "text": s.text,
                    "labels": list(s.labels),
                    "relevance": s.relevance,
                }
                for s in results
            ]
        }

    @app.get("/api/v1/health")
    def health():
        return {"status": "ok", "indexed_clauses": len(engine.kb.dense)}

    return app
