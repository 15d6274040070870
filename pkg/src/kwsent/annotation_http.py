"""HTTP+JSON face of the annotation service.

Routes:
    GET  /api/tasks/next?annotator=<tag>      200 task | 204 nothing open
    POST /api/tasks/{task_id}/keywords        200 | 400 validation | 409 conflict
    GET  /api/progress                        {"total": n, "done": k}

A static directory (the browser annotation client) may be mounted at /.
"""

from __future__ import annotations

import os

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .annotation import AnnotationService
from .exceptions import AnnotationValidationError, DuplicateSubmissionError


class KeywordSubmission(BaseModel):
    annotator: str
    positions: list[int]


def create_app(service: AnnotationService, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="keyword annotation service")

    @app.get("/api/tasks/next")
    def next_task(annotator: str):
        task = service.next_task(annotator)
        if task is None:
            return Response(status_code=204)
        return {
            "task_id": task.task_id,
            "doc_id": task.doc_id,
            "tokens": list(task.tokens),
        }

    @app.post("/api/tasks/{task_id}/keywords")
    def submit_keywords(task_id: int, submission: KeywordSubmission):
        try:
            record = service.submit(
                task_id, submission.annotator, submission.positions
            )
        except DuplicateSubmissionError as exc:
            return JSONResponse(status_code=409, content={"detail": str(exc)})
        except AnnotationValidationError as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        return {"status": "ok", "task_id": record.task_id}

    @app.get("/api/progress")
    def progress():
        total, done = service.progress()
        return {"total": total, "done": done}

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
