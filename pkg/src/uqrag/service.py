"""HTTP service exposing the pipeline for interactive use."""

import logging
import time
import uuid

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .config import build_pipeline, load_pipeline_config
from .errors import ConfigError, EmptyRetrievalError, PipelineStageError, UqragError
from .index import load as load_index

logger = logging.getLogger(__name__)


class AskBody(BaseModel):
    question: str = ""
    department_hint: str | None = None


def _error(status, code, message, request_id):
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "request_id": request_id},
    )


def create_app(pipeline, cors_origins=()):
    app = FastAPI(title="uqrag", version=__version__)
    if cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.post("/ask")
    def ask(body: AskBody):
        request_id = uuid.uuid4().hex
        question = body.question or ""
        if not question.strip():
            return _error(400, "empty_question", "question must be nonempty", request_id)
        if body.department_hint is not None and body.department_hint not in pipeline.taxonomy.labels:
            return _error(
                400,
                "unknown_department",
                f"department_hint '{body.department_hint}' is not in the taxonomy",
                request_id,
            )
        started = time.perf_counter()
        try:
            record = pipeline.answer(question, department_hint=body.department_hint)
        except PipelineStageError as exc:
            if isinstance(exc.__cause__, EmptyRetrievalError):
                return _error(422, "empty_retrieval", str(exc), request_id)
            logger.exception("ask failed (request_id=%s)", request_id)
            return _error(500, "pipeline_error", str(exc), request_id)
        except UqragError as exc:
            logger.exception("ask failed (request_id=%s)", request_id)
            return _error(500, "internal_error", str(exc), request_id)
        latency_ms = int((time.perf_counter() - started) * 1000)
        return {
            "answer": record.answer,
            "department": record.department,
            "contexts": [
                {"chunk_id": item.chunk_id, "score": item.score, "text": item.text}
                for item in record.retrieval.items
            ],
            "latency_ms": latency_ms,
            "request_id": request_id,
        }

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "index_chunks": pipeline.index.count}

    @app.get("/version")
    def version():
        return {"name": "uqrag", "version": __version__}

    return app


def build_app_from_config(config_path, index_path=None):
    """Load config and index up front so startup failures are immediate."""
    config = load_pipeline_config(config_path)
    index_path = index_path or config.index_path
    if index_path is None:
        raise ConfigError("service needs an index path (config key 'index_path')")
    index = load_index(index_path)
    pipeline = build_pipeline(config, index)
    return create_app(pipeline, cors_origins=config.cors_origins)


def serve(config_path, bind="127.0.0.1:8000", index_path=None):
    import uvicorn

    app = build_app_from_config(config_path, index_path=index_path)
    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"bind address must be host:port, got '{bind}'")
    uvicorn.run(app, host=host, port=int(port))
