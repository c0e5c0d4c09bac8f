"""HTTP/JSON service the annotation UI talks to.

Record refs travel as ``item~model~condition~mode`` path segments (the model
id may contain slashes, so the route uses a path converter). Writes are
validated before commit and guarded by per-record optimistic versions;
a stale write returns 409 with the current version so the client can merge.
"""

from __future__ import annotations

import threading
from typing import Optional

import uvicorn
from fastapi import FastAPI, HTTPException, Query, Response
from pydantic import BaseModel, Field

from .agreement import AgreementError, compute_agreement
from .exports import error_count_table, errors_table_csv, quality_table_csv
from .schema import (
    Dimension,
    ErrorAnnotation,
    Quality,
    QUALITY_DESCRIPTIONS,
    RecordRef,
    SUBTYPE_DESCRIPTIONS,
    TYPOLOGY,
)
from .store import (
    AnnotationStore,
    StoreConflict,
    StoreValidationError,
    UnknownRecordError,
)


class AnnotationIn(BaseModel):
    subtype: str
    span: Optional[tuple[int, int]] = None
    note: str = ""


class AnnotationsPost(BaseModel):
    annotator_id: str = Field(min_length=1)
    version: Optional[int] = None
    annotations: list[AnnotationIn] = Field(default_factory=list)


class QualityPost(BaseModel):
    annotator_id: str = Field(min_length=1)
    version: Optional[int] = None
    quality: Quality


def _parse_ref(raw: str) -> RecordRef:
    try:
        return RecordRef.parse(raw)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _state_payload(store: AnnotationStore, ref: RecordRef) -> dict:
    state = store.state(ref)
    item_id = ref.item_id
    source, reference = store.item_texts.get(item_id, ("", ""))
    return {
        "ref": str(ref),
        "run": store.run_for_ref(ref),
        "item_id": item_id,
        "model_id": ref.model_id,
        "condition": ref.condition,
        "mode": ref.mode,
        "source": source,
        "reference": reference,
        "output": state.record.output_text,
        "prompt": state.prompt,
        "status": state.record.status,
        "version": state.version,
        "annotations": {
            annotator: [
                {"subtype": a.subtype, "span": list(a.span) if a.span else None, "note": a.note}
                for a in annotations
            ]
            for annotator, annotations in state.annotations.items()
        },
        "quality": {
            annotator: rating.quality.value for annotator, rating in state.ratings.items()
        },
    }


def create_app(store: AnnotationStore) -> FastAPI:
    app = FastAPI(title="annotation service")

    @app.get("/schema")
    def schema() -> dict:
        return {
            "typology": [
                {
                    "subtype": subtype,
                    "dimension": dimension.value,
                    "description": SUBTYPE_DESCRIPTIONS[subtype],
                    "counts_toward_limit": dimension is not Dimension.TARGET_ERROR,
                }
                for subtype, dimension in TYPOLOGY.items()
            ],
            "quality": [
                {"value": q.value, "description": QUALITY_DESCRIPTIONS[q]} for q in Quality
            ],
        }

    @app.get("/runs")
    def runs() -> dict:
        return {"runs": store.run_ids}

    @app.get("/runs/{run_id}/items")
    def run_items(run_id: str) -> dict:
        try:
            refs = store.refs_for_run(run_id)
        except UnknownRecordError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"run": run_id, "items": [_state_payload(store, ref) for ref in refs]}

    @app.get("/items/{ref:path}")
    def item(ref: str) -> dict:
        record_ref = _parse_ref(ref)
        try:
            return _state_payload(store, record_ref)
        except UnknownRecordError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/items/{ref:path}/annotations")
    def post_annotations(ref: str, body: AnnotationsPost) -> dict:
        record_ref = _parse_ref(ref)
        try:
            annotations = [
                ErrorAnnotation(
                    ref=record_ref,
                    annotator_id=body.annotator_id,
                    subtype=a.subtype,
                    span=tuple(a.span) if a.span else None,
                    note=a.note,
                )
                for a in body.annotations
            ]
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        try:
            version = store.submit_annotations(
                record_ref, body.annotator_id, annotations, body.version
            )
        except UnknownRecordError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except StoreConflict as exc:
            raise HTTPException(
                status_code=409,
                detail={"message": str(exc), "current_version": exc.current_version},
            ) from exc
        except StoreValidationError as exc:
            raise HTTPException(status_code=422, detail=exc.violations) from exc
        return {"ref": ref, "version": version}

    @app.post("/items/{ref:path}/quality")
    def post_quality(ref: str, body: QualityPost) -> dict:
        record_ref = _parse_ref(ref)
        try:
            version = store.submit_quality(
                record_ref, body.annotator_id, body.quality, body.version
            )
        except UnknownRecordError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except StoreConflict as exc:
            raise HTTPException(
                status_code=409,
                detail={"message": str(exc), "current_version": exc.current_version},
            ) from exc
        except StoreValidationError as exc:
            raise HTTPException(status_code=422, detail=exc.violations) from exc
        return {"ref": ref, "version": version}

    @app.get("/agreement")
    def agreement(run: str = Query(...)) -> dict:
        try:
            ratings, subtype_sets = store.agreement_inputs(run)
        except UnknownRecordError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        try:
            report = compute_agreement(ratings, subtype_sets)
        except AgreementError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "kappa": report.kappa,
            "alpha": report.alpha,
            "n_items": report.n_items,
            "n_annotators": report.n_annotators,
        }

    @app.get("/export/quality")
    def export_quality(run: str = Query(...)) -> Response:
        try:
            records = store.records_for_run(run)
        except UnknownRecordError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        csv_text = quality_table_csv(records, store.ratings_for_run(run))
        return Response(content=csv_text, media_type="text/csv")

    @app.get("/export/errors")
    def export_errors(run: str = Query(...), model: str = Query(...)) -> Response:
        try:
            records = store.records_for_run(run)
        except UnknownRecordError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        table = error_count_table(store.annotations_for_run(run), records, model)
        return Response(content=errors_table_csv(table), media_type="text/csv")

    return app


class ServiceHandle:
    """A running service: ``url`` to reach it, ``stop()`` to shut it down."""

    def __init__(self, server: uvicorn.Server, thread: threading.Thread, url: str):
        self._server = server
        self._thread = thread
        self.url = url

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10)


def serve_annotation(
    store: AnnotationStore, host: str = "127.0.0.1", port: int = 8787
) -> ServiceHandle:
    """Start the service on a background thread and wait until it accepts
    connections."""
    config = uvicorn.Config(create_app(store), host=host, port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    import time

    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError(f"annotation service failed to bind {host}:{port}")
        if not thread.is_alive():
            raise RuntimeError("annotation service exited during startup")
        time.sleep(0.02)
    return ServiceHandle(server, thread, f"http://{host}:{port}")
