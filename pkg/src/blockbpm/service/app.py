"""HTTP facade over the toolkit: model and notation storage, validation,
exploration, instance execution, message injection and trace retrieval.

XML is the canonical exchange format; clients asking for JSON (content type
or Accept header) get the mechanically derived rendering. Engine and model
error codes pass through verbatim in a uniform error body. Per-instance
operations are serialized by per-instance locks; distinct instances step
concurrently.
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .. import engine as eng
from .. import explore as xpl
from ..errors import BlockBpmError, MalformedDocumentError
from ..model import interface_consistency, well_formed
from ..notation import conformance_check, design_lints, ontological_analysis, sbpm_default_notation
from ..persistence import (
    from_xml,
    model_from_json,
    model_to_json,
    notation_from_xml,
    notation_to_json,
    notation_to_xml,
    to_xml,
    trace_to_json,
    trace_to_xml,
)
from . import schemas as sc
from .store import DocumentRepository, InstanceTable, valid_id

XML_MEDIA = "application/xml"

_STATUS_BY_CODE = {
    "MalformedDocument": 400,
    "UnsupportedVersion": 400,
    "SemanticViolation": 422,
    "ModelInvalid": 422,
    "InvalidNotation": 422,
    "BadMultiplicity": 422,
    "BadPayload": 422,
    "NotExternal": 409,
    "NoSuchChannel": 409,
    "NotRunning": 409,
}


def _error_response(exc: BlockBpmError) -> JSONResponse:
    details = exc.details
    if isinstance(details, list):
        details = [_violation_dict(v) if hasattr(v, "severity") else str(v) for v in details]
    status = _STATUS_BY_CODE.get(exc.code, 400)
    return JSONResponse(
        status_code=status,
        content={"code": exc.code, "message": exc.message, "details": details},
    )


def _violation_dict(v) -> dict:
    return {"code": v.code, "subject": v.subject, "element": v.element, "detail": v.detail, "severity": v.severity}


def _violations_out(violations) -> list[sc.ViolationOut]:
    return [sc.ViolationOut(**_violation_dict(v)) for v in violations]


def _wants_json(request: Request) -> bool:
    accept = request.headers.get("accept", "")
    return "json" in accept and "xml" not in accept.split(",")[0]


def _event_out(e: eng.TraceEvent) -> sc.EventOut:
    return sc.EventOut(seq=e.seq, time=e.time, agent=e.agent, kind=e.kind, details=dict(e.details))


def create_app(data_dir: str | Path | None = None, instance_ttl: float | None = None) -> FastAPI:
    data_dir = Path(data_dir or os.environ.get("BLOCKBPM_DATA_DIR", "./blockbpm-data"))
    ttl = instance_ttl if instance_ttl is not None else float(os.environ.get("BLOCKBPM_INSTANCE_TTL", "3600"))

    app = FastAPI(title="blockbpm", version="0.1.0")
    models = DocumentRepository(data_dir / "models")
    notations = DocumentRepository(data_dir / "notations")
    instances = InstanceTable(ttl_seconds=ttl)

    @app.exception_handler(BlockBpmError)
    async def _handle(request: Request, exc: BlockBpmError):
        return _error_response(exc)

    def _not_found(what: str, doc_id: str) -> JSONResponse:
        return JSONResponse(
            status_code=404,
            content={"code": "NotFound", "message": f"no {what} {doc_id!r}", "details": None},
        )

    def _load_model(doc_id: str):
        stored = models.get(doc_id)
        if stored is None:
            return None
        return from_xml(stored.text)

    # ------------------------------------------------------------ models

    @app.put("/models/{model_id}")
    async def put_model(model_id: str, request: Request):
        if not valid_id(model_id):
            raise MalformedDocumentError(f"invalid model id {model_id!r}")
        body = await request.body()
        if "json" in request.headers.get("content-type", ""):
            model, layout = model_from_json(body.decode("utf-8", errors="replace"))
        else:
            model, layout = from_xml(body)
        canonical = to_xml(model, layout)
        _, created = models.put(model_id, canonical)
        stored = models.get(model_id)
        assert stored is not None
        return JSONResponse(
            status_code=201 if created else 200,
            content=sc.StoredOut(id=model_id, created=stored.created, updated=stored.updated).model_dump(),
        )

    @app.get("/models/{model_id}")
    async def get_model(model_id: str, request: Request):
        stored = models.get(model_id)
        if stored is None:
            return _not_found("model", model_id)
        if _wants_json(request):
            model, layout = from_xml(stored.text)
            return JSONResponse(content=model_to_json(model, layout))
        return Response(content=stored.text, media_type=XML_MEDIA)

    @app.post("/models/{model_id}/validate", response_model=sc.ValidateReport)
    async def validate_model_route(model_id: str):
        loaded = _load_model(model_id)
        if loaded is None:
            return _not_found("model", model_id)
        model, layout = loaded
        wf = well_formed(model)
        iface = interface_consistency(model)
        conf = conformance_check(layout, sbpm_default_notation()) if layout is not None else []
        ok = not any(v.severity == "error" for v in wf + iface + conf)
        return sc.ValidateReport(
            well_formed=_violations_out(wf),
            interface=_violations_out(iface),
            conformance=_violations_out(conf),
            ok=ok,
        )

    @app.post("/models/{model_id}/explore", response_model=sc.ExploreReport)
    async def explore_model(model_id: str, bounds: sc.ExploreRequest):
        loaded = _load_model(model_id)
        if loaded is None:
            return _not_found("model", model_id)
        model, _ = loaded
        result = xpl.state_space(
            model,
            xpl.ExplorationBounds(
                max_states=bounds.max_states, max_mailbox=bounds.max_mailbox, max_depth=bounds.max_depth
            ),
        )
        return sc.ExploreReport(
            states_visited=result.states_visited,
            terminal_complete=result.terminal_complete,
            deadlocks=[
                sc.DeadlockOut(
                    state=[
                        sc.AgentViewOut(
                            agent=a.agent, state=a.state, done=a.done,
                            mailbox=[[m, s] for m, s in a.mailbox],
                        )
                        for a in state.agents
                    ],
                    witness=[sc.ChoiceOut(agent=c.agent, kind=c.kind, outcome=c.outcome) for c in witness],
                )
                for state, witness in result.deadlocks
            ],
            end_reachability=result.end_reachability,
            terminal_statuses=sorted(result.terminal_statuses),
        )

    # --------------------------------------------------------- instances

    @app.post("/instances", response_model=sc.InstanceOut, status_code=201)
    async def create_instance(body: sc.InstanceCreate):
        loaded = _load_model(body.model)
        if loaded is None:
            return _not_found("model", body.model)
        model, _ = loaded
        try:
            policy = eng.SchedulerPolicy(body.policy)
        except ValueError:
            return JSONResponse(
                status_code=422,
                content={"code": "BadPolicy", "message": f"unknown scheduler policy {body.policy!r}", "details": None},
            )
        config = eng.SchedulerConfig(
            policy=policy,
            seed=body.seed,
            max_steps=body.max_steps,
            multiplicities=tuple(sorted(body.multiplicities.items())),
        )
        instance = eng.instantiate(model, config)
        instance_id = instances.create(instance, body.model)
        return sc.InstanceOut(instance=instance_id, status=instance.status.value)

    @app.post("/instances/{instance_id}/step", response_model=sc.StepReport)
    async def step_instance(instance_id: str, body: sc.StepRequest):
        entry = instances.get(instance_id)
        if entry is None:
            return _not_found("instance", instance_id)
        with entry.lock:
            events = eng.run_until(entry.instance, body.steps)
            return sc.StepReport(
                events=[_event_out(e) for e in events],
                status=entry.instance.status.value,
                clock=entry.instance.clock,
            )

    @app.post("/instances/{instance_id}/messages", status_code=202)
    async def inject(instance_id: str, body: sc.InjectRequest):
        entry = instances.get(instance_id)
        if entry is None:
            return _not_found("instance", instance_id)
        with entry.lock:
            event = eng.inject_message(
                entry.instance, body.from_subject, body.to_subject, body.message, body.payload
            )
            return sc.StepReport(
                events=[_event_out(event)], status=entry.instance.status.value, clock=entry.instance.clock
            )

    @app.get("/instances/{instance_id}/trace")
    async def get_trace(instance_id: str, request: Request):
        entry = instances.get(instance_id)
        if entry is None:
            return _not_found("instance", instance_id)
        with entry.lock:
            instance = entry.instance
            if _wants_json(request):
                return JSONResponse(
                    content=trace_to_json(
                        instance.trace,
                        model_id=entry.model_id,
                        status=instance.status.value,
                        clock=instance.clock,
                    )
                )
            return Response(
                content=trace_to_xml(
                    instance.trace,
                    model_id=entry.model_id,
                    status=instance.status.value,
                    clock=instance.clock,
                ),
                media_type=XML_MEDIA,
            )

    # --------------------------------------------------------- notations

    @app.put("/notations/{notation_id}")
    async def put_notation(notation_id: str, request: Request):
        if not valid_id(notation_id):
            raise MalformedDocumentError(f"invalid notation id {notation_id!r}")
        body = await request.body()
        notation = notation_from_xml(body)
        canonical = notation_to_xml(notation)
        _, created = notations.put(notation_id, canonical)
        stored = notations.get(notation_id)
        assert stored is not None
        return JSONResponse(
            status_code=201 if created else 200,
            content=sc.StoredOut(id=notation_id, created=stored.created, updated=stored.updated).model_dump(),
        )

    @app.get("/notations/{notation_id}")
    async def get_notation(notation_id: str, request: Request):
        stored = notations.get(notation_id)
        if stored is None:
            return _not_found("notation", notation_id)
        if _wants_json(request):
            return JSONResponse(content=notation_to_json(notation_from_xml(stored.text)))
        return Response(content=stored.text, media_type=XML_MEDIA)

    @app.post("/notations/{notation_id}/analyze", response_model=sc.AnalyzeReport)
    async def analyze_notation(notation_id: str):
        stored = notations.get(notation_id)
        if stored is None:
            return _not_found("notation", notation_id)
        notation = notation_from_xml(stored.text)
        report = ontological_analysis(notation)
        lints = design_lints(notation)
        return sc.AnalyzeReport(
            report=sc.AnomalyOut(
                deficits=list(report.deficits),
                redundancies=list(report.redundancies),
                overloads=list(report.overloads),
                excesses=list(report.excesses),
                empty=report.empty,
            ),
            lints=[sc.LintOut(code=l.code, detail=l.detail) for l in lints],
        )

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    return app


def default_app() -> FastAPI:
    """App factory for `uvicorn blockbpm.service.app:default_app --factory`;
    configured entirely from the environment."""
    return create_app()
