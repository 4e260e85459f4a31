"""JSON rendering of the document family.

Mechanically mirrors the XML vocabulary field for field; XML stays the
canonical on-disk and on-wire form, this rendering exists for UI clients.
"""

from __future__ import annotations

import json

from ..blocks import Arrow, Block, BlockDiagram, FlowAxis, FlowConvention, Rect
from ..errors import InvalidModelError, MalformedDocumentError, SemanticViolationError, UnsupportedVersionError
from ..model import (
    Action,
    Behavior,
    Branch,
    Channel,
    MessageType,
    Normal,
    ProcessModel,
    Receive,
    Send,
    State,
    Subject,
    SubjectKind,
    Timeout,
    Transition,
    build_model,
)
from .xml_io import FORMAT_VERSION

__all__ = [
    "model_to_json",
    "model_from_json",
    "trace_to_json",
    "notation_to_json",
    "violations_to_json",
]


def _state_dict(s: State) -> dict:
    d: dict = {"id": s.id, "label": s.label, "start": s.is_start, "end": s.is_end}
    if isinstance(s.kind, Send):
        d["kind"] = "send"
        d["to"] = s.kind.to_subject
        d["message"] = s.kind.message
    elif isinstance(s.kind, Receive):
        d["kind"] = "receive"
        d["branches"] = [{"source": b.source, "message": b.message} for b in s.kind.branches]
    else:
        d["kind"] = "action"
        d["outcomes"] = list(s.kind.outcomes)
    return d


def _transition_dict(t: Transition) -> dict:
    d: dict = {"from": t.from_state, "to": t.to_state}
    if isinstance(t.kind, Timeout):
        d["kind"] = "timeout"
        d["duration"] = t.kind.duration
    else:
        d["kind"] = "normal"
        if t.kind.guard is not None:
            d["guard"] = t.kind.guard
    return d


def _layout_dict(diagram: BlockDiagram) -> dict:
    return {
        "axis": diagram.flow.axis.value,
        "snap": diagram.flow.snap_threshold,
        "gap": diagram.flow.gap,
        "stage": {
            "x": diagram.stage.x,
            "y": diagram.stage.y,
            "width": diagram.stage.width,
            "height": diagram.stage.height,
        },
        "blocks": [
            {
                "id": b.id,
                "kind": b.kind_ref,
                "x": b.x,
                "y": b.y,
                "width": b.width,
                "height": b.height,
                "label": b.label,
                "properties": [{"key": k, "value": v} for k, v in b.properties],
            }
            for b in sorted(diagram.blocks, key=lambda b: b.id)
        ],
        "arrows": [
            {
                "from": a.from_block,
                "to": a.to_block,
                "label": a.label,
                "points": [[x, y] for x, y in a.waypoints],
            }
            for a in sorted(diagram.arrows, key=lambda a: (a.from_block, a.to_block, a.label))
        ],
    }


def model_to_json(model: ProcessModel, layout: BlockDiagram | None = None) -> dict:
    doc: dict = {
        "version": FORMAT_VERSION,
        "kind": "model",
        "process": {
            "id": model.id,
            "name": model.name,
            "messages": [
                {"id": m.id, "name": m.name, "payload": list(m.payload_schema)} for m in model.messages
            ],
            "subjects": [
                {
                    "id": s.id,
                    "name": s.name,
                    "kind": s.kind.value,
                    "multiplicity": s.multiplicity_default,
                    "behavior": (
                        None
                        if s.behavior is None
                        else {
                            "states": [_state_dict(st) for st in s.behavior.states],
                            "transitions": [_transition_dict(t) for t in s.behavior.transitions],
                        }
                    ),
                }
                for s in model.subjects
            ],
            "channels": [
                {"from": c.from_subject, "to": c.to_subject, "messages": sorted(c.message_ids)}
                for c in model.channels
            ],
        },
    }
    if layout is not None:
        doc["layout"] = _layout_dict(layout)
    return doc


def _parse_state_json(d: dict) -> State:
    kind_name = d.get("kind")
    if kind_name == "send":
        kind = Send(to_subject=d["to"], message=d["message"])
    elif kind_name == "receive":
        kind = Receive(
            branches=tuple(Branch(source=b["source"], message=b["message"]) for b in d.get("branches", []))
        )
    elif kind_name == "action":
        kind = Action(outcomes=tuple(d.get("outcomes", [])))
    else:
        raise MalformedDocumentError(f"unknown state kind {kind_name!r}")
    return State(
        id=d["id"], kind=kind, label=d.get("label", ""),
        is_start=bool(d.get("start")), is_end=bool(d.get("end")),
    )


def _parse_transition_json(d: dict) -> Transition:
    if d.get("kind") == "timeout":
        kind = Timeout(duration=int(d["duration"]))
    elif d.get("kind") == "normal":
        kind = Normal(guard=d.get("guard"))
    else:
        raise MalformedDocumentError(f"unknown transition kind {d.get('kind')!r}")
    return Transition(from_state=d["from"], to_state=d["to"], kind=kind)


def _parse_layout_json(d: dict) -> BlockDiagram:
    try:
        flow = FlowConvention(
            axis=FlowAxis(d.get("axis", "top-down")),
            snap_threshold=float(d.get("snap", 20.0)),
            gap=float(d.get("gap", 0.0)),
        )
        stage_d = d.get("stage", {})
        stage = Rect(
            float(stage_d.get("x", 0)), float(stage_d.get("y", 0)),
            float(stage_d.get("width", 0)), float(stage_d.get("height", 0)),
        )
        blocks = tuple(
            Block(
                id=b["id"],
                kind_ref=b["kind"],
                x=float(b["x"]),
                y=float(b["y"]),
                width=float(b["width"]),
                height=float(b["height"]),
                label=b.get("label", ""),
                properties=tuple((p["key"], p["value"]) for p in b.get("properties", [])),
            )
            for b in d.get("blocks", [])
        )
        arrows = tuple(
            Arrow(
                from_block=a["from"],
                to_block=a["to"],
                label=a.get("label", ""),
                waypoints=tuple((float(x), float(y)) for x, y in a.get("points", [])),
            )
            for a in d.get("arrows", [])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedDocumentError(f"bad layout section: {exc}")
    return BlockDiagram(blocks=blocks, arrows=arrows, flow=flow, stage=stage)


def model_from_json(data: dict | str | bytes) -> tuple[ProcessModel, BlockDiagram | None]:
    """Inverse of model_to_json, with the same error contract as from_xml."""
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise MalformedDocumentError(str(exc), exc.lineno, exc.colno)
    if not isinstance(data, dict):
        raise MalformedDocumentError("JSON document must be an object")
    version = data.get("version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(version)
    if data.get("kind") != "model":
        raise MalformedDocumentError(f"expected a model document, got kind={data.get('kind')!r}")
    proc = data.get("process")
    if not isinstance(proc, dict):
        raise MalformedDocumentError("model document missing process section")
    try:
        messages = [
            MessageType(id=m["id"], name=m.get("name", ""), payload_schema=tuple(m.get("payload", [])))
            for m in proc.get("messages", [])
        ]
        subjects = []
        for s in proc.get("subjects", []):
            b = s.get("behavior")
            behavior = None
            if b is not None:
                behavior = Behavior(
                    states=tuple(_parse_state_json(st) for st in b.get("states", [])),
                    transitions=tuple(_parse_transition_json(t) for t in b.get("transitions", [])),
                )
            subjects.append(
                Subject(
                    id=s["id"],
                    name=s.get("name", ""),
                    kind=SubjectKind(s.get("kind", "standard")),
                    behavior=behavior,
                    multiplicity_default=int(s.get("multiplicity", 1)),
                )
            )
        channels = [
            Channel(from_subject=c["from"], to_subject=c["to"], message_ids=frozenset(c.get("messages", [])))
            for c in proc.get("channels", [])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedDocumentError(f"bad process section: {exc}")
    try:
        model = build_model(
            subjects, channels, messages, model_id=proc.get("id", ""), name=proc.get("name", "")
        )
    except InvalidModelError as exc:
        raise SemanticViolationError(exc.violations)
    layout = data.get("layout")
    return model, (_parse_layout_json(layout) if layout is not None else None)


def trace_to_json(events, *, model_id: str = "", status: str = "", clock: int = 0) -> dict:
    return {
        "version": FORMAT_VERSION,
        "kind": "trace",
        "trace": {
            "model": model_id,
            "status": status,
            "clock": clock,
            "events": [
                {
                    "seq": e.seq,
                    "time": e.time,
                    "agent": e.agent,
                    "kind": e.kind,
                    "details": {k: v for k, v in e.details},
                }
                for e in events
            ],
        },
    }


def notation_to_json(notation) -> dict:
    return {
        "version": FORMAT_VERSION,
        "kind": "notation",
        "notation": {
            "id": notation.id,
            "kinds": [
                {
                    "id": k.id,
                    "color": list(k.color),
                    "brightness": k.brightness,
                    "texture": k.texture,
                    "size": k.size_class,
                    "orientation": k.orientation,
                    "layer": k.layer,
                }
                for k in sorted(notation.kinds, key=lambda k: k.id)
            ],
            "constructs": [
                {"id": c.id, "name": c.name, "description": c.description}
                for c in sorted(notation.constructs, key=lambda c: c.id)
            ],
            "rules": [
                {
                    "from": r.from_kind,
                    "to": r.to_kind,
                    "relation": r.relation.value,
                    "maxOut": r.max_out_degree,
                }
                for r in sorted(notation.rules, key=lambda r: (r.from_kind, r.to_kind, r.relation.value))
            ],
            "mapping": [{"kind": k, "construct": c} for k, c in sorted(notation.mapping)],
        },
    }


def violations_to_json(violations) -> list[dict]:
    return [
        {
            "code": v.code,
            "subject": v.subject,
            "element": v.element,
            "detail": v.detail,
            "severity": v.severity,
        }
        for v in violations
    ]
