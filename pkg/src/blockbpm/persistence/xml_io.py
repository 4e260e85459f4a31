"""Canonical XML document format (version 1).

One envelope for the whole document family:

    <document version="1" kind="model|notation|trace"> ... </document>

Model documents hold a <process> section and an optional <layout> section
carrying block geometry keyed by element id. Serialization is deterministic:
elements sorted by id, attributes emitted in a fixed order, so equal values
produce byte-identical documents. Unknown future versions are rejected
outright rather than parsed on a guess.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from ..blocks import Arrow, Block, BlockDiagram, FlowAxis, FlowConvention, Rect
from ..engine import TraceEvent
from ..errors import (
    InvalidModelError,
    InvalidNotationError,
    MalformedDocumentError,
    SemanticViolationError,
    UnsupportedVersionError,
)
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
from ..notation import (
    BlockKind,
    GrammarRule,
    NotationDefinition,
    Relation,
    SemanticConstruct,
    define_notation,
)

__all__ = [
    "FORMAT_VERSION",
    "to_xml",
    "from_xml",
    "notation_to_xml",
    "notation_from_xml",
    "trace_to_xml",
    "trace_from_xml",
    "document_kind",
]

FORMAT_VERSION = 1


def _num(value: float) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _bool(value: bool) -> str:
    return "true" if value else "false"


# ---------------------------------------------------------------- writing


def _envelope(kind: str) -> ET.Element:
    return ET.Element("document", {"version": str(FORMAT_VERSION), "kind": kind})


def _serialize(root: ET.Element) -> str:
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="unicode") + "\n"


def _state_el(parent: ET.Element, state: State) -> None:
    kind_name = {Send: "send", Receive: "receive", Action: "action"}[type(state.kind)]
    el = ET.SubElement(
        parent,
        "state",
        {
            "id": state.id,
            "kind": kind_name,
            "label": state.label,
            "start": _bool(state.is_start),
            "end": _bool(state.is_end),
        },
    )
    k = state.kind
    if isinstance(k, Send):
        ET.SubElement(el, "send", {"to": k.to_subject, "message": k.message})
    elif isinstance(k, Receive):
        for br in k.branches:
            ET.SubElement(el, "branch", {"source": br.source, "message": br.message})
    elif isinstance(k, Action):
        for outcome in k.outcomes:
            ET.SubElement(el, "outcome", {"label": outcome})


def _behavior_el(parent: ET.Element, behavior: Behavior) -> None:
    el = ET.SubElement(parent, "behavior")
    for state in behavior.states:
        _state_el(el, state)
    for t in behavior.transitions:
        attrs = {"from": t.from_state, "to": t.to_state}
        if isinstance(t.kind, Timeout):
            attrs["kind"] = "timeout"
            attrs["duration"] = str(t.kind.duration)
        else:
            attrs["kind"] = "normal"
            if t.kind.guard is not None:
                attrs["guard"] = t.kind.guard
        ET.SubElement(el, "transition", attrs)


def _process_el(parent: ET.Element, model: ProcessModel) -> None:
    proc = ET.SubElement(parent, "process", {"id": model.id, "name": model.name})
    for m in model.messages:
        mel = ET.SubElement(proc, "message", {"id": m.id, "name": m.name})
        for key in m.payload_schema:
            ET.SubElement(mel, "key", {"name": key})
    for s in model.subjects:
        attrs = {"id": s.id, "name": s.name, "kind": s.kind.value}
        if s.kind is SubjectKind.MULTI:
            attrs["multiplicity"] = str(s.multiplicity_default)
        sel = ET.SubElement(proc, "subject", attrs)
        if s.behavior is not None:
            _behavior_el(sel, s.behavior)
    for c in model.channels:
        cel = ET.SubElement(proc, "channel", {"from": c.from_subject, "to": c.to_subject})
        for mid in sorted(c.message_ids):
            ET.SubElement(cel, "message", {"ref": mid})


def _layout_el(parent: ET.Element, diagram: BlockDiagram) -> None:
    el = ET.SubElement(
        parent,
        "layout",
        {
            "axis": diagram.flow.axis.value,
            "snap": _num(diagram.flow.snap_threshold),
            "gap": _num(diagram.flow.gap),
        },
    )
    st = diagram.stage
    ET.SubElement(
        el, "stage", {"x": _num(st.x), "y": _num(st.y), "width": _num(st.width), "height": _num(st.height)}
    )
    for b in sorted(diagram.blocks, key=lambda b: b.id):
        bel = ET.SubElement(
            el,
            "block",
            {
                "id": b.id,
                "kind": b.kind_ref,
                "x": _num(b.x),
                "y": _num(b.y),
                "width": _num(b.width),
                "height": _num(b.height),
                "label": b.label,
            },
        )
        for key, value in b.properties:
            ET.SubElement(bel, "property", {"key": key, "value": value})
    for a in sorted(diagram.arrows, key=lambda a: (a.from_block, a.to_block, a.label)):
        ael = ET.SubElement(el, "arrow", {"from": a.from_block, "to": a.to_block, "label": a.label})
        for x, y in a.waypoints:
            ET.SubElement(ael, "point", {"x": _num(x), "y": _num(y)})


def to_xml(model: ProcessModel, layout: BlockDiagram | None = None) -> str:
    """Serialize a model (and optionally its block geometry) deterministically."""
    root = _envelope("model")
    _process_el(root, model)
    if layout is not None:
        _layout_el(root, layout)
    return _serialize(root)


def notation_to_xml(notation: NotationDefinition) -> str:
    root = _envelope("notation")
    el = ET.SubElement(root, "notation", {"id": notation.id})
    for k in sorted(notation.kinds, key=lambda k: k.id):
        attrs = {
            "id": k.id,
            "color": ",".join(str(c) for c in k.color),
            "brightness": str(k.brightness),
            "size": k.size_class,
            "orientation": str(k.orientation),
            "layer": k.layer,
        }
        if k.texture is not None:
            attrs["texture"] = k.texture
        ET.SubElement(el, "blockkind", attrs)
    for c in sorted(notation.constructs, key=lambda c: c.id):
        ET.SubElement(el, "construct", {"id": c.id, "name": c.name, "description": c.description})
    for r in sorted(notation.rules, key=lambda r: (r.from_kind, r.to_kind, r.relation.value)):
        attrs = {"from": r.from_kind, "to": r.to_kind, "relation": r.relation.value}
        if r.max_out_degree is not None:
            attrs["max-out"] = str(r.max_out_degree)
        ET.SubElement(el, "rule", attrs)
    for kind_id, construct_id in sorted(notation.mapping):
        ET.SubElement(el, "map", {"kind": kind_id, "construct": construct_id})
    return _serialize(root)


def trace_to_xml(events, *, model_id: str = "", status: str = "", clock: int = 0) -> str:
    root = _envelope("trace")
    el = ET.SubElement(root, "trace", {"model": model_id, "status": status, "clock": str(clock)})
    for e in events:
        eel = ET.SubElement(
            el,
            "event",
            {"seq": str(e.seq), "time": str(e.time), "agent": e.agent, "kind": e.kind},
        )
        for key, value in e.details:
            ET.SubElement(eel, "detail", {"key": key, "value": value})
    return _serialize(root)


# ---------------------------------------------------------------- reading


def _parse_root(text: str | bytes) -> ET.Element:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, column = getattr(exc, "position", (None, None)) or (None, None)
        raise MalformedDocumentError(str(exc), line, column)
    except (TypeError, ValueError) as exc:
        raise MalformedDocumentError(str(exc))
    if root.tag != "document":
        raise MalformedDocumentError(f"root element is <{root.tag}>, expected <document>")
    version = root.get("version")
    try:
        parsed = int(version or "")
    except ValueError:
        raise MalformedDocumentError(f"version attribute {version!r} is not an integer")
    if parsed != FORMAT_VERSION:
        raise UnsupportedVersionError(parsed)
    return root


def document_kind(text: str | bytes) -> str:
    """Peek at a document's kind attribute (model, notation or trace)."""
    kind = _parse_root(text).get("kind")
    if kind not in ("model", "notation", "trace"):
        raise MalformedDocumentError(f"unknown document kind {kind!r}")
    return kind


def _req(el: ET.Element, attr: str) -> str:
    value = el.get(attr)
    if value is None:
        raise MalformedDocumentError(f"<{el.tag}> missing attribute {attr!r}")
    return value


def _int_attr(el: ET.Element, attr: str, default: int | None = None) -> int:
    raw = el.get(attr)
    if raw is None:
        if default is None:
            raise MalformedDocumentError(f"<{el.tag}> missing attribute {attr!r}")
        return default
    try:
        return int(raw)
    except ValueError:
        raise MalformedDocumentError(f"<{el.tag}> attribute {attr}={raw!r} is not an integer")


def _float_attr(el: ET.Element, attr: str) -> float:
    raw = _req(el, attr)
    try:
        return float(raw)
    except ValueError:
        raise MalformedDocumentError(f"<{el.tag}> attribute {attr}={raw!r} is not a number")


def _bool_attr(el: ET.Element, attr: str) -> bool:
    raw = _req(el, attr)
    if raw not in ("true", "false"):
        raise MalformedDocumentError(f"<{el.tag}> attribute {attr}={raw!r} is not true/false")
    return raw == "true"


def _parse_state(el: ET.Element) -> State:
    kind_name = _req(el, "kind")
    if kind_name == "send":
        sub = el.find("send")
        if sub is None:
            raise MalformedDocumentError("send state missing <send> element")
        kind = Send(to_subject=_req(sub, "to"), message=_req(sub, "message"))
    elif kind_name == "receive":
        kind = Receive(
            branches=tuple(
                Branch(source=_req(b, "source"), message=_req(b, "message"))
                for b in el.findall("branch")
            )
        )
    elif kind_name == "action":
        kind = Action(outcomes=tuple(_req(o, "label") for o in el.findall("outcome")))
    else:
        raise MalformedDocumentError(f"unknown state kind {kind_name!r}")
    return State(
        id=_req(el, "id"),
        kind=kind,
        label=el.get("label", ""),
        is_start=_bool_attr(el, "start"),
        is_end=_bool_attr(el, "end"),
    )


def _parse_transition(el: ET.Element) -> Transition:
    kind_name = _req(el, "kind")
    if kind_name == "timeout":
        kind = Timeout(duration=_int_attr(el, "duration"))
    elif kind_name == "normal":
        kind = Normal(guard=el.get("guard"))
    else:
        raise MalformedDocumentError(f"unknown transition kind {kind_name!r}")
    return Transition(from_state=_req(el, "from"), to_state=_req(el, "to"), kind=kind)


def _parse_process(el: ET.Element) -> ProcessModel:
    messages = []
    for m in el.findall("message"):
        messages.append(
            MessageType(
                id=_req(m, "id"),
                name=m.get("name", ""),
                payload_schema=tuple(_req(k, "name") for k in m.findall("key")),
            )
        )
    subjects = []
    for s in el.findall("subject"):
        kind_raw = _req(s, "kind")
        try:
            kind = SubjectKind(kind_raw)
        except ValueError:
            raise MalformedDocumentError(f"unknown subject kind {kind_raw!r}")
        bel = s.find("behavior")
        behavior = None
        if bel is not None:
            behavior = Behavior(
                states=tuple(_parse_state(st) for st in bel.findall("state")),
                transitions=tuple(_parse_transition(t) for t in bel.findall("transition")),
            )
        subjects.append(
            Subject(
                id=_req(s, "id"),
                name=s.get("name", ""),
                kind=kind,
                behavior=behavior,
                multiplicity_default=_int_attr(s, "multiplicity", 1),
            )
        )
    channels = []
    for c in el.findall("channel"):
        channels.append(
            Channel(
                from_subject=_req(c, "from"),
                to_subject=_req(c, "to"),
                message_ids=frozenset(_req(m, "ref") for m in c.findall("message")),
            )
        )
    try:
        return build_model(
            subjects, channels, messages, model_id=el.get("id", ""), name=el.get("name", "")
        )
    except InvalidModelError as exc:
        raise SemanticViolationError(exc.violations)


def _parse_layout(el: ET.Element) -> BlockDiagram:
    axis_raw = _req(el, "axis")
    try:
        axis = FlowAxis(axis_raw)
    except ValueError:
        raise MalformedDocumentError(f"unknown flow axis {axis_raw!r}")
    flow = FlowConvention(axis=axis, snap_threshold=_float_attr(el, "snap"), gap=_float_attr(el, "gap"))
    sel = el.find("stage")
    stage = Rect(0.0, 0.0, 0.0, 0.0)
    if sel is not None:
        stage = Rect(
            _float_attr(sel, "x"), _float_attr(sel, "y"),
            _float_attr(sel, "width"), _float_attr(sel, "height"),
        )
    blocks = tuple(
        Block(
            id=_req(b, "id"),
            kind_ref=_req(b, "kind"),
            x=_float_attr(b, "x"),
            y=_float_attr(b, "y"),
            width=_float_attr(b, "width"),
            height=_float_attr(b, "height"),
            label=b.get("label", ""),
            properties=tuple((_req(p, "key"), _req(p, "value")) for p in b.findall("property")),
        )
        for b in el.findall("block")
    )
    arrows = tuple(
        Arrow(
            from_block=_req(a, "from"),
            to_block=_req(a, "to"),
            label=a.get("label", ""),
            waypoints=tuple((_float_attr(p, "x"), _float_attr(p, "y")) for p in a.findall("point")),
        )
        for a in el.findall("arrow")
    )
    return BlockDiagram(blocks=blocks, arrows=arrows, flow=flow, stage=stage)


def from_xml(text: str | bytes) -> tuple[ProcessModel, BlockDiagram | None]:
    """Parse and validate a model document.

    Raises MalformedDocumentError (with position where known) for anything
    that is not a well-shaped document, UnsupportedVersionError for foreign
    versions, and SemanticViolationError when the XML is fine but the model
    is not.
    """
    root = _parse_root(text)
    if root.get("kind") != "model":
        raise MalformedDocumentError(f"expected a model document, got kind={root.get('kind')!r}")
    proc = root.find("process")
    if proc is None:
        raise MalformedDocumentError("model document missing <process> section")
    model = _parse_process(proc)
    lel = root.find("layout")
    layout = _parse_layout(lel) if lel is not None else None
    return model, layout


def notation_from_xml(text: str | bytes) -> NotationDefinition:
    root = _parse_root(text)
    if root.get("kind") != "notation":
        raise MalformedDocumentError(f"expected a notation document, got kind={root.get('kind')!r}")
    el = root.find("notation")
    if el is None:
        raise MalformedDocumentError("notation document missing <notation> section")
    kinds = []
    for k in el.findall("blockkind"):
        color_raw = _req(k, "color").split(",")
        try:
            color = tuple(int(c) for c in color_raw)
        except ValueError:
            raise MalformedDocumentError(f"bad color {_req(k, 'color')!r}")
        if len(color) != 3:
            raise MalformedDocumentError(f"color needs three components, got {color_raw}")
        kinds.append(
            BlockKind(
                id=_req(k, "id"),
                color=color,  # type: ignore[arg-type]
                brightness=_int_attr(k, "brightness", 50),
                texture=k.get("texture"),
                size_class=k.get("size", "M"),
                orientation=_int_attr(k, "orientation", 0),
                layer=k.get("layer", ""),
            )
        )
    constructs = [
        SemanticConstruct(id=_req(c, "id"), name=c.get("name", ""), description=c.get("description", ""))
        for c in el.findall("construct")
    ]
    rules = []
    for r in el.findall("rule"):
        rel_raw = _req(r, "relation")
        try:
            relation = Relation(rel_raw)
        except ValueError:
            raise MalformedDocumentError(f"unknown rule relation {rel_raw!r}")
        max_out = r.get("max-out")
        rules.append(
            GrammarRule(
                from_kind=_req(r, "from"),
                to_kind=_req(r, "to"),
                relation=relation,
                max_out_degree=int(max_out) if max_out is not None else None,
            )
        )
    mapping = [(_req(m, "kind"), _req(m, "construct")) for m in el.findall("map")]
    try:
        return define_notation(kinds, rules, constructs, mapping, notation_id=el.get("id", ""))
    except InvalidNotationError as exc:
        raise SemanticViolationError(exc.violations)


def trace_from_xml(text: str | bytes) -> tuple[list[TraceEvent], dict[str, str]]:
    root = _parse_root(text)
    if root.get("kind") != "trace":
        raise MalformedDocumentError(f"expected a trace document, got kind={root.get('kind')!r}")
    el = root.find("trace")
    if el is None:
        raise MalformedDocumentError("trace document missing <trace> section")
    events = [
        TraceEvent(
            seq=_int_attr(e, "seq"),
            time=_int_attr(e, "time"),
            agent=_req(e, "agent"),
            kind=_req(e, "kind"),
            details=tuple((_req(d, "key"), _req(d, "value")) for d in e.findall("detail")),
        )
        for e in el.findall("event")
    ]
    meta = {"model": el.get("model", ""), "status": el.get("status", ""), "clock": el.get("clock", "0")}
    return events, meta
