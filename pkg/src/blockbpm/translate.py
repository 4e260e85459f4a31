"""Translation from block diagrams to executable process models.

Translation is construct-driven: blocks are interpreted by the semantic
construct their kind maps to in the active notation, so any vocabulary that
maps onto the built-in construct set can drive it, not just the bundled one.

The interaction layer turns subject blocks into subjects and connections
into channels; the behavior layer (one diagram per subject) turns activity
blocks into states, flag blocks into start/end marks, and connections —
optionally through transition connector blocks — into transitions. Whether a
connection is a flush docking or an arrow never changes the result.

Two touching blocks whose order the flow convention cannot settle (side by
side under top-down flow, say) are an error, not a guess.
"""

from __future__ import annotations

from typing import Mapping

from .blocks import Arrow, Block, BlockDiagram, Explicit, infer_connections, shared_edge_length
from .errors import NonConformantError
from .model import (
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
    Violation,
    branch_label,
    build_model,
    well_formed,
)
from .notation import (
    BEHAVIOR_CONSTRUCTS,
    CONSTRUCT_ACTION,
    CONSTRUCT_CHANNEL,
    CONSTRUCT_END_FLAG,
    CONSTRUCT_EXTERNAL_SUBJECT,
    CONSTRUCT_MULTI_SUBJECT,
    CONSTRUCT_RECEIVE,
    CONSTRUCT_SEND,
    CONSTRUCT_START_FLAG,
    CONSTRUCT_SUBJECT,
    CONSTRUCT_TIMEOUT_TRANSITION,
    CONSTRUCT_TRANSITION,
    INTERACTION_CONSTRUCTS,
    NotationDefinition,
    conformance_check,
)

__all__ = ["to_semantic_model", "default_message_id"]

_SUBJECT_KINDS = {
    CONSTRUCT_SUBJECT: SubjectKind.STANDARD,
    CONSTRUCT_MULTI_SUBJECT: SubjectKind.MULTI,
    CONSTRUCT_EXTERNAL_SUBJECT: SubjectKind.EXTERNAL,
}
_ACTIVITY_CONSTRUCTS = {CONSTRUCT_SEND, CONSTRUCT_RECEIVE, CONSTRUCT_ACTION}
_FLAG_CONSTRUCTS = {CONSTRUCT_START_FLAG, CONSTRUCT_END_FLAG}
_CONNECTOR_CONSTRUCTS = {CONSTRUCT_TRANSITION, CONSTRUCT_TIMEOUT_TRANSITION}

_MIN_BEHAVIOR_STATE = "done"


def default_message_id(from_subject: str, to_subject: str) -> str:
    """Message id assumed for a subject connection that names none."""
    return f"{from_subject}_to_{to_subject}"


def _split_names(text: str) -> list[str]:
    parts = [p.strip() for chunk in text.split(",") for p in chunk.split()]
    return [p for p in parts if p]


def _construct_of(block: Block, notation: NotationDefinition) -> str | None:
    return notation.construct_of(block.kind_ref)


def _element_id(block: Block) -> str:
    return block.label or block.id


def _minimal_behavior() -> Behavior:
    state = State(id=_MIN_BEHAVIOR_STATE, kind=Action(("done",)), is_start=True, is_end=True)
    return Behavior(states=(state,), transitions=())


def _arrow_pairs(diagram: BlockDiagram) -> set[tuple[str, str]]:
    return {(a.from_block, a.to_block) for a in diagram.arrows}


def _ambiguities(
    diagram: BlockDiagram,
    directional_ids: set[str],
    scope: str,
    out: list[Violation],
) -> None:
    """Cross-axis contacts between directional blocks with no arrow deciding
    the order are ambiguous; flags and decoration are exempt."""
    flow = diagram.flow
    across = {"left", "right"} if flow.axis.value == "top-down" else {"above", "below"}
    arrows = _arrow_pairs(diagram)
    blocks = sorted((b for b in diagram.blocks if b.id in directional_ids), key=lambda b: b.id)
    for i, a in enumerate(blocks):
        for b in blocks[i + 1:]:
            touch = shared_edge_length(a.rect, b.rect, flow.gap)
            if touch is None or touch[0] not in across:
                continue
            if (a.id, b.id) in arrows or (b.id, a.id) in arrows:
                continue
            out.append(
                Violation(
                    scope,
                    f"{a.id}|{b.id}",
                    "AmbiguousDirection",
                    "adjacent across the flow axis with no arrow fixing the order",
                )
            )


def _connection_edges(diagram: BlockDiagram) -> list[tuple[str, str, str]]:
    """Directed edges (from, to, label); implicit connections carry no label."""
    edges = []
    for c in infer_connections(diagram):
        label = ""
        if isinstance(c.origin, Explicit):
            label = diagram.arrows[c.origin.arrow].label
        edges.append((c.from_block, c.to_block, label))
    return edges


def to_semantic_model(
    diagram: BlockDiagram,
    notation: NotationDefinition,
    behaviors: Mapping[str, BlockDiagram] | None = None,
    *,
    model_id: str = "",
    name: str = "",
) -> ProcessModel:
    """Translate an interaction diagram (plus per-subject behavior diagrams,
    keyed by subject block id) into a process model.

    Subjects that bring no behavior diagram get a minimal one-state behavior,
    the same default an editor creates for a fresh subject. The result always
    passes well-formedness; otherwise NonConformantError carries the complete
    violation list (conformance findings, ambiguous directions, bad
    properties and structural defects alike).
    """
    behaviors = dict(behaviors or {})
    violations: list[Violation] = []

    violations.extend(conformance_check(diagram, notation))

    classified: dict[str, str] = {}
    for block in diagram.blocks:
        construct = _construct_of(block, notation)
        if construct is None:
            violations.append(
                Violation("", block.id, "UntranslatableKind", f"kind {block.kind_ref!r} maps to no construct")
            )
        elif construct in BEHAVIOR_CONSTRUCTS:
            violations.append(
                Violation("", block.id, "LayerMismatch", f"{construct} block on the interaction layer")
            )
        elif construct not in INTERACTION_CONSTRUCTS:
            violations.append(
                Violation("", block.id, "UntranslatableKind", f"construct {construct!r} unknown to translation")
            )
        else:
            classified[block.id] = construct

    subject_blocks = {
        bid: diagram.block(bid) for bid, c in classified.items() if c in _SUBJECT_KINDS
    }
    channel_blocks = {
        bid: diagram.block(bid) for bid, c in classified.items() if c == CONSTRUCT_CHANNEL
    }

    _ambiguities(diagram, set(classified), "", violations)

    # subject identity: label when present, block id otherwise
    subject_ids: dict[str, str] = {}
    taken: set[str] = set()
    for bid in sorted(subject_blocks):
        sid = _element_id(subject_blocks[bid])
        if sid in taken:
            violations.append(Violation("", bid, "DuplicateId", f"subject id {sid!r} reused"))
        taken.add(sid)
        subject_ids[bid] = sid

    messages: dict[str, MessageType] = {}

    def declare_message(mid: str, payload: tuple[str, ...] = ()) -> None:
        existing = messages.get(mid)
        if existing is None:
            messages[mid] = MessageType(id=mid, name=mid, payload_schema=payload)
        elif payload:
            merged = existing.payload_schema + tuple(k for k in payload if k not in existing.payload_schema)
            messages[mid] = MessageType(id=mid, name=mid, payload_schema=merged)

    # channels: direct subject-to-subject connections, then channel blocks
    channel_messages: dict[tuple[str, str], set[str]] = {}
    edges = _connection_edges(diagram)
    for from_id, to_id, label in edges:
        if from_id in subject_blocks and to_id in subject_blocks:
            a, b = subject_ids[from_id], subject_ids[to_id]
            named = _split_names(label)
            mids = named or [default_message_id(a, b)]
            for mid in mids:
                declare_message(mid)
                channel_messages.setdefault((a, b), set()).add(mid)

    for bid in sorted(channel_blocks):
        block = channel_blocks[bid]
        sources = sorted(f for f, t, _ in edges if t == bid and f in subject_blocks)
        sinks = sorted(t for f, t, _ in edges if f == bid and t in subject_blocks)
        if not sources or not sinks:
            violations.append(
                Violation("", bid, "DanglingChannelBlock", "channel block needs a subject on both sides")
            )
            continue
        if block.properties:
            declared = [(k, tuple(_split_names(v))) for k, v in block.properties]
        else:
            named = _split_names(block.label)
            declared = [(mid, ()) for mid in named]
        for src in sources:
            for snk in sinks:
                a, b = subject_ids[src], subject_ids[snk]
                if declared:
                    for mid, payload in declared:
                        declare_message(mid, payload)
                        channel_messages.setdefault((a, b), set()).add(mid)
                else:
                    mid = default_message_id(a, b)
                    declare_message(mid)
                    channel_messages.setdefault((a, b), set()).add(mid)

    # behaviors
    built_behaviors: dict[str, Behavior] = {}
    for bid in sorted(behaviors):
        if bid not in subject_blocks:
            violations.append(
                Violation("", bid, "UnknownSubjectDiagram", "behavior diagram keyed by unknown subject block")
            )
            continue
        if _SUBJECT_KINDS[classified[bid]] is SubjectKind.EXTERNAL:
            violations.append(
                Violation(subject_ids[bid], bid, "ExternalWithBehavior", "external subjects carry no behavior")
            )
            continue
        behavior = _translate_behavior(
            behaviors[bid], notation, subject_ids[bid], declare_message, violations
        )
        if behavior is not None:
            built_behaviors[bid] = behavior

    subjects = []
    for bid in sorted(subject_blocks):
        block = subject_blocks[bid]
        kind = _SUBJECT_KINDS[classified[bid]]
        multiplicity = 1
        raw = block.prop("multiplicity")
        if raw is not None:
            try:
                multiplicity = int(raw)
            except ValueError:
                violations.append(
                    Violation(subject_ids[bid], bid, "BadProperty", f"multiplicity {raw!r} is not an integer")
                )
        behavior = None
        if kind is not SubjectKind.EXTERNAL:
            behavior = built_behaviors.get(bid, _minimal_behavior())
        subjects.append(
            Subject(
                id=subject_ids[bid],
                name=block.label or subject_ids[bid],
                kind=kind,
                behavior=behavior,
                multiplicity_default=multiplicity,
            )
        )

    channels = [
        Channel(from_subject=a, to_subject=b, message_ids=frozenset(mids))
        for (a, b), mids in sorted(channel_messages.items())
    ]

    if violations:
        raise NonConformantError(sorted(set(violations)))

    try:
        model = build_model(
            subjects,
            channels,
            sorted(messages.values(), key=lambda m: m.id),
            model_id=model_id,
            name=name,
        )
    except Exception as exc:
        raise NonConformantError(getattr(exc, "violations", [Violation("", "", "BuildFailed", str(exc))]))

    wf = well_formed(model)
    if wf:
        raise NonConformantError(wf)
    return model


def _translate_behavior(
    diagram: BlockDiagram,
    notation: NotationDefinition,
    subject_id: str,
    declare_message,
    violations: list[Violation],
) -> Behavior | None:
    local: list[Violation] = []
    local.extend(
        Violation(subject_id, v.element, v.code, v.detail, v.severity)
        for v in conformance_check(diagram, notation)
    )

    activities: dict[str, Block] = {}
    start_flags: list[Block] = []
    end_flags: list[Block] = []
    connectors: dict[str, Block] = {}
    constructs: dict[str, str] = {}

    for block in diagram.blocks:
        construct = _construct_of(block, notation)
        if construct is None or construct not in BEHAVIOR_CONSTRUCTS:
            code = "LayerMismatch" if construct in INTERACTION_CONSTRUCTS else "UntranslatableKind"
            local.append(Violation(subject_id, block.id, code, f"unexpected {construct or block.kind_ref}"))
            continue
        constructs[block.id] = construct
        if construct in _ACTIVITY_CONSTRUCTS:
            activities[block.id] = block
        elif construct == CONSTRUCT_START_FLAG:
            start_flags.append(block)
        elif construct == CONSTRUCT_END_FLAG:
            end_flags.append(block)
        else:
            connectors[block.id] = block

    directional = set(activities) | set(connectors)
    _ambiguities(diagram, directional, subject_id, local)

    starts = _flag_targets(diagram, start_flags, activities, subject_id, local)
    ends = _flag_targets(diagram, end_flags, activities, subject_id, local)

    state_ids: dict[str, str] = {}
    taken: set[str] = set()
    for bid in sorted(activities):
        sid = _element_id(activities[bid])
        if sid in taken:
            local.append(Violation(subject_id, bid, "DuplicateId", f"state id {sid!r} reused"))
        taken.add(sid)
        state_ids[bid] = sid

    states: list[State] = []
    for bid in sorted(activities):
        block = activities[bid]
        construct = constructs[bid]
        kind = None
        if construct == CONSTRUCT_SEND:
            target = block.prop("to")
            message = block.prop("message")
            if not target or not message:
                local.append(
                    Violation(subject_id, bid, "MissingProperty", "send blocks need 'to' and 'message'")
                )
            else:
                declare_message(message)
                kind = Send(to_subject=target, message=message)
        elif construct == CONSTRUCT_RECEIVE:
            branches = []
            for key, value in block.properties:
                for mid in _split_names(value):
                    declare_message(mid)
                    branches.append(Branch(source=key, message=mid))
            if not branches:
                local.append(
                    Violation(subject_id, bid, "MissingProperty", "receive blocks list source: messages properties")
                )
            else:
                kind = Receive(branches=tuple(branches))
        else:
            outcomes = tuple(_split_names(block.prop("outcomes") or "")) or ("done",)
            kind = Action(outcomes=outcomes)
        if kind is not None:
            states.append(
                State(
                    id=state_ids[bid],
                    kind=kind,
                    label=block.label,
                    is_start=bid in starts,
                    is_end=bid in ends,
                )
            )

    transitions = _translate_transitions(
        diagram, subject_id, activities, connectors, constructs, state_ids,
        {s.id: s for s in states}, local,
    )

    if local:
        violations.extend(local)
        return None
    return Behavior(states=tuple(states), transitions=tuple(transitions))


def _flag_targets(diagram, flags, activities, subject_id, out) -> set[str]:
    targets: set[str] = set()
    arrows = _arrow_pairs(diagram)
    for flag in flags:
        touched: set[str] = set()
        for act_id, act in activities.items():
            if shared_edge_length(flag.rect, act.rect, diagram.flow.gap) is not None:
                touched.add(act_id)
            elif (flag.id, act_id) in arrows or (act_id, flag.id) in arrows:
                touched.add(act_id)
        if not touched:
            out.append(Violation(subject_id, flag.id, "UnattachedFlag", "flag touches no activity"))
        elif len(touched) > 1:
            out.append(
                Violation(subject_id, flag.id, "AmbiguousFlag", f"flag touches {len(touched)} activities")
            )
        else:
            targets.add(touched.pop())
    return targets


def _translate_transitions(
    diagram, subject_id, activities, connectors, constructs, state_ids, states_by_id, out
) -> list[Transition]:
    edges = _connection_edges(diagram)
    transitions: list[Transition] = []

    def edge_guard(from_bid: str, label: str) -> str | None:
        """Unlabeled exits borrow the only branch/outcome when there is
        exactly one; several alternatives need explicit labels."""
        if label:
            return label
        state = states_by_id.get(state_ids[from_bid])
        if state is None:
            return None
        k = state.kind
        if isinstance(k, Receive):
            if len(k.branches) == 1:
                return k.branches[0].label
            out.append(
                Violation(subject_id, from_bid, "UnguardedExit", "receive with several branches needs labeled exits")
            )
        elif isinstance(k, Action):
            if len(k.outcomes) == 1:
                return k.outcomes[0]
            out.append(
                Violation(subject_id, from_bid, "UnguardedExit", "action with several outcomes needs labeled exits")
            )
        return None

    for from_id, to_id, label in edges:
        if from_id in activities and to_id in activities:
            guard = edge_guard(from_id, label)
            transitions.append(
                Transition(state_ids[from_id], state_ids[to_id], Normal(guard=guard))
            )

    for bid in sorted(connectors):
        block = connectors[bid]
        sources = sorted({f for f, t, _ in edges if t == bid and f in activities})
        sinks = sorted({t for f, t, _ in edges if f == bid and t in activities})
        if len(sources) != 1 or len(sinks) != 1:
            out.append(
                Violation(
                    subject_id, bid, "BadConnector",
                    f"connector joins {len(sources)} sources and {len(sinks)} targets, needs 1 and 1",
                )
            )
            continue
        src, snk = sources[0], sinks[0]
        if constructs[bid] == CONSTRUCT_TIMEOUT_TRANSITION:
            raw = block.prop("duration", block.label or "")
            try:
                duration = int(raw or "")
            except ValueError:
                out.append(Violation(subject_id, bid, "BadProperty", f"duration {raw!r} is not an integer"))
                continue
            transitions.append(Transition(state_ids[src], state_ids[snk], Timeout(duration=duration)))
        else:
            guard = edge_guard(src, block.label)
            transitions.append(Transition(state_ids[src], state_ids[snk], Normal(guard=guard)))

    return transitions
