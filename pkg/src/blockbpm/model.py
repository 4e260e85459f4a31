"""Subject-oriented process metamodel and structural validation.

Layer 1 is the interaction view: subjects and the unidirectional channels
between them. Layer 2 is the behavior view: per-subject state machines of
send, receive and action states joined by normal and timeout transitions.

Models are immutable values. Validation never mutates and never returns a
partial model: ``build_model`` either yields a model satisfying every
structural invariant or raises with the complete violation list, and the
check operations return deterministic, sorted violation lists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    ExternalBehaviorError,
    InvalidModelError,
    UnknownSubjectError,
)

__all__ = [
    "SubjectKind",
    "Send",
    "Receive",
    "Action",
    "Branch",
    "State",
    "Normal",
    "Timeout",
    "Transition",
    "Behavior",
    "Subject",
    "Channel",
    "MessageType",
    "ProcessModel",
    "Violation",
    "branch_label",
    "build_model",
    "well_formed",
    "interface_consistency",
    "validate_model",
    "drill_down",
]


class SubjectKind(str, Enum):
    STANDARD = "standard"
    MULTI = "multi"
    EXTERNAL = "external"


@dataclass(frozen=True, slots=True)
class Branch:
    """One receive alternative: a message expected from a given subject."""

    source: str
    message: str

    @property
    def label(self) -> str:
        return branch_label(self.source, self.message)


def branch_label(source: str, message: str) -> str:
    """Canonical guard label for the receive branch (source, message)."""
    return f"{source}/{message}"


@dataclass(frozen=True, slots=True)
class Send:
    to_subject: str
    message: str


@dataclass(frozen=True, slots=True)
class Receive:
    branches: tuple[Branch, ...]


@dataclass(frozen=True, slots=True)
class Action:
    outcomes: tuple[str, ...]


StateKind = Send | Receive | Action


@dataclass(frozen=True, slots=True)
class State:
    id: str
    kind: StateKind
    label: str = ""
    is_start: bool = False
    is_end: bool = False


@dataclass(frozen=True, slots=True)
class Normal:
    guard: str | None = None


@dataclass(frozen=True, slots=True)
class Timeout:
    duration: int


TransitionKind = Normal | Timeout


@dataclass(frozen=True, slots=True)
class Transition:
    from_state: str
    to_state: str
    kind: TransitionKind = field(default_factory=Normal)

    @property
    def ref(self) -> str:
        """Stable element id used in violation reports."""
        return f"{self.from_state}->{self.to_state}"


@dataclass(frozen=True, slots=True)
class Behavior:
    states: tuple[State, ...] = ()
    transitions: tuple[Transition, ...] = ()

    def state(self, state_id: str) -> State:
        for s in self.states:
            if s.id == state_id:
                return s
        raise KeyError(state_id)

    def outgoing(self, state_id: str) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.from_state == state_id)

    @property
    def start_states(self) -> tuple[State, ...]:
        return tuple(s for s in self.states if s.is_start)


@dataclass(frozen=True, slots=True)
class Subject:
    id: str
    name: str = ""
    kind: SubjectKind = SubjectKind.STANDARD
    behavior: Behavior | None = None
    multiplicity_default: int = 1


@dataclass(frozen=True, slots=True)
class Channel:
    from_subject: str
    to_subject: str
    message_ids: frozenset[str] = frozenset()


@dataclass(frozen=True, slots=True)
class MessageType:
    id: str
    name: str = ""
    payload_schema: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class ProcessModel:
    id: str = ""
    name: str = ""
    subjects: tuple[Subject, ...] = ()
    channels: tuple[Channel, ...] = ()
    messages: tuple[MessageType, ...] = ()

    def subject(self, subject_id: str) -> Subject:
        for s in self.subjects:
            if s.id == subject_id:
                return s
        raise UnknownSubjectError(f"no subject {subject_id!r}")

    def message(self, message_id: str) -> MessageType:
        for m in self.messages:
            if m.id == message_id:
                return m
        raise KeyError(message_id)

    def has_channel(self, from_subject: str, to_subject: str, message_id: str) -> bool:
        return any(
            c.from_subject == from_subject
            and c.to_subject == to_subject
            and message_id in c.message_ids
            for c in self.channels
        )


@dataclass(frozen=True, slots=True, order=True)
class Violation:
    """A single check finding. Ordering is (subject, element, code)."""

    subject: str = ""
    element: str = ""
    code: str = ""
    detail: str = ""
    severity: str = "error"

    def __str__(self) -> str:
        scope = "/".join(p for p in (self.subject, self.element) if p)
        head = f"{self.code}({scope})" if scope else self.code
        return f"{head}: {self.detail}" if self.detail else head


def _channel_sort_key(c: Channel):
    return (c.from_subject, c.to_subject, tuple(sorted(c.message_ids)))


def _transition_sort_key(t: Transition):
    tag = "n" if isinstance(t.kind, Normal) else "t"
    extra = t.kind.guard or "" if isinstance(t.kind, Normal) else str(t.kind.duration)
    return (t.from_state, t.to_state, tag, extra)


def _canonical_behavior(b: Behavior) -> Behavior:
    return Behavior(
        states=tuple(sorted(b.states, key=lambda s: s.id)),
        transitions=tuple(sorted(b.transitions, key=_transition_sort_key)),
    )


def build_model(
    subjects=(),
    channels=(),
    messages=(),
    *,
    model_id: str = "",
    name: str = "",
) -> ProcessModel:
    """Assemble a ProcessModel, enforcing the interaction-layer invariants.

    Element collections are canonicalized (sorted by id) so equal models
    compare equal regardless of input order. Raises InvalidModelError with
    the complete violation list when any invariant fails; never returns a
    partial model.
    """
    subjects = tuple(subjects)
    channels = tuple(channels)
    messages = tuple(messages)
    violations: list[Violation] = []

    seen: set[str] = set()
    for s in subjects:
        if not s.id:
            violations.append(Violation("", "", "DuplicateId", "empty subject id"))
        elif s.id in seen:
            violations.append(Violation(s.id, "", "DuplicateId", "subject id reused"))
        seen.add(s.id)
        if s.kind is SubjectKind.EXTERNAL:
            if s.behavior is not None:
                violations.append(
                    Violation(s.id, "", "ExternalWithBehavior", "external subjects carry no behavior")
                )
        elif s.behavior is None:
            violations.append(Violation(s.id, "", "MissingBehavior", "non-external subject needs a behavior"))
        if s.kind is SubjectKind.MULTI and s.multiplicity_default < 1:
            violations.append(
                Violation(s.id, "", "BadMultiplicity", f"default multiplicity {s.multiplicity_default} < 1")
            )

    seen_msgs: set[str] = set()
    for m in messages:
        if not m.id or m.id in seen_msgs:
            violations.append(Violation("", m.id, "DuplicateId", "message id empty or reused"))
        seen_msgs.add(m.id)
        keys = list(m.payload_schema)
        if len(keys) != len(set(keys)):
            violations.append(Violation("", m.id, "DuplicatePayloadKey", "payload key names must be unique"))

    subject_ids = {s.id for s in subjects}
    seen_triples: set[tuple[str, str, str]] = set()
    for c in channels:
        ref = f"{c.from_subject}->{c.to_subject}"
        for endpoint in (c.from_subject, c.to_subject):
            if endpoint not in subject_ids:
                violations.append(Violation("", ref, "DanglingReference", f"unknown subject {endpoint!r}"))
        if c.from_subject == c.to_subject:
            violations.append(Violation("", ref, "SelfChannel", "channels are between distinct subjects"))
        if not c.message_ids:
            violations.append(Violation("", ref, "EmptyChannel", "channel carries no message types"))
        for mid in sorted(c.message_ids):
            if mid not in seen_msgs:
                violations.append(Violation("", ref, "DanglingReference", f"unknown message {mid!r}"))
            triple = (c.from_subject, c.to_subject, mid)
            if triple in seen_triples:
                violations.append(Violation("", ref, "DuplicateId", f"channel triple for {mid!r} repeated"))
            seen_triples.add(triple)

    if violations:
        raise InvalidModelError(sorted(violations))

    return ProcessModel(
        id=model_id,
        name=name,
        subjects=tuple(
            sorted(
                (
                    Subject(
                        id=s.id,
                        name=s.name,
                        kind=s.kind,
                        behavior=_canonical_behavior(s.behavior) if s.behavior else None,
                        multiplicity_default=s.multiplicity_default,
                    )
                    for s in subjects
                ),
                key=lambda s: s.id,
            )
        ),
        channels=tuple(sorted(channels, key=_channel_sort_key)),
        messages=tuple(sorted(messages, key=lambda m: m.id)),
    )


def _check_behavior(model: ProcessModel, subject: Subject, out: list[Violation]) -> None:
    b = subject.behavior
    assert b is not None
    sid = subject.id
    state_ids = {s.id for s in b.states}
    if len(state_ids) != len(b.states):
        out.append(Violation(sid, "", "DuplicateId", "state ids not unique"))

    starts = [s for s in b.states if s.is_start]
    ends = [s for s in b.states if s.is_end]
    if not starts:
        out.append(Violation(sid, "", "MissingStart", "behavior has no start state"))
    elif len(starts) > 1:
        out.append(Violation(sid, "", "MultipleStart", f"{len(starts)} start states, expected one"))
    if not ends:
        out.append(Violation(sid, "", "MissingEnd", "behavior has no end state"))

    subject_ids = {s.id for s in model.subjects}
    message_ids = {m.id for m in model.messages}

    for st in b.states:
        k = st.kind
        if isinstance(k, Send):
            if k.to_subject not in subject_ids:
                out.append(Violation(sid, st.id, "DanglingReference", f"send target {k.to_subject!r} unknown"))
            if k.message not in message_ids:
                out.append(Violation(sid, st.id, "DanglingReference", f"sent message {k.message!r} unknown"))
        elif isinstance(k, Receive):
            if not k.branches:
                out.append(Violation(sid, st.id, "EmptyReceive", "receive state needs at least one branch"))
            for br in k.branches:
                if br.source not in subject_ids:
                    out.append(Violation(sid, st.id, "DanglingReference", f"receive source {br.source!r} unknown"))
                if br.message not in message_ids:
                    out.append(Violation(sid, st.id, "DanglingReference", f"expected message {br.message!r} unknown"))
        elif isinstance(k, Action):
            if not k.outcomes:
                out.append(Violation(sid, st.id, "EmptyAction", "action state needs at least one outcome"))
            if len(set(k.outcomes)) != len(k.outcomes):
                out.append(Violation(sid, st.id, "DuplicateOutcome", "outcome labels must be unique"))

    for t in b.transitions:
        for endpoint in (t.from_state, t.to_state):
            if endpoint not in state_ids:
                out.append(Violation(sid, t.ref, "DanglingReference", f"unknown state {endpoint!r}"))

    timeouts_seen: set[str] = set()
    for t in b.transitions:
        if not isinstance(t.kind, Timeout):
            continue
        src = next((s for s in b.states if s.id == t.from_state), None)
        if src is not None and not isinstance(src.kind, Receive):
            out.append(Violation(sid, t.ref, "TimeoutNotFromReceive", "timeouts only leave receive states"))
        if t.kind.duration < 0:
            out.append(Violation(sid, t.ref, "BadTimeout", f"negative duration {t.kind.duration}"))
        if t.from_state in timeouts_seen:
            out.append(Violation(sid, t.ref, "DuplicateTimeout", "at most one timeout per state"))
        timeouts_seen.add(t.from_state)

    # Per-state transition shape: one guarded exit per receive branch or
    # action outcome, exactly one unguarded exit from a send state, and no
    # normal exits from end states.
    for st in b.states:
        normals = [t for t in b.transitions if t.from_state == st.id and isinstance(t.kind, Normal)]
        if any(t.to_state not in state_ids for t in normals):
            continue  # dangling targets already reported; shape unverifiable
        if st.is_end:
            if normals:
                out.append(Violation(sid, st.id, "EndWithOutgoing", "end states have no outgoing transitions"))
            continue
        guards = sorted(t.kind.guard or "" for t in normals)
        k = st.kind
        if isinstance(k, Send):
            if len(normals) != 1:
                out.append(Violation(sid, st.id, "TransitionShape", f"send state has {len(normals)} exits, expected 1"))
        elif isinstance(k, Receive):
            expected = sorted(br.label for br in k.branches)
            if guards != expected:
                out.append(
                    Violation(sid, st.id, "TransitionShape", f"receive exits {guards} != branch labels {expected}")
                )
        elif isinstance(k, Action):
            expected = sorted(k.outcomes)
            if guards != expected:
                out.append(
                    Violation(sid, st.id, "TransitionShape", f"action exits {guards} != outcomes {expected}")
                )


def well_formed(model: ProcessModel) -> list[Violation]:
    """Check every behavior's start/end and transition-shape invariants.

    Pure: the same model always yields the same list, sorted by subject id
    then element id. Empty list means every behavior is well formed.
    """
    out: list[Violation] = []
    for subject in model.subjects:
        if subject.behavior is not None:
            _check_behavior(model, subject, out)
    return sorted(out)


def interface_consistency(model: ProcessModel) -> list[Violation]:
    """Cross-check behaviors against declared channels.

    Every send needs a matching channel triple, every receive branch needs a
    potential sender channel, and channel triples no send ever uses are
    reported as warnings.
    """
    out: list[Violation] = []
    used: set[tuple[str, str, str]] = set()
    for subject in model.subjects:
        if subject.behavior is None:
            continue
        for st in subject.behavior.states:
            k = st.kind
            if isinstance(k, Send):
                used.add((subject.id, k.to_subject, k.message))
                if not model.has_channel(subject.id, k.to_subject, k.message):
                    out.append(
                        Violation(
                            subject.id,
                            st.id,
                            "UnmatchedSend",
                            f"no channel {subject.id}->{k.to_subject} carrying {k.message!r}",
                        )
                    )
            elif isinstance(k, Receive):
                for br in k.branches:
                    if not model.has_channel(br.source, subject.id, br.message):
                        out.append(
                            Violation(
                                subject.id,
                                st.id,
                                "UnmatchedReceive",
                                f"no channel {br.source}->{subject.id} carrying {br.message!r}",
                            )
                        )
    for c in model.channels:
        for mid in sorted(c.message_ids):
            if (c.from_subject, c.to_subject, mid) not in used:
                out.append(
                    Violation(
                        c.from_subject,
                        f"{c.from_subject}->{c.to_subject}",
                        "UnusedChannel",
                        f"no send uses message {mid!r}",
                        severity="warning",
                    )
                )
    return sorted(out)


def validate_model(model: ProcessModel) -> list[Violation]:
    """well_formed plus interface_consistency in one deterministic list."""
    return sorted(well_formed(model) + interface_consistency(model))


def drill_down(model: ProcessModel, subject_id: str) -> Behavior:
    """Return the named subject's behavior view.

    Raises UnknownSubjectError for unknown ids and ExternalBehaviorError for
    external subjects, whose internals are by definition not modeled.
    """
    subject = model.subject(subject_id)
    if subject.kind is SubjectKind.EXTERNAL:
        raise ExternalBehaviorError(f"subject {subject_id!r} is external")
    assert subject.behavior is not None
    return subject.behavior
