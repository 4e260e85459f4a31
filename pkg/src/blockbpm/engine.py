"""Deterministic choreography execution.

A process instance runs one mailbox-equipped agent per subject instance
(multi-subjects fan out into replicas, external subjects have no agents and
interact only through message injection). Stepping is strictly sequential
under a deterministic scheduler, which is what makes traces reproducible:
identical model plus identical scheduler configuration yields bit-identical
traces.

Time is logical. The clock never busy-waits: it jumps straight to the
earliest pending receive deadline when nothing else can move.
"""

from __future__ import annotations

import math
import random
import zlib
from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    BadMultiplicityError,
    BadPayloadError,
    ModelInvalidError,
    NoSuchChannelError,
    NotExternalError,
    NotRunningError,
    WitnessMismatchError,
)
from .model import (
    Action,
    Behavior,
    Normal,
    ProcessModel,
    Receive,
    Send,
    State,
    SubjectKind,
    Timeout,
    validate_model,
)

__all__ = [
    "SchedulerPolicy",
    "SchedulerConfig",
    "InstanceStatus",
    "MessageInstance",
    "AgentInstance",
    "TraceEvent",
    "ProcessInstance",
    "StepChoice",
    "agent_id",
    "instantiate",
    "step",
    "advance_time",
    "detect_deadlock",
    "run",
    "run_until",
    "inject_message",
    "trace_lines",
]


class SchedulerPolicy(str, Enum):
    ROUND_ROBIN = "round-robin"
    SEEDED_RANDOM = "seeded-random"


class InstanceStatus(str, Enum):
    RUNNING = "Running"
    COMPLETED = "Completed"
    DEADLOCKED = "Deadlocked"
    STEP_LIMIT = "StepLimit"


@dataclass(frozen=True, slots=True)
class SchedulerConfig:
    policy: SchedulerPolicy = SchedulerPolicy.ROUND_ROBIN
    seed: int = 0
    max_steps: int = 10_000
    multiplicities: tuple[tuple[str, int], ...] = ()

    def multiplicity_of(self, subject_id: str) -> int | None:
        for sid, count in self.multiplicities:
            if sid == subject_id:
                return count
        return None


@dataclass(frozen=True, slots=True)
class MessageInstance:
    message: str
    from_agent: str
    to_agent: str
    payload: tuple[tuple[str, str], ...] = ()
    send_time: int = 0


@dataclass(slots=True)
class AgentInstance:
    id: str
    subject: str
    replica: int
    state: str
    mailbox: list[MessageInstance] = field(default_factory=list)
    wait_deadline: int | None = None
    variables: dict[str, str] = field(default_factory=dict)
    finished: bool = False
    action_visits: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class TraceEvent:
    seq: int
    time: int
    agent: str
    kind: str  # Sent | Received | ActionTaken | TimeoutFired | EnteredEnd | Blocked
    details: tuple[tuple[str, str], ...] = ()

    def detail(self, key: str, default: str = "") -> str:
        for k, v in self.details:
            if k == key:
                return v
        return default


@dataclass(frozen=True, slots=True)
class StepChoice:
    """An explicit scheduler decision, used when replaying witnesses."""

    agent: str
    outcome: str | None = None
    timeout: bool = False


@dataclass(slots=True)
class ProcessInstance:
    model: ProcessModel
    config: SchedulerConfig
    agents: list[AgentInstance]
    clock: int = 0
    trace: list[TraceEvent] = field(default_factory=list)
    status: InstanceStatus = InstanceStatus.RUNNING
    steps_taken: int = 0
    _rng: random.Random = field(default_factory=random.Random, repr=False)
    _rr_next: int = 0

    def agent(self, aid: str) -> AgentInstance:
        for a in self.agents:
            if a.id == aid:
                return a
        raise KeyError(aid)

    def agents_of(self, subject_id: str) -> list[AgentInstance]:
        return [a for a in self.agents if a.subject == subject_id]

    def agent_subject(self, aid: str) -> str:
        """Subject of a sender id; external senders use the bare subject id."""
        for a in self.agents:
            if a.id == aid:
                return a.subject
        return aid


def agent_id(subject_id: str, replica: int) -> str:
    return f"{subject_id}#{replica}"


def _details(**kv) -> tuple[tuple[str, str], ...]:
    return tuple(sorted((k, str(v)) for k, v in kv.items()))


def _behavior(model: ProcessModel, subject_id: str) -> Behavior:
    b = model.subject(subject_id).behavior
    assert b is not None
    return b


def instantiate(model: ProcessModel, config: SchedulerConfig | None = None) -> ProcessInstance:
    """Spin up one agent per standard subject and one per multi-subject
    replica, all parked at their start states with empty mailboxes.

    The model must pass well-formedness and interface consistency (warnings
    are tolerated); multiplicity overrides must name multi-subjects and be
    at least one.
    """
    config = config or SchedulerConfig()
    errors = [v for v in validate_model(model) if v.severity == "error"]
    if errors:
        raise ModelInvalidError(errors)

    for sid, count in config.multiplicities:
        try:
            subject = model.subject(sid)
        except Exception:
            raise BadMultiplicityError(f"multiplicity for unknown subject {sid!r}")
        if subject.kind is not SubjectKind.MULTI:
            raise BadMultiplicityError(f"{sid!r} is not a multi-subject")
        if count < 1:
            raise BadMultiplicityError(f"multiplicity {count} for {sid!r} below 1")

    agents: list[AgentInstance] = []
    for subject in model.subjects:  # already sorted by id
        if subject.kind is SubjectKind.EXTERNAL:
            continue
        count = 1
        if subject.kind is SubjectKind.MULTI:
            count = config.multiplicity_of(subject.id) or subject.multiplicity_default
        behavior = subject.behavior
        assert behavior is not None
        start = behavior.start_states[0]
        for replica in range(count):
            agent = AgentInstance(
                id=agent_id(subject.id, replica), subject=subject.id, replica=replica, state=start.id
            )
            agents.append(agent)

    instance = ProcessInstance(
        model=model, config=config, agents=agents, _rng=random.Random(config.seed)
    )
    for agent in agents:
        _on_enter(instance, agent, agent.state)
    return instance


def _state_of(instance: ProcessInstance, agent: AgentInstance) -> State:
    return _behavior(instance.model, agent.subject).state(agent.state)


def _on_enter(instance: ProcessInstance, agent: AgentInstance, state_id: str) -> None:
    agent.state = state_id
    agent.wait_deadline = None
    st = _state_of(instance, agent)
    if st.is_end:
        return
    if isinstance(st.kind, Receive):
        for t in _behavior(instance.model, agent.subject).outgoing(state_id):
            if isinstance(t.kind, Timeout):
                agent.wait_deadline = instance.clock + t.kind.duration
                break


def _first_match(instance: ProcessInstance, agent: AgentInstance, kind: Receive):
    """Front-to-back mailbox scan for the first message matching any branch
    (selective receive; avoids spurious blocking on interleaved senders)."""
    for i, msg in enumerate(agent.mailbox):
        source = instance.agent_subject(msg.from_agent)
        for br in kind.branches:
            if br.message == msg.message and br.source == source:
                return i, br
    return None


def _is_ready(instance: ProcessInstance, agent: AgentInstance) -> bool:
    if agent.finished:
        return False
    st = _state_of(instance, agent)
    if st.is_end:
        return True  # one final step to rest
    k = st.kind
    if isinstance(k, (Send, Action)):
        return True
    if isinstance(k, Receive):
        if _first_match(instance, agent, k) is not None:
            return True
        return agent.wait_deadline is not None and instance.clock >= agent.wait_deadline
    return False


def _select(instance: ProcessInstance) -> AgentInstance | None:
    n = len(instance.agents)
    if n == 0:
        return None
    if instance.config.policy is SchedulerPolicy.ROUND_ROBIN:
        for offset in range(n):
            idx = (instance._rr_next + offset) % n
            agent = instance.agents[idx]
            if _is_ready(instance, agent):
                instance._rr_next = (idx + 1) % n
                return agent
        return None
    ready = [a for a in instance.agents if _is_ready(instance, a)]
    if not ready:
        return None
    return ready[instance._rng.randrange(len(ready))]


def _append(instance: ProcessInstance, agent_name: str, kind: str, **kv) -> TraceEvent:
    event = TraceEvent(
        seq=len(instance.trace), time=instance.clock, agent=agent_name, kind=kind, details=_details(**kv)
    )
    instance.trace.append(event)
    return event


def _normal_exit(instance: ProcessInstance, agent: AgentInstance, guard: str | None) -> str:
    behavior = _behavior(instance.model, agent.subject)
    for t in behavior.outgoing(agent.state):
        if isinstance(t.kind, Normal) and (guard is None or t.kind.guard == guard):
            return t.to_state
    raise AssertionError(f"no exit with guard {guard!r} from {agent.state!r} (well-formedness broken)")


def _pick_outcome(instance: ProcessInstance, agent: AgentInstance, outcomes: tuple[str, ...]) -> str:
    if len(outcomes) == 1:
        return outcomes[0]
    visits = agent.action_visits.get(agent.state, 0)
    key = f"{instance.config.seed}|{agent.id}|{agent.state}|{visits}".encode()
    return outcomes[zlib.crc32(key) % len(outcomes)]


class _NoReadyAgent(Exception):
    """Internal: the scheduler found nothing to run. run() resolves this via
    advance_time or deadlock detection; it never escapes the engine API."""


def step(instance: ProcessInstance, choice: StepChoice | None = None) -> TraceEvent:
    """Execute exactly one agent step and append exactly one trace event.

    Without a choice the configured scheduler picks any ready agent. With a
    choice (witness replay) the named agent and decision are forced;
    infeasible choices raise WitnessMismatchError.
    """
    if instance.status is not InstanceStatus.RUNNING:
        raise NotRunningError(f"instance is {instance.status.value}")

    if choice is None:
        agent = _select(instance)
        if agent is None:
            raise _NoReadyAgent()
    else:
        try:
            agent = instance.agent(choice.agent)
        except KeyError:
            raise WitnessMismatchError(f"no agent {choice.agent!r}")
        if agent.finished:
            raise WitnessMismatchError(f"{choice.agent} already finished")

    st = _state_of(instance, agent)

    if st.is_end:
        if choice is not None and (choice.timeout or choice.outcome):
            raise WitnessMismatchError(f"{agent.id} is resting at {st.id}")
        agent.finished = True
        agent.wait_deadline = None
        event = _append(instance, agent.id, "EnteredEnd", state=st.id)
    elif isinstance(st.kind, Send):
        event = _do_send(instance, agent, st)
    elif isinstance(st.kind, Receive):
        event = _do_receive(instance, agent, st, choice)
    elif isinstance(st.kind, Action):
        event = _do_action(instance, agent, st, choice)
    else:  # pragma: no cover
        raise AssertionError(st.kind)

    instance.steps_taken += 1
    if instance.agents and all(a.finished for a in instance.agents):
        instance.status = InstanceStatus.COMPLETED
    return event


def _do_send(instance: ProcessInstance, agent: AgentInstance, st: State) -> TraceEvent:
    kind = st.kind
    assert isinstance(kind, Send)
    schema = instance.model.message(kind.message).payload_schema
    payload = tuple((k, agent.variables[k]) for k in schema if k in agent.variables)
    recipients = instance.agents_of(kind.to_subject)  # empty for external targets
    for r in recipients:
        r.mailbox.append(
            MessageInstance(kind.message, agent.id, r.id, payload, send_time=instance.clock)
        )
    event = _append(
        instance,
        agent.id,
        "Sent",
        message=kind.message,
        to=",".join(r.id for r in recipients),
        copies=len(recipients),
    )
    _on_enter(instance, agent, _normal_exit(instance, agent, None))
    return event


def _do_receive(
    instance: ProcessInstance, agent: AgentInstance, st: State, choice: StepChoice | None
) -> TraceEvent:
    kind = st.kind
    assert isinstance(kind, Receive)
    match = _first_match(instance, agent, kind)

    fire_timeout = choice.timeout if choice is not None else (match is None)
    if fire_timeout:
        if match is not None:
            raise WitnessMismatchError(f"{agent.id} has a deliverable message; timeout cannot fire")
        if agent.wait_deadline is None:
            if choice is not None:
                raise WitnessMismatchError(f"{agent.id} has no timeout at {st.id}")
            raise _NoReadyAgent()
        if choice is not None:
            # Replay controls timing: jump to the deadline so the exceptional
            # exit is taken exactly when the engine would take it.
            instance.clock = max(instance.clock, agent.wait_deadline)
        if instance.clock < agent.wait_deadline:
            raise _NoReadyAgent()
        deadline = agent.wait_deadline
        behavior = _behavior(instance.model, agent.subject)
        target = next(
            t.to_state for t in behavior.outgoing(st.id) if isinstance(t.kind, Timeout)
        )
        event = _append(instance, agent.id, "TimeoutFired", state=st.id, deadline=deadline)
        _on_enter(instance, agent, target)
        return event

    if match is None:
        raise WitnessMismatchError(f"{agent.id} has no deliverable message at {st.id}")
    index, branch = match
    msg = agent.mailbox.pop(index)
    agent.variables.update(dict(msg.payload))
    event = _append(
        instance,
        agent.id,
        "Received",
        message=msg.message,
        sender=msg.from_agent,
        sent=msg.send_time,
    )
    _on_enter(instance, agent, _normal_exit(instance, agent, branch.label))
    return event


def _do_action(
    instance: ProcessInstance, agent: AgentInstance, st: State, choice: StepChoice | None
) -> TraceEvent:
    kind = st.kind
    assert isinstance(kind, Action)
    if choice is not None and choice.outcome is not None:
        if choice.outcome not in kind.outcomes:
            raise WitnessMismatchError(f"outcome {choice.outcome!r} not offered by {st.id}")
        outcome = choice.outcome
    else:
        outcome = _pick_outcome(instance, agent, kind.outcomes)
    agent.action_visits[agent.state] = agent.action_visits.get(agent.state, 0) + 1
    event = _append(instance, agent.id, "ActionTaken", state=st.id, outcome=outcome)
    _on_enter(instance, agent, _normal_exit(instance, agent, outcome))
    return event


def advance_time(instance: ProcessInstance) -> None:
    """Jump the clock to the earliest pending deadline (no busy waiting).

    Callers ensure no agent is ready and at least one deadline is pending;
    run() is the normal caller.
    """
    deadlines = [a.wait_deadline for a in instance.agents if not a.finished and a.wait_deadline is not None]
    if not deadlines:
        raise ValueError("no pending deadlines")
    instance.clock = max(instance.clock, min(deadlines))


def detect_deadlock(instance: ProcessInstance) -> bool:
    """True iff nothing can ever move again: no agent ready, no deadline
    pending, and at least one agent not resting at an end state."""
    if any(_is_ready(instance, a) for a in instance.agents):
        return False
    if any(a.wait_deadline is not None for a in instance.agents if not a.finished):
        return False
    return any(not a.finished for a in instance.agents)


def run_until(instance: ProcessInstance, step_budget: int | None = None) -> list[TraceEvent]:
    """Advance the instance by up to step_budget steps (all the way to a
    terminal status when the budget is None). Returns the new trace events."""
    start = len(instance.trace)
    budget = math.inf if step_budget is None else step_budget
    used = 0
    while instance.status is InstanceStatus.RUNNING and used < budget:
        if instance.agents and all(a.finished for a in instance.agents):
            instance.status = InstanceStatus.COMPLETED
            break
        if not instance.agents:
            instance.status = InstanceStatus.COMPLETED  # nothing to run
            break
        if instance.steps_taken >= instance.config.max_steps:
            instance.status = InstanceStatus.STEP_LIMIT
            break
        if any(_is_ready(instance, a) for a in instance.agents):
            step(instance)
            used += 1
            continue
        if any(a.wait_deadline is not None for a in instance.agents if not a.finished):
            advance_time(instance)
            continue
        instance.status = InstanceStatus.DEADLOCKED
        for agent in sorted(instance.agents, key=lambda a: a.id):
            if not agent.finished:
                _append(instance, agent.id, "Blocked", state=agent.state)
        break
    return instance.trace[start:]


def run(instance: ProcessInstance) -> tuple[list[TraceEvent], InstanceStatus]:
    """Drive the instance to Completed, Deadlocked or StepLimit."""
    run_until(instance, None)
    return list(instance.trace), instance.status


def inject_message(
    instance: ProcessInstance,
    external_subject: str,
    to_subject: str,
    message_id: str,
    payload: dict[str, str] | None = None,
) -> TraceEvent:
    """Deliver a message on behalf of an external subject.

    The sender must be external and the channel (external -> to, message)
    declared. The message lands in every replica mailbox of the target,
    stamped with the current clock, and a Sent event credits the external
    subject as sender.
    """
    if instance.status is not InstanceStatus.RUNNING:
        raise NotRunningError(f"instance is {instance.status.value}")
    sender = instance.model.subject(external_subject)
    if sender.kind is not SubjectKind.EXTERNAL:
        raise NotExternalError(f"{external_subject!r} is {sender.kind.value}, not external")
    if not instance.model.has_channel(external_subject, to_subject, message_id):
        raise NoSuchChannelError(
            f"no channel {external_subject}->{to_subject} carrying {message_id!r}"
        )
    schema = instance.model.message(message_id).payload_schema
    payload = payload or {}
    unknown = sorted(set(payload) - set(schema))
    if unknown:
        raise BadPayloadError(f"payload keys {unknown} not in schema of {message_id!r}")
    packed = tuple(sorted(payload.items()))
    recipients = instance.agents_of(to_subject)
    for r in recipients:
        r.mailbox.append(
            MessageInstance(message_id, external_subject, r.id, packed, send_time=instance.clock)
        )
    return _append(
        instance,
        external_subject,
        "Sent",
        message=message_id,
        to=",".join(r.id for r in recipients),
        copies=len(recipients),
    )


def trace_lines(trace: list[TraceEvent]) -> str:
    """Line-delimited trace export: seq, time, agent, kind, details."""
    rows = []
    for e in trace:
        details = ";".join(f"{k}={v}" for k, v in e.details)
        rows.append(f"{e.seq}\t{e.time}\t{e.agent}\t{e.kind}\t{details}")
    return "\n".join(rows) + ("\n" if rows else "")
