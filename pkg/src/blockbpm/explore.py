"""Bounded exhaustive exploration of a model's global state space.

The explorer enumerates every scheduler interleaving of agent steps by
breadth-first search over global states (per-agent control state plus
mailbox contents), independently of the engine's own stepping code — which
is exactly what lets it serve as the engine's brute-force oracle. Timing is
abstracted away: wherever a blocked receive holds a timeout, the fired exit
is explored as an additional nondeterministic branch, a sound
over-approximation of every logical-time outcome.

Queues are capped during exploration (unbounded mailboxes make the space
infinite); hitting any bound clears the terminal-complete flag but never
produces a spurious deadlock report: every reported deadlock carries a
shortest witness replayable on the engine.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from . import engine as _engine
from .engine import (
    InstanceStatus,
    ProcessInstance,
    SchedulerConfig,
    StepChoice,
    agent_id,
)
from .errors import ModelInvalidError, WitnessMismatchError
from .model import (
    Action,
    Normal,
    ProcessModel,
    Receive,
    Send,
    SubjectKind,
    Timeout,
    validate_model,
)

__all__ = [
    "ExplorationBounds",
    "AgentView",
    "GlobalState",
    "Choice",
    "ExplorationResult",
    "state_space",
    "find_deadlocks",
    "replay",
    "snapshot",
]

MailboxView = tuple[tuple[str, str], ...]  # (message id, sender subject id)


@dataclass(frozen=True, slots=True)
class ExplorationBounds:
    max_states: int = 10_000
    max_mailbox: int = 4
    max_depth: int = 1_000

    def __post_init__(self):
        for name in ("max_states", "max_mailbox", "max_depth"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True, slots=True)
class AgentView:
    agent: str
    state: str
    done: bool
    mailbox: MailboxView = ()


@dataclass(frozen=True, slots=True)
class GlobalState:
    agents: tuple[AgentView, ...] = ()


@dataclass(frozen=True, slots=True)
class Choice:
    """One scheduler decision along a witness path."""

    agent: str
    kind: str  # send | receive | timeout | action
    outcome: str | None = None


Witness = tuple[Choice, ...]


@dataclass
class ExplorationResult:
    states_visited: int = 0
    deadlocks: list[tuple[GlobalState, Witness]] = field(default_factory=list)
    terminal_complete: bool = True
    end_reachability: dict[str, bool] = field(default_factory=dict)
    terminal_statuses: frozenset[str] = frozenset()


# Internal concrete state: one (state id, mailbox) per agent, in fixed agent
# order. Payloads and deadlines are deliberately absent — guards are opaque
# labels, so control flow never depends on either.
_Local = tuple[str, MailboxView]
_Concrete = tuple[_Local, ...]


class _Space:
    """Model accessors precomputed for the search loop."""

    def __init__(self, model: ProcessModel):
        self.model = model
        self.agent_ids: list[str] = []
        self.subject_of: dict[str, str] = {}
        self.group: dict[str, list[int]] = {}  # subject -> agent indexes
        for subject in model.subjects:
            if subject.kind is SubjectKind.EXTERNAL:
                continue
            count = subject.multiplicity_default if subject.kind is SubjectKind.MULTI else 1
            for replica in range(count):
                aid = agent_id(subject.id, replica)
                self.group.setdefault(subject.id, []).append(len(self.agent_ids))
                self.subject_of[aid] = subject.id
                self.agent_ids.append(aid)
        self.symmetric_groups = [
            idxs
            for subject in model.subjects
            if subject.kind is SubjectKind.MULTI and len(idxs := self.group.get(subject.id, [])) > 1
        ]
        self.states = {
            s.id: {st.id: st for st in s.behavior.states}
            for s in model.subjects
            if s.behavior is not None
        }
        self.normal_exits: dict[tuple[str, str], dict[str | None, str]] = {}
        self.timeout_exits: dict[tuple[str, str], str] = {}
        for s in model.subjects:
            if s.behavior is None:
                continue
            for t in s.behavior.transitions:
                if isinstance(t.kind, Normal):
                    self.normal_exits.setdefault((s.id, t.from_state), {})[t.kind.guard] = t.to_state
                elif isinstance(t.kind, Timeout):
                    self.timeout_exits[(s.id, t.from_state)] = t.to_state

    def initial(self) -> _Concrete:
        locals_: list[_Local] = []
        for aid in self.agent_ids:
            subject = self.model.subject(self.subject_of[aid])
            assert subject.behavior is not None
            locals_.append((subject.behavior.start_states[0].id, ()))
        return tuple(locals_)

    def is_done(self, idx: int, local: _Local) -> bool:
        subject = self.subject_of[self.agent_ids[idx]]
        return self.states[subject][local[0]].is_end

    def canonical(self, concrete: _Concrete, symmetry: bool) -> _Concrete:
        if not symmetry or not self.symmetric_groups:
            return concrete
        out = list(concrete)
        for idxs in self.symmetric_groups:
            ordered = sorted(out[i] for i in idxs)
            for i, local in zip(idxs, ordered):
                out[i] = local
        return tuple(out)

    def view(self, concrete: _Concrete) -> GlobalState:
        return GlobalState(
            agents=tuple(
                AgentView(
                    agent=self.agent_ids[i],
                    state=local[0],
                    done=self.is_done(i, local),
                    mailbox=local[1],
                )
                for i, local in enumerate(concrete)
            )
        )

    def successors(self, concrete: _Concrete, max_mailbox: int):
        """All one-step interleavings. Yields (choice, next state); sets the
        pruned flag when a mailbox cap suppressed a send."""
        moves: list[tuple[Choice, _Concrete]] = []
        pruned = False
        for i, (state_id, _mailbox) in enumerate(concrete):
            if self.is_done(i, concrete[i]):
                continue
            aid = self.agent_ids[i]
            subject = self.subject_of[aid]
            st = self.states[subject][state_id]
            kind = st.kind
            if isinstance(kind, Send):
                targets = self.group.get(kind.to_subject, [])
                if any(len(concrete[t][1]) >= max_mailbox for t in targets):
                    pruned = True
                    continue
                nxt = list(concrete)
                for t in targets:
                    nxt[t] = (concrete[t][0], concrete[t][1] + ((kind.message, subject),))
                nxt[i] = (self._exit(subject, state_id, None), concrete[i][1])
                moves.append((Choice(aid, "send"), tuple(nxt)))
            elif isinstance(kind, Receive):
                match = self._scan(kind, concrete[i][1])
                if match is not None:
                    pos, label = match
                    mailbox = concrete[i][1]
                    nxt = list(concrete)
                    nxt[i] = (self._exit(subject, state_id, label), mailbox[:pos] + mailbox[pos + 1:])
                    moves.append((Choice(aid, "receive"), tuple(nxt)))
                elif (subject, state_id) in self.timeout_exits:
                    nxt = list(concrete)
                    nxt[i] = (self.timeout_exits[(subject, state_id)], concrete[i][1])
                    moves.append((Choice(aid, "timeout"), tuple(nxt)))
            elif isinstance(kind, Action):
                for outcome in kind.outcomes:
                    nxt = list(concrete)
                    nxt[i] = (self._exit(subject, state_id, outcome), concrete[i][1])
                    moves.append((Choice(aid, "action", outcome), tuple(nxt)))
        return moves, pruned

    def _exit(self, subject: str, state_id: str, guard: str | None) -> str:
        exits = self.normal_exits[(subject, state_id)]
        if guard in exits:
            return exits[guard]
        # single unguarded exit recorded under None (send states)
        return exits[None]

    def _scan(self, kind: Receive, mailbox: MailboxView):
        for pos, (message, source) in enumerate(mailbox):
            for br in kind.branches:
                if br.message == message and br.source == source:
                    return pos, br.label
        return None


def state_space(
    model: ProcessModel,
    bounds: ExplorationBounds | None = None,
    *,
    symmetry: bool = True,
) -> ExplorationResult:
    """Breadth-first enumeration of every reachable global state.

    Every ready agent branches, every action outcome branches, and blocked
    receives with timeouts branch on the fired exit. States are deduplicated
    by canonical form; multi-subject replicas are folded as interchangeable
    unless symmetry reduction is disabled. Exceeding a bound is not an error:
    it clears terminal_complete.
    """
    bounds = bounds or ExplorationBounds()
    errors = [v for v in validate_model(model) if v.severity == "error"]
    if errors:
        raise ModelInvalidError(errors)

    space = _Space(model)
    root = space.initial()
    root_key = space.canonical(root, symmetry)

    visited: set[_Concrete] = {root_key}
    frontier: deque[tuple[_Concrete, Witness, int]] = deque([(root, (), 0)])
    edges: dict[_Concrete, set[_Concrete]] = {}
    deadlocks: list[tuple[GlobalState, Witness]] = []
    dead_keys: set[_Concrete] = set()
    truncated = False
    completed_seen = False
    end_reached: dict[str, bool] = {
        s.id: (s.kind is SubjectKind.EXTERNAL or not space.group.get(s.id))
        for s in model.subjects
    }

    while frontier:
        concrete, path, depth = frontier.popleft()
        key = space.canonical(concrete, symmetry)

        done_flags = [space.is_done(i, local) for i, local in enumerate(concrete)]
        for subject, idxs in space.group.items():
            if idxs and all(done_flags[i] for i in idxs):
                end_reached[subject] = True

        moves, pruned = space.successors(concrete, bounds.max_mailbox)
        if pruned:
            truncated = True
        if not moves:
            if all(done_flags):
                completed_seen = True
            elif not pruned and key not in dead_keys:
                dead_keys.add(key)
                deadlocks.append((space.view(concrete), path))
            continue
        if depth >= bounds.max_depth:
            truncated = True
            continue
        for choice, nxt in moves:
            nxt_key = space.canonical(nxt, symmetry)
            edges.setdefault(key, set()).add(nxt_key)
            if nxt_key in visited:
                continue
            if len(visited) >= bounds.max_states:
                truncated = True
                continue
            visited.add(nxt_key)
            frontier.append((nxt, path + (choice,), depth + 1))

    has_cycle = False if truncated else _has_cycle(root_key, edges)

    statuses = set()
    if completed_seen:
        statuses.add(InstanceStatus.COMPLETED.value)
    if deadlocks:
        statuses.add(InstanceStatus.DEADLOCKED.value)
    if has_cycle:
        statuses.add(InstanceStatus.STEP_LIMIT.value)

    deadlocks.sort(
        key=lambda item: (
            len(item[1]),
            tuple((a.agent, a.state, a.done, a.mailbox) for a in item[0].agents),
        )
    )
    return ExplorationResult(
        states_visited=len(visited),
        deadlocks=deadlocks,
        terminal_complete=not truncated,
        end_reachability=end_reached,
        terminal_statuses=frozenset(statuses),
    )


def _has_cycle(root: _Concrete, edges: dict[_Concrete, set[_Concrete]]) -> bool:
    WHITE, GRAY, BLACK = 0, 1, 2
    color: dict[_Concrete, int] = {}
    stack: list[tuple[_Concrete, Iterable[_Concrete]]] = [(root, iter(sorted(edges.get(root, ()))))]
    color[root] = GRAY
    while stack:
        node, it = stack[-1]
        advanced = False
        for nxt in it:
            c = color.get(nxt, WHITE)
            if c == GRAY:
                return True
            if c == WHITE:
                color[nxt] = GRAY
                stack.append((nxt, iter(sorted(edges.get(nxt, ())))))
                advanced = True
                break
        if not advanced:
            color[node] = BLACK
            stack.pop()
    return False


def find_deadlocks(
    model: ProcessModel, bounds: ExplorationBounds | None = None
) -> list[tuple[GlobalState, Witness]]:
    """All deadlocked states within bounds, each with a shortest witness."""
    return state_space(model, bounds).deadlocks


def snapshot(instance: ProcessInstance) -> GlobalState:
    """Project a running engine instance onto the explorer's state view.

    Agents resting at an end state count as done whether or not their
    EnteredEnd step has been taken; deadlines and payloads are dropped, the
    same abstraction the search uses.
    """
    views = []
    for agent in instance.agents:
        st = _engine._state_of(instance, agent)
        views.append(
            AgentView(
                agent=agent.id,
                state=agent.state,
                done=agent.finished or st.is_end,
                mailbox=tuple(
                    (m.message, instance.agent_subject(m.from_agent)) for m in agent.mailbox
                ),
            )
        )
    return GlobalState(agents=tuple(views))


def _canonical_view(state: GlobalState, model: ProcessModel, symmetry: bool) -> tuple:
    if not symmetry:
        return tuple((a.agent, a.state, a.done, a.mailbox) for a in state.agents)
    groups: dict[str, list[AgentView]] = {}
    order: list[str] = []
    for a in state.agents:
        subject = a.agent.rsplit("#", 1)[0]
        if subject not in groups:
            order.append(subject)
        groups.setdefault(subject, []).append(a)
    out = []
    for subject in order:
        members = groups[subject]
        multi = False
        try:
            multi = model.subject(subject).kind is SubjectKind.MULTI
        except Exception:
            pass
        locals_ = [(a.state, a.done, a.mailbox) for a in members]
        if multi:
            locals_.sort()
        out.append((subject, tuple(locals_)))
    return tuple(out)


def replay(
    model: ProcessModel,
    witness: Witness,
    *,
    expect: GlobalState | None = None,
    symmetry: bool = True,
) -> ProcessInstance:
    """Drive the engine through a witness's scheduler choices.

    After the forced steps, agents standing at end states take their final
    resting step and the terminal status is settled. Any infeasible choice,
    or a final state differing from `expect`, raises WitnessMismatchError —
    which signals an engine/explorer divergence, not a user error.
    """
    instance = _engine.instantiate(model, SchedulerConfig())
    for choice in witness:
        step_choice = StepChoice(
            agent=choice.agent,
            outcome=choice.outcome if choice.kind == "action" else None,
            timeout=choice.kind == "timeout",
        )
        _engine.step(instance, step_choice)

    # flush resting steps so Completed is observable
    progressed = True
    while progressed and instance.status is InstanceStatus.RUNNING:
        progressed = False
        for agent in instance.agents:
            if not agent.finished and _engine._state_of(instance, agent).is_end:
                _engine.step(instance, StepChoice(agent=agent.id))
                progressed = True
                break

    if instance.status is InstanceStatus.RUNNING and _engine.detect_deadlock(instance):
        instance.status = InstanceStatus.DEADLOCKED

    if expect is not None:
        got = snapshot(instance)
        if _canonical_view(got, model, symmetry) != _canonical_view(expect, model, symmetry):
            raise WitnessMismatchError("replayed state differs from reported state")
    return instance
