"""Shared fixtures and generators for the test suite.

random_model builds valid models (well-formed, interface-consistent) by
construction: channels are derived from the sends and receive branches the
behaviors actually use. dag_only=True restricts transitions to forward
targets, which keeps every agent's run finite and the global state space
acyclic — the shape the exploration oracle needs.
"""

from __future__ import annotations

import random

from blockbpm.blocks import (
    Arrow,
    Block,
    BlockDiagram,
    FlowConvention,
    Implicit,
    Rect,
    infer_connections,
    place_block,
)
from blockbpm.model import (
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
    SubjectKind,
    Subject,
    Timeout,
    Transition,
    build_model,
    interface_consistency,
    well_formed,
)

PAYLOAD_KEYS = ("ref", "note", "qty")
OUTCOME_POOL = ("go", "alt", "brk")


def pingpong_model() -> ProcessModel:
    a = Subject("A", "A", SubjectKind.STANDARD, Behavior(
        states=(
            State("a1", Send("B", "m1"), is_start=True),
            State("a2", Receive((Branch("B", "m2"),))),
            State("a3", Action(("done",)), is_end=True),
        ),
        transitions=(Transition("a1", "a2"), Transition("a2", "a3", Normal("B/m2"))),
    ))
    b = Subject("B", "B", SubjectKind.STANDARD, Behavior(
        states=(
            State("b1", Receive((Branch("A", "m1"),)), is_start=True),
            State("b2", Send("A", "m2")),
            State("b3", Action(("done",)), is_end=True),
        ),
        transitions=(Transition("b1", "b2", Normal("A/m1")), Transition("b2", "b3")),
    ))
    return build_model(
        [a, b],
        [Channel("A", "B", frozenset({"m1"})), Channel("B", "A", frozenset({"m2"}))],
        [MessageType("m1", "ping"), MessageType("m2", "pong")],
        model_id="pingpong",
        name="Ping Pong",
    )


def cyclic_wait_model(*, timeout: int | None = None) -> ProcessModel:
    """Two subjects each waiting for the other; nobody ever sends first.

    With `timeout` set, one receive gets an exceptional exit that sends the
    message the partner is waiting for, which dissolves the deadlock.
    """
    if timeout is None:
        a_states = (
            State("a1", Receive((Branch("B", "m2"),)), is_start=True),
            State("a3", Action(("done",)), is_end=True),
        )
        a_transitions = (Transition("a1", "a3", Normal("B/m2")),)
    else:
        a_states = (
            State("a1", Receive((Branch("B", "m2"),)), is_start=True),
            State("a2", Send("B", "m1")),
            State("a3", Action(("done",)), is_end=True),
        )
        a_transitions = (
            Transition("a1", "a3", Normal("B/m2")),
            Transition("a1", "a2", Timeout(timeout)),
            Transition("a2", "a3"),
        )
    a = Subject("A", "A", SubjectKind.STANDARD, Behavior(a_states, a_transitions))
    b = Subject("B", "B", SubjectKind.STANDARD, Behavior(
        states=(
            State("b1", Receive((Branch("A", "m1"),)), is_start=True),
            State("b2", Action(("done",)), is_end=True),
        ),
        transitions=(Transition("b1", "b2", Normal("A/m1")),),
    ))
    return build_model(
        [a, b],
        [Channel("A", "B", frozenset({"m1"})), Channel("B", "A", frozenset({"m2"}))],
        [MessageType("m1"), MessageType("m2")],
        model_id="cyclicwait",
        name="Cyclic Wait",
    )


def random_model(
    rng: random.Random,
    *,
    min_subjects: int = 1,
    max_subjects: int = 6,
    min_states: int = 1,
    max_states: int = 12,
    dag_only: bool = False,
    allow_multi: bool = True,
    allow_external: bool = True,
    allow_timeouts: bool = True,
    max_messages: int = 6,
) -> ProcessModel:
    n_subjects = rng.randint(min_subjects, max_subjects)
    subject_ids = [f"S{i}" for i in range(n_subjects)]

    kinds: dict[str, SubjectKind] = {}
    for sid in subject_ids:
        roll = rng.random()
        if allow_external and n_subjects >= 2 and roll < 0.15:
            kinds[sid] = SubjectKind.EXTERNAL
        elif allow_multi and roll < 0.35:
            kinds[sid] = SubjectKind.MULTI
        else:
            kinds[sid] = SubjectKind.STANDARD
    if all(k is SubjectKind.EXTERNAL for k in kinds.values()):
        kinds[subject_ids[0]] = SubjectKind.STANDARD

    message_ids = [f"m{i}" for i in range(rng.randint(1, max_messages))]
    messages = [
        MessageType(
            mid,
            name=mid,
            payload_schema=tuple(rng.sample(PAYLOAD_KEYS, rng.randint(0, len(PAYLOAD_KEYS)))),
        )
        for mid in message_ids
    ]

    subjects = []
    channel_triples: set[tuple[str, str, str]] = set()
    for sid in subject_ids:
        if kinds[sid] is SubjectKind.EXTERNAL:
            subjects.append(Subject(sid, sid, SubjectKind.EXTERNAL))
            continue

        n_states = rng.randint(min_states, max_states)
        state_ids = [f"{sid.lower()}_{i}" for i in range(n_states)]
        ends = {n_states - 1}
        for i in range(1, n_states - 1):
            if rng.random() < 0.15:
                ends.add(i)

        peers = [p for p in subject_ids if p != sid]
        states: list[State] = []
        transitions: list[Transition] = []
        for i, st_id in enumerate(state_ids):
            is_start = i == 0
            is_end = i in ends
            if is_end:
                states.append(State(st_id, Action(("done",)), is_start=is_start, is_end=True))
                continue

            def target() -> str:
                if dag_only:
                    return state_ids[rng.randint(i + 1, n_states - 1)]
                return state_ids[rng.randrange(n_states)]

            roll = rng.random()
            if peers and roll < 0.4:
                to = rng.choice(peers)
                mid = rng.choice(message_ids)
                states.append(State(st_id, Send(to, mid), is_start=is_start))
                transitions.append(Transition(st_id, target()))
                channel_triples.add((sid, to, mid))
            elif peers and roll < 0.7:
                n_branches = rng.randint(1, 2)
                branches = []
                seen = set()
                for _ in range(n_branches):
                    src = rng.choice(peers)
                    mid = rng.choice(message_ids)
                    if (src, mid) in seen:
                        continue
                    seen.add((src, mid))
                    branches.append(Branch(src, mid))
                    channel_triples.add((src, sid, mid))
                states.append(State(st_id, Receive(tuple(branches)), is_start=is_start))
                for br in branches:
                    transitions.append(Transition(st_id, target(), Normal(br.label)))
                if allow_timeouts and rng.random() < 0.35:
                    transitions.append(Transition(st_id, target(), Timeout(rng.randint(0, 15))))
            else:
                n_outcomes = rng.randint(1, 3)
                outcomes = tuple(OUTCOME_POOL[:n_outcomes])
                states.append(State(st_id, Action(outcomes), is_start=is_start))
                for outcome in outcomes:
                    transitions.append(Transition(st_id, target(), Normal(outcome)))

        multiplicity = rng.randint(1, 3) if kinds[sid] is SubjectKind.MULTI else 1
        subjects.append(
            Subject(sid, sid, kinds[sid], Behavior(tuple(states), tuple(transitions)), multiplicity)
        )

    grouped: dict[tuple[str, str], set[str]] = {}
    for frm, to, mid in channel_triples:
        grouped.setdefault((frm, to), set()).add(mid)
    channels = [Channel(f, t, frozenset(mids)) for (f, t), mids in sorted(grouped.items())]

    model = build_model(subjects, channels, messages, model_id=f"gen", name="generated")
    assert well_formed(model) == []
    assert [v for v in interface_consistency(model) if v.severity == "error"] == []
    return model


# ------------------------------------------------------------- diagrams


SUBJECT_SIZE = (120.0, 60.0)
ACTIVITY_SIZE = (110.0, 50.0)
FLAG_SIZE = (28.0, 28.0)
CONNECTOR_SIZE = (60.0, 24.0)


def _mk_block(bid: str, kind: str, size: tuple[float, float], label: str = "", props=()) -> Block:
    return Block(id=bid, kind_ref=kind, width=size[0], height=size[1], label=label, properties=tuple(props))


def random_interaction_diagram(rng: random.Random, *, with_channel_blocks: bool = True):
    """A Layer-1 diagram built through place_block docking.

    Returns (diagram, behaviors) where behaviors maps subject block ids to
    Layer-2 diagrams (only some subjects bring one — the rest fall back to
    the default minimal behavior).
    """
    n = rng.randint(2, 4)
    diagram = BlockDiagram(flow=FlowConvention())
    names = [f"P{i}" for i in range(n)]
    block_ids = [f"sb{i}" for i in range(n)]

    column_x = 0.0
    y = 0.0
    last_id: str | None = None
    docked_pairs: list[tuple[str, str]] = []
    for i in range(n):
        kind = "subject"
        props: list[tuple[str, str]] = []
        roll = rng.random()
        if roll < 0.2 and i > 0:
            kind = "external-subject"
        elif roll < 0.4:
            kind = "multi-subject"
            props.append(("multiplicity", str(rng.randint(1, 3))))
        block = _mk_block(block_ids[i], kind, SUBJECT_SIZE, label=names[i], props=props)
        if last_id is not None and rng.random() < 0.6:
            # dock under the previous subject, creating an implicit channel
            anchor = diagram.block(last_id)
            diagram = place_block(diagram, block, (anchor.x + 3.0, anchor.rect.bottom - 5.0))
            docked_pairs.append((last_id, block.id))
        else:
            column_x += 420.0
            y = 0.0
            diagram = place_block(diagram, block, (column_x, y))
        last_id = block.id

    # arrows between random non-touching subject pairs, sometimes labeled
    ids = list(block_ids)
    arrows = []
    for _ in range(rng.randint(0, 2)):
        a, b = rng.sample(ids, 2)
        if (a, b) in docked_pairs or (b, a) in docked_pairs or any(x.from_block == a and x.to_block == b for x in arrows):
            continue
        if _touching(diagram, a, b):
            continue
        label = rng.choice(["", "Order", "Order,Cancel", "Note"])
        arrows.append(Arrow(from_block=a, to_block=b, label=label))
    if arrows:
        diagram = BlockDiagram(
            blocks=diagram.blocks, arrows=diagram.arrows + tuple(arrows), flow=diagram.flow, stage=diagram.stage
        )

    behaviors = {}
    for i, bid in enumerate(block_ids):
        if diagram.block(bid).kind_ref == "external-subject":
            continue
        if rng.random() < 0.7:
            behaviors[bid] = random_behavior_diagram(rng, names[i], [nm for nm in names if nm != names[i]])
    return diagram, behaviors


def _touching(diagram: BlockDiagram, a: str, b: str) -> bool:
    from blockbpm.blocks import shared_edge_length

    ra, rb = diagram.block(a).rect, diagram.block(b).rect
    return shared_edge_length(ra, rb, diagram.flow.gap) is not None


def random_behavior_diagram(rng: random.Random, subject: str, peers: list[str]) -> BlockDiagram:
    """A Layer-2 chain: activities docked top-down, flags docked sideways,
    single-branch receives and single-outcome actions so unlabeled exits
    stay unambiguous."""
    n = rng.randint(1, 4)
    diagram = BlockDiagram(flow=FlowConvention())
    last_id: str | None = None
    first_id = last_id
    for i in range(n):
        bid = f"st{i}"
        roll = rng.random()
        if peers and roll < 0.35:
            block = _mk_block(
                bid, "send", ACTIVITY_SIZE, label=f"{subject}_send{i}",
                props=[("to", rng.choice(peers)), ("message", rng.choice(["m1", "m2", "m3"]))],
            )
        elif peers and roll < 0.6:
            block = _mk_block(
                bid, "receive", ACTIVITY_SIZE, label=f"{subject}_recv{i}",
                props=[(rng.choice(peers), rng.choice(["m1", "m2", "m3"]))],
            )
        else:
            block = _mk_block(bid, "action", ACTIVITY_SIZE, label=f"{subject}_act{i}")
        if last_id is None:
            diagram = place_block(diagram, block, (0.0, 0.0))
            first_id = bid
        else:
            anchor = diagram.block(last_id)
            diagram = place_block(diagram, block, (anchor.x + 2.0, anchor.rect.bottom - 4.0))
        last_id = bid

    first = diagram.block(first_id)
    start = _mk_block("fl_start", "start-flag", FLAG_SIZE)
    diagram = place_block(diagram, start, (first.x - FLAG_SIZE[0] + 4.0, first.y + 6.0))
    tail = diagram.block(last_id)
    end = _mk_block("fl_end", "end-flag", FLAG_SIZE)
    diagram = place_block(diagram, end, (tail.rect.right - 4.0, tail.y + 8.0))
    return diagram


def spread_with_arrows(diagram: BlockDiagram, flag_kinds: set[str] = frozenset({"start-flag", "end-flag"})):
    """Pull every block apart and re-express each implicit connection as an
    arrow. Flags travel with the block they touch so their attachment (which
    is adjacency, not flow) survives the surgery."""
    implicit = [c for c in infer_connections(diagram) if isinstance(c.origin, Implicit)]
    flags = [b for b in diagram.blocks if b.kind_ref in flag_kinds]
    solid = [b for b in diagram.blocks if b.kind_ref not in flag_kinds]

    from blockbpm.blocks import shared_edge_length

    anchor_of: dict[str, str] = {}
    for flag in flags:
        for other in solid:
            if shared_edge_length(flag.rect, other.rect, diagram.flow.gap) is not None:
                anchor_of[flag.id] = other.id
                break

    assert not any(
        c.from_block in anchor_of or c.to_block in anchor_of for c in implicit
    ), "generator docks flags off the flow axis only"

    new_pos: dict[str, tuple[float, float]] = {}
    for i, block in enumerate(sorted(solid, key=lambda b: b.id)):
        new_pos[block.id] = (1000.0 * i, 700.0 * i)

    moved = []
    for block in diagram.blocks:
        if block.id in new_pos:
            x, y = new_pos[block.id]
        else:
            anchor = diagram.block(anchor_of[block.id])
            ax, ay = new_pos[anchor.id]
            x = ax + (block.x - anchor.x)
            y = ay + (block.y - anchor.y)
        moved.append(Block(
            id=block.id, kind_ref=block.kind_ref, x=x, y=y,
            width=block.width, height=block.height, label=block.label, properties=block.properties,
        ))

    arrows = diagram.arrows + tuple(Arrow(c.from_block, c.to_block) for c in implicit)
    min_x = min((b.x for b in moved), default=0.0)
    min_y = min((b.y for b in moved), default=0.0)
    max_x = max((b.rect.right for b in moved), default=0.0)
    max_y = max((b.rect.bottom for b in moved), default=0.0)
    return BlockDiagram(
        blocks=tuple(moved),
        arrows=arrows,
        flow=diagram.flow,
        stage=Rect(min_x, min_y, max_x - min_x, max_y - min_y),
    )


# ---------------------------------------------------- trace invariants


def check_trace_invariants(instance, trace):
    """Dense sequence numbers, monotone clock, matched sends/receives with
    per-(sender, receiver, message type) FIFO, and fan-out conservation."""
    assert [e.seq for e in trace] == list(range(len(trace)))
    assert all(a.time <= b.time for a, b in zip(trace, trace[1:]))

    replicas = {}
    for agent in instance.agents:
        replicas.setdefault(agent.subject, []).append(agent.id)

    shadows = {agent.id: [] for agent in instance.agents}
    sent_copies = 0
    received = 0
    for e in trace:
        if e.kind == "Sent":
            to = e.detail("to")
            recipients = to.split(",") if to else []
            assert int(e.detail("copies")) == len(recipients)
            if recipients:
                subject = recipients[0].rsplit("#", 1)[0]
                # broadcast reaches every replica of the target subject
                assert sorted(recipients) == sorted(replicas[subject])
            for r in recipients:
                shadows[r].append((e.detail("message"), e.agent, e.time))
            sent_copies += len(recipients)
        elif e.kind == "Received":
            received += 1
            queue = shadows[e.agent]
            key = (e.detail("message"), e.detail("sender"), int(e.detail("sent")))
            matches = [i for i, entry in enumerate(queue) if entry == key]
            assert matches, "Received without a matching prior Sent"
            same_type = [
                i for i, (m, f, _) in enumerate(queue) if (m, f) == (key[0], key[1])
            ]
            assert matches[0] == same_type[0], "per-pair FIFO violated for a message type"
            queue.pop(matches[0])
        elif e.kind == "TimeoutFired":
            assert e.time == int(e.detail("deadline"))

    residual = sum(len(q) for q in shadows.values())
    assert sent_copies - received == residual
    assert residual == sum(len(a.mailbox) for a in instance.agents)


# ------------------------------------------------- docking oracle (tests)


def oracle_snap(diagram: BlockDiagram, moving: str, drop: tuple[float, float]) -> tuple[float, float]:
    """Brute-force recomputation of the docking contract: enumerate the four
    side slots of every nearby block, keep the collision-free ones, pick the
    minimum center distance with the documented tie-break."""
    blk = diagram.block(moving)
    others = [b for b in diagram.blocks if b.id != moving]
    dropped = Rect(drop[0], drop[1], blk.width, blk.height)
    flow = diagram.flow

    def overlaps(r: Rect, s: Rect) -> bool:
        return r.overlap_area(s) > 0.0

    anchors = [
        o for o in others
        if overlaps(dropped, o.rect) or dropped.gap_to(o.rect) <= flow.snap_threshold + 1e-6
    ]
    if not anchors:
        return drop

    if flow.axis.value == "top-down":
        sides = ("below", "right", "above", "left")
    else:
        sides = ("right", "below", "left", "above")

    best = None
    for anchor in anchors:
        a = anchor.rect
        for rank, side in enumerate(sides):
            if side == "below":
                pos = (a.x, a.bottom + flow.gap)
            elif side == "above":
                pos = (a.x, a.y - blk.height - flow.gap)
            elif side == "right":
                pos = (a.right + flow.gap, a.y)
            else:
                pos = (a.x - blk.width - flow.gap, a.y)
            cand = Rect(pos[0], pos[1], blk.width, blk.height)
            if any(overlaps(cand, o.rect) for o in others):
                continue
            d2 = (cand.center[0] - dropped.center[0]) ** 2 + (cand.center[1] - dropped.center[1]) ** 2
            key = (d2, rank, anchor.id)
            if best is None or key < best[0]:
                best = (key, pos)
    if best is None:
        return None  # all slots occupied; implementation falls back along the flow axis
    return best[1]
