"""Geometric block diagrams: stage, docking, adjacency and arrow routing.

All symbols are axis-aligned rectangles laid out on an auto-growing stage.
Blocks connect either implicitly, by sitting flush against each other along
the flow axis, or explicitly through orthogonal arrows; which of the two is
used never changes the meaning of the diagram.

Diagrams are immutable values; every edit returns a new diagram. A committed
diagram never contains overlapping blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import SameBlockError, UnknownBlockError

__all__ = [
    "Rect",
    "Block",
    "Arrow",
    "FlowAxis",
    "FlowConvention",
    "BlockDiagram",
    "Implicit",
    "Explicit",
    "Connection",
    "snap_dock",
    "place_block",
    "infer_connections",
    "shared_edge_length",
    "route_arrow",
]

_EPS = 1e-6

# Fraction of the content extent added around blocks when the stage grows.
STAGE_MARGIN = 0.10


@dataclass(frozen=True, slots=True)
class Rect:
    x: float
    y: float
    width: float
    height: float

    @property
    def right(self) -> float:
        return self.x + self.width

    @property
    def bottom(self) -> float:
        return self.y + self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.width / 2, self.y + self.height / 2)

    def overlap_area(self, other: "Rect") -> float:
        # penetration below _EPS stage units is float noise from flush
        # placement arithmetic, not geometry: clamp it to zero so "touching"
        # and "overlapping" stay distinct predicates
        w = min(self.right, other.right) - max(self.x, other.x)
        h = min(self.bottom, other.bottom) - max(self.y, other.y)
        if w <= _EPS or h <= _EPS:
            return 0.0
        return w * h

    def gap_to(self, other: "Rect") -> float:
        """Euclidean distance between the two rectangles (0 when touching)."""
        dx = max(other.x - self.right, self.x - other.right, 0.0)
        dy = max(other.y - self.bottom, self.y - other.bottom, 0.0)
        return math.hypot(dx, dy)

    def contains(self, other: "Rect") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and self.right >= other.right
            and self.bottom >= other.bottom
        )


@dataclass(frozen=True, slots=True)
class Block:
    id: str
    kind_ref: str
    x: float = 0.0
    y: float = 0.0
    width: float = 100.0
    height: float = 50.0
    label: str = ""
    properties: tuple[tuple[str, str], ...] = ()

    @property
    def rect(self) -> Rect:
        return Rect(self.x, self.y, self.width, self.height)

    def prop(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.properties:
            if k == key:
                return v
        return default


@dataclass(frozen=True, slots=True)
class Arrow:
    from_block: str
    to_block: str
    label: str = ""
    waypoints: tuple[tuple[float, float], ...] = ()


class FlowAxis(str, Enum):
    TOP_DOWN = "top-down"
    LEFT_RIGHT = "left-right"


@dataclass(frozen=True, slots=True)
class FlowConvention:
    axis: FlowAxis = FlowAxis.TOP_DOWN
    snap_threshold: float = 20.0
    gap: float = 0.0


@dataclass(frozen=True, slots=True)
class BlockDiagram:
    blocks: tuple[Block, ...] = ()
    arrows: tuple[Arrow, ...] = ()
    flow: FlowConvention = FlowConvention()
    stage: Rect = Rect(0.0, 0.0, 0.0, 0.0)

    def block(self, block_id: str) -> Block:
        for b in self.blocks:
            if b.id == block_id:
                return b
        raise UnknownBlockError(f"no block {block_id!r}")

    def has_block(self, block_id: str) -> bool:
        return any(b.id == block_id for b in self.blocks)


@dataclass(frozen=True, slots=True)
class Implicit:
    side: str  # side of the upstream block the downstream block docks on


@dataclass(frozen=True, slots=True)
class Explicit:
    arrow: int  # index into diagram.arrows


@dataclass(frozen=True, slots=True)
class Connection:
    from_block: str
    to_block: str
    origin: Implicit | Explicit

    @property
    def pair(self) -> tuple[str, str]:
        """Directional identity; two connections are semantically equal iff
        their pairs are, regardless of origin."""
        return (self.from_block, self.to_block)


# Docking slot order doubles as the tie-break for equidistant slots.
_SLOT_ORDER = {
    FlowAxis.TOP_DOWN: ("below", "right", "above", "left"),
    FlowAxis.LEFT_RIGHT: ("right", "below", "left", "above"),
}


def _slot_position(anchor: Rect, side: str, width: float, height: float, gap: float) -> tuple[float, float]:
    if side == "below":
        return (anchor.x, anchor.bottom + gap)
    if side == "above":
        return (anchor.x, anchor.y - height - gap)
    if side == "right":
        return (anchor.right + gap, anchor.y)
    if side == "left":
        return (anchor.x - width - gap, anchor.y)
    raise ValueError(side)


def _overlaps_any(rect: Rect, blocks, skip_id: str) -> bool:
    return any(b.id != skip_id and rect.overlap_area(b.rect) > 0.0 for b in blocks)


def _grown_stage(stage: Rect, blocks) -> Rect:
    if not blocks:
        return stage
    min_x = min(b.x for b in blocks)
    min_y = min(b.y for b in blocks)
    max_x = max(b.rect.right for b in blocks)
    max_y = max(b.rect.bottom for b in blocks)
    content = Rect(min_x, min_y, max_x - min_x, max_y - min_y)
    if stage.contains(content):
        return stage
    mx = STAGE_MARGIN * max(content.width, 1.0)
    my = STAGE_MARGIN * max(content.height, 1.0)
    return Rect(content.x - mx, content.y - my, content.width + 2 * mx, content.height + 2 * my)


def snap_dock(diagram: BlockDiagram, moving: str, drop_position: tuple[float, float]) -> BlockDiagram:
    """Commit a drop of an existing block at the given position.

    A drop that overlaps another block, or lands within the flow's snap
    threshold of one, jumps flush against the nearest valid side of that
    block; equidistant slots are broken by the fixed flow-dependent slot
    order; occupied slots are skipped for the next nearest. Drops clear of
    everything land exactly where released. The result never overlaps.
    """
    blk = diagram.block(moving)
    others = tuple(b for b in diagram.blocks if b.id != moving)
    dropped = Rect(drop_position[0], drop_position[1], blk.width, blk.height)
    flow = diagram.flow

    anchors = [
        o for o in others
        if dropped.overlap_area(o.rect) > 0.0 or dropped.gap_to(o.rect) <= flow.snap_threshold + _EPS
    ]

    if not anchors:
        final = (dropped.x, dropped.y)
    else:
        order = _SLOT_ORDER[flow.axis]
        candidates = []
        for anchor in sorted(anchors, key=lambda b: b.id):
            for rank, side in enumerate(order):
                pos = _slot_position(anchor.rect, side, blk.width, blk.height, flow.gap)
                cand = Rect(pos[0], pos[1], blk.width, blk.height)
                if not _overlaps_any(cand, others, moving):
                    cx, cy = cand.center
                    dx, dy = cx - dropped.center[0], cy - dropped.center[1]
                    candidates.append((dx * dx + dy * dy, rank, anchor.id, pos))
        if candidates:
            final = min(candidates)[3]
        else:
            final = _free_position_along_flow(dropped, others, anchors, blk, flow)

    moved = replace(blk, x=final[0], y=final[1])
    blocks = tuple(moved if b.id == moving else b for b in diagram.blocks)
    return replace(diagram, blocks=blocks, stage=_grown_stage(diagram.stage, blocks))


def _free_position_along_flow(dropped: Rect, others, anchors, blk: Block, flow: FlowConvention):
    # All four slots of every nearby block are taken: walk along the flow
    # axis away from the nearest anchor until a free spot appears.
    anchor = min(anchors, key=lambda o: (dropped.gap_to(o.rect), o.id))
    a = anchor.rect
    vertical = flow.axis is FlowAxis.TOP_DOWN
    step = (blk.height if vertical else blk.width) + flow.gap
    delta = (dropped.center[1] - a.center[1]) if vertical else (dropped.center[0] - a.center[0])
    direction = 1 if delta >= 0 else -1
    for k in range(1, len(others) + 2):
        if vertical:
            y = a.bottom + flow.gap + (k - 1) * step if direction > 0 else a.y - flow.gap - blk.height - (k - 1) * step
            pos = (a.x, y)
        else:
            x = a.right + flow.gap + (k - 1) * step if direction > 0 else a.x - flow.gap - blk.width - (k - 1) * step
            pos = (x, a.y)
        cand = Rect(pos[0], pos[1], blk.width, blk.height)
        if not _overlaps_any(cand, others, blk.id):
            return pos
    raise AssertionError("unreachable: finite diagram always has a free slot")


def place_block(diagram: BlockDiagram, block: Block, drop_position: tuple[float, float]) -> BlockDiagram:
    """Add a new block to the diagram and dock it at the drop position."""
    if diagram.has_block(block.id):
        raise ValueError(f"block id {block.id!r} already on stage")
    staged = replace(
        diagram,
        blocks=diagram.blocks + (replace(block, x=drop_position[0], y=drop_position[1]),),
    )
    return snap_dock(staged, block.id, drop_position)


def _axis_overlap(a0: float, a1: float, b0: float, b1: float) -> float:
    return min(a1, b1) - max(a0, b0)


def shared_edge_length(a: Rect, b: Rect, tolerance: float) -> tuple[str, float] | None:
    """Side of `a` that `b` touches (within tolerance) and the contact length.

    Corner contact has length 0 and does not count.
    """
    xo = _axis_overlap(a.x, a.right, b.x, b.right)
    yo = _axis_overlap(a.y, a.bottom, b.y, b.bottom)
    if xo > _EPS and abs(b.y - a.bottom) <= tolerance + _EPS:
        return ("below", xo)
    if xo > _EPS and abs(a.y - b.bottom) <= tolerance + _EPS:
        return ("above", xo)
    if yo > _EPS and abs(b.x - a.right) <= tolerance + _EPS:
        return ("right", yo)
    if yo > _EPS and abs(a.x - b.right) <= tolerance + _EPS:
        return ("left", yo)
    return None


def infer_connections(diagram: BlockDiagram) -> list[Connection]:
    """Derive the diagram's connection set.

    One implicit connection per pair of blocks flush along the flow axis,
    directed by the flow convention (upper to lower for top-down, left to
    right for left-right), plus one explicit connection per arrow. Adjacency
    orthogonal to the flow axis yields nothing here; translation decides
    whether it is ambiguous. The list is deterministic and order-independent
    of the block list.
    """
    cons: list[Connection] = []
    flow = diagram.flow
    blocks = sorted(diagram.blocks, key=lambda b: b.id)
    for i, a in enumerate(blocks):
        for b in blocks[i + 1:]:
            touch = shared_edge_length(a.rect, b.rect, flow.gap)
            if touch is None:
                continue
            side, _length = touch
            if flow.axis is FlowAxis.TOP_DOWN:
                if side == "below":
                    cons.append(Connection(a.id, b.id, Implicit("below")))
                elif side == "above":
                    cons.append(Connection(b.id, a.id, Implicit("below")))
            else:
                if side == "right":
                    cons.append(Connection(a.id, b.id, Implicit("right")))
                elif side == "left":
                    cons.append(Connection(b.id, a.id, Implicit("right")))
    for idx, arrow in enumerate(diagram.arrows):
        cons.append(Connection(arrow.from_block, arrow.to_block, Explicit(idx)))
    return sorted(cons, key=lambda c: (c.from_block, c.to_block, isinstance(c.origin, Explicit),
                                       c.origin.arrow if isinstance(c.origin, Explicit) else -1))


def cross_axis_contacts(diagram: BlockDiagram) -> list[tuple[str, str]]:
    """Block pairs touching orthogonally to the flow axis (sorted pairs)."""
    out = []
    flow = diagram.flow
    blocks = sorted(diagram.blocks, key=lambda b: b.id)
    across = {"left", "right"} if flow.axis is FlowAxis.TOP_DOWN else {"above", "below"}
    for i, a in enumerate(blocks):
        for b in blocks[i + 1:]:
            touch = shared_edge_length(a.rect, b.rect, flow.gap)
            if touch is not None and touch[0] in across:
                out.append((a.id, b.id))
    return out


def route_arrow(diagram: BlockDiagram, from_block: str, to_block: str) -> Arrow:
    """Compute an orthogonal polyline between two block boundaries.

    The route never enters the interior of either endpoint block and uses at
    most five segments: a straight shot when the blocks face each other, a
    three-segment Z otherwise.
    """
    if from_block == to_block:
        raise SameBlockError("arrows connect distinct blocks")
    a = diagram.block(from_block).rect
    b = diagram.block(to_block).rect

    xo = _axis_overlap(a.x, a.right, b.x, b.right)
    yo = _axis_overlap(a.y, a.bottom, b.y, b.bottom)

    if xo > _EPS and yo <= _EPS:
        x = max(a.x, b.x) + xo / 2
        if b.y >= a.bottom:
            pts = ((x, a.bottom), (x, b.y))
        else:
            pts = ((x, a.y), (x, b.bottom))
    elif yo > _EPS and xo <= _EPS:
        y = max(a.y, b.y) + yo / 2
        if b.x >= a.right:
            pts = ((a.right, y), (b.x, y))
        else:
            pts = ((a.x, y), (b.right, y))
    else:
        acx, acy = a.center
        bcx, bcy = b.center
        if abs(bcy - acy) >= abs(bcx - acx):
            # vertical Z through the horizontal corridor between the blocks
            if bcy >= acy:
                y0, y1 = a.bottom, b.y
            else:
                y0, y1 = a.y, b.bottom
            ym = (y0 + y1) / 2
            pts = ((acx, y0), (acx, ym), (bcx, ym), (bcx, y1))
        else:
            if bcx >= acx:
                x0, x1 = a.right, b.x
            else:
                x0, x1 = a.x, b.right
            xm = (x0 + x1) / 2
            pts = ((x0, acy), (xm, acy), (xm, bcy), (x1, bcy))

    return Arrow(from_block=from_block, to_block=to_block, waypoints=pts)
