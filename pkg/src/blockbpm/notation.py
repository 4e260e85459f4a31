"""User-defined block vocabularies and notation quality analysis.

A notation pairs a visual vocabulary (block kinds distinguished by visual
variables) with an adjacency grammar and a mapping onto semantic constructs.
Conformance checking enforces the grammar on diagrams while modeling;
ontological analysis and the design lints grade the vocabulary itself:
symbols and constructs should correspond one to one, symbols should be
clearly distinguishable, and the vocabulary should stay small enough to hold
in mind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .blocks import BlockDiagram, infer_connections
from .errors import InvalidNotationError, UnknownKindError
from .model import Violation

__all__ = [
    "Relation",
    "BlockKind",
    "GrammarRule",
    "SemanticConstruct",
    "NotationDefinition",
    "AnomalyReport",
    "Lint",
    "define_notation",
    "sbpm_default_notation",
    "conformance_check",
    "ontological_analysis",
    "design_lints",
    "COLOR_DISTANCE_THRESHOLD",
    "GRAPHIC_ECONOMY_THRESHOLD",
]

# Minimum Euclidean RGB distance below which two kinds stop being easy to
# tell apart, and the largest symbol count per layer considered manageable.
COLOR_DISTANCE_THRESHOLD = 60.0
GRAPHIC_ECONOMY_THRESHOLD = 9

SIZE_CLASSES = ("S", "M", "L")
ORIENTATIONS = (0, 90)


class Relation(str, Enum):
    MAY_FOLLOW = "may-follow"
    MUST_FOLLOW = "must-follow"
    FORBIDDEN = "forbidden"


@dataclass(frozen=True, slots=True)
class BlockKind:
    """A vocabulary entry. Shape is always a rectangle; that is the block
    modeling rule, so it is a constant rather than a field."""

    id: str
    color: tuple[int, int, int] = (128, 128, 128)
    brightness: int = 50
    texture: str | None = None
    size_class: str = "M"
    orientation: int = 0
    layer: str = ""

    shape = "rectangle"


@dataclass(frozen=True, slots=True)
class GrammarRule:
    from_kind: str
    to_kind: str
    relation: Relation = Relation.MAY_FOLLOW
    max_out_degree: int | None = None


@dataclass(frozen=True, slots=True)
class SemanticConstruct:
    id: str
    name: str = ""
    description: str = ""


@dataclass(frozen=True, slots=True)
class NotationDefinition:
    id: str
    kinds: tuple[BlockKind, ...] = ()
    rules: tuple[GrammarRule, ...] = ()
    constructs: tuple[SemanticConstruct, ...] = ()
    mapping: tuple[tuple[str, str], ...] = ()  # (kind id, construct id)

    def kind(self, kind_id: str) -> BlockKind:
        for k in self.kinds:
            if k.id == kind_id:
                return k
        raise UnknownKindError(f"no kind {kind_id!r}")

    def has_kind(self, kind_id: str) -> bool:
        return any(k.id == kind_id for k in self.kinds)

    def construct_of(self, kind_id: str) -> str | None:
        for k, c in self.mapping:
            if k == kind_id:
                return c
        return None


@dataclass(frozen=True, slots=True)
class AnomalyReport:
    """Partition of mapping defects.

    deficits/redundancies list construct ids (no symbol / more than one);
    overloads/excesses list kind ids (more than one construct / none).
    """

    deficits: tuple[str, ...] = ()
    redundancies: tuple[str, ...] = ()
    overloads: tuple[str, ...] = ()
    excesses: tuple[str, ...] = ()

    @property
    def empty(self) -> bool:
        return not (self.deficits or self.redundancies or self.overloads or self.excesses)


@dataclass(frozen=True, slots=True, order=True)
class Lint:
    code: str
    detail: str = ""


def define_notation(kinds=(), rules=(), constructs=(), mapping=(), *, notation_id: str = "") -> NotationDefinition:
    """Assemble a notation, or raise InvalidNotationError with every defect."""
    kinds = tuple(kinds)
    rules = tuple(rules)
    constructs = tuple(constructs)
    mapping = tuple(tuple(m) for m in mapping)
    violations: list[Violation] = []

    kind_ids: set[str] = set()
    for k in kinds:
        if not k.id or k.id in kind_ids:
            violations.append(Violation("", k.id, "DuplicateId", "kind id empty or reused"))
        kind_ids.add(k.id)
        if not all(0 <= c <= 255 for c in k.color) or len(k.color) != 3:
            violations.append(Violation("", k.id, "BadKind", f"color {k.color} outside RGB range"))
        if not 0 <= k.brightness <= 100:
            violations.append(Violation("", k.id, "BadKind", f"brightness {k.brightness} outside 0-100"))
        if k.size_class not in SIZE_CLASSES:
            violations.append(Violation("", k.id, "BadKind", f"size class {k.size_class!r} not in {SIZE_CLASSES}"))
        if k.orientation not in ORIENTATIONS:
            violations.append(Violation("", k.id, "BadKind", f"orientation {k.orientation} not in {ORIENTATIONS}"))

    construct_ids: set[str] = set()
    for c in constructs:
        if not c.id or c.id in construct_ids:
            violations.append(Violation("", c.id, "DuplicateId", "construct id empty or reused"))
        construct_ids.add(c.id)

    for kind_id, construct_id in mapping:
        if kind_id not in kind_ids:
            violations.append(Violation("", kind_id, "DanglingKind", "mapping names an unknown kind"))
        if construct_id not in construct_ids:
            violations.append(Violation("", construct_id, "DanglingConstruct", "mapping names an unknown construct"))

    relations: dict[tuple[str, str], set[Relation]] = {}
    for r in rules:
        for endpoint in (r.from_kind, r.to_kind):
            if endpoint not in kind_ids:
                violations.append(Violation("", endpoint, "DanglingKind", "rule names an unknown kind"))
        relations.setdefault((r.from_kind, r.to_kind), set()).add(r.relation)
        if r.max_out_degree is not None and r.max_out_degree < 1:
            violations.append(Violation("", f"{r.from_kind}->{r.to_kind}", "BadRule", "out-degree cap below 1"))
    for (f, t), rels in sorted(relations.items()):
        if Relation.FORBIDDEN in rels and (Relation.MAY_FOLLOW in rels or Relation.MUST_FOLLOW in rels):
            violations.append(
                Violation("", f"{f}->{t}", "ContradictoryRule", "pair both forbidden and allowed")
            )

    if violations:
        raise InvalidNotationError(sorted(violations))
    return NotationDefinition(id=notation_id, kinds=kinds, rules=rules, constructs=constructs, mapping=mapping)


# Construct vocabulary the diagram translation understands. Any notation that
# maps kinds onto these construct ids can drive the translator.
CONSTRUCT_SUBJECT = "subject"
CONSTRUCT_MULTI_SUBJECT = "multi-subject"
CONSTRUCT_EXTERNAL_SUBJECT = "external-subject"
CONSTRUCT_CHANNEL = "channel"
CONSTRUCT_SEND = "send"
CONSTRUCT_RECEIVE = "receive"
CONSTRUCT_ACTION = "action"
CONSTRUCT_START_FLAG = "start-flag"
CONSTRUCT_END_FLAG = "end-flag"
CONSTRUCT_TRANSITION = "transition"
CONSTRUCT_TIMEOUT_TRANSITION = "timeout-transition"

INTERACTION_CONSTRUCTS = frozenset(
    {CONSTRUCT_SUBJECT, CONSTRUCT_MULTI_SUBJECT, CONSTRUCT_EXTERNAL_SUBJECT, CONSTRUCT_CHANNEL}
)
BEHAVIOR_CONSTRUCTS = frozenset(
    {
        CONSTRUCT_SEND,
        CONSTRUCT_RECEIVE,
        CONSTRUCT_ACTION,
        CONSTRUCT_START_FLAG,
        CONSTRUCT_END_FLAG,
        CONSTRUCT_TRANSITION,
        CONSTRUCT_TIMEOUT_TRANSITION,
    }
)


def sbpm_default_notation() -> NotationDefinition:
    """The bundled two-layer subject-oriented notation.

    Layer "interaction": subject, multi-subject, external-subject and channel
    kinds. Layer "behavior": send, receive, action, the start and end flags,
    and the two transition connectors. The kind-to-construct mapping is a
    bijection, so its anomaly report is empty by construction.
    """
    k = BlockKind
    kinds = (
        k("subject", color=(66, 133, 244), brightness=55, size_class="L", layer="interaction"),
        k("multi-subject", color=(255, 152, 0), brightness=60, size_class="L", layer="interaction"),
        k("external-subject", color=(158, 158, 158), brightness=62, size_class="L", layer="interaction"),
        k("channel", color=(255, 235, 59), brightness=90, size_class="M", layer="interaction"),
        k("send", color=(76, 175, 80), brightness=55, size_class="M", layer="behavior"),
        k("receive", color=(244, 67, 54), brightness=50, size_class="M", layer="behavior"),
        k("action", color=(63, 81, 181), brightness=45, size_class="M", layer="behavior"),
        k("start-flag", color=(255, 255, 255), brightness=100, size_class="S", layer="behavior"),
        k("end-flag", color=(0, 0, 0), brightness=0, size_class="S", layer="behavior"),
        k("transition", color=(121, 85, 72), brightness=40, size_class="S", layer="behavior"),
        k("timeout-transition", color=(0, 188, 212), brightness=65, size_class="S", layer="behavior"),
    )
    constructs = tuple(
        SemanticConstruct(cid, name=cid.replace("-", " ").title())
        for cid in (
            CONSTRUCT_SUBJECT,
            CONSTRUCT_MULTI_SUBJECT,
            CONSTRUCT_EXTERNAL_SUBJECT,
            CONSTRUCT_CHANNEL,
            CONSTRUCT_SEND,
            CONSTRUCT_RECEIVE,
            CONSTRUCT_ACTION,
            CONSTRUCT_START_FLAG,
            CONSTRUCT_END_FLAG,
            CONSTRUCT_TRANSITION,
            CONSTRUCT_TIMEOUT_TRANSITION,
        )
    )
    mapping = tuple((kind.id, kind.id) for kind in kinds)
    forbid = [
        GrammarRule("channel", "channel", Relation.FORBIDDEN),
        GrammarRule("start-flag", "start-flag", Relation.FORBIDDEN),
        GrammarRule("start-flag", "end-flag", Relation.FORBIDDEN),
        GrammarRule("end-flag", "start-flag", Relation.FORBIDDEN),
        GrammarRule("end-flag", "end-flag", Relation.FORBIDDEN),
        GrammarRule("transition", "transition", Relation.FORBIDDEN),
        GrammarRule("transition", "timeout-transition", Relation.FORBIDDEN),
        GrammarRule("timeout-transition", "transition", Relation.FORBIDDEN),
        GrammarRule("timeout-transition", "timeout-transition", Relation.FORBIDDEN),
        GrammarRule("send", "timeout-transition", Relation.FORBIDDEN),
        GrammarRule("action", "timeout-transition", Relation.FORBIDDEN),
    ]
    return define_notation(kinds, forbid, constructs, mapping, notation_id="sbpm")


def conformance_check(diagram: BlockDiagram, notation: NotationDefinition) -> list[Violation]:
    """Enforce the notation's adjacency grammar on a diagram.

    One violation per connection hitting a forbidden rule, per block missing
    a required successor, and per out-degree cap exceeded; sorted for
    determinism. Raises UnknownKindError when a block references a kind the
    notation does not define.
    """
    for b in diagram.blocks:
        if not notation.has_kind(b.kind_ref):
            raise UnknownKindError(f"block {b.id!r} references unknown kind {b.kind_ref!r}")

    kind_of = {b.id: b.kind_ref for b in diagram.blocks}
    cons = infer_connections(diagram)
    out: list[Violation] = []

    forbidden = {
        (r.from_kind, r.to_kind) for r in notation.rules if r.relation is Relation.FORBIDDEN
    }
    for c in cons:
        pair = (kind_of[c.from_block], kind_of[c.to_block])
        if pair in forbidden:
            out.append(
                Violation("", c.from_block, "ForbiddenAdjacency", f"{pair[0]} may not precede {pair[1]} ({c.to_block})")
            )

    successors: dict[str, list[str]] = {}
    for c in cons:
        successors.setdefault(c.from_block, []).append(c.to_block)

    for rule in notation.rules:
        if rule.relation is Relation.MUST_FOLLOW:
            for b in diagram.blocks:
                if b.kind_ref != rule.from_kind:
                    continue
                if not any(kind_of[s] == rule.to_kind for s in successors.get(b.id, [])):
                    out.append(
                        Violation("", b.id, "MissingRequiredSuccessor", f"needs a {rule.to_kind} successor")
                    )
        if rule.max_out_degree is not None:
            for b in diagram.blocks:
                if b.kind_ref != rule.from_kind:
                    continue
                n = sum(1 for s in successors.get(b.id, []) if kind_of[s] == rule.to_kind)
                if n > rule.max_out_degree:
                    out.append(
                        Violation(
                            "", b.id, "OutDegreeExceeded",
                            f"{n} successors of kind {rule.to_kind}, cap {rule.max_out_degree}",
                        )
                    )
    return sorted(out)


def ontological_analysis(notation: NotationDefinition) -> AnomalyReport:
    """Classify mapping defects into the four anomaly classes.

    The report is all-empty exactly when the mapping is a bijection between
    kinds and constructs.
    """
    kind_to: dict[str, set[str]] = {k.id: set() for k in notation.kinds}
    construct_to: dict[str, set[str]] = {c.id: set() for c in notation.constructs}
    for kind_id, construct_id in notation.mapping:
        kind_to.setdefault(kind_id, set()).add(construct_id)
        construct_to.setdefault(construct_id, set()).add(kind_id)
    return AnomalyReport(
        deficits=tuple(sorted(c for c, ks in construct_to.items() if not ks)),
        redundancies=tuple(sorted(c for c, ks in construct_to.items() if len(ks) > 1)),
        overloads=tuple(sorted(k for k, cs in kind_to.items() if len(cs) > 1)),
        excesses=tuple(sorted(k for k, cs in kind_to.items() if not cs)),
    )


def _color_distance(a: tuple[int, int, int], b: tuple[int, int, int]) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def design_lints(
    notation: NotationDefinition,
    *,
    color_threshold: float = COLOR_DISTANCE_THRESHOLD,
    economy_threshold: int = GRAPHIC_ECONOMY_THRESHOLD,
) -> list[Lint]:
    """Automated checks against the notation-design principles.

    Reports symbol pairs whose colors fall under the perceptual distance
    threshold, layers whose symbol count exceeds the graphic-economy
    threshold, and visual variables the vocabulary leaves unused.
    """
    lints: list[Lint] = []
    kinds = sorted(notation.kinds, key=lambda k: k.id)

    for i, a in enumerate(kinds):
        for b in kinds[i + 1:]:
            d = _color_distance(a.color, b.color)
            if d < color_threshold:
                lints.append(
                    Lint("LowDiscriminability", f"{a.id} and {b.id} colors only {d:.1f} apart (threshold {color_threshold:g})")
                )

    by_layer: dict[str, int] = {}
    for k in kinds:
        by_layer[k.layer] = by_layer.get(k.layer, 0) + 1
    for layer, count in sorted(by_layer.items()):
        if count > economy_threshold:
            label = layer or "notation"
            lints.append(Lint("GraphicEconomyExceeded", f"{label} has {count} kinds, threshold {economy_threshold}"))

    if len(kinds) >= 2:
        unused = []
        for variable, get in (
            ("color", lambda k: k.color),
            ("brightness", lambda k: k.brightness),
            ("texture", lambda k: k.texture),
            ("size", lambda k: k.size_class),
            ("orientation", lambda k: k.orientation),
        ):
            if len({get(k) for k in kinds}) == 1:
                unused.append(variable)
        if unused:
            lints.append(Lint("UnusedVisualVariables", f"{len(unused)} unused: {', '.join(unused)}"))

    return sorted(lints)
