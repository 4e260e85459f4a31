import itertools

import pytest

from blockbpm.blocks import Arrow, Block, BlockDiagram
from blockbpm.errors import InvalidNotationError, UnknownKindError
from blockbpm.notation import (
    BlockKind,
    GrammarRule,
    NotationDefinition,
    Relation,
    SemanticConstruct,
    conformance_check,
    define_notation,
    design_lints,
    ontological_analysis,
    sbpm_default_notation,
)


def kinds(*ids, colors=None):
    palette = colors or [(10 + 70 * i, 20, 200 - 40 * i) for i in range(len(ids))]
    return [BlockKind(k, color=palette[i]) for i, k in enumerate(ids)]


def constructs(*ids):
    return [SemanticConstruct(c) for c in ids]


def test_define_empty_notation_is_valid():
    n = define_notation()
    assert n.kinds == () and n.rules == ()


def test_define_rejects_contradictory_rules():
    with pytest.raises(InvalidNotationError) as err:
        define_notation(
            kinds("a", "b"),
            [GrammarRule("a", "b", Relation.MAY_FOLLOW), GrammarRule("a", "b", Relation.FORBIDDEN)],
        )
    assert any(v.code == "ContradictoryRule" for v in err.value.violations)


def test_define_rejects_dangling_mapping():
    with pytest.raises(InvalidNotationError) as err:
        define_notation(kinds("a"), [], constructs("c"), [("a", "zzz"), ("ghost", "c")])
    codes = {v.code for v in err.value.violations}
    assert {"DanglingKind", "DanglingConstruct"} <= codes


def test_sbpm_notation_layers_and_bijection():
    n = sbpm_default_notation()
    layer1 = [k for k in n.kinds if k.layer == "interaction"]
    layer2 = [k for k in n.kinds if k.layer == "behavior"]
    assert len(layer1) == 4
    assert len(layer2) == 7
    assert sbpm_default_notation() == n  # pure constructor
    report = ontological_analysis(n)
    assert report.empty


def test_sbpm_notation_has_no_discriminability_or_economy_lints():
    lints = design_lints(sbpm_default_notation())
    codes = {l.code for l in lints}
    assert "LowDiscriminability" not in codes
    assert "GraphicEconomyExceeded" not in codes


def test_ontological_analysis_redundancy_overload_deficit_excess():
    n = define_notation(
        kinds("k1", "k2", "k3"),
        [],
        constructs("c1", "c2", "c3"),
        [("k1", "c1"), ("k2", "c1"), ("k3", "c2"), ("k3", "c3")],
    )
    report = ontological_analysis(n)
    assert report.redundancies == ("c1",)  # two symbols for one construct
    assert report.overloads == ("k3",)     # one symbol, two constructs
    assert report.deficits == ()           # c2,c3 both covered
    assert report.excesses == ()

    n2 = define_notation(kinds("k1"), [], constructs("c1", "c2"), [("k1", "c1")])
    report2 = ontological_analysis(n2)
    assert report2.deficits == ("c2",)
    assert not report2.empty


def test_ontological_analysis_empty_iff_bijection_exhaustive():
    # every mapping over up to 3 kinds x 3 constructs
    for nk, nc in [(0, 0), (1, 1), (2, 2), (2, 3), (3, 2), (3, 3)]:
        kind_ids = [f"k{i}" for i in range(nk)]
        construct_ids = [f"c{i}" for i in range(nc)]
        pairs = list(itertools.product(kind_ids, construct_ids))
        for bits in range(2 ** len(pairs)):
            mapping = tuple(p for i, p in enumerate(pairs) if bits >> i & 1)
            n = NotationDefinition(
                id="x",
                kinds=tuple(BlockKind(k) for k in kind_ids),
                constructs=tuple(SemanticConstruct(c) for c in construct_ids),
                mapping=mapping,
            )
            report = ontological_analysis(n)
            kinds_used = [k for k, _ in mapping]
            constructs_used = [c for _, c in mapping]
            is_bijection = (
                len(mapping) == nk == nc
                and len(set(kinds_used)) == len(mapping)
                and len(set(constructs_used)) == len(mapping)
            )
            assert report.empty == is_bijection, (mapping, report)


def test_design_lints_identical_colors():
    n = define_notation(kinds("a", "b", colors=[(10, 10, 10), (10, 10, 10)]))
    assert any(l.code == "LowDiscriminability" for l in design_lints(n))


def test_design_lints_single_kind_never_low_discriminability():
    n = define_notation(kinds("only"))
    assert not any(l.code == "LowDiscriminability" for l in design_lints(n))
    assert not any(l.code == "GraphicEconomyExceeded" for l in design_lints(n))


def test_design_lints_graphic_economy_threshold():
    palette = [(i * 20, 255 - i * 20, (i * 67) % 256) for i in range(12)]
    n = define_notation(kinds(*[f"k{i}" for i in range(12)], colors=palette))
    assert any(l.code == "GraphicEconomyExceeded" for l in design_lints(n))
    assert not any(
        l.code == "GraphicEconomyExceeded" for l in design_lints(n, economy_threshold=12)
    )


def test_design_lints_unused_variables_reported():
    n = define_notation(kinds("a", "b"))
    lint = next(l for l in design_lints(n) if l.code == "UnusedVisualVariables")
    assert "orientation" in lint.detail and "texture" in lint.detail


# ------------------------------------------------------------ conformance


def _two_block_diagram(kind_a, kind_b, *, arrow=False):
    blocks = (
        Block(id="a", kind_ref=kind_a, x=0, y=0, width=80, height=40),
        Block(id="b", kind_ref=kind_b, x=0, y=40 if not arrow else 300, width=80, height=40),
    )
    arrows = (Arrow("a", "b"),) if arrow else ()
    return BlockDiagram(blocks=blocks, arrows=arrows)


def test_conformance_empty_diagram_clean():
    assert conformance_check(BlockDiagram(), sbpm_default_notation()) == []


def test_conformance_unknown_kind_raises():
    d = _two_block_diagram("subject", "martian")
    with pytest.raises(UnknownKindError):
        conformance_check(d, sbpm_default_notation())


def test_conformance_forbidden_adjacency():
    d = _two_block_diagram("channel", "channel")
    violations = conformance_check(d, sbpm_default_notation())
    assert [v.code for v in violations] == ["ForbiddenAdjacency"]


def test_conformance_must_follow_missing_successor():
    n = define_notation(
        kinds("send", "transition"),
        [GrammarRule("send", "transition", Relation.MUST_FOLLOW)],
    )
    d = _two_block_diagram("send", "send")
    violations = conformance_check(d, n)
    assert sorted(v.code for v in violations) == ["MissingRequiredSuccessor", "MissingRequiredSuccessor"]


def test_conformance_out_degree_cap():
    n = define_notation(
        kinds("s", "t"),
        [GrammarRule("s", "t", Relation.MAY_FOLLOW, max_out_degree=1)],
    )
    d = BlockDiagram(
        blocks=(
            Block(id="hub", kind_ref="s", x=0, y=0, width=80, height=40),
            Block(id="t1", kind_ref="t", x=500, y=0, width=80, height=40),
            Block(id="t2", kind_ref="t", x=500, y=300, width=80, height=40),
        ),
        arrows=(Arrow("hub", "t1"), Arrow("hub", "t2")),
    )
    violations = conformance_check(d, n)
    assert [v.code for v in violations] == ["OutDegreeExceeded"]


def test_conformance_monotone_in_forbidden_rules():
    d = _two_block_diagram("send", "receive")
    base = define_notation(kinds("send", "receive"))
    extended = define_notation(
        kinds("send", "receive"), [GrammarRule("send", "receive", Relation.FORBIDDEN)]
    )
    before = conformance_check(d, base)
    after = conformance_check(d, extended)
    assert set(before) <= set(after)
    assert len(after) == len(before) + 1
