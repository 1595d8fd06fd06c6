"""Relation semantics, uniqueness guarantees, and text emission for analogies."""

import pytest

from s2h_forge.core import Difficulty, TaskKind
from s2h_forge.analogy import (
    DEFAULT_HELDOUT,
    DOMAIN_VALUES,
    VALID_PAIRS,
    AnalogyPuzzle,
    Domain,
    Line,
    Panel,
    Relation,
    RelationError,
    analogy_instruction,
    emit_analogy_cot,
    emit_analogy_text,
    gen_puzzle,
    load_heldout,
    make_panel,
    panel_text,
    patterns_of,
    relation_apply,
    verify_puzzle,
    Shape,
)
from s2h_forge.core import rng_for


# ---------------------------------------------------------------------------
# relation semantics


def test_or_is_union():
    assert relation_apply(Relation.OR, Domain.SHAPE_COLOR, frozenset({0, 90}),
                          frozenset({90, 135})) == {0, 90, 135}


def test_and_is_intersection_and_rejects_disjoint():
    assert relation_apply(Relation.AND, Domain.SHAPE_COLOR, frozenset({0, 90}),
                          frozenset({90, 135})) == {90}
    with pytest.raises(RelationError):
        relation_apply(Relation.AND, Domain.SHAPE_COLOR, frozenset({0}), frozenset({90}))


def test_xor_is_symmetric_difference_and_rejects_equal():
    assert relation_apply(Relation.XOR, Domain.SHAPE_COLOR, frozenset({0, 90}),
                          frozenset({90, 135})) == {0, 135}
    with pytest.raises(RelationError):
        relation_apply(Relation.XOR, Domain.SHAPE_COLOR, frozenset({0}), frozenset({0}))


def test_progression_steps_along_the_domain_order():
    # sizes (20, 27, 34, 41): 20 -> 27 continues to 34
    assert relation_apply(Relation.PROGRESSION, Domain.SHAPE_SIZE,
                          frozenset({20}), frozenset({27})) == {34}
    assert relation_apply(Relation.PROGRESSION, Domain.SHAPE_QUANTITY,
                          frozenset({5}), frozenset({3})) == {1}


def test_progression_error_cases():
    with pytest.raises(RelationError):  # unordered domain
        relation_apply(Relation.PROGRESSION, Domain.SHAPE_TYPE,
                       frozenset({"circle"}), frozenset({"triangle"}))
    with pytest.raises(RelationError):  # non-singleton
        relation_apply(Relation.PROGRESSION, Domain.SHAPE_SIZE,
                       frozenset({20, 27}), frozenset({34}))
    with pytest.raises(RelationError):  # walks off the end
        relation_apply(Relation.PROGRESSION, Domain.SHAPE_SIZE,
                       frozenset({27}), frozenset({41}))


def test_empty_operands_rejected():
    with pytest.raises(RelationError):
        relation_apply(Relation.OR, Domain.SHAPE_COLOR, frozenset(), frozenset({0}))


# ---------------------------------------------------------------------------
# panels


def test_panel_value_sets():
    p = Panel(
        shapes=(
            Shape("circle", 0, 20, (0, 0)),
            Shape("circle", 90, 27, (0, 1)),
            Shape("triangle", 0, 20, (2, 2)),
        ),
        lines=(Line("horizontal line", 135),),
    )
    assert p.value_set(Domain.SHAPE_TYPE) == {"circle", "triangle"}
    assert p.value_set(Domain.SHAPE_COLOR) == {0, 90}
    assert p.value_set(Domain.SHAPE_QUANTITY) == {1, 2}
    assert p.value_set(Domain.SHAPE_POSITION) == {(0, 0), (0, 1), (2, 2)}
    assert p.value_set(Domain.LINE_TYPE) == {"horizontal line"}
    assert p.value_set(Domain.LINE_COLOR) == {135}


def test_empty_panel_quantity_is_zero():
    assert Panel((), ()).value_set(Domain.SHAPE_QUANTITY) == {0}


def test_panels_reject_stacked_shapes():
    with pytest.raises(ValueError):
        Panel(
            shapes=(Shape("circle", 0, 20, (1, 1)), Shape("circle", 0, 20, (1, 1))),
            lines=(),
        )


@pytest.mark.parametrize("domain", list(Domain))
def test_make_panel_hits_the_requested_value_set(domain):
    rng = rng_for(0, "test", domain.value)
    values = frozenset({DOMAIN_VALUES[domain][0], DOMAIN_VALUES[domain][1]})
    if domain is Domain.SHAPE_QUANTITY:
        values = frozenset({1, 2})
    for _ in range(20):
        panel = make_panel(rng, domain, values)
        assert panel.value_set(domain) == values


# ---------------------------------------------------------------------------
# text emission worked examples


WORKED_PANEL = Panel(
    shapes=(
        Shape("circle", 45, 42, (0, 0)),
        Shape("rectangle", 0, 21, (0, 2)),
        Shape("rectangle", 90, 21, (2, 0)),
    ),
    lines=(),
)


def test_lossless_panel_codes():
    assert panel_text(WORKED_PANEL, "lossless") == "CIR-45-42-TL;RECT-0-21-TR;RECT-90-21-BL"


def test_lossy_panel_includes_quantity_line():
    assert "quantity: 1,2" in panel_text(WORKED_PANEL, "lossy").splitlines()


def test_empty_panel_is_coded_empty():
    assert panel_text(Panel((), ()), "lossless") == "EMPTY"


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        panel_text(WORKED_PANEL, "blurry")


# ---------------------------------------------------------------------------
# puzzle generation

SAMPLE = 40


@pytest.mark.parametrize(
    "task,difficulty",
    [
        (TaskKind.VISUAL_ANALOGY, Difficulty.SIMPLE),
        (TaskKind.VISUAL_ANALOGY, Difficulty.HARD),
        (TaskKind.PATTERN_HELDOUT_VISUAL_ANALOGY, Difficulty.SIMPLE),
        (TaskKind.PATTERN_HELDOUT_VISUAL_ANALOGY, Difficulty.HARD),
    ],
)
def test_generated_puzzles_verify(task, difficulty):
    for seed in range(SAMPLE):
        p = gen_puzzle(task, difficulty, seed)
        report = verify_puzzle(p)
        assert report.passed, (seed, report)
        # option scan: the correct option realizes the query pattern, the
        # confounders realize patterns with a different relation
        for i in range(4):
            scan = patterns_of(p.query[0], p.query[1], p.options[i])
            assert len(scan) == 1
            (pair,) = scan
            if i == p.answer_index:
                assert pair == p.latent_query
            else:
                assert pair[1] is not p.latent_query[1]


def test_heldout_membership_split():
    for seed in range(SAMPLE):
        simple = gen_puzzle(TaskKind.PATTERN_HELDOUT_VISUAL_ANALOGY, Difficulty.SIMPLE, seed)
        assert simple.latent_query not in DEFAULT_HELDOUT
        hard = gen_puzzle(TaskKind.PATTERN_HELDOUT_VISUAL_ANALOGY, Difficulty.HARD, seed)
        assert hard.latent_query in DEFAULT_HELDOUT
        assert hard.latent1 == hard.latent2 == hard.latent_query


def test_standard_hard_uses_distinct_heldout_domains():
    for seed in range(SAMPLE):
        p = gen_puzzle(TaskKind.VISUAL_ANALOGY, Difficulty.HARD, seed)
        assert p.latent1[1] is p.latent2[1] is p.latent_query[1]
        assert p.latent1[0] is not p.latent2[0]
        assert {p.latent1, p.latent2, p.latent_query} <= DEFAULT_HELDOUT


def test_generation_is_deterministic():
    a = gen_puzzle(TaskKind.VISUAL_ANALOGY, Difficulty.SIMPLE, 5)
    b = gen_puzzle(TaskKind.VISUAL_ANALOGY, Difficulty.SIMPLE, 5)
    assert a == b


def test_puzzle_json_round_trip():
    p = gen_puzzle(TaskKind.VISUAL_ANALOGY, Difficulty.SIMPLE, 1)
    assert AnalogyPuzzle.from_json(p.to_json()) == p


def test_valid_pairs_table():
    assert len(VALID_PAIRS) == 26  # 7 domains x 4 relations, minus Progression
    # on the two unordered domains
    assert (Domain.SHAPE_TYPE, Relation.PROGRESSION) not in VALID_PAIRS
    assert (Domain.LINE_TYPE, Relation.PROGRESSION) not in VALID_PAIRS


def test_load_heldout_round_trip(tmp_path):
    path = tmp_path / "heldout.json"
    path.write_text('[["shape size", "XOR"], ["line color", "OR"]]')
    held = load_heldout(path)
    assert held == {
        (Domain.SHAPE_SIZE, Relation.XOR),
        (Domain.LINE_COLOR, Relation.OR),
    }


def test_emitted_text_and_cot_are_consistent():
    p = gen_puzzle(TaskKind.VISUAL_ANALOGY, Difficulty.SIMPLE, 8)
    text = emit_analogy_text(p)
    assert text.count("Option") == 4
    assert "Example 1, panel 1:" in text
    cot, answer = emit_analogy_cot(p)
    assert f"The answer is option {p.answer_index + 1}." in answer
    d, r = p.latent_query
    assert f"({d.value}, {r.value})" in answer
    assert "Query:" in cot
    assert analogy_instruction(p)
