"""Oracle soundness, mutation sensitivity, and failure-mode metrics."""

import dataclasses

import pytest

from s2h_forge.core import Difficulty, TaskKind
from s2h_forge.analogy import gen_puzzle, emit_analogy_cot
from s2h_forge.evaluator import (
    analogy_cot_audit,
    conversion_accuracy,
    eval_analogy,
    eval_grid,
    eval_table,
    first_error_index,
    grid_subtask_metrics,
    table_failure_metrics,
)
from s2h_forge.gridgen import gen_grid_instance, emit_grid_cot
from s2h_forge.mixer import FORM_IMAGE_VIA_TEXT, bundle_to_record, generate_bundle
from s2h_forge.tablegen import (
    NUMBER_WORDS,
    TableInstance,
    emit_table_answer,
    emit_table_cot,
    gen_consecutive_instance,
    gen_table_readout_instance,
)


def gold_table_text(inst):
    return emit_table_cot(inst) + "\n" + emit_table_answer(inst)


# ---------------------------------------------------------------------------
# table readout


def test_gold_table_outputs_are_correct():
    for seed in range(30):
        for gen in (gen_consecutive_instance, gen_table_readout_instance):
            inst = gen(Difficulty.SIMPLE, seed)
            verdict = eval_table(gold_table_text(inst), inst)
            assert verdict.correct
            assert verdict.details["cot_ok"] and verdict.details["answer_ok"]


def test_single_value_mutation_flips_the_verdict():
    inst = gen_table_readout_instance(Difficulty.SIMPLE, 1)
    text = gold_table_text(inst)
    word = NUMBER_WORDS[inst.path_values()[0]]
    other = NUMBER_WORDS[(inst.path_values()[0] + 1) % 10]
    mutated = text.replace(f"value {word}.", f"value {other}.", 1)
    mutated = mutated.replace(
        "The numbers are " + word, "The numbers are " + other, 1
    )
    assert mutated != text
    assert not eval_table(mutated, inst).correct


def test_readout_best_of_two_channels():
    inst = gen_table_readout_instance(Difficulty.SIMPLE, 2)
    cot_only = emit_table_cot(inst) + "\nThe answer is garbled."
    verdict = eval_table(cot_only, inst)
    assert verdict.correct and verdict.channel == "cot"
    answer_only = "no steps here\n" + emit_table_answer(inst)
    verdict = eval_table(answer_only, inst)
    assert verdict.correct and verdict.channel == "answer"


def test_consecutive_is_scored_on_the_cot_channel_only():
    inst = gen_consecutive_instance(Difficulty.SIMPLE, 3)
    answer_only = emit_table_answer(inst)
    assert not eval_table(answer_only, inst).correct


def test_first_error_index_prefix_rule():
    inst = gen_table_readout_instance(Difficulty.SIMPLE, 4)
    assert first_error_index(gold_table_text(inst), inst) == len(inst.path)
    cot = emit_table_cot(inst).splitlines()
    word = NUMBER_WORDS[inst.path_values()[2]]
    other = NUMBER_WORDS[(inst.path_values()[2] + 1) % 10]
    cot[2] = cot[2].replace(f"value {word}.", f"value {other}.")
    assert first_error_index("\n".join(cot), inst) == 2


def make_fixture_instance():
    """A 5x6 table whose row-major path covers 29 of the 30 cells."""
    n_rows, n_cols = 5, 6
    values = tuple(
        tuple((r * n_cols + c) % 10 for c in range(n_cols)) for r in range(n_rows)
    )
    path = tuple((k // n_cols + 1, k % n_cols + 1) for k in range(29))
    return TableInstance(
        task=TaskKind.TABLE_READOUT,
        difficulty=Difficulty.HARD,
        n_rows=n_rows,
        n_cols=n_cols,
        row_names=("AMBER", "BIRCH", "CEDAR", "DELTA", "EMBER"),
        col_names=("FLINT", "GROVE", "HAZEL", "IVORY", "JASPER", "KNOLL"),
        values=values,
        path=path,
        segments=5,
        patterns=("sinusoidal",),
    )


def test_failure_metric_fixture_13_listed_12_correct_29_highlighted():
    inst = make_fixture_instance()
    lines = emit_table_cot(inst).splitlines()[:12]  # 12 correct steps
    # a 13th listed step naming a cell that is not on the path
    lines.append(
        "Step 13: row 5, column 6, row name EMBER, column name KNOLL, "
        f"value {NUMBER_WORDS[inst.values[4][5]]}."
    )
    metrics = table_failure_metrics([("\n".join(lines), inst)])
    assert metrics["listed"] == 13
    assert metrics["correctly_listed"] == 12
    assert metrics["highlighted"] == 29
    assert metrics["precision"] == 12 / 13
    assert metrics["recall"] == 12 / 29


def test_gold_batch_metrics_are_perfect():
    pairs = []
    for seed in range(10):
        inst = gen_table_readout_instance(Difficulty.SIMPLE, seed)
        pairs.append((gold_table_text(inst), inst))
    metrics = table_failure_metrics(pairs)
    assert metrics["precision"] == 1.0 and metrics["recall"] == 1.0
    assert metrics["frac_early_error"] == 0.0


def test_early_error_fraction():
    inst = gen_table_readout_instance(Difficulty.SIMPLE, 6)
    bad = "Step 1: row 1, column 1, row name AMBER, column name BIRCH, value ZERO."
    metrics = table_failure_metrics([(bad, inst)], early_threshold=12)
    assert metrics["frac_early_error"] == 1.0
    assert metrics["mean_first_error_index"] <= 1


# ---------------------------------------------------------------------------
# grid navigation


def gold_grid_text(inst, trace):
    cot, answer = emit_grid_cot(inst, trace)
    return cot + "\n" + answer


def test_gold_grid_outputs_are_correct():
    for seed in range(30):
        inst, trace = gen_grid_instance(Difficulty.SIMPLE, seed)
        assert eval_grid(gold_grid_text(inst, trace), inst).correct


def test_single_direction_mutation_flips_the_verdict():
    inst, trace = gen_grid_instance(Difficulty.SIMPLE, 1)
    actions = list(trace.final_actions)
    swapped = {"right": "left", "left": "right", "up": "down", "down": "up"}
    actions[0] = swapped[actions[0]]
    mutated = "Final answer: " + ", ".join(actions) + "."
    assert not eval_grid(mutated, inst).correct


def test_unparseable_direction_reports_parse_error():
    inst, _ = gen_grid_instance(Difficulty.SIMPLE, 2)
    verdict = eval_grid("Final answer: north, south.", inst)
    assert not verdict.correct and verdict.details["parse_error"]


def test_gold_grid_subtask_metrics_are_perfect():
    pairs = []
    for seed in range(10):
        inst, trace = gen_grid_instance(Difficulty.SIMPLE, seed)
        pairs.append((gold_grid_text(inst, trace), inst))
    metrics = grid_subtask_metrics(pairs)
    assert metrics == {
        "src_dst_parse_acc": 1.0,
        "reaches_destination_frac": 1.0,
        "objects_collected_frac": 1.0,
        "obstacles_passed_mean": 0.0,
    }


def test_partial_credit_metrics():
    inst, trace = gen_grid_instance(Difficulty.SIMPLE, 3)
    metrics = grid_subtask_metrics([("Final answer: up.", inst)])
    assert metrics["src_dst_parse_acc"] == 0.0
    assert metrics["reaches_destination_frac"] == 0.0


# ---------------------------------------------------------------------------
# conversion accuracy


def test_conversion_accuracy_on_gold_record():
    bundle = generate_bundle(TaskKind.TABLE_READOUT, Difficulty.SIMPLE, 5)
    rec = bundle_to_record(bundle, FORM_IMAGE_VIA_TEXT)
    assert conversion_accuracy(rec.target_text(), bundle.text_input)


def test_conversion_accuracy_ignores_whitespace_but_not_content():
    bundle = generate_bundle(TaskKind.TABLE_READOUT, Difficulty.SIMPLE, 5)
    rec = bundle_to_record(bundle, FORM_IMAGE_VIA_TEXT)
    squashed = " ".join(rec.target_text().split())
    assert conversion_accuracy(squashed, bundle.text_input)
    assert not conversion_accuracy(rec.target_text(), bundle.text_input + " X")
    assert not conversion_accuracy("no conversion here", bundle.text_input)


# ---------------------------------------------------------------------------
# visual analogy


def gold_analogy_text(puzzle):
    cot, answer = emit_analogy_cot(puzzle)
    return cot + "\n" + answer


def test_gold_analogy_outputs_are_correct():
    for seed in range(20):
        p = gen_puzzle(TaskKind.VISUAL_ANALOGY, Difficulty.SIMPLE, seed)
        verdict = eval_analogy(gold_analogy_text(p), p)
        assert verdict.correct and verdict.details["lenient"]


def test_correct_option_with_wrong_pattern_is_lenient_only():
    p = gen_puzzle(TaskKind.VISUAL_ANALOGY, Difficulty.SIMPLE, 3)
    text = f"The answer is option {p.answer_index + 1}."
    verdict = eval_analogy(text, p)
    assert verdict.details["lenient"] and not verdict.correct


def test_wrong_option_fails_both():
    p = gen_puzzle(TaskKind.VISUAL_ANALOGY, Difficulty.SIMPLE, 4)
    wrong = (p.answer_index + 1) % 4 + 1
    verdict = eval_analogy(f"The answer is option {wrong}.", p)
    assert not verdict.details["lenient"] and not verdict.correct


def test_gold_audit_has_all_flags_clean():
    p = gen_puzzle(TaskKind.VISUAL_ANALOGY, Difficulty.SIMPLE, 6)
    audit = analogy_cot_audit(gold_analogy_text(p), p)
    assert not any(dataclasses.asdict(audit).values())


def test_audit_flags_mutated_size_line():
    p = gen_puzzle(TaskKind.VISUAL_ANALOGY, Difficulty.SIMPLE, 7)
    text = gold_analogy_text(p)
    lines = text.splitlines()
    idx = next(i for i, l in enumerate(lines) if l.startswith("shape size:"))
    lines[idx] = "shape size: {999} | {999} -> no consistent relation"
    audit = analogy_cot_audit("\n".join(lines), p)
    assert audit.example_size_values
    assert audit.cot_match  # the CoT no longer matches verbatim
    assert not audit.example_type_values


def test_audit_flags_missing_option_blocks():
    p = gen_puzzle(TaskKind.VISUAL_ANALOGY, Difficulty.SIMPLE, 9)
    audit = analogy_cot_audit("nothing useful", p)
    assert audit.option_solution and audit.exact_match and audit.cot_match
