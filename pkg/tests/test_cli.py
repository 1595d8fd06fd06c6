"""Subcommand contracts, file outputs, and end-to-end determinism."""

import hashlib
import json

import pytest

from s2h_forge.cli import build_parser, main
from s2h_forge.core import read_jsonl


def digest_tree(root):
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.blake2b(
                path.read_bytes(), digest_size=16
            ).hexdigest()
    return out


def test_help_contract():
    parser = build_parser()
    help_text = parser.format_help()
    for command in ("gen", "render", "mix", "eval", "grad", "stats"):
        assert command in help_text
    with pytest.raises(SystemExit) as exc:
        parser.parse_args(["gen", "--no-such-flag"])
    assert exc.value.code == 2


def test_missing_subcommand_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    capsys.readouterr()


def test_gen_writes_sorted_records_and_images(tmp_path, capsys):
    out = tmp_path / "gen"
    assert main([
        "gen", "--task", "table-readout", "--difficulty", "simple",
        "--n", "4", "--seed", "1", "--out", str(out),
    ]) == 0
    capsys.readouterr()
    records = list(read_jsonl(out / "records.jsonl"))
    assert len(records) == 4
    assert [r.id for r in records] == sorted(r.id for r in records)
    for rec in records:
        assert (out / rec.image_path).is_file()


def test_gen_text_form_writes_no_images(tmp_path, capsys):
    out = tmp_path / "gen"
    main([
        "gen", "--task", "grid-navigation", "--difficulty", "hard",
        "--n", "2", "--seed", "2", "--form", "text", "--out", str(out),
    ])
    capsys.readouterr()
    records = list(read_jsonl(out / "records.jsonl"))
    assert all(r.modality == "text" for r in records)
    assert not (out / "images").exists()


def test_gen_jobs_matches_serial_output(tmp_path, capsys):
    serial, parallel = tmp_path / "s", tmp_path / "p"
    args = ["gen", "--task", "visual-analogy", "--difficulty", "simple",
            "--n", "4", "--seed", "3", "--form", "text"]
    main(args + ["--out", str(serial)])
    main(args + ["--out", str(parallel), "--jobs", "2"])
    capsys.readouterr()
    assert (serial / "records.jsonl").read_bytes() == (parallel / "records.jsonl").read_bytes()


def test_mix_writes_dataset_manifest_and_images(tmp_path, capsys):
    out = tmp_path / "mix"
    assert main([
        "mix", "--task", "table-readout", "--supervision", "mix+",
        "--n", "12", "--seed", "7", "--out", str(out),
    ]) == 0
    capsys.readouterr()
    records = list(read_jsonl(out / "dataset.jsonl"))
    assert len(records) == 12
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["phases"][0]["n_simple"] == 6
    assert manifest["phases"][0]["n_hard"] == 6
    for rec in records:
        if rec.modality == "image":
            assert (out / rec.image_path).is_file()


def test_mix_phases_file(tmp_path, capsys):
    phases = tmp_path / "phases.json"
    phases.write_text(json.dumps([
        {"supervision": "align", "n": 4},
        {"supervision": "text-warmup", "n": 4},
    ]))
    out = tmp_path / "mix"
    main(["mix", "--task", "table-readout", "--phases", str(phases),
          "--seed", "1", "--out", str(out)])
    capsys.readouterr()
    assert len(list(read_jsonl(out / "phase-00.jsonl"))) == 4
    assert len(list(read_jsonl(out / "phase-01.jsonl"))) == 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert [p["supervision"] for p in manifest["phases"]] == ["align", "text-warmup"]


def test_mix_indivisible_size_exits_nonzero(tmp_path, capsys):
    code = main(["mix", "--task", "table-readout", "--supervision", "mix",
                 "--n", "7", "--seed", "0", "--out", str(tmp_path / "x")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_eval_self_check_reports_perfect_accuracy(tmp_path, capsys):
    gold = tmp_path / "gold"
    main(["gen", "--task", "table-readout", "--difficulty", "simple",
          "--n", "3", "--seed", "4", "--form", "text", "--out", str(gold)])
    out = tmp_path / "eval"
    assert main(["eval", "--gold", str(gold / "records.jsonl"),
                 "--out", str(out)]) == 0
    capsys.readouterr()
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["accuracy"] == 1.0
    assert metrics["table_precision"] == 1.0
    assert (out / "metrics.csv").is_file()
    assert (out / "metrics.png").is_file()
    assert (out / "verdicts.jsonl").is_file()


def test_eval_with_generations_file(tmp_path, capsys):
    gold = tmp_path / "gold"
    main(["gen", "--task", "grid-navigation", "--difficulty", "simple",
          "--n", "2", "--seed", "5", "--form", "text", "--out", str(gold)])
    records = list(read_jsonl(gold / "records.jsonl"))
    gens = tmp_path / "gens.jsonl"
    lines = [json.dumps({"id": r.id, "text": "Final answer: up."}) for r in records]
    gens.write_text("\n".join(lines))
    out = tmp_path / "eval"
    main(["eval", "--gold", str(gold / "records.jsonl"),
          "--generations", str(gens), "--out", str(out)])
    capsys.readouterr()
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["accuracy"] == 0.0


def test_grad_toy_check_and_dump_scores(tmp_path, capsys):
    import numpy as np
    from s2h_forge.gradalign import random_quadratic_family, write_dump

    dump_path = tmp_path / "g.bin"
    write_dump(dump_path, random_quadratic_family(seed=1).to_dump())
    out = tmp_path / "grad"
    assert main(["grad", "--dump", str(dump_path), "--toy-check",
                 "--out", str(out), "--json"]) == 0
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert payload["toy_check"]["max_abs_diff"] <= 1e-3
    scores = json.loads((out / "grad_scores.json").read_text())
    assert np.isfinite(scores["dump_alignment"])
    assert (out / "grad_scores.csv").is_file()
    assert (out / "grad_scores.png").is_file()


def test_stats_outputs_counts_and_figures(tmp_path, capsys):
    gen = tmp_path / "gen"
    main(["gen", "--task", "table-readout", "--difficulty", "simple",
          "--n", "3", "--seed", "6", "--form", "text", "--out", str(gen)])
    out = tmp_path / "stats"
    assert main(["stats", "--data", str(gen / "records.jsonl"),
                 "--out", str(out)]) == 0
    capsys.readouterr()
    stats = json.loads((out / "stats.json").read_text())
    assert stats["task_table-readout"] == 3
    assert stats["n"] == 3
    assert (out / "stats.png").is_file()
    assert (out / "cot_lengths.png").is_file()


def test_config_file_provides_defaults(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"supervision": "align", "n": 4, "seed": 9,
                                  "task": "grid-navigation"}))
    out = tmp_path / "mix"
    main(["--config", str(config), "mix", "--out", str(out)])
    capsys.readouterr()
    records = list(read_jsonl(out / "dataset.jsonl"))
    assert len(records) == 4
    assert all(r.task.value == "grid-navigation" for r in records)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["phases"][0]["supervision"] == "align"


def test_render_reproduces_gen_images(tmp_path, capsys):
    gen = tmp_path / "gen"
    main(["gen", "--task", "table-readout", "--difficulty", "simple",
          "--n", "2", "--seed", "8", "--out", str(gen)])
    rerender = tmp_path / "rerender"
    main(["render", "--data", str(gen / "records.jsonl"), "--out", str(rerender)])
    capsys.readouterr()
    gen_digests = digest_tree(gen / "images")
    assert gen_digests and gen_digests == digest_tree(rerender / "images")


def test_missing_input_file_exits_one(tmp_path, capsys):
    assert main(["stats", "--data", str(tmp_path / "nope.jsonl"),
                 "--out", str(tmp_path / "o")]) == 1
    capsys.readouterr()
