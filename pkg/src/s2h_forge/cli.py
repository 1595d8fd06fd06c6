"""Command-line interface: gen | render | mix | eval | grad | stats.

All subcommands are deterministic given their seeds; report paths write
delimited metric files plus matplotlib figures.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analogy, evaluator, gradalign, gridgen, mixer, render, report, tablegen
from .core import (
    Difficulty,
    SegmentKind,
    SupervisionKind,
    TaskKind,
    read_jsonl,
    rng_for,
    write_jsonl,
)

TASK_CHOICES = [t.value for t in TaskKind]
DIFFICULTY_CHOICES = [d.value for d in Difficulty]
SUPERVISION_CHOICES = [s.value for s in SupervisionKind]


def _resolve_task(task: str, variant: str | None) -> TaskKind:
    kind = TaskKind(task)
    if variant == "pattern-heldout" and kind is TaskKind.VISUAL_ANALOGY:
        return TaskKind.PATTERN_HELDOUT_VISUAL_ANALOGY
    return kind


def _heldout(path: str | None):
    return analogy.load_heldout(path) if path else analogy.DEFAULT_HELDOUT


def _instance_of(rec):
    payload = rec.metadata["instance"]
    if rec.task in (TaskKind.CONSECUTIVE_TABLE_READOUT, TaskKind.TABLE_READOUT):
        return tablegen.TableInstance.from_json(payload)
    if rec.task is TaskKind.GRID_NAVIGATION:
        return gridgen.GridInstance.from_json(payload)
    return analogy.AnalogyPuzzle.from_json(payload)


def _render_instance(inst, style: render.RenderStyle) -> bytes:
    if isinstance(inst, tablegen.TableInstance):
        fn = lambda: render.render_table(inst, style)
        key = inst.to_json()
    elif isinstance(inst, gridgen.GridInstance):
        fn = lambda: render.render_grid(inst, style)
        key = inst.to_json()
    else:
        fn = lambda: render.render_analogy(inst, style)
        key = inst.to_json()
    return render.cached_render(key, fn, style)


def _emit_config(args, extra: dict | None = None) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    if extra:
        resolved.update(extra)
    if getattr(args, "json", False):
        print(json.dumps(resolved, sort_keys=True, default=str))
    else:
        for k, v in resolved.items():
            print(f"{k} = {v}")


def _gen_worker(payload):
    task, difficulty, seed, heldout_pairs = payload
    heldout = frozenset(
        (analogy.Domain(d), analogy.Relation(r)) for d, r in heldout_pairs
    )
    return mixer.generate_bundle(TaskKind(task), Difficulty(difficulty), seed, heldout)


def _gen_bundles(task, difficulty, n, seed, heldout, jobs):
    seeds = [
        int(rng_for(seed, task.value, difficulty.value, i).integers(0, 2**62))
        for i in range(n)
    ]
    if jobs and jobs > 1:
        payloads = [
            (task.value, difficulty.value, s, sorted((d.value, r.value) for d, r in heldout))
            for s in seeds
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_gen_worker, payloads, chunksize=32))
    return [mixer.generate_bundle(task, difficulty, s, heldout) for s in seeds]


def cmd_gen(args) -> int:
    task = _resolve_task(args.task, args.variant)
    difficulty = Difficulty(args.difficulty)
    heldout = _heldout(args.heldout_file)
    style = render.load_style(args.style_file)
    out = Path(args.out)
    bundles = _gen_bundles(task, difficulty, args.n, args.seed, heldout, args.jobs)
    records = [mixer.bundle_to_record(b, args.form) for b in bundles]
    records.sort(key=lambda r: r.id)
    if args.form != mixer.FORM_TEXT:
        for rec in records:
            inst = _instance_of(rec)
            png = _render_instance(inst, style)
            path = out / rec.image_path
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(png)
    write_jsonl(out / "records.jsonl", records)
    _emit_config(args, {"records": len(records), "out_file": str(out / "records.jsonl")})
    return 0


def cmd_render(args) -> int:
    style = render.load_style(args.style_file)
    out = Path(args.out)
    count = 0
    for rec in read_jsonl(args.data):
        if rec.modality != "image" or "instance" not in rec.metadata:
            continue
        png = _render_instance(_instance_of(rec), style)
        path = out / rec.image_path
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(png)
        count += 1
    _emit_config(args, {"images": count})
    return 0


def _write_mixture_images(records, out: Path, style) -> None:
    seen = set()
    for rec in records:
        if rec.modality != "image" or rec.image_path in seen:
            continue
        seen.add(rec.image_path)
        inst = _instance_of(rec)
        png = _render_instance(inst, style)
        path = out / rec.image_path
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(png)


def cmd_mix(args) -> int:
    tasks = tuple(_resolve_task(t.strip(), args.variant) for t in args.task.split(","))
    heldout = _heldout(args.heldout_file)
    style = render.load_style(args.style_file)
    out = Path(args.out)
    source = mixer.GeneratedSource(args.seed, heldout)
    if args.phases:
        phase_specs = json.loads(Path(args.phases).read_text("utf-8"))
        plans = [
            mixer.MixturePlan(
                supervision=SupervisionKind(p["supervision"]),
                n=int(p["n"]),
                seed=int(p.get("seed", args.seed)),
                tasks=tasks,
                repeat_hard_factor=int(p.get("repeat_hard_factor", 1)),
            )
            for p in phase_specs
        ]
    else:
        plans = [
            mixer.MixturePlan(
                supervision=SupervisionKind(args.supervision),
                n=args.n,
                seed=args.seed,
                tasks=tasks,
                repeat_hard_factor=args.repeat_hard_factor,
            )
        ]
    datasets, manifest = mixer.build_phase_sequence(plans, source)
    if args.cot_schedule:
        parts = args.cot_schedule.split(",")
        schedule = mixer.CotSchedule(
            float(parts[0]), float(parts[1]), float(parts[2]), int(parts[3])
        )
        datasets = [mixer.apply_cot_schedule(ds, schedule) for ds in datasets]
    out.mkdir(parents=True, exist_ok=True)
    for idx, records in enumerate(datasets):
        name = "dataset.jsonl" if len(datasets) == 1 else f"phase-{idx:02d}.jsonl"
        write_jsonl(out / name, records)
        _write_mixture_images(records, out, style)
        manifest["phases"][idx]["file"] = name
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
    _emit_config(args, {"datasets": len(datasets)})
    return 0


def _load_generations(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                out[obj["id"]] = obj["text"]
    return out


def cmd_eval(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    generations = _load_generations(args.generations)
    verdicts = []
    table_pairs, grid_pairs, analogy_flags = [], [], []
    lenient = 0
    conversion_checked = conversion_ok = 0
    gold_records = [r for r in read_jsonl(args.gold) if "instance" in r.metadata]
    for rec in gold_records:
        text = generations.get(rec.id, rec.target_text())
        inst = _instance_of(rec)
        if rec.task in (TaskKind.CONSECUTIVE_TABLE_READOUT, TaskKind.TABLE_READOUT):
            verdict = evaluator.eval_table(text, inst)
            table_pairs.append((text, inst))
        elif rec.task is TaskKind.GRID_NAVIGATION:
            verdict = evaluator.eval_grid(text, inst)
            grid_pairs.append((text, inst))
        else:
            verdict = evaluator.eval_analogy(text, inst)
            lenient += verdict.details["lenient"]
            analogy_flags.append(evaluator.analogy_cot_audit(text, inst))
        converted = rec.segment(SegmentKind.CONVERTED_TEXT)
        if converted is not None:
            conversion_checked += 1
            conversion_ok += evaluator.conversion_accuracy(text, converted.text)
        verdicts.append(
            {"id": rec.id, "task": rec.task.value, "correct": verdict.correct,
             "channel": verdict.channel, "details": verdict.details}
        )
    with open(out / "verdicts.jsonl", "w", encoding="utf-8") as fh:
        for v in verdicts:
            fh.write(json.dumps(v, sort_keys=True) + "\n")
    metrics: dict = {
        "n": len(verdicts),
        "accuracy": (sum(v["correct"] for v in verdicts) / len(verdicts)) if verdicts else 0.0,
    }
    if conversion_checked:
        metrics["conversion_accuracy"] = conversion_ok / conversion_checked
    if table_pairs:
        metrics.update({f"table_{k}": v for k, v in evaluator.table_failure_metrics(table_pairs).items()})
    if grid_pairs:
        metrics.update({f"grid_{k}": v for k, v in evaluator.grid_subtask_metrics(grid_pairs).items()})
    if analogy_flags:
        metrics["analogy_lenient_accuracy"] = lenient / len(analogy_flags)
        for name in evaluator.AnalogyCotAudit.__dataclass_fields__:
            metrics[f"analogy_err_{name}"] = sum(
                getattr(f, name) for f in analogy_flags
            ) / len(analogy_flags)
    report.write_metrics(out, "metrics", metrics)
    report.metric_bar_figure(out / "metrics.png", metrics, "evaluation metrics")
    _emit_config(args, {"metrics": metrics} if args.json else {"accuracy": metrics["accuracy"]})
    return 0


def cmd_grad(args) -> int:
    out = Path(args.out) if args.out else None
    results: dict[str, dict[str, float]] = {}
    if args.manifest:
        dumps = gradalign.read_manifest(args.manifest)
    elif args.dump:
        dumps = {"dump": gradalign.read_dump(args.dump)}
    else:
        dumps = {}
    for tag, dump in dumps.items():
        simple = dump.split_values(gradalign.SPLIT_SIMPLE)
        hard = dump.split_values(gradalign.SPLIT_HARD)
        results[tag] = {
            "alignment": gradalign.alignment_score(dump),
            "cosine": gradalign.cosine_score(dump),
            "adam_alignment": gradalign.adam_update_alignment(dump),
            "simple_mean_norm": float(np.linalg.norm(simple.mean(axis=0))),
            "hard_mean_norm": float(np.linalg.norm(hard.mean(axis=0))),
        }
    toy = None
    if args.toy_check:
        diffs = []
        for i in range(20):
            family = gradalign.random_quadratic_family(seed=1000 + i)
            diffs.append(gradalign.first_order_ratio_check(family)["abs_diff"])
        toy = {"families": 20, "max_abs_diff": max(diffs), "mean_abs_diff": float(np.mean(diffs))}
    if out:
        out.mkdir(parents=True, exist_ok=True)
        flat = {f"{tag}_{name}": val for tag, scores in results.items() for name, val in scores.items()}
        if toy:
            flat.update({f"toy_{k}": v for k, v in toy.items()})
        report.write_metrics(out, "grad_scores", flat)
        if results:
            report.score_series_figure(out / "grad_scores.png", results, "gradient alignment scores")
    _emit_config(args, {"scores": results, "toy_check": toy})
    return 0


def cmd_stats(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    counts: Counter = Counter()
    cot_lengths = []
    for rec in read_jsonl(args.data):
        counts[f"task_{rec.task.value}"] += 1
        counts[f"difficulty_{rec.difficulty.value}"] += 1
        counts[f"modality_{rec.modality}"] += 1
        if "form" in rec.metadata:
            counts[f"form_{rec.metadata['form']}"] += 1
        cot = rec.segment(SegmentKind.COT)
        cot_lengths.append(len(cot.text) if cot else 0)
    stats = dict(sorted(counts.items()))
    stats["n"] = len(cot_lengths)
    report.write_metrics(out, "stats", stats)
    report.counts_figure(out / "stats.png", {k: v for k, v in stats.items() if k != "n"}, "record counts")
    if cot_lengths:
        report.histogram_figure(out / "cot_lengths.png", cot_lengths, "CoT lengths", "characters")
    _emit_config(args, {"n": stats["n"]})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="s2h-forge",
        description="Deterministic simple-to-hard task generation, mixing, evaluation, and gradient diagnostics.",
    )
    parser.add_argument("--config", help="JSON file of flag defaults (flags given on the command line win)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true", help="print the resolved configuration as JSON")

    p = sub.add_parser("gen", help="generate task instances as JSONL records plus images")
    p.add_argument("--task", required=True, choices=TASK_CHOICES)
    p.add_argument("--difficulty", required=True, choices=DIFFICULTY_CHOICES)
    p.add_argument("--variant", choices=["standard", "pattern-heldout"], default="standard")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--form", choices=[mixer.FORM_TEXT, mixer.FORM_IMAGE, mixer.FORM_IMAGE_VIA_TEXT],
                   default=mixer.FORM_IMAGE)
    p.add_argument("--heldout-file")
    p.add_argument("--style-file")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("render", help="re-render images for an existing JSONL dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--style-file")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("mix", help="assemble supervision mixtures (optionally multi-phase)")
    p.add_argument("--task", default=TaskKind.TABLE_READOUT.value,
                   help="task name, or comma-separated list for multitask mixtures")
    p.add_argument("--variant", choices=["standard", "pattern-heldout"], default="standard")
    p.add_argument("--supervision", choices=SUPERVISION_CHOICES, default=SupervisionKind.MIX.value)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeat-hard-factor", type=int, default=1)
    p.add_argument("--phases", help="JSON file listing phase plans [{supervision, n, seed?}, ...]")
    p.add_argument("--cot-schedule", help="full,ramp,none,bins e.g. 0.3,0.4,0.3,101")
    p.add_argument("--heldout-file")
    p.add_argument("--style-file")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("eval", help="score generations against gold instances")
    p.add_argument("--gold", required=True, help="gold records JSONL (with instance metadata)")
    p.add_argument("--generations", help="JSONL of {id, text}; defaults to gold targets (self-check)")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grad", help="gradient alignment scores over dump files")
    p.add_argument("--dump", help="single gradient dump file")
    p.add_argument("--manifest", help="manifest JSON mapping checkpoint tags to dump files")
    p.add_argument("--toy-check", action="store_true",
                   help="run the analytic first-order consistency check")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_grad)

    p = sub.add_parser("stats", help="corpus statistics and figures for a JSONL dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if "--config" in argv:
        idx = argv.index("--config")
        config = json.loads(Path(argv[idx + 1]).read_text("utf-8"))
        defaults = {k.replace("-", "_"): v for k, v in config.items()}
        parser.set_defaults(**defaults)
        # subcommands parse into a fresh namespace, so seed their defaults too
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                for sub_parser in action.choices.values():
                    sub_parser.set_defaults(**defaults)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, mixer.MixtureError, gradalign.GradError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
