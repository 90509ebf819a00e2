"""Command-line interface.

Every prediction-emitting subcommand writes JSONL records of the form
{"input": [...], "output": [...]} or {"input": [...], "abstain": reason};
experiment sweeps write a CSV table plus a PNG figure next to it unless
figures are switched off.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import data as data_mod
from . import evaluation as eval_mod
from .core import CountVector, bag_from_tokens
from .errors import UnamapError, UnseenAtomError
from .extensions import active_select, paraphrase_classes
from .figures import render_figure
from .semparse import (
    SEARCH_BUDGET,
    CompatibilityTable,
    FeaturizerConfig,
    TargetScheme,
    annotate_safe_spans,
    build_dataset,
    gram_atoms,
    parse_logical_form,
    reconstruct,
)
from .unanimity import (
    Mode,
    clean_l1_residual,
    clean_leave_one_out,
    decider_from_json,
    decider_to_json,
    predict,
    train,
)


def _emit(records, out: str | None) -> None:
    lines = "".join(json.dumps(r) + "\n" for r in records)
    if out:
        Path(out).write_text(lines, encoding="utf-8")
    else:
        sys.stdout.write(lines)


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _encode(tokens, vocab, args):
    """Token list -> bag over the vocabulary, optionally k-gram featurized."""
    if args.featurize:
        tokens = gram_atoms(tokens, FeaturizerConfig(k=args.kgram))
    return bag_from_tokens(tokens, vocab)[0]


def _load_training_data(args) -> "data_mod.Dataset":
    if args.corpus:
        records = data_mod.read_records(args.corpus)
        if any("form" not in r for r in records):
            raise ValueError("corpus rows need 'source' tokens and a 'form' string")
        return build_dataset(
            [r["source"] for r in records],
            [parse_logical_form(r["form"]) for r in records],
            FeaturizerConfig(k=args.kgram),
            TargetScheme(args.target_scheme),
        )
    return data_mod.load_dataset(args.data)


def _cmd_synth(args) -> int:
    cfg = _synth_config(args)
    mapping, train_d, test = data_mod.synth_generate(cfg)
    out = data_mod.save_synthetic(args.out, cfg, mapping, train_d, test)
    _info(f"wrote {out / 'train.jsonl'}, {out / 'test.jsonl'}, {out / 'truth.json'}")
    return 0


def _cmd_train(args) -> int:
    d = _load_training_data(args)
    dec = train(d, Mode(args.mode), n_mistakes=args.n_mistakes, seed=args.seed)
    Path(args.out).write_text(decider_to_json(dec), encoding="utf-8")
    _info(f"trained {args.mode} decider on {d.n} examples -> {args.out}")
    return 0


def _cmd_predict(args) -> int:
    dec = decider_from_json(Path(args.decider).read_text(encoding="utf-8"))
    records = []
    for tokens in data_mod.load_inputs(args.inputs):
        try:
            x = _encode(tokens, dec.source_vocab, args)
        except UnseenAtomError:
            records.append({"input": tokens, "abstain": "UnseenAtom"})
            continue
        pred = predict(dec, x)
        if pred.is_abstain:
            records.append({"input": tokens, "abstain": pred.reason.value})
        else:
            records.append({"input": tokens, "output": pred.output.to_multiset(dec.target_vocab)})
    _emit(records, args.out)
    return 0


def _cmd_baseline(args) -> int:
    d = data_mod.load_dataset(args.data)
    mapping = eval_mod.least_squares_mapping(d)
    policy = eval_mod.EpsilonPolicy(args.tolerance)
    records = []
    for tokens in data_mod.load_inputs(args.inputs):
        try:
            x = _encode(tokens, d.source_vocab, args)
        except UnseenAtomError:
            records.append({"input": tokens, "abstain": "UnseenAtom"})
            continue
        pred = eval_mod.point_estimate_predict(mapping, x, policy)
        if pred.is_abstain:
            records.append({"input": tokens, "abstain": pred.reason.value})
        else:
            records.append({"input": tokens, "output": pred.output.to_multiset(d.target_vocab)})
    _emit(records, args.out)
    return 0


def _cmd_clean(args) -> int:
    d = data_mod.load_dataset(args.data)
    if args.method == "l1":
        cleaned = clean_l1_residual(d)
    else:
        cleaned = clean_leave_one_out(
            d, args.n_mistakes, drop_on_mismatch=not args.unsafe_only
        )
    data_mod.save_dataset(cleaned, args.out)
    _info(f"kept {cleaned.n} of {d.n} examples -> {args.out}")
    return 0


def _cmd_spans(args) -> int:
    dec = decider_from_json(Path(args.decider).read_text(encoding="utf-8"))
    cfg = FeaturizerConfig(k=args.kgram)
    records = []
    for tokens in data_mod.load_inputs(args.inputs):
        spans = annotate_safe_spans(tokens, dec, cfg)
        records.append(
            {
                "input": tokens,
                "spans": [
                    {
                        "start": s.start,
                        "end": s.end,
                        "output": s.output.to_multiset(dec.target_vocab),
                    }
                    for s in spans
                ],
            }
        )
    _emit(records, args.out)
    return 0


def _cmd_reconstruct(args) -> int:
    if args.table:
        table = CompatibilityTable.from_json(Path(args.table).read_text(encoding="utf-8"))
    else:
        records = data_mod.read_records(args.forms, require="form")
        table = CompatibilityTable.from_forms(
            parse_logical_form(r["form"]) for r in records
        )
    atoms = [a for a in (s.strip() for s in args.atoms.split(",")) if a]
    form = reconstruct(atoms, table, budget=args.budget)
    _emit([{"atoms": atoms, "form": None if form is None else form.render()}], args.out)
    return 0


def _cmd_active(args) -> int:
    d = data_mod.load_dataset(args.data)
    queried, state = active_select(ex.input for ex in d.examples())
    if args.out:
        data_mod.save_dataset(d.subset(queried), args.out)
        _info(f"wrote {len(queried)} queried examples -> {args.out}")
    print(json.dumps({"queried": queried, "rank": state.rank}))
    return 0


def _class_output(output, dec) -> list[str]:
    # safe outputs are exact rationals; decode as a multiset when they
    # form a valid bag, otherwise spell the raw values out
    if all(f.denominator == 1 and f >= 0 for f in output):
        bag = CountVector(tuple(int(f) for f in output))
        return bag.to_multiset(dec.target_vocab)
    return [str(f) for f in output]


def _cmd_paraphrase(args) -> int:
    dec = decider_from_json(Path(args.decider).read_text(encoding="utf-8"))
    token_lists = data_mod.load_inputs(args.inputs)
    pool, pool_to_orig, unseen = [], [], []
    for i, tokens in enumerate(token_lists):
        try:
            pool.append(_encode(tokens, dec.source_vocab, args))
            pool_to_orig.append(i)
        except UnseenAtomError:
            unseen.append(i)
    classes, unsafe = paraphrase_classes(pool, dec)
    print(
        json.dumps(
            {
                "classes": [
                    {
                        "members": [pool_to_orig[m] for m in c.members],
                        "output": _class_output(c.output, dec),
                    }
                    for c in classes
                ],
                "unsafe": sorted(unseen + [pool_to_orig[i] for i in unsafe]),
            }
        )
    )
    return 0


def _cmd_experiment(args) -> int:
    kind = eval_mod.ExperimentKind(args.kind)
    cfg = eval_mod.ExperimentConfig(synth=_synth_config(args), seed=args.seed)
    if args.budgets:
        budgets = tuple(int(b) for b in args.budgets.split(","))
        field = "noise_budgets" if kind is eval_mod.ExperimentKind.NOISE_CURVE else "label_budgets"
        cfg = replace(cfg, **{field: budgets})
    if args.fractions:
        fractions = tuple(float(f) for f in args.fractions.split(","))
        field = (
            "adversarial_fractions"
            if kind is eval_mod.ExperimentKind.ADVERSARIAL
            else "fractions"
        )
        cfg = replace(cfg, **{field: fractions})
    if args.trials:
        cfg = replace(cfg, adversarial_trials=args.trials)
    result = eval_mod.run_experiment(kind, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{kind.value}.csv"
    result.write_csv(csv_path)
    written = [str(csv_path)]
    if not args.no_figure:
        written.append(str(render_figure(result, out / f"{kind.value}.png")))
    _info("wrote " + ", ".join(written))
    return 0


def _synth_config(args) -> "data_mod.SynthConfig":
    return data_mod.SynthConfig(
        n_source=args.n_source,
        n_target=args.n_target,
        n_train=args.n_train,
        n_test=args.n_test,
        n_clusters=args.n_clusters,
        len_min=args.len_min,
        len_max=args.len_max,
        max_targets_per_source=args.max_targets,
        seed=args.seed,
    )


def _add_synth_flags(p: argparse.ArgumentParser) -> None:
    defaults = data_mod.SynthConfig()
    p.add_argument("--n-source", type=int, default=defaults.n_source)
    p.add_argument("--n-target", type=int, default=defaults.n_target)
    p.add_argument("--n-train", type=int, default=defaults.n_train)
    p.add_argument("--n-test", type=int, default=defaults.n_test)
    p.add_argument("--n-clusters", type=int, default=defaults.n_clusters)
    p.add_argument("--len-min", type=int, default=defaults.len_min)
    p.add_argument("--len-max", type=int, default=defaults.len_max)
    p.add_argument("--max-targets", type=int, default=defaults.max_targets_per_source)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=[m.value for m in Mode], default="ilp")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--n-mistakes", type=int, default=0)
    common.add_argument("--kgram", type=int, default=1)
    common.add_argument("--target-scheme", choices=["A", "B"], default="B")
    common.add_argument("--tolerance", type=float, default=0.0, help="baseline rounding epsilon")
    common.add_argument("--format", choices=["jsonl"], default="jsonl")
    common.add_argument("--featurize", action="store_true", help="k-gram featurize token inputs")

    parser = argparse.ArgumentParser(prog="unamap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    _add_synth_flags(p)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train a decider")
    p.add_argument("--data", help="bag-pair JSONL")
    p.add_argument("--corpus", help="sentence/logical-form JSONL (featurized per --kgram)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict with a trained decider")
    p.add_argument("--decider", required=True)
    p.add_argument("--inputs", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_predict)

    p = sub.add_parser("baseline", parents=[common], help="epsilon-rounded least-squares baseline")
    p.add_argument("--data", required=True)
    p.add_argument("--inputs", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_baseline)

    p = sub.add_parser("clean", parents=[common], help="drop suspicious training rows")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=["loo", "l1"], default="loo")
    p.add_argument("--unsafe-only", action="store_true",
                   help="keep rows the leave-one-out decider answers differently on")
    p.set_defaults(fn=_cmd_clean)

    p = sub.add_parser("spans", parents=[common], help="annotate safe sub-spans of sentences")
    p.add_argument("--decider", required=True)
    p.add_argument("--inputs", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_spans)

    p = sub.add_parser("reconstruct", parents=[common], help="rebuild a logical form from atoms")
    p.add_argument("--atoms", required=True, help="comma-separated target atoms")
    p.add_argument("--table", help="compatibility table JSON")
    p.add_argument("--forms", help="JSONL of training forms to build the table from")
    p.add_argument("--budget", type=int, default=SEARCH_BUDGET)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_reconstruct)

    p = sub.add_parser("active", parents=[common], help="rank-based query selection")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_active)

    p = sub.add_parser("paraphrase", parents=[common], help="partition inputs by exact output")
    p.add_argument("--decider", required=True)
    p.add_argument("--inputs", required=True)
    p.set_defaults(fn=_cmd_paraphrase)

    p = sub.add_parser("experiment", parents=[common], help="run a sweep, write CSV and figure")
    p.add_argument("--kind", required=True, choices=[k.value for k in eval_mod.ExperimentKind])
    p.add_argument("--out", required=True)
    p.add_argument("--budgets", help="comma-separated noise or label budgets")
    p.add_argument("--fractions", help="comma-separated training fractions")
    p.add_argument("--trials", type=int)
    p.add_argument("--no-figure", action="store_true")
    _add_synth_flags(p)
    p.set_defaults(fn=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train" and bool(args.data) == bool(args.corpus):
        print("error: train needs exactly one of --data / --corpus", file=sys.stderr)
        return 2
    if args.command == "reconstruct" and bool(args.table) == bool(args.forms):
        print("error: reconstruct needs exactly one of --table / --forms", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except (UnamapError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
