"""Command-line entry point.

Subcommands: ingest, train, train-vi, eval, synth, interpret,
significance, active, experiment. Every run writes its outputs plus one
JSON manifest (command line, config snapshot, seeds, input digests,
output paths, duration) so results can be reproduced exactly. All
randomness is driven by explicit --seed flags; environment variables are
never consulted.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import active as active_mod
from . import data as data_mod
from . import experiments
from .checkpoint import align_rows_to_checkpoint, load_checkpoint, save_checkpoint
from .manifest import ManifestWriter
from .metrics import accuracy, cosine_similarity_matrix, two_proportion_z_test
from .models import POINT_KINDS, ModelSpec, predict_proba_array
from .optim import TrainConfig, sgd_train
from .synth import SynthConfig, generate_synthetic
from .vi import VI_KINDS, VIConfig, predict_proba_vi_array, train_vi

_VI_TO_POINT = {"rasch-vi": "rasch", "interaction-vi": "interaction",
                "class-interaction-vi": "class-interaction"}


def _load_rows(path: str, fmt: str):
    if fmt == "raw":
        return data_mod.load_raw_csv(path)
    return data_mod.load_binary_csv(path)


def _manifest_path(args, default_anchor: str | None) -> str:
    if args.manifest:
        return args.manifest
    if default_anchor:
        return default_anchor + ".manifest.json"
    return "run_manifest.json"


def _print_record(record: dict) -> None:
    print(json.dumps(record))


def _cmd_ingest(args, manifest: ManifestWriter) -> int:
    manifest.add_input(args.input)
    rows = _load_rows(args.input, args.format)
    dataset = data_mod.build_dataset(rows)
    data_mod.write_binary_csv(dataset, args.out)
    manifest.add_output(args.out)
    if args.test_fraction is not None:
        if not (args.train_out and args.test_out):
            raise ValueError("--test-fraction requires --train-out and --test-out")
        split = data_mod.split_train_test(dataset, args.test_fraction, args.seed)
        data_mod.write_binary_csv(split.train, args.train_out)
        data_mod.write_binary_csv(split.test, args.test_out)
        manifest.add_output(args.train_out)
        manifest.add_output(args.test_out)
    manifest.seeds["split"] = args.seed
    _print_record({"students": dataset.num_students, "questions": dataset.num_questions,
                   "classes": dataset.num_classes, "responses": dataset.n_responses})
    return 0


def _cmd_train(args, manifest: ManifestWriter) -> int:
    manifest.add_input(args.data)
    dataset = data_mod.build_dataset(_load_rows(args.data, args.format))
    spec = ModelSpec(args.model, args.dims)
    cfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                      l2_penalty=args.l2, seed=args.seed, init_scale=args.init_scale)
    warm = None
    if args.warm_start:
        manifest.add_input(args.warm_start)
        ckpt = load_checkpoint(args.warm_start)
        if ckpt.kind != args.model:
            raise ValueError(f"warm-start checkpoint is {ckpt.kind!r}, expected {args.model!r}")
        if ckpt.student_ids != dataset.student_ids or ckpt.question_ids != dataset.question_ids:
            raise ValueError("warm-start id tables do not match the training data")
        warm = ckpt.params
    params, report = sgd_train(spec, dataset, cfg, warm_start=warm)
    save_checkpoint(args.out, args.model, params, dataset, dims=spec.dims)
    manifest.add_output(args.out)
    manifest.config = {"model": args.model, "dims": spec.dims, "lr": args.lr, "epochs": args.epochs,
                       "batch_size": args.batch_size, "l2": args.l2, "init_scale": args.init_scale}
    manifest.seeds["train"] = args.seed
    record = {"final_nll": report.final_nll, "epochs_run": report.epochs_run,
              "nll_trace": report.nll_trace}
    with open(args.out + ".report.json", "w", encoding="utf-8") as fh:
        json.dump(record, fh)
        fh.write("\n")
    manifest.add_output(args.out + ".report.json")
    _print_record({"final_nll": report.final_nll, "epochs_run": report.epochs_run})
    return 0


def _cmd_train_vi(args, manifest: ManifestWriter) -> int:
    manifest.add_input(args.data)
    dataset = data_mod.build_dataset(_load_rows(args.data, args.format))
    warm = None
    if args.warm_start:
        manifest.add_input(args.warm_start)
        ckpt = load_checkpoint(args.warm_start)
        if ckpt.kind != _VI_TO_POINT[args.model]:
            raise ValueError(f"warm-start checkpoint is {ckpt.kind!r}, expected "
                             f"{_VI_TO_POINT[args.model]!r} for {args.model}")
        if ckpt.student_ids != dataset.student_ids or ckpt.question_ids != dataset.question_ids:
            raise ValueError("warm-start id tables do not match the training data")
        warm = ckpt.params
    cfg = VIConfig(samples=args.samples, sigma_init=args.sigma_init, learning_rate=args.lr,
                   epochs=args.epochs, seed=args.seed, warm_start=warm)
    params, report = train_vi(args.model, dataset, cfg, dims=args.dims)
    save_checkpoint(args.out, args.model, params, dataset)
    manifest.add_output(args.out)
    manifest.config = {"model": args.model, "dims": args.dims, "samples": args.samples,
                       "sigma_init": args.sigma_init, "lr": args.lr, "epochs": args.epochs,
                       "warm_start": bool(args.warm_start)}
    manifest.seeds["train"] = args.seed
    with open(args.out + ".report.json", "w", encoding="utf-8") as fh:
        json.dump({"final_nll": report.final_nll, "epochs_run": report.epochs_run,
                   "nll_trace": report.nll_trace}, fh)
        fh.write("\n")
    manifest.add_output(args.out + ".report.json")
    _print_record({"final_negative_elbo": report.final_nll, "epochs_run": report.epochs_run})
    return 0


def _cmd_eval(args, manifest: ManifestWriter) -> int:
    manifest.add_input(args.checkpoint)
    manifest.add_input(args.data)
    ckpt = load_checkpoint(args.checkpoint)
    dataset = align_rows_to_checkpoint(_load_rows(args.data, args.format), ckpt)
    if ckpt.is_vi:
        preds = predict_proba_vi_array(ckpt.params, dataset.student_idx, dataset.question_idx,
                                       dataset.class_of)
    else:
        preds = predict_proba_array(ckpt.model_spec(), ckpt.params, dataset.student_idx,
                                    dataset.question_idx, dataset.class_of)
    report = accuracy(preds, dataset.y, args.threshold)
    record = report.to_dict()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(record, fh)
            fh.write("\n")
        manifest.add_output(args.out)
    manifest.config = {"threshold": args.threshold}
    _print_record(record)
    return 0


def _cmd_synth(args, manifest: ManifestWriter) -> int:
    cfg = SynthConfig(students=args.students, questions=args.questions, dims=args.dims,
                      mean_bq=args.mean_bq, std_bq=args.std_bq, num_classes=args.classes,
                      class_effect_std=args.class_effect_std, keep_prob=args.keep_prob,
                      outcome=args.outcome, seed=args.seed, exam_seed=args.exam_seed)
    dataset, truth = generate_synthetic(cfg)
    data_mod.write_binary_csv(dataset, args.out)
    manifest.add_output(args.out)
    if args.truth:
        with open(args.truth, "w", encoding="utf-8") as fh:
            json.dump(truth.to_dict(), fh)
            fh.write("\n")
        manifest.add_output(args.truth)
    manifest.config = {k: getattr(args, k) for k in
                       ("students", "questions", "dims", "mean_bq", "std_bq", "classes",
                        "class_effect_std", "keep_prob", "outcome")}
    manifest.seeds["synth"] = args.seed
    _print_record({"responses": dataset.n_responses, "students": dataset.num_students,
                   "questions": dataset.num_questions})
    return 0


def _cmd_interpret(args, manifest: ManifestWriter) -> int:
    manifest.add_input(args.checkpoint)
    ckpt = load_checkpoint(args.checkpoint)
    demand = getattr(ckpt.params, "demand", None)
    if demand is None:
        raise ValueError(f"checkpoint kind {ckpt.kind!r} has no question embedding vectors")
    sim = cosine_similarity_matrix(demand, ckpt.question_ids, rescale_display=args.rescale_display)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("question_id," + ",".join(sim.question_ids) + "\n")
        for qid, row in zip(sim.question_ids, sim.values):
            fh.write(qid + "," + ",".join(repr(float(v)) for v in row) + "\n")
    manifest.add_output(args.out)
    manifest.config = {"rescale_display": sim.rescaled, "zero_rows": list(sim.zero_rows)}
    _print_record({"questions": len(sim.question_ids), "rescaled": sim.rescaled})
    return 0


def _cmd_significance(args, manifest: ManifestWriter) -> int:
    result = two_proportion_z_test(args.x1, args.n1, args.x2, args.n2, alphas=args.alpha)
    manifest.config = {"x1": args.x1, "n1": args.n1, "x2": args.x2, "n2": args.n2,
                       "alpha": args.alpha}
    _print_record(result.to_dict())
    return 0


def _cmd_active(args, manifest: ManifestWriter) -> int:
    manifest.add_input(args.data)
    dataset = data_mod.build_dataset(_load_rows(args.data, args.format))
    state = active_mod.make_pool_state(dataset, args.pool_size, args.holdout_fraction, args.seed)
    cfg = active_mod.ActiveConfig(policy=args.policy, batch_size=args.batch, rounds=args.rounds,
                                  retrain=TrainConfig(epochs=5, convergence_tol=0.0, seed=args.seed),
                                  seed=args.seed)
    result = active_mod.run_active_loop(state, cfg)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("questions_revealed,accuracy,policy,seed\n")
        for k, acc in zip(result.questions_revealed, result.overall_accuracy):
            fh.write(f"{k},{acc!r},{result.policy},{result.seed}\n")
    manifest.add_output(args.out)
    manifest.config = {"pool_size": args.pool_size, "policy": args.policy, "batch": args.batch,
                       "rounds": args.rounds, "holdout_fraction": args.holdout_fraction}
    manifest.seeds["active"] = args.seed
    _print_record({"rounds_run": len(result.questions_revealed) - 1,
                   "final_accuracy": result.overall_accuracy[-1]})
    return 0


def _cmd_experiment(args, manifest: ManifestWriter) -> int:
    seeds = tuple(int(s) for s in args.seeds.split(","))
    manifest.seeds["experiment"] = list(seeds)
    if args.recipe == "appendix-c-recovery":
        rows = experiments.recovery_run(students=args.students, seeds=seeds, out_dir=args.out_dir)
        manifest.add_output(f"{args.out_dir}/recovery.csv")
        manifest.add_output(f"{args.out_dir}/recovery_summary.csv")
        manifest.config = {"students": args.students}
        for model in ("rasch", "interaction"):
            accs = [r.accuracy for r in rows if r.model == model]
            _print_record({"model": model, "mean_accuracy": float(np.mean(accs))})
    elif args.recipe == "low-data-sweep":
        fractions = tuple(float(f) for f in args.fractions.split(","))
        rows = experiments.low_data_sweep(fractions=fractions, seeds=seeds, out_dir=args.out_dir)
        manifest.add_output(f"{args.out_dir}/low_data.csv")
        manifest.add_output(f"{args.out_dir}/low_data_summary.csv")
        manifest.config = {"fractions": list(fractions)}
        for fraction in fractions:
            sub = [r for r in rows if r.fraction == fraction]
            _print_record({"fraction": fraction,
                           "ci_accuracy": float(np.mean([r.ci_accuracy for r in sub])),
                           "civi_accuracy": float(np.mean([r.civi_accuracy for r in sub]))})
    else:
        results = experiments.active_vs_random(pool_size=args.pool_size, seeds=seeds,
                                               rounds=args.rounds, out_dir=args.out_dir)
        manifest.add_output(f"{args.out_dir}/active_curves.csv")
        manifest.config = {"pool_size": args.pool_size, "rounds": args.rounds}
        for policy, runs in results.items():
            _print_record({"policy": policy,
                           "final_accuracy": float(np.mean([r.overall_accuracy[-1] for r in runs]))})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irtkit",
                                     description="Latent-trait models for binary exam responses.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, out_required=True):
        p.add_argument("--manifest", default=None, help="manifest path (default: <out>.manifest.json)")

    p = sub.add_parser("ingest", help="normalize a response CSV and optionally split it")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("raw", "binary"), default="raw")
    p.add_argument("--out", required=True, help="normalized pre-binarized CSV")
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--train-out", default=None)
    p.add_argument("--test-out", default=None)
    p.add_argument("--seed", type=int, default=0)
    add_common(p)

    p = sub.add_parser("train", help="train a point-estimate model by SGD")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("raw", "binary"), default="binary")
    p.add_argument("--model", choices=POINT_KINDS, required=True)
    p.add_argument("--dims", type=int, default=1)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--init-scale", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warm-start", default=None, help="checkpoint to initialize from")
    p.add_argument("--out", required=True, help="checkpoint path")
    add_common(p)

    p = sub.add_parser("train-vi", help="train a variational model by ELBO ascent")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("raw", "binary"), default="binary")
    p.add_argument("--model", choices=VI_KINDS, required=True)
    p.add_argument("--dims", type=int, default=1)
    p.add_argument("--samples", type=int, default=5, help="Monte Carlo samples per ELBO estimate")
    p.add_argument("--sigma-init", type=float, default=0.8)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warm-start", default=None, help="point-model checkpoint to initialize from")
    p.add_argument("--out", required=True)
    add_common(p)

    p = sub.add_parser("eval", help="score a checkpoint on a data file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("raw", "binary"), default="binary")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", default=None, help="optional metrics JSON path")
    add_common(p)

    p = sub.add_parser("synth", help="generate a synthetic response dataset")
    p.add_argument("--students", type=int, required=True)
    p.add_argument("--questions", type=int, required=True)
    p.add_argument("--dims", type=int, default=1)
    p.add_argument("--mean-bq", type=float, default=-3.0)
    p.add_argument("--std-bq", type=float, default=1.0)
    p.add_argument("--classes", type=int, default=0)
    p.add_argument("--class-effect-std", type=float, default=0.0)
    p.add_argument("--keep-prob", type=float, default=1.0)
    p.add_argument("--outcome", choices=("sample", "threshold"), default="sample",
                   help="Bernoulli draws (default) or the most-likely outcome per cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exam-seed", type=int, default=None,
                   help="optional separate seed fixing the question paper")
    p.add_argument("--out", required=True, help="pre-binarized CSV path")
    p.add_argument("--truth", default=None, help="optional JSON path for generating latents")
    add_common(p)

    p = sub.add_parser("interpret", help="emit the question-embedding cosine similarity matrix")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="Q x Q CSV with question-id headers")
    p.add_argument("--rescale-display", action="store_true",
                   help="min-max rescale off-diagonal entries for heatmap display")
    add_common(p)

    p = sub.add_parser("significance", help="two-proportion z-test")
    p.add_argument("--x1", type=int, required=True)
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--x2", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--alpha", type=float, action="append", default=None)
    add_common(p)

    p = sub.add_parser("active", help="run one active learning curve")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("raw", "binary"), default="binary")
    p.add_argument("--pool-size", type=int, default=2000)
    p.add_argument("--policy", choices=(active_mod.UNCERTAINTY, active_mod.RANDOM), required=True)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--rounds", type=int, default=70)
    p.add_argument("--holdout-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="curve CSV path")
    add_common(p)

    p = sub.add_parser("experiment", help="run a named multi-step protocol")
    p.add_argument("recipe", choices=experiments.RECIPES)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated seed list")
    p.add_argument("--students", type=int, default=40_000,
                   help="recovery scale (10000 is the documented sub-scale fallback)")
    p.add_argument("--fractions", default="1.0,0.5,0.25,0.15")
    p.add_argument("--pool-size", type=int, default=2000)
    p.add_argument("--rounds", type=int, default=56)
    add_common(p)

    return parser


_HANDLERS = {
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "train-vi": _cmd_train_vi,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "interpret": _cmd_interpret,
    "significance": _cmd_significance,
    "active": _cmd_active,
    "experiment": _cmd_experiment,
}


def dispatch(argv) -> int:
    """Parse argv, run the subcommand, write its manifest; return exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "significance" and args.alpha is None:
        args.alpha = [0.01]
    manifest = ManifestWriter(["irtkit"] + list(argv))
    try:
        code = _HANDLERS[args.command](args, manifest)
    except Exception as exc:  # noqa: BLE001 - single-line machine-parseable error contract
        print(f"error: {exc}", file=sys.stderr)
        return 1
    anchor = getattr(args, "out", None) or getattr(args, "out_dir", None)
    if anchor and anchor != ".":
        anchor = anchor.rstrip("/")
        if args.command == "experiment":
            anchor = anchor + "/experiment"
    manifest_path = _manifest_path(args, anchor)
    manifest.write(manifest_path)
    return code


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
