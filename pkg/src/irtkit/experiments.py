"""Multi-step experiment presets with fixed seeds and plot-ready CSV output.

Three recipes: a synthetic recovery run comparing the ability-difficulty
and 1-D interaction models, a low-data sweep comparing the point class
interaction model against its variational counterpart across student
subsample fractions, and an uncertainty-vs-random active learning
comparison on a pool of new students.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .active import RANDOM, UNCERTAINTY, ActiveConfig, make_pool_state, run_active_loop
from .data import split_train_test, subsample_students
from .metrics import accuracy
from .models import CLASS_INTERACTION, INTERACTION, RASCH, ModelSpec, predict_proba_array
from .optim import TrainConfig, sgd_train
from .synth import SynthConfig, generate_synthetic
from .vi import CLASS_INTERACTION_VI, VIConfig, predict_proba_vi_array, train_vi

RECIPES = ("appendix-c-recovery", "low-data-sweep", "active-vs-random")

# Derived sub-seed offsets so one --seed drives every component distinctly.
SEED_DATA = 1000
SEED_SPLIT = 2000
SEED_TRAIN = 3000
SEED_POOL = 4000

# Fixed exam realization for the recovery experiment: absolute accuracy
# is a property of one question paper's correctness rate, so the exam is
# held fixed and only student populations vary across seeds.
RECOVERY_EXAM_SEED = 60


def _write_csv(path: str, header: list[str], rows: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _heldout_accuracy(spec, params, split) -> float:
    p = predict_proba_array(spec, params, split.test.student_idx, split.test.question_idx,
                            split.test.class_of)
    return accuracy(p, split.test.y).accuracy


@dataclass
class RecoveryRow:
    model: str
    seed: int
    students: int
    accuracy: float


def recovery_run(students: int = 40_000, questions: int = 24, seeds=(0, 1, 2, 3, 4),
                 test_fraction: float = 0.2, epochs: int = 60, out_dir: str | None = None):
    """Synthetic recovery: dense 1-D interaction data, both point models.

    Outcomes are the model's most-likely responses (threshold variant):
    that is the regime in which the recovery accuracies are stable and
    the interaction model reliably beats the ability-difficulty model.
    Returns the per-seed accuracy rows.
    """
    rows: list[RecoveryRow] = []
    for seed in seeds:
        data, _ = generate_synthetic(SynthConfig(students=students, questions=questions, dims=1,
                                                 mean_bq=-3.0, outcome="threshold",
                                                 seed=seed + SEED_DATA,
                                                 exam_seed=RECOVERY_EXAM_SEED))
        split = split_train_test(data, test_fraction, seed + SEED_SPLIT)
        for name, spec, cfg in (
            (RASCH, ModelSpec(RASCH),
             TrainConfig(learning_rate=0.1, epochs=epochs, seed=seed + SEED_TRAIN)),
            (INTERACTION, ModelSpec(INTERACTION, 1),
             TrainConfig(learning_rate=0.1, epochs=epochs, init_scale=0.1, seed=seed + SEED_TRAIN)),
        ):
            params, _ = sgd_train(spec, split.train, cfg)
            rows.append(RecoveryRow(name, seed, students, _heldout_accuracy(spec, params, split)))

    if out_dir:
        _write_csv(os.path.join(out_dir, "recovery.csv"),
                   ["model", "seed", "students", "accuracy"],
                   [(r.model, r.seed, r.students, r.accuracy) for r in rows])
        summary = []
        for name in (RASCH, INTERACTION):
            accs = [r.accuracy for r in rows if r.model == name]
            summary.append((name, students, float(np.mean(accs)), float(min(accs)), float(max(accs))))
        _write_csv(os.path.join(out_dir, "recovery_summary.csv"),
                   ["model", "students", "mean_accuracy", "min_accuracy", "max_accuracy"], summary)
    return rows


@dataclass
class LowDataRow:
    fraction: float
    students: int
    seed: int
    ci_accuracy: float
    civi_accuracy: float


def low_data_synth_config(seed: int) -> SynthConfig:
    """Class-structured generator used by the low-data sweep."""
    return SynthConfig(students=4000, questions=24, dims=3, mean_bq=0.0,
                       num_classes=40, class_effect_std=1.0, std_xs=0.0, seed=seed)


def low_data_sweep(fractions=(1.0, 0.5, 0.25, 0.15), seeds=(0, 1, 2, 3, 4),
                   dims: int = 3, test_fraction: float = 0.2,
                   point_epochs: int = 150, vi_epochs: int = 800, vi_lr: float = 0.002,
                   out_dir: str | None = None):
    """Point class interaction vs its VI twin across subsample fractions.

    The VI model is warm-started from the trained point model with its
    ability standard deviations initialised at 0.8, mirroring the
    low-data protocol. Rows are paired: both models see identical data
    and splits per (fraction, seed).
    """
    rows: list[LowDataRow] = []
    for seed in seeds:
        full, _ = generate_synthetic(low_data_synth_config(seed + SEED_DATA))
        for fraction in fractions:
            sub = full if fraction == 1.0 else subsample_students(full, fraction, seed + SEED_SPLIT)
            split = split_train_test(sub, test_fraction, seed + SEED_SPLIT)
            spec = ModelSpec(CLASS_INTERACTION, dims)
            point_cfg = TrainConfig(learning_rate=0.1, epochs=point_epochs, init_scale=0.1,
                                    seed=seed + SEED_TRAIN)
            point_params, _ = sgd_train(spec, split.train, point_cfg)
            ci_acc = _heldout_accuracy(spec, point_params, split)

            vi_cfg = VIConfig(samples=5, sigma_init=0.8, learning_rate=vi_lr, epochs=vi_epochs,
                              seed=seed + SEED_TRAIN, warm_start=point_params)
            vi_params, _ = train_vi(CLASS_INTERACTION_VI, split.train, vi_cfg, dims=dims)
            p = predict_proba_vi_array(vi_params, split.test.student_idx, split.test.question_idx,
                                       split.test.class_of)
            civi_acc = accuracy(p, split.test.y).accuracy
            rows.append(LowDataRow(fraction, sub.num_students, seed, ci_acc, civi_acc))

    if out_dir:
        _write_csv(os.path.join(out_dir, "low_data.csv"),
                   ["fraction", "students", "seed", "ci_accuracy", "civi_accuracy"],
                   [(r.fraction, r.students, r.seed, r.ci_accuracy, r.civi_accuracy) for r in rows])
        summary = []
        for fraction in fractions:
            sub_rows = [r for r in rows if r.fraction == fraction]
            summary.append((fraction, sub_rows[0].students,
                            float(np.mean([r.ci_accuracy for r in sub_rows])),
                            float(np.mean([r.civi_accuracy for r in sub_rows]))))
        _write_csv(os.path.join(out_dir, "low_data_summary.csv"),
                   ["fraction", "students", "ci_accuracy", "civi_accuracy"], summary)
    return rows


def active_synth_config(seed: int) -> SynthConfig:
    """Ability-difficulty generator for the active learning comparison."""
    return SynthConfig(students=3000, questions=70, dims=0, mean_bq=0.0, std_bq=2.0, seed=seed)


def active_vs_random(pool_size: int = 2000, seeds=(0, 1, 2, 3, 4), rounds: int = 56,
                     holdout_fraction: float = 0.2, out_dir: str | None = None):
    """Paired uncertainty-vs-random learning curves on a pool of new students.

    Both policies share the generator, pool construction, and seeds; only
    the selection rule differs. Returns {policy: [ActiveResult, ...]}.
    """
    results = {UNCERTAINTY: [], RANDOM: []}
    for seed in seeds:
        data, _ = generate_synthetic(active_synth_config(seed + SEED_DATA))
        state = make_pool_state(data, pool_size, holdout_fraction, seed + SEED_POOL)
        for policy in (UNCERTAINTY, RANDOM):
            cfg = ActiveConfig(policy=policy, batch_size=1, rounds=rounds,
                               retrain=TrainConfig(learning_rate=0.1, epochs=8, convergence_tol=0.0),
                               initial_epochs=30, seed=seed + SEED_TRAIN)
            results[policy].append(run_active_loop(state, cfg))

    if out_dir:
        rows = []
        for policy, runs in results.items():
            for res in runs:
                for k, acc in zip(res.questions_revealed, res.overall_accuracy):
                    rows.append((k, acc, policy, res.seed))
        _write_csv(os.path.join(out_dir, "active_curves.csv"),
                   ["questions_revealed", "accuracy", "policy", "seed"], rows)
    return results
