"""Pool-based active learning for brand-new students.

The ability-difficulty model is fit on an initial labelled base. New
pool students start with no revealed answers; each round the policy
picks which of their unanswered questions to query (uncertainty: the
question whose predicted probability is closest to 0.5; random: a
uniform draw), the oracle label is revealed, the model is retrained
warm-started for a capped number of epochs, and accuracy on each pool
student's reserved holdout questions is recorded.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset
from .models import RASCH, ModelSpec, RaschParams, sigmoid
from .optim import TrainConfig, sgd_train

UNCERTAINTY = "uncertainty"
RANDOM = "random"


@dataclass
class PoolStudent:
    student_id: str
    revealed: dict            # question index -> label, in reveal order
    hidden: dict              # question index -> label, the queryable oracle
    test_holdout: dict        # question index -> label, reserved for scoring


@dataclass
class PoolState:
    base: Dataset
    pool: list                # list[PoolStudent]; disjoint from base students


@dataclass
class ActiveConfig:
    policy: str = UNCERTAINTY
    batch_size: int = 1
    rounds: int = 10
    retrain: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=5))
    initial_epochs: int = 30  # fuller schedule for the round-0 base fit
    seed: int = 0

    def __post_init__(self):
        if self.policy not in (UNCERTAINTY, RANDOM):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ActiveResult:
    policy: str
    seed: int
    questions_revealed: list           # per round, questions revealed per student so far
    overall_accuracy: list             # mean over pool students, per round
    per_student_accuracy: np.ndarray   # (rounds + 1, pool size)


def make_pool_state(d: Dataset, pool_size: int, holdout_fraction: float = 0.2, seed: int = 0) -> PoolState:
    """Carve pool_size students out of a dataset as unseen newcomers.

    Each pool student's answers are split into a reserved test holdout
    (about holdout_fraction of them, at least one) and a hidden oracle
    the policies may query. Remaining students form the labelled base.
    """
    if not 0 < pool_size < d.num_students:
        raise ValueError("pool_size must leave at least one base student")
    rng = np.random.default_rng(seed)
    pool_ids = np.sort(rng.choice(d.num_students, size=pool_size, replace=False))
    pool_set = set(int(i) for i in pool_ids)

    base_students = np.array([s for s in range(d.num_students) if s not in pool_set], dtype=np.int64)
    remap = np.full(d.num_students, -1, dtype=np.int64)
    remap[base_students] = np.arange(base_students.shape[0])
    base_mask = remap[d.student_idx] >= 0
    base = Dataset(
        student_idx=remap[d.student_idx[base_mask]],
        question_idx=d.question_idx[base_mask].copy(),
        y=d.y[base_mask].copy(),
        num_students=int(base_students.shape[0]),
        num_questions=d.num_questions,
        num_classes=d.num_classes,
        class_of=d.class_of[base_students].copy(),
        student_ids=tuple(d.student_ids[i] for i in base_students),
        question_ids=d.question_ids,
        class_ids=d.class_ids,
    )

    pool: list[PoolStudent] = []
    for s in pool_ids:
        positions = np.flatnonzero(d.student_idx == s)
        answers = {int(d.question_idx[i]): int(d.y[i]) for i in positions}
        qs = np.array(sorted(answers), dtype=np.int64)
        k = max(1, int(np.floor(holdout_fraction * qs.size + 0.5)))
        k = min(k, qs.size - 1) if qs.size > 1 else qs.size
        held = set(int(q) for q in rng.choice(qs, size=k, replace=False))
        pool.append(PoolStudent(
            student_id=d.student_ids[s],
            revealed={},
            hidden={q: answers[q] for q in sorted(answers) if q not in held},
            test_holdout={q: answers[q] for q in sorted(held)},
        ))
    return PoolState(base=base, pool=pool)


def select_next(probabilities: dict, already_revealed: set) -> int:
    """Uncertainty rule: unrevealed question with probability closest to 0.5.

    Ties break toward the lowest question index, which also makes the
    choice independent of map iteration order.
    """
    candidates = [q for q in probabilities if q not in already_revealed]
    if not candidates:
        raise ValueError("no unrevealed question to select")
    return min(candidates, key=lambda q: (abs(probabilities[q] - 0.5), q))


def _combined_dataset(state: PoolState) -> Dataset:
    """Base responses plus every revealed pool answer, pool students appended."""
    base = state.base
    extra_s, extra_q, extra_y = [], [], []
    for j, student in enumerate(state.pool):
        for q, label in student.revealed.items():
            extra_s.append(base.num_students + j)
            extra_q.append(q)
            extra_y.append(label)
    class_of = np.concatenate([base.class_of, np.zeros(len(state.pool), dtype=np.int64)])
    return Dataset(
        student_idx=np.concatenate([base.student_idx, np.array(extra_s, dtype=np.int64)]),
        question_idx=np.concatenate([base.question_idx, np.array(extra_q, dtype=np.int64)]),
        y=np.concatenate([base.y, np.array(extra_y, dtype=np.int8)]),
        num_students=base.num_students + len(state.pool),
        num_questions=base.num_questions,
        num_classes=base.num_classes,
        class_of=class_of,
        student_ids=base.student_ids + tuple(p.student_id for p in state.pool),
        question_ids=base.question_ids,
        class_ids=base.class_ids,
    )


def _holdout_accuracies(state: PoolState, params: RaschParams, threshold: float = 0.5) -> np.ndarray:
    base_s = state.base.num_students
    accs = np.empty(len(state.pool))
    for j, student in enumerate(state.pool):
        qs = np.fromiter(student.test_holdout.keys(), dtype=np.int64)
        ys = np.fromiter(student.test_holdout.values(), dtype=np.int64)
        p = sigmoid(params.ability[base_s + j] + params.easiness[qs])
        accs[j] = np.mean((p >= threshold) == (ys == 1))
    return accs


def run_active_loop(state: PoolState, cfg: ActiveConfig) -> ActiveResult:
    """Reveal-retrain loop; returns the learning curve for cfg.policy.

    Pool students enter with ability 0 (the population prior mean), so
    round 0 scores question-difficulty-only predictions. Each subsequent
    round reveals cfg.batch_size answers per student (selected exactly as
    select_next does, vectorized across students), retrains the
    ability-difficulty model warm-started from the previous round, and
    scores the reserved holdouts. Rounds that outrun a student's hidden
    answers reveal whatever remains; the loop truncates with a warning
    once every hidden answer is out.
    """
    if not state.pool:
        raise ValueError("pool must be non-empty")
    spec = ModelSpec(RASCH)
    rng = np.random.default_rng(cfg.seed)
    # work on a copy so paired policy runs can share one PoolState
    state = PoolState(base=state.base,
                      pool=[replace(p, revealed=dict(p.revealed)) for p in state.pool])
    base_s = state.base.num_students
    P, Q = len(state.pool), state.base.num_questions

    queryable = np.zeros((P, Q), dtype=bool)
    for j, student in enumerate(state.pool):
        queryable[j, list(student.hidden)] = True
        queryable[j, list(student.revealed)] = False

    combined = _combined_dataset(state)
    initial_cfg = replace(cfg.retrain, epochs=cfg.initial_epochs, seed=cfg.seed)
    params, _ = sgd_train(spec, combined, initial_cfg)
    # cold-start pool abilities at the prior mean
    params.ability[base_s:] = 0.0

    per_round = [_holdout_accuracies(state, params)]
    revealed_counts = [0]

    rounds_done = 0
    for r in range(1, cfg.rounds + 1):
        if not queryable.any():
            warnings.warn(f"all hidden answers revealed after {rounds_done} rounds; truncating")
            break
        if cfg.policy == UNCERTAINTY:
            probs = sigmoid(params.ability[base_s:, None] + params.easiness[None, :])
            scores = np.where(queryable, np.abs(probs - 0.5), np.inf)
        for j, student in enumerate(state.pool):
            for _ in range(cfg.batch_size):
                open_qs = np.flatnonzero(queryable[j])
                if open_qs.size == 0:
                    break
                if cfg.policy == UNCERTAINTY:
                    q_next = int(np.argmin(scores[j]))  # first minimum = lowest index
                    scores[j, q_next] = np.inf
                else:
                    q_next = int(rng.choice(open_qs))
                queryable[j, q_next] = False
                student.revealed[q_next] = student.hidden[q_next]
        combined = _combined_dataset(state)
        retrain_cfg = replace(cfg.retrain, seed=cfg.seed + r)
        params, _ = sgd_train(spec, combined, retrain_cfg, warm_start=params)
        per_round.append(_holdout_accuracies(state, params))
        revealed_counts.append(revealed_counts[-1] + cfg.batch_size)
        rounds_done = r

    per_student = np.vstack(per_round)
    return ActiveResult(
        policy=cfg.policy,
        seed=cfg.seed,
        questions_revealed=revealed_counts,
        overall_accuracy=[float(np.mean(row)) for row in per_student],
        per_student_accuracy=per_student,
    )


def ability_bucket_report(result: ActiveResult, abilities, cut_points) -> dict:
    """Split the pool by ability and average each bucket's learning curve.

    Buckets are the half-open intervals between consecutive cut points
    (outermost buckets unbounded). Empty buckets are omitted. The
    bucket-size-weighted mean of the bucket curves equals the overall
    curve.
    """
    abilities = np.asarray(abilities, dtype=np.float64)
    if abilities.shape[0] != result.per_student_accuracy.shape[1]:
        raise ValueError("need one ability value per pool student")
    edges = [-np.inf] + sorted(float(c) for c in cut_points) + [np.inf]
    report = {}
    for i in range(len(edges) - 1):
        mask = (abilities > edges[i]) & (abilities <= edges[i + 1])
        if not mask.any():
            continue
        label = f"({edges[i]:g}, {edges[i + 1]:g}]"
        report[label] = {
            "count": int(mask.sum()),
            "curve": [float(v) for v in result.per_student_accuracy[:, mask].mean(axis=1)],
        }
    return report
