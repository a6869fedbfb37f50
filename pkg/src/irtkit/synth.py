"""Seeded synthetic response generation for recovery and low-data experiments.

Latents are drawn from configurable normals (question easiness defaults
to Normal(-3, 1), everything else to Normal(0, 1)); each cell's outcome
is a Bernoulli draw of the logistic of ability + easiness + skill dot
demand, plus a class-vector term when class structure is enabled. The
generated matrix is dense by default; keep_prob < 1 drops cells at
random for sparsity experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset, dataset_from_arrays
from .models import sigmoid


SAMPLE = "sample"        # y ~ Bernoulli(p), the default generative story
THRESHOLD = "threshold"  # y = 1 iff p > 0.5, the noiseless most-likely outcome


@dataclass
class SynthConfig:
    students: int = 1000
    questions: int = 24
    dims: int = 1
    mean_bq: float = -3.0
    std_bq: float = 1.0
    std_bs: float = 1.0
    std_xs: float = 1.0
    std_xq: float = 1.0
    num_classes: int = 0            # 0 disables class structure
    class_effect_std: float = 0.0
    keep_prob: float = 1.0
    outcome: str = SAMPLE
    seed: int = 0
    exam_seed: Optional[int] = None  # fix the question paper across student seeds

    def __post_init__(self):
        if self.students < 1 or self.questions < 1 or self.dims < 0:
            raise ValueError("students >= 1, questions >= 1, dims >= 0 required")
        if not 0.0 < self.keep_prob <= 1.0:
            raise ValueError("keep_prob must be in (0, 1]")
        if self.outcome not in (SAMPLE, THRESHOLD):
            raise ValueError(f"outcome must be {SAMPLE!r} or {THRESHOLD!r}")


@dataclass
class SynthTruth:
    """Generating latents, kept for recovery inspection, never for training."""

    ability: np.ndarray                      # (S,)
    easiness: np.ndarray                     # (Q,)
    skill: np.ndarray                        # (S, D)
    demand: np.ndarray                       # (Q, D)
    class_skill: Optional[np.ndarray] = None  # (C, D) when classes enabled
    class_of: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        out = {"ability": self.ability.tolist(), "easiness": self.easiness.tolist(),
               "skill": self.skill.tolist(), "demand": self.demand.tolist()}
        if self.class_skill is not None:
            out["class_skill"] = self.class_skill.tolist()
            out["class_of"] = self.class_of.tolist()
        return out


def generate_synthetic(cfg: SynthConfig) -> tuple[Dataset, SynthTruth]:
    """Sample latents, then Bernoulli responses for every (student, question) cell.

    Students are assigned to classes round-robin when num_classes > 0.
    Deterministic per seed; the same seed yields byte-identical outputs.
    When exam_seed is set, the question-side latents come from their own
    stream so one fixed exam paper can be reused across student seeds.
    """
    rng = np.random.default_rng(cfg.seed)
    exam_rng = rng if cfg.exam_seed is None else np.random.default_rng(cfg.exam_seed)
    S, Q, D = cfg.students, cfg.questions, cfg.dims
    ability = rng.normal(0.0, cfg.std_bs, S)
    easiness = exam_rng.normal(cfg.mean_bq, cfg.std_bq, Q)
    skill = rng.normal(0.0, cfg.std_xs, (S, D))
    demand = exam_rng.normal(0.0, cfg.std_xq, (Q, D))

    logits = ability[:, None] + easiness[None, :]
    if D > 0:
        logits = logits + skill @ demand.T

    if cfg.num_classes > 0:
        class_of = np.arange(S, dtype=np.int64) % cfg.num_classes
        class_skill = rng.normal(0.0, cfg.class_effect_std, (cfg.num_classes, D))
        if D > 0:
            logits = logits + class_skill[class_of] @ demand.T
        class_ids = tuple(f"c{i}" for i in range(cfg.num_classes))
    else:
        class_of = np.zeros(S, dtype=np.int64)
        class_skill = None
        class_ids = ("c0",)

    p = sigmoid(logits)
    if cfg.outcome == SAMPLE:
        y = (rng.random((S, Q)) < p).astype(np.int8)
    else:
        y = (p > 0.5).astype(np.int8)

    s_idx = np.repeat(np.arange(S, dtype=np.int64), Q)
    q_idx = np.tile(np.arange(Q, dtype=np.int64), S)
    y_flat = y.reshape(-1)
    if cfg.keep_prob < 1.0:
        keep = rng.random(S * Q) < cfg.keep_prob
        s_idx, q_idx, y_flat = s_idx[keep], q_idx[keep], y_flat[keep]

    dataset = dataset_from_arrays(
        s_idx, q_idx, y_flat, class_of,
        student_ids=tuple(f"s{i}" for i in range(S)),
        question_ids=tuple(f"q{i}" for i in range(Q)),
        class_ids=class_ids,
    )
    truth = SynthTruth(ability=ability, easiness=easiness, skill=skill, demand=demand,
                       class_skill=class_skill,
                       class_of=class_of if cfg.num_classes > 0 else None)
    return dataset, truth
