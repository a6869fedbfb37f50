"""Maximum-likelihood training by mini-batch stochastic gradient descent.

The objective is the Bernoulli negative log-likelihood summed over
observed responses, computed in the cancellation-free form
log(1 + e^z) - y*z per observation. Gradients are analytic (residual
form sigma(z) - y) and checked against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .data import Dataset
from .models import (
    CLASS_INTERACTION,
    INTERACTION,
    RASCH,
    ClassInteractionParams,
    InteractionParams,
    ModelSpec,
    RaschParams,
    logits_array,
    sigmoid,
    softplus,
)


class TrainingDiverged(RuntimeError):
    """Raised when the training objective becomes non-finite."""


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 50
    batch_size: int = 1024
    l2_penalty: float = 1e-4
    seed: int = 0
    init_scale: float = 0.01
    convergence_tol: float = 1e-5

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainReport:
    final_nll: float
    epochs_run: int
    nll_trace: list


def init_params(spec: ModelSpec, num_students: int, num_questions: int, num_classes: int, rng, init_scale: float):
    def draw(*shape):
        return rng.normal(0.0, init_scale, size=shape) if init_scale > 0 else np.zeros(shape)

    if spec.kind == RASCH:
        return RaschParams(draw(num_students), draw(num_questions))
    if spec.kind == INTERACTION:
        return InteractionParams(
            draw(num_students), draw(num_questions),
            draw(num_students, spec.dims), draw(num_questions, spec.dims),
        )
    return ClassInteractionParams(
        draw(num_students), draw(num_questions),
        draw(num_classes, spec.dims), draw(num_questions, spec.dims),
    )


def copy_params(params):
    return replace(params, **{f.name: getattr(params, f.name).copy() for f in fields(params)})


def nll(spec: ModelSpec, params, data: Dataset) -> float:
    """Total Bernoulli negative log-likelihood over the observed cells."""
    z = logits_array(spec, params, data.student_idx, data.question_idx, data.class_of)
    return float(np.sum(softplus(z) - data.y * z))


def _grad_arrays(spec, params, s_idx, q_idx, y, class_of):
    """Sum-over-batch gradient of the NLL; residual r = sigma(z) - y."""
    z = logits_array(spec, params, s_idx, q_idx, class_of)
    r = sigmoid(z) - y
    S = params.ability.shape[0]
    Q = params.easiness.shape[0]
    g_ability = np.bincount(s_idx, weights=r, minlength=S)
    g_easiness = np.bincount(q_idx, weights=r, minlength=Q)
    if spec.kind == RASCH:
        return RaschParams(g_ability, g_easiness)
    if spec.kind == INTERACTION:
        g_skill = np.empty_like(params.skill)
        g_demand = np.empty_like(params.demand)
        for d in range(spec.dims):
            g_skill[:, d] = np.bincount(s_idx, weights=r * params.demand[q_idx, d], minlength=S)
            g_demand[:, d] = np.bincount(q_idx, weights=r * params.skill[s_idx, d], minlength=Q)
        return InteractionParams(g_ability, g_easiness, g_skill, g_demand)
    c_idx = class_of[s_idx]
    C = params.class_skill.shape[0]
    g_class = np.empty_like(params.class_skill)
    g_demand = np.empty_like(params.demand)
    for d in range(spec.dims):
        g_class[:, d] = np.bincount(c_idx, weights=r * params.demand[q_idx, d], minlength=C)
        g_demand[:, d] = np.bincount(q_idx, weights=r * params.class_skill[c_idx, d], minlength=Q)
    return ClassInteractionParams(g_ability, g_easiness, g_class, g_demand)


def grad_nll(spec: ModelSpec, params, batch: Dataset, l2_penalty: float = 0.0):
    """Analytic gradient of the batch NLL, plus l2_penalty * param per tensor."""
    if batch.n_responses == 0:
        raise ValueError("batch must be non-empty")
    g = _grad_arrays(spec, params, batch.student_idx, batch.question_idx,
                     batch.y.astype(np.float64), batch.class_of)
    if l2_penalty:
        for f in fields(g):
            arr = getattr(g, f.name)
            arr += l2_penalty * getattr(params, f.name)
    return g


def sgd_train(spec: ModelSpec, data: Dataset, cfg: TrainConfig, warm_start=None):
    """Shuffled mini-batch SGD on the summed NLL; returns best-NLL params seen.

    Parameters start at Normal(0, init_scale^2) draws unless warm_start
    supplies a matching parameter container. Each batch update subtracts
    learning_rate times the batch gradient (including the l2 term).
    Training stops early once the relative epoch-to-epoch NLL change
    drops below convergence_tol. Deterministic given cfg.seed.
    """
    if data.n_responses == 0:
        raise ValueError("training data must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    if warm_start is not None:
        _check_shapes(spec, warm_start, data)
        params = copy_params(warm_start)
    else:
        params = init_params(spec, data.num_students, data.num_questions, data.num_classes, rng, cfg.init_scale)

    y = data.y.astype(np.float64)
    n = data.n_responses
    initial_nll = nll(spec, params, data)
    best_nll = initial_nll
    best = copy_params(params)
    trace: list[float] = []
    prev = initial_nll
    epochs_run = 0

    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            b = perm[lo:lo + cfg.batch_size]
            g = _grad_arrays(spec, params, data.student_idx[b], data.question_idx[b], y[b], data.class_of)
            for f in fields(params):
                arr = getattr(params, f.name)
                arr -= cfg.learning_rate * (getattr(g, f.name) + cfg.l2_penalty * arr)
        epoch_nll = nll(spec, params, data)
        if not np.isfinite(epoch_nll):
            raise TrainingDiverged(f"non-finite training NLL at epoch {epoch} (learning rate too high?)")
        trace.append(epoch_nll)
        epochs_run = epoch
        if epoch_nll < best_nll:
            best_nll = epoch_nll
            best = copy_params(params)
        if abs(epoch_nll - prev) <= cfg.convergence_tol * max(abs(prev), 1e-12):
            break
        prev = epoch_nll

    assert best_nll <= initial_nll
    return best, TrainReport(final_nll=best_nll, epochs_run=epochs_run, nll_trace=trace)


def _check_shapes(spec, params, data: Dataset):
    expected = {
        RASCH: {"ability": (data.num_students,), "easiness": (data.num_questions,)},
        INTERACTION: {
            "ability": (data.num_students,), "easiness": (data.num_questions,),
            "skill": (data.num_students, spec.dims), "demand": (data.num_questions, spec.dims),
        },
        CLASS_INTERACTION: {
            "ability": (data.num_students,), "easiness": (data.num_questions,),
            "class_skill": (data.num_classes, spec.dims), "demand": (data.num_questions, spec.dims),
        },
    }[spec.kind]
    for name, shape in expected.items():
        got = getattr(params, name, None)
        if got is None or got.shape != shape:
            raise ValueError(f"warm-start shape mismatch for {name}: expected {shape}, got "
                             f"{None if got is None else got.shape}")


def finite_diff_check(spec: ModelSpec, params, data: Dataset, epsilon: float = 1e-5,
                      l2_penalty: float = 0.0) -> float:
    """Max relative discrepancy between grad_nll and central differences.

    The differenced objective matches grad_nll exactly: batch NLL plus
    (l2_penalty / 2) * sum of squared parameters.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")

    def objective():
        val = nll(spec, params, data)
        if l2_penalty:
            val += 0.5 * l2_penalty * sum(float(np.sum(getattr(params, f.name) ** 2)) for f in fields(params))
        return val

    analytic = grad_nll(spec, params, data, l2_penalty)
    worst = 0.0
    for f in fields(params):
        arr = getattr(params, f.name)
        g = getattr(analytic, f.name)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = arr[ix]
            arr[ix] = orig + epsilon
            hi = objective()
            arr[ix] = orig - epsilon
            lo = objective()
            arr[ix] = orig
            fd = (hi - lo) / (2.0 * epsilon)
            err = abs(g[ix] - fd) / max(abs(g[ix]), abs(fd), 1e-6)
            worst = max(worst, err)
    return worst
