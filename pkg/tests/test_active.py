"""Active learning: selection rule, pool bookkeeping, and learning curves."""

import warnings

import numpy as np
import pytest

from irtkit.active import (
    ActiveConfig,
    ability_bucket_report,
    make_pool_state,
    run_active_loop,
    select_next,
)
from irtkit.optim import TrainConfig
from irtkit.synth import SynthConfig, generate_synthetic


class TestSelectNext:
    def test_closest_to_half_wins(self):
        assert select_next({1: 0.9, 2: 0.55, 3: 0.2}, set()) == 2

    def test_tie_breaks_to_lowest_index(self):
        assert select_next({1: 0.4, 2: 0.6}, set()) == 1

    def test_forced_choice(self):
        probs = {q: 0.5 for q in range(10)}
        assert select_next(probs, set(range(10)) - {7}) == 7

    def test_no_candidates_is_an_error(self):
        with pytest.raises(ValueError):
            select_next({1: 0.5}, {1})

    def test_invariant_to_map_iteration_order(self):
        probs = {3: 0.52, 1: 0.48, 2: 0.9}
        reordered = {2: 0.9, 1: 0.48, 3: 0.52}
        assert select_next(probs, set()) == select_next(reordered, set())


def _small_world(seed=0, students=60, questions=12):
    data, truth = generate_synthetic(SynthConfig(students=students, questions=questions,
                                                 dims=0, mean_bq=0.0, std_bq=1.5, seed=seed))
    return data, truth


class TestMakePoolState:
    def test_sets_are_disjoint_and_cover_answers(self):
        data, _ = _small_world()
        state = make_pool_state(data, pool_size=20, holdout_fraction=0.25, seed=1)
        assert state.base.num_students == 40
        for student in state.pool:
            held = set(student.test_holdout)
            hidden = set(student.hidden)
            assert not (held & hidden)
            assert len(held) + len(hidden) == 12
            assert not student.revealed

    def test_pool_students_absent_from_base(self):
        data, _ = _small_world()
        state = make_pool_state(data, pool_size=10, seed=2)
        assert set(state.base.student_ids) | {p.student_id for p in state.pool} == set(data.student_ids)

    def test_pool_size_bounds(self):
        data, _ = _small_world()
        with pytest.raises(ValueError):
            make_pool_state(data, pool_size=60, seed=0)


def _loop_config(policy, rounds, seed=0, epochs=40):
    return ActiveConfig(policy=policy, batch_size=1, rounds=rounds,
                        retrain=TrainConfig(learning_rate=0.3, epochs=epochs, batch_size=256,
                                            convergence_tol=0.0),
                        initial_epochs=60, seed=seed)


class TestRunActiveLoop:
    def test_round_zero_identical_across_policies(self):
        data, _ = _small_world()
        state = make_pool_state(data, pool_size=15, seed=3)
        unc = run_active_loop(state, _loop_config("uncertainty", rounds=2))
        rnd = run_active_loop(state, _loop_config("random", rounds=2))
        assert unc.overall_accuracy[0] == rnd.overall_accuracy[0]

    def test_input_state_is_not_mutated(self):
        data, _ = _small_world()
        state = make_pool_state(data, pool_size=10, seed=4)
        run_active_loop(state, _loop_config("uncertainty", rounds=3))
        assert all(not p.revealed for p in state.pool)

    def test_curves_are_bit_reproducible(self):
        data, _ = _small_world()
        state = make_pool_state(data, pool_size=12, seed=5)
        a = run_active_loop(state, _loop_config("random", rounds=4, seed=9))
        b = run_active_loop(state, _loop_config("random", rounds=4, seed=9))
        assert a.overall_accuracy == b.overall_accuracy
        assert np.array_equal(a.per_student_accuracy, b.per_student_accuracy)

    def test_truncates_with_warning_when_pool_is_exhausted(self):
        data, _ = _small_world()
        state = make_pool_state(data, pool_size=8, holdout_fraction=0.25, seed=6)
        with pytest.warns(UserWarning, match="truncating"):
            result = run_active_loop(state, _loop_config("uncertainty", rounds=50))
        assert len(result.questions_revealed) <= 11

    def test_policies_converge_once_everything_is_revealed(self):
        data, _ = _small_world(students=80)
        state = make_pool_state(data, pool_size=20, holdout_fraction=0.25, seed=7)
        curves = {}
        for policy in ("uncertainty", "random"):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                curves[policy] = run_active_loop(
                    state, _loop_config(policy, rounds=9, epochs=120, seed=11)).overall_accuracy
        assert abs(curves["uncertainty"][-1] - curves["random"][-1]) <= 0.002


class TestAbilityBucketReport:
    def _result(self):
        data, truth = _small_world(students=90)
        state = make_pool_state(data, pool_size=30, seed=8)
        result = run_active_loop(state, _loop_config("uncertainty", rounds=3))
        order = {sid: i for i, sid in enumerate(data.student_ids)}
        abilities = np.array([truth.ability[order[p.student_id]] for p in state.pool])
        return result, abilities

    def test_single_bucket_equals_overall_curve(self):
        result, abilities = self._result()
        report = ability_bucket_report(result, abilities, cut_points=[])
        (label, bucket), = report.items()
        np.testing.assert_allclose(bucket["curve"], result.overall_accuracy, atol=1e-12)

    def test_weighted_bucket_mean_recovers_overall(self):
        result, abilities = self._result()
        cuts = np.quantile(abilities, [1 / 3, 2 / 3])
        report = ability_bucket_report(result, abilities, cut_points=list(cuts))
        total = np.zeros(len(result.overall_accuracy))
        n = 0
        for bucket in report.values():
            total += np.array(bucket["curve"]) * bucket["count"]
            n += bucket["count"]
        np.testing.assert_allclose(total / n, result.overall_accuracy, atol=1e-9)

    def test_empty_bucket_is_omitted(self):
        result, abilities = self._result()
        report = ability_bucket_report(result, abilities, cut_points=[100.0])
        assert len(report) == 1

    def test_mid_tertile_is_hardest_once_abilities_are_learned(self):
        """Mid-ability students sit nearest p = 0.5, so once the loop has
        revealed enough answers to estimate abilities, their accuracy
        trails both outer tertiles (averaged over 5 seeds)."""
        lows, mids, highs = [], [], []
        for seed in range(5):
            data, truth = generate_synthetic(SynthConfig(students=150, questions=20, dims=0,
                                                         mean_bq=0.0, std_bq=1.5, seed=seed))
            state = make_pool_state(data, pool_size=60, holdout_fraction=0.3, seed=seed + 50)
            cfg = ActiveConfig(policy="uncertainty", batch_size=1, rounds=14,
                               retrain=TrainConfig(learning_rate=0.3, epochs=40, batch_size=256,
                                                   convergence_tol=0.0),
                               initial_epochs=50, seed=seed + 90)
            result = run_active_loop(state, cfg)
            order = {sid: i for i, sid in enumerate(data.student_ids)}
            abilities = np.array([truth.ability[order[p.student_id]] for p in state.pool])
            cuts = np.quantile(abilities, [1 / 3, 2 / 3])
            rep = ability_bucket_report(result, abilities, list(cuts))
            low, mid, high = (rep[k]["curve"][-1] for k in rep)
            lows.append(low)
            mids.append(mid)
            highs.append(high)
        assert np.mean(mids) <= np.mean(lows)
        assert np.mean(mids) <= np.mean(highs)
