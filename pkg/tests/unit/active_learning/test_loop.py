"""Tests for the active-learning loop and its state."""

import math

import numpy as np
import pytest

from thermocline_twin.exceptions import (
    DataError,
    DivergenceError,
    EmptyModelError,
    ParameterError,
)
from thermocline_twin.models.active_learning import (
    AlLoopConfig,
    AlRecord,
    AlState,
    MahalanobisStrategy,
    PredictionErrorStrategy,
    RandomStrategy,
)
from thermocline_twin.models.data import RngStream
from thermocline_twin.models.mvg import CoefficientEnsemble
from thermocline_twin.models.sindyc import LinearModel
from thermocline_twin.services.active_learning import (
    ActiveLearningRunner,
    AlInputs,
    BranchTrainer,
    evaluate_surrogate,
    query_mahalanobis,
    run_al_loop,
)
from thermocline_twin.services.active_learning.queries import query_random
from thermocline_twin.services.mvg import fit_mvg
from tests.conftest import PLANTED_A, PLANTED_B, PLANTED_D, planted_dataset, tiny_config
from tests.unit.active_learning.test_queries import OffsetSurrogate


class FlakyTrainer(BranchTrainer):
    """Fails once the selection grows past ``limit`` ids."""

    def __init__(self, limit: int) -> None:
        super().__init__()
        self.limit = limit

    def fit(self, branch, selected, pool=None, ensemble=None, stream=None):
        if len(selected) > self.limit:
            raise EmptyModelError("forced failure")
        return super().fit(branch, selected, pool, ensemble, stream)


class BrokenTrainer(BranchTrainer):
    """Returns a surrogate that cannot predict anything."""

    def fit(self, branch, selected, pool=None, ensemble=None, stream=None):
        return OffsetSurrogate({}, failing=tuple(range(1000)))


def _planted_inputs(n_pool: int = 8) -> AlInputs:
    pool = planted_dataset(PLANTED_A, PLANTED_B, PLANTED_D, n_traj=n_pool, seed=1)
    eval_set = planted_dataset(PLANTED_A, PLANTED_B, PLANTED_D, n_traj=2, seed=2)
    return AlInputs(pool=pool, eval_set=eval_set)


class TestAlState:
    """Test the loop state record."""

    @pytest.mark.unit
    @pytest.mark.models
    def test_advance_moves_ids(self):
        """Advancing moves ids from the pool into the selection."""
        state = AlState(selected=(1, 2), pool=(3, 4, 5))
        record = AlRecord(round=1, n_selected=3, added_ids=(4,), rmse=(1.0, 2.0), wall_s=0.0)
        after = state.advance((4,), record)
        assert after.selected == (1, 2, 4)
        assert after.pool == (3, 5)
        assert after.iteration == 1
        assert after.history == (record,)
        assert after.universe == state.universe

    @pytest.mark.unit
    @pytest.mark.models
    def test_partition_enforced(self):
        """Duplicates, overlaps and unknown additions raise DataError."""
        with pytest.raises(DataError):
            AlState(selected=(1, 1), pool=(2,))
        with pytest.raises(DataError):
            AlState(selected=(1,), pool=(1, 2))
        record = AlRecord(round=1, n_selected=2, rmse=(1.0, 1.0), wall_s=0.0)
        with pytest.raises(DataError):
            AlState(selected=(1,), pool=(2,)).advance((7,), record)

    @pytest.mark.unit
    @pytest.mark.models
    def test_record_score(self):
        """Scores divide channel errors by their scales."""
        record = AlRecord(round=0, n_selected=2, rmse=(0.5, 400.0), wall_s=0.0)
        assert record.score(np.array([0.1, 200.0])) == pytest.approx(7.0)

    @pytest.mark.unit
    @pytest.mark.models
    def test_branch_defaults(self):
        """MvG arms start larger than the trajectory arms."""
        assert AlLoopConfig.for_branch("mvg").init_size == 20
        assert AlLoopConfig.for_branch("mvg").batch_size == 10
        assert AlLoopConfig.for_branch("gru", max_rounds=3).max_rounds == 3
        assert AlLoopConfig.for_branch("fnn").init_size == 4


class TestEvaluateSurrogate:
    """Test pooled evaluation."""

    @pytest.mark.unit
    @pytest.mark.services
    def test_pooled_rmse(self):
        """Eval and experiment errors are per-channel RMSEs."""
        inputs = _planted_inputs()
        surrogate = OffsetSurrogate({0: 2.0, 1: 2.0, 5: 0.5})
        rmse, rmse_exp = evaluate_surrogate(
            surrogate, inputs.eval_set, inputs.pool.trajectories[5]
        )
        np.testing.assert_allclose(rmse, [2.0, 2.0], rtol=1e-9)
        np.testing.assert_allclose(rmse_exp, [0.5, 0.5], rtol=1e-9)
        assert evaluate_surrogate(surrogate, inputs.eval_set)[1] is None

    @pytest.mark.unit
    @pytest.mark.services
    def test_failure_propagates(self):
        """A failed eval prediction is raised."""
        inputs = _planted_inputs()
        with pytest.raises(DivergenceError):
            evaluate_surrogate(OffsetSurrogate({}, failing=(1,)), inputs.eval_set)


class TestRunAlLoop:
    """Test the per-arm loop."""

    def setup_method(self):
        """Setup test fixtures."""
        self.inputs = _planted_inputs()
        self.stream = RngStream(seed=9, stream_label="al/sindyc/active")

    @pytest.mark.unit
    @pytest.mark.services
    def test_rounds_and_partition(self):
        """Each round adds one batch; selection and pool stay a partition."""
        cfg = AlLoopConfig(init_size=2, batch_size=2, max_rounds=2, early_stop=False)
        state = run_al_loop(
            "sindyc", PredictionErrorStrategy(), cfg, self.inputs, self.stream, timing="off"
        )
        assert [r.round for r in state.history] == [0, 1, 2]
        assert [r.n_selected for r in state.history] == [2, 4, 6]
        assert len(state.selected) == 6
        assert set(state.selected) | set(state.pool) == set(self.inputs.pool.ids)
        assert state.history[0].added_ids == state.selected[:2]
        assert all(r.wall_s == 0.0 for r in state.history)
        assert all(not r.failed for r in state.history)

    @pytest.mark.unit
    @pytest.mark.services
    def test_initial_selection_from_init_stream(self):
        """The initial picks come from the init stream."""
        cfg = AlLoopConfig(init_size=3, batch_size=1, max_rounds=0)
        init_stream = RngStream(seed=1, stream_label="shared/init")
        state = run_al_loop(
            "sindyc", RandomStrategy(), cfg, self.inputs, self.stream, init_stream, timing="off"
        )
        assert state.selected == tuple(query_random(self.inputs.pool.ids, 3, init_stream))
        assert len(state.history) == 1

    @pytest.mark.unit
    @pytest.mark.services
    def test_reproducible(self):
        """Same streams and inputs give identical histories."""
        cfg = AlLoopConfig(init_size=2, batch_size=2, max_rounds=2, early_stop=False)
        first = run_al_loop("sindyc", RandomStrategy(), cfg, self.inputs, self.stream, timing="off")
        again = run_al_loop("sindyc", RandomStrategy(), cfg, self.inputs, self.stream, timing="off")
        assert first == again

    @pytest.mark.unit
    @pytest.mark.services
    def test_pool_exhaustion(self):
        """The loop stops when no candidates remain."""
        cfg = AlLoopConfig(init_size=2, batch_size=4, max_rounds=5, early_stop=False)
        state = run_al_loop(
            "sindyc", PredictionErrorStrategy(), cfg, self.inputs, self.stream, timing="off"
        )
        assert [r.n_selected for r in state.history] == [2, 6, 8]
        assert state.pool == ()

    @pytest.mark.unit
    @pytest.mark.services
    def test_early_stop(self):
        """Rounds without relative improvement trigger the patience stop."""
        cfg = AlLoopConfig(init_size=2, batch_size=1, max_rounds=6, patience=2, min_improvement=0.5)
        state = run_al_loop(
            "sindyc", PredictionErrorStrategy(), cfg, self.inputs, self.stream, timing="off"
        )
        assert len(state.history) == 3

    @pytest.mark.unit
    @pytest.mark.services
    def test_failed_round_keeps_previous_model(self):
        """A failing refit is recorded and the previous errors carried forward."""
        cfg = AlLoopConfig(init_size=2, batch_size=2, max_rounds=2, early_stop=False)
        state = run_al_loop(
            "sindyc",
            PredictionErrorStrategy(),
            cfg,
            self.inputs,
            self.stream,
            trainer=FlakyTrainer(limit=4),
            timing="off",
        )
        first, second, third = state.history
        assert not second.failed
        assert third.failed
        assert third.error == "forced failure"
        assert third.rmse == second.rmse
        assert third.n_selected == 6

    @pytest.mark.unit
    @pytest.mark.services
    def test_initial_evaluation_failure_recorded(self):
        """An initial model that cannot be evaluated scores infinity."""
        cfg = AlLoopConfig(init_size=2, batch_size=1, max_rounds=0)
        state = run_al_loop(
            "sindyc",
            RandomStrategy(),
            cfg,
            self.inputs,
            self.stream,
            trainer=BrokenTrainer(),
            timing="off",
        )
        record = state.history[0]
        assert record.failed
        assert record.rmse == (math.inf, math.inf)

    @pytest.mark.unit
    @pytest.mark.services
    def test_initial_fit_failure_is_fatal(self):
        """Without an initial model the arm cannot start."""
        cfg = AlLoopConfig(init_size=2, batch_size=1, max_rounds=1)
        with pytest.raises(EmptyModelError):
            run_al_loop(
                "sindyc",
                RandomStrategy(),
                cfg,
                self.inputs,
                self.stream,
                trainer=FlakyTrainer(limit=1),
            )

    @pytest.mark.unit
    @pytest.mark.services
    def test_invalid_setups(self):
        """Oversized starts and mismatched strategies raise ParameterError."""
        with pytest.raises(ParameterError):
            run_al_loop(
                "sindyc", RandomStrategy(), AlLoopConfig(init_size=9), self.inputs, self.stream
            )
        with pytest.raises(ParameterError):
            run_al_loop(
                "mvg", MahalanobisStrategy(), AlLoopConfig(init_size=2), self.inputs, self.stream
            )
        with pytest.raises(ParameterError):
            run_al_loop(
                "sindyc",
                MahalanobisStrategy(),
                AlLoopConfig(init_size=2, max_rounds=1),
                self.inputs,
                self.stream,
            )


class TestMvgArm:
    """Test the loop over candidate models."""

    def setup_method(self):
        """Setup test fixtures."""
        truth = LinearModel(A=PLANTED_A, B=PLANTED_B, d=PLANTED_D).flatten()
        rng = np.random.default_rng(12)
        self.truth = truth
        self.ensemble = CoefficientEnsemble(
            vectors=truth + 0.01 * rng.standard_normal((10, truth.size)),
            subset_ids=tuple((i,) for i in range(10)),
            model_ids=tuple(range(10)),
            state_dim=2,
            input_dim=4,
        )
        base = _planted_inputs()
        self.inputs = AlInputs(pool=base.pool, eval_set=base.eval_set, ensemble=self.ensemble)
        self.stream = RngStream(seed=3, stream_label="al/mvg/active")

    @pytest.mark.unit
    @pytest.mark.services
    def test_mahalanobis_round(self):
        """The first round adds the models closest to the reference under the pool covariance."""
        cfg = AlLoopConfig(init_size=3, batch_size=2, max_rounds=2, early_stop=False)
        init_stream = RngStream(seed=3, stream_label="al/mvg/init")
        state = run_al_loop(
            "mvg",
            MahalanobisStrategy(reference=self.truth),
            cfg,
            self.inputs,
            self.stream,
            init_stream,
            timing="off",
        )
        initial = state.selected[:3]
        expected = query_mahalanobis(
            self.ensemble, initial, self.truth, 2, fit_mvg(self.ensemble).covariance
        )
        assert list(state.history[1].added_ids) == expected
        assert [r.n_selected for r in state.history] == [3, 5, 7]
        assert set(state.selected) <= set(self.ensemble.model_ids)

    @pytest.mark.unit
    @pytest.mark.services
    def test_reference_from_inputs(self):
        """Without a strategy reference the loop uses the inputs' reference."""
        cfg = AlLoopConfig(init_size=2, batch_size=2, max_rounds=1, early_stop=False)
        inputs = AlInputs(
            pool=self.inputs.pool,
            eval_set=self.inputs.eval_set,
            ensemble=self.ensemble,
            reference=self.truth,
        )
        state = run_al_loop("mvg", MahalanobisStrategy(), cfg, inputs, self.stream, timing="off")
        assert len(state.history) == 2
        with pytest.raises(ParameterError):
            run_al_loop("mvg", MahalanobisStrategy(), cfg, self.inputs, self.stream)

    @pytest.mark.unit
    @pytest.mark.services
    def test_error_query_needs_experiment(self):
        """Error-driven model queries need a pseudo-experiment."""
        cfg = AlLoopConfig(init_size=2, batch_size=2, max_rounds=1)
        with pytest.raises(ParameterError):
            run_al_loop("mvg", PredictionErrorStrategy(), cfg, self.inputs, self.stream)


def _both_orders(runner_factory, branch, strategy, cfg, inputs, base):
    """Arm states when the active arm runs first and when the random arm runs first."""
    init = base.child("init")
    runner = runner_factory()
    active_first = (
        runner.run(branch, strategy, cfg, inputs, base.child("active"), init),
        runner.run(branch, RandomStrategy(), cfg, inputs, base.child("random"), init),
    )
    runner = runner_factory()
    random_state = runner.run(branch, RandomStrategy(), cfg, inputs, base.child("random"), init)
    active_state = runner.run(branch, strategy, cfg, inputs, base.child("active"), init)
    return active_first, (active_state, random_state)


class TestArmIsolation:
    """Test that paired arms do not influence each other."""

    def setup_method(self):
        """Setup test fixtures."""
        self.cfg = AlLoopConfig(init_size=2, batch_size=2, max_rounds=2, early_stop=False)
        self.base = RngStream(seed=21, stream_label="al/isolation")

    @pytest.mark.unit
    @pytest.mark.services
    @pytest.mark.parametrize("branch", ["sindyc", "fnn"])
    def test_arm_order_does_not_change_histories(self, branch):
        """Running the random arm first leaves both trajectory arms unchanged."""
        tiny = tiny_config()
        inputs = _planted_inputs()
        first, swapped = _both_orders(
            lambda: ActiveLearningRunner(BranchTrainer(fnn=tiny.fnn), timing="off"),
            branch,
            PredictionErrorStrategy(),
            self.cfg,
            inputs,
            self.base,
        )
        assert first == swapped
        assert first[0].selected[:2] == first[1].selected[:2]

    @pytest.mark.unit
    @pytest.mark.services
    def test_mvg_arm_order_does_not_change_histories(self):
        """The cached pool covariance and the streams leave no trace between MvG arms."""
        truth = LinearModel(A=PLANTED_A, B=PLANTED_B, d=PLANTED_D).flatten()
        rng = np.random.default_rng(5)
        ensemble = CoefficientEnsemble(
            vectors=truth + 0.01 * rng.standard_normal((12, truth.size)),
            subset_ids=tuple((i,) for i in range(12)),
            model_ids=tuple(range(12)),
            state_dim=2,
            input_dim=4,
        )
        base = _planted_inputs()
        inputs = AlInputs(pool=base.pool, eval_set=base.eval_set, ensemble=ensemble, reference=truth)
        first, swapped = _both_orders(
            lambda: ActiveLearningRunner(timing="off"),
            "mvg",
            MahalanobisStrategy(),
            self.cfg,
            inputs,
            self.base,
        )
        assert first == swapped
