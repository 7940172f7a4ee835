"""Seed-count acceptance runs: AL data efficiency, the SINDyC null result and surrogate ranking."""

import math

import numpy as np
import pytest

from thermocline_twin.exceptions import ThermoTwinError
from thermocline_twin.models.active_learning import (
    AlLoopConfig,
    AlState,
    MahalanobisStrategy,
    PredictionErrorStrategy,
    RandomStrategy,
)
from thermocline_twin.models.data import GHX_CHANNELS, Dataset, RngStream, TimeGrid
from thermocline_twin.models.harness import ArmSpec
from thermocline_twin.models.mvg import CoefficientEnsemble
from thermocline_twin.models.neural import TrainConfig
from thermocline_twin.models.sindyc import LinearModel, RolloutConfig
from thermocline_twin.models.thermosim import (
    ActuatorBounds,
    ActuatorRange,
    BedConfig,
    SolverTolerance,
)
from thermocline_twin.services.active_learning import (
    AlInputs,
    BranchTrainer,
    compare_family,
    run_al_loop,
    run_comparison,
    selected_to_reach,
)
from thermocline_twin.services.data import channel_rmse
from thermocline_twin.services.harness import build_pool, build_two_regime_pool
from thermocline_twin.services.neural import (
    one_step_predictions,
    predict_trajectory,
    train_surrogate,
)
from thermocline_twin.services.sindyc import fit_sindyc, rollout, rollout_on
from tests.conftest import PLANTED_A, PLANTED_B, PLANTED_D, make_trajectory, tiny_config

Q = GHX_CHANNELS.index("q_ghx")
SEEDS_10 = tuple(range(10))
SEEDS_5 = tuple(range(5))

# Regimes differ only in the bypass valve; every other setpoint is pinned.
VALVE_OPEN = ActuatorBounds(
    pv006=ActuatorRange(low=1.0, high=1.0),
    m_pump_out=ActuatorRange(low=0.35, high=0.35),
    t_pump_in=ActuatorRange(low=330.0, high=330.0),
    t_heater_out=ActuatorRange(low=440.0, high=440.0),
    max_switches=1,
)
VALVE_CLOSED = ActuatorBounds(
    pv006=ActuatorRange(low=0.0, high=0.0),
    m_pump_out=ActuatorRange(low=0.35, high=0.35),
    t_pump_in=ActuatorRange(low=330.0, high=330.0),
    t_heater_out=ActuatorRange(low=440.0, high=440.0),
    max_switches=1,
)
N_COMMON = 99
TWO_REGIME_FNN = TrainConfig(epochs=150, batch_size=32, hidden_width=16, learning_rate=5e-3)

# Pump flows below the glycol capacity rate make the heat rate bilinear in flow and valve.
LOW_FLOW = ActuatorBounds(m_pump_out=ActuatorRange(low=0.02, high=0.22))
RANKING_FNN = TrainConfig(epochs=100, batch_size=128, hidden_width=32, learning_rate=3e-3)
RANKING_GRU = TrainConfig(
    epochs=40, batch_size=64, hidden_width=16, lookback=10, window_stride=2, learning_rate=3e-3
)


def _round_reached(state: AlState, threshold: float) -> int | None:
    for record in state.history:
        if not record.failed and record.rmse[Q] <= threshold:
            return record.round
    return None


@pytest.fixture(scope="module")
def two_regime():
    """Valve-open pool with one valve-closed run hidden in it; valve-closed runs held out."""
    pool, eval_set = build_two_regime_pool(
        TimeGrid.from_span(61, 300.0),
        n_common=N_COMMON,
        n_rare=1,
        n_eval=3,
        stream=RngStream(seed=2024, stream_label="acceptance/two-regime"),
        bed=BedConfig(n_nodes=10),
        common=VALVE_OPEN,
        rare=VALVE_CLOSED,
        stagger_gap=20.0,
        tol=SolverTolerance(rtol=1e-6, atol=1e-6),
    )
    return pool, eval_set


@pytest.fixture(scope="module")
def two_regime_arms(two_regime):
    """Error-driven and random FNN arms per seed with a shared initial pick."""
    pool, eval_set = two_regime
    inputs = AlInputs(pool=pool, eval_set=eval_set)
    cfg = AlLoopConfig(init_size=1, batch_size=1, max_rounds=3, early_stop=False)
    trainer = BranchTrainer(fnn=TWO_REGIME_FNN)
    arms = []
    for seed in SEEDS_10:
        base = RngStream(seed=seed, stream_label="acceptance/two-regime/al")
        init = base.child("init")
        active = run_al_loop(
            "fnn", PredictionErrorStrategy(), cfg, inputs, base.child("active"), init, trainer, "off"
        )
        random = run_al_loop(
            "fnn", RandomStrategy(), cfg, inputs, base.child("random"), init, trainer, "off"
        )
        arms.append((active, random))
    return arms


def _two_regime_threshold(pool: Dataset) -> float:
    common = [t.ghx[:, Q].mean() for t in pool.trajectories if t.id < N_COMMON]
    return 0.5 * float(np.mean(common))


@pytest.mark.slow
@pytest.mark.integration
class TestTwoRegimeDataEfficiency:
    """Test error-driven queries against random picks on the planted two-regime pool."""

    def test_pool_layout(self, two_regime):
        """Common runs keep the valve open, the hidden and held-out runs keep it shut."""
        pool, eval_set = two_regime
        assert len(pool) == N_COMMON + 1
        for traj in pool.trajectories:
            assert np.all(traj.controls[:, 0] == (1.0 if traj.id < N_COMMON else 0.0))
        for traj in eval_set.trajectories:
            assert np.all(traj.controls[:, 0] == 0.0)
            assert np.allclose(traj.ghx[:, Q], 0.0)
        assert _two_regime_threshold(pool) > 1e4

    def test_half_the_trajectories(self, two_regime, two_regime_arms):
        """Error-driven AL reaches the threshold with at most half the trajectories random needs."""
        pool, _ = two_regime
        tau = _two_regime_threshold(pool)
        wins = 0
        for active, random in two_regime_arms:
            al_n = selected_to_reach(active, tau)
            random_n = selected_to_reach(random, tau)
            if random_n is None:
                random_n = random.history[-1].n_selected + 1
            if al_n is not None and al_n <= 0.5 * random_n:
                wins += 1
        assert wins >= 8

    def test_fewer_rounds(self, two_regime, two_regime_arms):
        """Error-driven AL reaches the threshold in strictly fewer rounds than random."""
        pool, _ = two_regime
        tau = _two_regime_threshold(pool)
        wins = 0
        for active, random in two_regime_arms:
            al_round = _round_reached(active, tau)
            random_round = _round_reached(random, tau)
            if al_round is not None and (random_round is None or al_round < random_round):
                wins += 1
        assert wins >= 8

    def test_hidden_run_found_first(self, two_regime_arms):
        """Whenever the initial pick is a common run, the first query is the hidden one."""
        for active, _ in two_regime_arms:
            if active.history[0].added_ids[0] < N_COMMON:
                assert active.history[1].added_ids == (N_COMMON,)


def _biased_ensemble() -> tuple[CoefficientEnsemble, np.ndarray]:
    """12 models at the reference and 28 with inflated input gains, interleaved by id."""
    truth = LinearModel(A=PLANTED_A, B=PLANTED_B, d=PLANTED_D)
    scales = iter(np.linspace(0.8, 1.2, 28))
    vectors = []
    for model_id in range(40):
        if model_id % 10 < 3:
            vectors.append(truth.flatten())
        else:
            gain = 1.0 + 0.5 * next(scales)
            vectors.append(LinearModel(A=PLANTED_A, B=gain * PLANTED_B, d=PLANTED_D).flatten())
    ensemble = CoefficientEnsemble(
        vectors=np.vstack(vectors),
        subset_ids=tuple((i,) for i in range(40)),
        model_ids=tuple(range(40)),
        state_dim=2,
        input_dim=4,
    )
    return ensemble, truth.flatten()


def _reference_rollouts(n_traj: int = 3) -> Dataset:
    """Held-out runs generated by the reference model itself."""
    truth = LinearModel(A=PLANTED_A, B=PLANTED_B, d=PLANTED_D)
    grid = TimeGrid(dt=1.0, n_steps=200)
    rng = np.random.default_rng(8)
    trajectories = []
    for traj_id in range(n_traj):
        controls = np.repeat(rng.uniform(-1.0, 1.0, (8, 4)), 25, axis=0)
        states = rollout(truth, rng.standard_normal(2), controls, grid, RolloutConfig(method="exact"))
        trajectories.append(make_trajectory(traj_id, grid, controls, states))
    return Dataset.of(trajectories)


@pytest.mark.slow
@pytest.mark.integration
class TestMvgDataEfficiency:
    """Test coefficient-space queries against random picks over candidate models."""

    def setup_method(self):
        """Setup test fixtures."""
        self.ensemble, self.reference = _biased_ensemble()
        eval_set = _reference_rollouts()
        self.inputs = AlInputs(
            pool=eval_set, eval_set=eval_set, ensemble=self.ensemble, reference=self.reference
        )

    def _config(self, seed: int):
        loop = AlLoopConfig(init_size=2, batch_size=2, max_rounds=9)
        return tiny_config(
            seed=seed,
            families=("mvg",),
            arms={"mvg": ArmSpec(strategy=MahalanobisStrategy(), loop=loop)},
        )

    def test_half_the_models(self):
        """The MvG AL arm matches random's final error with at most half of random's models."""
        wins = 0
        for seed in SEEDS_10:
            result = run_comparison(self._config(seed), self.inputs, families=("mvg",))["mvg"]
            final = result.random.history[-1]
            assert final.n_selected == 20
            needed = selected_to_reach(result.active, final.rmse[Q])
            if needed is not None and needed <= 0.5 * final.n_selected:
                wins += 1
        assert wins >= 8

    def test_reference_models_queried_first(self):
        """Every query adds models sitting on the reference until they run out."""
        result = run_comparison(self._config(3), self.inputs, families=("mvg",))["mvg"]
        on_reference = {i for i in self.ensemble.model_ids if i % 10 < 3}
        initial = set(result.active.history[0].added_ids)
        queried = [i for record in result.active.history[1:] for i in record.added_ids]
        remaining = len(on_reference - initial)
        assert set(queried[:remaining]) == on_reference - initial


@pytest.mark.slow
@pytest.mark.integration
class TestSindycNullResult:
    """Test that error-driven queries barely change the deterministic linear fit."""

    def test_final_error_matches_random(self):
        """AL and random final q errors stay within 10% of each other on every seed."""
        loop = AlLoopConfig(init_size=4, batch_size=1, max_rounds=11)
        for seed in SEEDS_5:
            config = tiny_config(
                seed=seed,
                pool_size=16,
                eval_size=3,
                bounds=ActuatorBounds(max_switches=1),
                families=("sindyc",),
                arms={"sindyc": ArmSpec(strategy=PredictionErrorStrategy(), loop=loop)},
            )
            pool, eval_set = build_pool(config)
            trainer = BranchTrainer(config.stlsq, config.rollout)
            result = compare_family("sindyc", config, AlInputs(pool=pool, eval_set=eval_set), trainer)
            al = result.active.history[-1]
            rnd = result.random.history[-1]
            assert al.n_selected == rnd.n_selected == 15
            assert math.isfinite(al.rmse[Q]) and math.isfinite(rnd.rmse[Q])
            assert abs(al.rmse[Q] - rnd.rmse[Q]) < 0.1 * rnd.rmse[Q]


def _ranking_rmse(seed: int) -> dict[str, float]:
    """q RMSE of each surrogate on held-out runs, scored after the GRU lookback."""
    config = tiny_config(
        seed=seed,
        grid_steps=241,
        grid_span=1200.0,
        pool_size=24,
        eval_size=8,
        bounds=LOW_FLOW,
    )
    pool, eval_set = build_pool(config)
    skip = RANKING_GRU.lookback
    truth = np.vstack([t.ghx[skip:] for t in eval_set.trajectories])

    def score(blocks: list[np.ndarray]) -> float:
        return float(channel_rmse(np.vstack([b[skip:] for b in blocks]), truth)[Q])

    fnn = train_surrogate("fnn", pool, RANKING_FNN, RngStream(seed=seed, stream_label="ranking/fnn"))
    gru = train_surrogate("gru", pool, RANKING_GRU, RngStream(seed=seed, stream_label="ranking/gru"))
    scores = {
        "fnn": score([predict_trajectory(fnn, t.controls, grid=t.grid) for t in eval_set.trajectories]),
        "gru": score([one_step_predictions(gru, t) for t in eval_set.trajectories]),
    }
    try:
        sindyc = fit_sindyc(pool, config.stlsq)
        scores["sindyc"] = score([rollout_on(sindyc, t, config.rollout) for t in eval_set.trajectories])
    except ThermoTwinError:
        scores["sindyc"] = math.inf
    return scores


@pytest.mark.slow
@pytest.mark.integration
class TestSurrogateRanking:
    """Test the accuracy ordering of the three point surrogates."""

    def test_gru_fnn_sindyc_order(self):
        """GRU beats FNN beats SINDyC on held-out q in at least 4 of 5 seeds."""
        ordered = 0
        for seed in SEEDS_5:
            scores = _ranking_rmse(seed)
            assert math.isfinite(scores["fnn"]) and math.isfinite(scores["gru"])
            if scores["gru"] < scores["fnn"] < scores["sindyc"]:
                ordered += 1
        assert ordered >= 4
