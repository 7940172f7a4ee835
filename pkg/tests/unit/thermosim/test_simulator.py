"""Tests for closed-loop trajectory simulation."""

import numpy as np
import pytest

from thermocline_twin.models.data import GhxState, Provenance, RngStream, TimeGrid
from thermocline_twin.models.thermosim import (
    ActuatorBounds,
    ActuatorProfile,
    ActuatorSchedule,
    BedConfig,
    BedState,
    GhxConfig,
    InitialBedSpec,
    SolverTolerance,
)
from thermocline_twin.services.thermosim import (
    SENSOR_HEIGHTS,
    TrajectoryGenerator,
    discharge_schedule,
    simulate,
)
from thermocline_twin.services.thermosim.simulator import sensor_temperatures


class TestSimulate:
    """Test the single-trajectory simulator."""

    def setup_method(self):
        """Setup test fixtures."""
        self.cfg = BedConfig(n_nodes=10)
        self.gcfg = GhxConfig()
        self.grid = TimeGrid.from_span(61, 300.0)
        self.tol = SolverTolerance(rtol=1e-7, atol=1e-7)

    @pytest.mark.unit
    @pytest.mark.services
    def test_isothermal_bed_stays_put(self):
        """A uniform bed fed at its own temperature delivers that temperature."""
        schedule = ActuatorSchedule.constant((1.0, 0.3, 450.0, 430.0))
        traj = simulate(schedule, BedState.uniform(450.0, 10), self.cfg, self.gcfg, self.grid, self.tol)
        np.testing.assert_allclose(traj.tes[:, 1:], 450.0, atol=1e-9)
        np.testing.assert_array_equal(traj.tes[:, 0], 0.3)

    @pytest.mark.unit
    @pytest.mark.services
    def test_open_valve_heat_rate(self):
        """A settled open valve transfers heat from the hotter supply stream."""
        schedule = ActuatorSchedule.constant((1.0, 0.3, 330.0, 460.0))
        bed0 = BedState.thermocline(self.cfg, 520.0, 330.0)
        traj = simulate(schedule, bed0, self.cfg, self.gcfg, self.grid, self.tol)
        supply = np.maximum(traj.tes[:, 1], 460.0)
        c_min = min(0.3 * self.gcfg.fluid_heat_capacity, self.gcfg.glycol_capacity_rate)
        expected = self.gcfg.effectiveness * c_min * (supply - self.gcfg.glycol_inlet_temp)
        np.testing.assert_allclose(traj.ghx[:, 1], expected, rtol=1e-12)
        np.testing.assert_allclose(traj.ghx[:, 0], 0.0, atol=1e-15)

    @pytest.mark.unit
    @pytest.mark.services
    def test_closed_valve_bypasses(self):
        """A closed valve routes the pump flow around the exchanger."""
        schedule = ActuatorSchedule.constant((0.0, 0.25, 330.0, 460.0))
        traj = simulate(
            schedule, BedState.uniform(450.0, 10), self.cfg, self.gcfg, self.grid, self.tol
        )
        np.testing.assert_allclose(traj.ghx[:, 0], 0.25)
        assert np.all(traj.ghx[:, 1] == 0.0)

    @pytest.mark.unit
    @pytest.mark.services
    def test_bypass_flow_follows_pump_switch(self):
        """With the valve closed the bypass flow equals the tank flow at every sample."""
        schedule = ActuatorSchedule(
            pv006=ActuatorProfile(initial=0.0),
            m_pump_out=ActuatorProfile(initial=0.2, switch_times=(150.0,), levels=(0.45,)),
            t_pump_in=ActuatorProfile(initial=330.0),
            t_heater_out=ActuatorProfile(initial=460.0),
        )
        traj = simulate(
            schedule, BedState.uniform(450.0, 10), self.cfg, self.gcfg, self.grid, self.tol
        )
        np.testing.assert_array_equal(traj.ghx[:, 0], traj.tes[:, 0])
        assert traj.ghx[30, 0] == pytest.approx(0.45)
        assert traj.ghx[29, 0] == pytest.approx(0.2)

    @pytest.mark.unit
    @pytest.mark.services
    def test_valve_lags_setpoint(self):
        """After the valve closes the bypass flow rises gradually."""
        schedule = discharge_schedule(self.grid, m_pump_out=0.3)
        traj = simulate(
            schedule, BedState.uniform(450.0, 10), self.cfg, self.gcfg, self.grid, self.tol
        )
        after = traj.ghx[31:, 0]
        assert after[0] < 0.3
        assert np.all(np.diff(after) >= 0.0)
        assert after[-1] == pytest.approx(0.3, rel=0.3)

    @pytest.mark.unit
    @pytest.mark.services
    def test_initial_ghx_state_and_labels(self):
        """An explicit initial exchanger state, id and provenance are honored."""
        schedule = ActuatorSchedule.constant((1.0, 0.3, 330.0, 460.0), schedule_id=4)
        traj = simulate(
            schedule,
            BedState.uniform(450.0, 10),
            self.cfg,
            self.gcfg,
            self.grid,
            self.tol,
            ghx0=GhxState(m_ghx=0.3, q_ghx=0.0, valve_fraction=0.0),
            trajectory_id=9,
            provenance=Provenance.PSEUDO_EXPERIMENTAL,
        )
        assert traj.id == 9
        assert traj.provenance is Provenance.PSEUDO_EXPERIMENTAL
        np.testing.assert_array_equal(traj.ghx[0], [0.3, 0.0])
        assert traj.ghx[1, 1] > 0.0

    @pytest.mark.unit
    @pytest.mark.services
    def test_discharge_cools_outlet_bottom_first(self):
        """During discharge the bottom sensor cools first."""
        schedule = ActuatorSchedule.constant((1.0, 0.5, 330.0, 400.0))
        traj = simulate(
            schedule, BedState.uniform(450.0, 10), self.cfg, self.gcfg, self.grid, self.tol
        )
        t_top, t_bot = traj.tes[-1, 2], traj.tes[-1, 4]
        assert t_bot < t_top
        assert traj.tes[-1, 4] < traj.tes[0, 4]


    @pytest.mark.unit
    @pytest.mark.services
    def test_output_grid_refinement(self):
        """Doubling the output resolution moves the final sensor readings by less than 0.1 K."""
        fine = TimeGrid.from_span(121, 300.0)
        bed0 = BedState.thermocline(self.cfg, 520.0, 330.0)
        coarse_traj = simulate(
            discharge_schedule(self.grid), bed0, self.cfg, self.gcfg, self.grid, self.tol
        )
        fine_traj = simulate(discharge_schedule(fine), bed0, self.cfg, self.gcfg, fine, self.tol)
        np.testing.assert_allclose(coarse_traj.tes[-1, 1:], fine_traj.tes[-1, 1:], atol=0.1)
        np.testing.assert_allclose(coarse_traj.tes[::30, 1:], fine_traj.tes[::60, 1:], atol=0.1)


class TestSensors:
    """Test sensor interpolation."""

    @pytest.mark.unit
    @pytest.mark.services
    def test_linear_profile(self):
        """Sensors read a profile linear in depth exactly."""
        cfg = BedConfig(n_nodes=10, height=3.0)
        depths = cfg.node_depths()
        values = sensor_temperatures(10.0 * depths, cfg)
        expected = [10.0 * cfg.height * (1.0 - h) for h in SENSOR_HEIGHTS]
        np.testing.assert_allclose(values, expected, atol=1e-12)


class TestTrajectoryGenerator:
    """Test pool generation."""

    @pytest.mark.unit
    @pytest.mark.services
    def test_fixture_dataset(self, sim_dataset, sim_grid):
        """Generated datasets have dense ids, the grid and guarded temperatures."""
        assert sim_dataset.ids == tuple(range(8))
        assert sim_dataset.grid == sim_grid
        for traj in sim_dataset.trajectories:
            assert np.all(traj.tes[:, 1:] > 293.15 - 5.0)
            assert np.all(traj.tes[:, 1:] < 700.0)
            assert np.all(traj.ghx >= 0.0)

    @pytest.mark.unit
    @pytest.mark.services
    def test_reproducible(self, sim_dataset, sim_grid):
        """Regenerating with the same stream gives identical trajectories."""
        bed = BedConfig(n_nodes=10)
        generator = TrajectoryGenerator(
            bed, GhxConfig(), InitialBedSpec().build(bed), SolverTolerance(rtol=1e-6, atol=1e-6)
        )
        again = generator.generate(
            8, ActuatorBounds(), sim_grid, 50.0, RngStream(seed=7, stream_label="fixture/pool")
        )
        assert again == sim_dataset

    @pytest.mark.slow
    @pytest.mark.services
    def test_workers_match_serial(self, sim_dataset, sim_grid):
        """A process pool gives the same dataset as serial simulation."""
        bed = BedConfig(n_nodes=10)
        generator = TrajectoryGenerator(
            bed,
            GhxConfig(),
            InitialBedSpec().build(bed),
            SolverTolerance(rtol=1e-6, atol=1e-6),
            workers=2,
        )
        parallel = generator.generate(
            8, ActuatorBounds(), sim_grid, 50.0, RngStream(seed=7, stream_label="fixture/pool")
        )
        assert parallel == sim_dataset
