"""Tests for pseudo-experiment construction."""

import numpy as np
import pytest

from thermocline_twin.exceptions import DataError, ParameterError
from thermocline_twin.models.data import GHX_CHANNELS, Provenance, RngStream, TimeGrid
from thermocline_twin.models.harness import NoiseSpec, PerturbationSpec, PseudoExperiment
from thermocline_twin.models.thermosim import (
    ActuatorSchedule,
    BedConfig,
    GhxConfig,
    InitialBedSpec,
    SolverTolerance,
)
from thermocline_twin.services.data import channel_rmse
from thermocline_twin.services.harness import add_noise, make_pseudo_experiment
from thermocline_twin.services.thermosim import simulate


class TestPerturbation:
    """Test multiplicative physics perturbations."""

    @pytest.mark.unit
    @pytest.mark.models
    def test_apply_scales_parameters(self):
        """Perturbed copies carry the scaled values and leave the originals alone."""
        bed, ghx = BedConfig(), GhxConfig()
        new_bed, new_ghx = PerturbationSpec().apply(bed, ghx)
        assert new_bed.hc == pytest.approx(bed.hc * 1.15)
        assert new_bed.porosity == pytest.approx(bed.porosity * 0.95)
        assert new_ghx.effectiveness == pytest.approx(ghx.effectiveness * 0.90)
        assert bed == BedConfig()

    @pytest.mark.unit
    @pytest.mark.models
    def test_none_is_identity(self):
        """The empty perturbation returns equal configs."""
        bed, ghx = BedConfig(n_nodes=10), GhxConfig()
        assert PerturbationSpec.none().apply(bed, ghx) == (bed, ghx)

    @pytest.mark.unit
    @pytest.mark.models
    def test_out_of_range(self):
        """A perturbation pushing a parameter past its bounds raises ParameterError."""
        with pytest.raises(ParameterError):
            PerturbationSpec(porosity_scale=3.0).apply(BedConfig(), GhxConfig())
        with pytest.raises(ParameterError):
            PerturbationSpec(effectiveness_scale=2.0).apply(BedConfig(), GhxConfig())

    @pytest.mark.unit
    @pytest.mark.models
    def test_negative_noise_rejected(self):
        """Noise levels must not be negative."""
        with pytest.raises(ParameterError):
            NoiseSpec(sigma={"q_ghx": -1.0})


class TestAddNoise:
    """Test measurement noise."""

    @pytest.mark.unit
    @pytest.mark.services
    def test_only_named_channels(self):
        """Channels without a sigma are copied unchanged."""
        block = np.zeros((4000, 2))
        noisy = add_noise(
            block, GHX_CHANNELS, NoiseSpec(sigma={"q_ghx": 5.0}), np.random.default_rng(0)
        )
        np.testing.assert_array_equal(noisy[:, 0], 0.0)
        assert noisy[:, 1].std() == pytest.approx(5.0, rel=0.05)
        np.testing.assert_array_equal(block, 0.0)

    @pytest.mark.unit
    @pytest.mark.services
    def test_sigma_is_absolute(self):
        """The added noise does not scale with the channel's own spread."""
        block = np.column_stack([np.zeros(4000), np.linspace(0.0, 1.0e5, 4000)])
        noisy = add_noise(
            block, GHX_CHANNELS, NoiseSpec(sigma={"q_ghx": 2.0}), np.random.default_rng(1)
        )
        assert (noisy[:, 1] - block[:, 1]).std() == pytest.approx(2.0, rel=0.05)


class TestPseudoExperiment:
    """Test perturbed, noisy and smoothed pseudo-experiments."""

    def setup_method(self):
        """Setup test fixtures."""
        self.bed = BedConfig(n_nodes=10)
        self.ghx = GhxConfig()
        self.grid = TimeGrid.from_span(121, 600.0)
        self.tol = SolverTolerance(rtol=1e-7, atol=1e-7)
        self.schedule = ActuatorSchedule.constant((1.0, 0.3, 330.0, 460.0), schedule_id=9)
        self.clean = simulate(
            self.schedule,
            InitialBedSpec().build(self.bed),
            self.bed,
            self.ghx,
            self.grid,
            self.tol,
        )

    def _make(self, noise: NoiseSpec, window: int = 1, order: int = 0) -> PseudoExperiment:
        return make_pseudo_experiment(
            self.bed,
            self.ghx,
            PerturbationSpec.none(),
            noise,
            self.schedule,
            self.grid,
            RngStream(seed=3, stream_label="experiment/noise"),
            smoothing_window=window,
            smoothing_order=order,
            tol=self.tol,
        )

    @pytest.mark.unit
    @pytest.mark.services
    def test_noise_free_unperturbed_matches_simulation(self):
        """Without perturbation, noise or smoothing the experiment is the simulation."""
        exp = self._make(NoiseSpec.none())
        np.testing.assert_array_equal(exp.raw.ghx, self.clean.ghx)
        np.testing.assert_array_equal(exp.raw.tes, self.clean.tes)
        np.testing.assert_array_equal(exp.denoised.ghx, self.clean.ghx)
        assert exp.raw.id == 9
        assert exp.raw.provenance is Provenance.PSEUDO_EXPERIMENTAL

    @pytest.mark.unit
    @pytest.mark.services
    def test_noise_level(self):
        """State noise has the requested spread; controls stay noise-free."""
        exp = self._make(NoiseSpec(sigma={"q_ghx": 400.0}))
        residual = exp.raw.ghx - self.clean.ghx
        np.testing.assert_array_equal(residual[:, 0], 0.0)
        assert residual[:, 1].std() == pytest.approx(400.0, rel=0.25)
        np.testing.assert_array_equal(exp.raw.controls, self.clean.controls)
        np.testing.assert_array_equal(exp.raw.tes, self.clean.tes)

    @pytest.mark.unit
    @pytest.mark.services
    def test_smoothing_reduces_noise(self):
        """The denoised variant sits closer to the clean run than the raw one."""
        exp = self._make(NoiseSpec(sigma={"q_ghx": 400.0}), window=21, order=3)
        raw_err = channel_rmse(exp.raw.ghx, self.clean.ghx)[1]
        smooth_err = channel_rmse(exp.denoised.ghx, self.clean.ghx)[1]
        assert smooth_err < raw_err
        assert exp.smoothing_window == 21

    @pytest.mark.unit
    @pytest.mark.services
    def test_reproducible(self):
        """The same stream gives the same noise."""
        noise = NoiseSpec(sigma={"q_ghx": 400.0, "t_top": 0.2})
        assert self._make(noise) == self._make(noise)

    @pytest.mark.unit
    @pytest.mark.services
    def test_unknown_noise_channel(self):
        """Noise for a channel that is not a state raises ParameterError."""
        with pytest.raises(ParameterError):
            self._make(NoiseSpec(sigma={"pv006": 0.1}))

    @pytest.mark.unit
    @pytest.mark.models
    def test_variants_share_lineage(self):
        """Raw and denoised variants must share their id."""
        with pytest.raises(DataError):
            PseudoExperiment(
                raw=self.clean,
                denoised=self.clean.replace(id=1),
                perturbation=PerturbationSpec.none(),
                noise=NoiseSpec.none(),
                smoothing_window=1,
                smoothing_order=0,
            )
