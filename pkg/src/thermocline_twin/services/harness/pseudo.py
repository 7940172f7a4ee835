"""Pseudo-experimental baseline: perturbed physics, measurement noise, smoothing."""

import numpy as np

from thermocline_twin.exceptions import ParameterError
from thermocline_twin.models.data import (
    GHX_CHANNELS,
    TES_CHANNELS,
    Provenance,
    RngStream,
    TimeGrid,
)
from thermocline_twin.models.harness import NoiseSpec, PerturbationSpec, PseudoExperiment
from thermocline_twin.models.thermosim import (
    ActuatorSchedule,
    BedConfig,
    GhxConfig,
    InitialBedSpec,
    SolverTolerance,
)
from thermocline_twin.services.data import smooth_trajectory
from thermocline_twin.services.thermosim import simulate
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)


def add_noise(block: np.ndarray, names: tuple[str, ...], noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Columns of ``block`` plus i.i.d. Gaussian noise of the channel's sigma."""
    noisy = block.copy()
    for col, name in enumerate(names):
        sigma = noise.sigma.get(name, 0.0)
        if sigma > 0:
            noisy[:, col] += rng.normal(0.0, sigma, size=block.shape[0])
    return noisy


def make_pseudo_experiment(
    bed: BedConfig,
    ghx: GhxConfig,
    perturbation: PerturbationSpec,
    noise: NoiseSpec,
    schedule: ActuatorSchedule,
    grid: TimeGrid,
    stream: RngStream,
    initial_bed: InitialBedSpec | None = None,
    smoothing_window: int = 21,
    smoothing_order: int = 3,
    tol: SolverTolerance | None = None,
    trajectory_id: int | None = None,
) -> PseudoExperiment:
    """Simulate ``schedule`` with perturbed physics, add noise, then smooth.

    Controls stay noise-free; the state channels named in ``noise.sigma`` get
    Gaussian noise drawn from ``stream``.
    """
    unknown = sorted(set(noise.sigma) - set(GHX_CHANNELS) - set(TES_CHANNELS))
    if unknown:
        raise ParameterError(f"Noise given for unknown channels {unknown}", channels=unknown)
    perturbed_bed, perturbed_ghx = perturbation.apply(bed, ghx)
    bed0 = (initial_bed or InitialBedSpec()).build(perturbed_bed)
    clean = simulate(
        schedule,
        bed0,
        perturbed_bed,
        perturbed_ghx,
        grid,
        tol,
        trajectory_id=trajectory_id,
        provenance=Provenance.PSEUDO_EXPERIMENTAL,
    )
    rng = stream.generator()
    raw = clean.replace(
        ghx=add_noise(clean.ghx, GHX_CHANNELS, noise, rng),
        tes=add_noise(clean.tes, TES_CHANNELS, noise, rng),
    )
    denoised = smooth_trajectory(raw, smoothing_window, smoothing_order)
    logger.info(
        f"Pseudo-experiment {raw.id}: hc x{perturbation.hc_scale}, porosity x{perturbation.porosity_scale}, "
        f"effectiveness x{perturbation.effectiveness_scale}, noise on {sorted(noise.sigma)}"
    )
    return PseudoExperiment(
        raw=raw,
        denoised=denoised,
        perturbation=perturbation,
        noise=noise,
        smoothing_window=smoothing_window,
        smoothing_order=smoothing_order,
    )
