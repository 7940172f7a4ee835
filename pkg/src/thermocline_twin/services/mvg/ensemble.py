"""Ensembles of linear models fitted to random trajectory subsets."""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations

import numpy as np

from thermocline_twin.exceptions import CombinatoricsError, ParameterError, ThermoTwinError
from thermocline_twin.models.data import STATE_CHANNELS, Dataset, RngStream
from thermocline_twin.models.mvg import CoefficientEnsemble
from thermocline_twin.models.sindyc import StlsqConfig, Target
from thermocline_twin.services.sindyc.fit import fit_sindyc
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

# below this many times n_models distinct subsets, enumerate instead of rejection sampling
_ENUMERATION_FACTOR = 4


def draw_subsets(
    ids: tuple[int, ...], n_models: int, subset_size: int, stream: RngStream
) -> list[tuple[int, ...]]:
    """``n_models`` distinct sorted id-subsets of size ``subset_size``."""
    if subset_size < 1 or subset_size > len(ids):
        raise ParameterError(
            f"subset_size {subset_size} must lie in [1, {len(ids)}]", subset_size=subset_size
        )
    if n_models < 1:
        raise ParameterError(f"n_models must be at least 1, got {n_models}", n_models=n_models)
    available = math.comb(len(ids), subset_size)
    if available < n_models:
        raise CombinatoricsError(
            f"Only {available} distinct subsets of size {subset_size} exist, "
            f"{n_models} requested",
            available=available,
            requested=n_models,
        )

    rng = stream.generator()
    ordered = sorted(ids)
    if available <= _ENUMERATION_FACTOR * n_models:
        every = list(combinations(ordered, subset_size))
        picks = rng.permutation(len(every))[:n_models]
        return [every[i] for i in picks]

    subsets: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    pool = np.asarray(ordered)
    while len(subsets) < n_models:
        candidate = tuple(int(i) for i in np.sort(rng.choice(pool, size=subset_size, replace=False)))
        if candidate not in seen:
            seen.add(candidate)
            subsets.append(candidate)
    return subsets


def _fit_vector(
    job: tuple[Dataset, StlsqConfig, Target],
) -> np.ndarray | str:
    subset, cfg, target = job
    try:
        return fit_sindyc(subset, cfg, target).flatten()
    except ThermoTwinError as e:
        return e.message


def build_ensemble(
    pool: Dataset,
    n_models: int,
    subset_size: int,
    cfg: StlsqConfig,
    stream: RngStream,
    target: Target = "ghx",
    workers: int = 1,
) -> CoefficientEnsemble:
    """Fit one linear model per random subset and collect the coefficient vectors.

    Subsets whose fit fails are logged and left out; surviving models keep
    dense ids ``0..n-1`` in draw order.
    """
    start = time.perf_counter()
    logger.info(
        f"Building ensemble of {n_models} models from subsets of {subset_size} "
        f"out of {len(pool)} trajectories"
    )
    subsets = draw_subsets(pool.ids, n_models, subset_size, stream)
    jobs = [(pool.subset(list(ids)), cfg, target) for ids in subsets]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_fit_vector, jobs, chunksize=8))
    else:
        results = [_fit_vector(job) for job in jobs]

    vectors = []
    kept: list[tuple[int, ...]] = []
    failed: list[tuple[int, ...]] = []
    for ids, result in zip(subsets, results):
        if isinstance(result, str):
            logger.warning(f"Excluded subset {list(ids)} from the ensemble: {result}")
            failed.append(ids)
        else:
            vectors.append(result)
            kept.append(ids)
    if not vectors:
        raise CombinatoricsError("Every ensemble fit failed", failed=len(failed))

    n_x = len(STATE_CHANNELS[target])
    n_u = vectors[0].size // n_x - 1 - n_x
    ensemble = CoefficientEnsemble(
        vectors=np.vstack(vectors),
        subset_ids=tuple(kept),
        model_ids=tuple(range(len(kept))),
        state_dim=n_x,
        input_dim=n_u,
        target=target,
        failed_subsets=tuple(failed),
        seed=stream.seed,
        stream_label=stream.stream_label,
    )
    logger.info(
        f"Ensemble of {ensemble.n_models} models ({len(failed)} failed) built in "
        f"{time.perf_counter() - start:.2f} seconds"
    )
    return ensemble
