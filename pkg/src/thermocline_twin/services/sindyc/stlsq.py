"""Sequential thresholded least squares with ridge regularization."""

import numpy as np

from thermocline_twin.exceptions import EmptyModelError, ShapeError, SingularityError
from thermocline_twin.models.base import FloatArray, FrozenModel
from thermocline_twin.models.sindyc import LinearModel, StlsqConfig, Target
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)


class StlsqResult(FrozenModel):
    """Coefficients of one state equation and the support after each iteration."""

    coefficients: FloatArray
    support_path: tuple[tuple[bool, ...], ...]
    iterations: int


def _column_scales(theta: np.ndarray) -> np.ndarray:
    rms = np.sqrt(np.mean(theta**2, axis=0))
    return np.where(rms > 0.0, rms, 1.0)


def _ridge_solve(theta: np.ndarray, target: np.ndarray, ridge: float, equation: int) -> np.ndarray:
    n_cols = theta.shape[1]
    if ridge > 0:
        system = np.vstack([theta, np.sqrt(ridge) * np.eye(n_cols)])
        rhs = np.concatenate([target, np.zeros(n_cols)])
    else:
        system, rhs = theta, target
    solution, _, rank, _ = np.linalg.lstsq(system, rhs, rcond=None)
    if rank < n_cols:
        raise SingularityError(
            f"Rank-deficient library for state equation {equation}: rank {rank} < {n_cols} "
            "active columns; increase the ridge penalty",
            equation=equation,
            rank=int(rank),
            active=int(n_cols),
        )
    return np.asarray(solution)


def stlsq_solve(
    theta: np.ndarray, target: np.ndarray, cfg: StlsqConfig, equation: int = 0
) -> StlsqResult:
    """STLSQ for a single state equation ``target ~ theta @ xi``.

    With ``normalize_columns`` each column is scaled to unit RMS; the threshold
    applies to the scaled coefficients and the result is scaled back.
    """
    theta = np.asarray(theta, dtype=float)
    target = np.asarray(target, dtype=float)
    if theta.ndim != 2 or target.shape != (theta.shape[0],):
        raise ShapeError(f"Library {theta.shape} and target {target.shape} are not aligned")
    if theta.shape[0] < theta.shape[1]:
        raise ShapeError(
            f"Library has fewer rows ({theta.shape[0]}) than columns ({theta.shape[1]})"
        )
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(target))):
        raise ShapeError("Library and derivatives must be finite")

    scales = _column_scales(theta) if cfg.normalize_columns else np.ones(theta.shape[1])
    weighted = theta / scales
    active = np.ones(theta.shape[1], dtype=bool)
    xi = np.zeros(theta.shape[1])
    path: list[tuple[bool, ...]] = []
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        xi = np.zeros(theta.shape[1])
        xi[active] = _ridge_solve(weighted[:, active], target, cfg.ridge, equation)
        keep = active & (np.abs(xi) >= cfg.threshold)
        xi[~keep] = 0.0
        path.append(tuple(bool(v) for v in keep))
        if not keep.any():
            raise EmptyModelError(
                f"Threshold {cfg.threshold} eliminated every column of state equation {equation}",
                equation=equation,
            )
        if np.array_equal(keep, active):
            break
        active = keep
    else:
        # the last thresholding changed the support; refit on it once
        xi = np.zeros(theta.shape[1])
        xi[active] = _ridge_solve(weighted[:, active], target, cfg.ridge, equation)

    logger.debug(
        f"State equation {equation}: {iterations} iterations, {int(active.sum())} active columns"
    )
    return StlsqResult(
        coefficients=xi / scales, support_path=tuple(path), iterations=iterations
    )


def stlsq_fit(
    theta: np.ndarray,
    derivatives: np.ndarray,
    cfg: StlsqConfig,
    target: Target = "ghx",
    subset_ids: tuple[int, ...] = (),
) -> LinearModel:
    """Run STLSQ per state equation and assemble ``(A, B, d)``.

    ``theta`` columns follow the ``constant | states | controls`` order of
    :func:`build_library`; the state count is the width of ``derivatives``.
    """
    derivatives = np.asarray(derivatives, dtype=float)
    if derivatives.ndim == 1:
        derivatives = derivatives[:, np.newaxis]
    n_x = derivatives.shape[1]
    n_u = theta.shape[1] - 1 - n_x
    if n_u < 0:
        raise ShapeError(f"Library width {theta.shape[1]} is too small for {n_x} states")
    columns = [
        stlsq_solve(theta, derivatives[:, i], cfg, equation=i).coefficients for i in range(n_x)
    ]
    xi = np.column_stack(columns)
    return LinearModel(
        A=xi[1 : 1 + n_x].T,
        B=xi[1 + n_x :].T,
        d=xi[0],
        target=target,
        subset_ids=subset_ids,
    )
