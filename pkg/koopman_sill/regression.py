"""
Least-squares regression of the vector field onto the logistic block,
f(x) ~= W Lambda(x), and the regression error report (delta).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, Optional, Tuple

import numpy as np
import scipy.linalg

from config.config import DEFAULT_RIDGE, MAX_SAMPLE_POINTS, RANK_TOLERANCE, SAMPLES_PER_CENTER
from koopman_sill.dictionary import SILLDictionary, lambda_block
from koopman_sill.errors import ContractViolation, NumericalError, ResourceLimitError

if TYPE_CHECKING:
    from koopman_sill.simulation import VectorField

logger = logging.getLogger(__name__)


# ---- SAMPLE GRIDS ----
@dataclass(frozen=True)
class SampleGrid:
    """Points at which f and the dictionary are sampled for fitting."""

    points: np.ndarray
    mode: str
    per_dim: int
    seed: Optional[int] = None

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def describe(self) -> str:
        if self.mode == "random":
            return f"{self.size} uniform-random points (seed {self.seed})"
        return f"{self.per_dim}^{self.points.shape[1]} lattice points"


def default_per_dim(dictionary: SILLDictionary) -> int:
    """Points per axis giving roughly SAMPLES_PER_CENTER samples per center."""
    target = SAMPLES_PER_CENTER * dictionary.n_centers
    return max(2, int(math.ceil(target ** (1.0 / dictionary.state_dim) - 1e-9)))


def make_sample_grid(
    dictionary: SILLDictionary,
    per_dim: Optional[int] = None,
    mode: str = "lattice",
    seed: int = 0,
) -> SampleGrid:
    """Uniform lattice or seeded uniform-random sample of the dictionary domain."""
    n = dictionary.state_dim
    if per_dim is None:
        per_dim = default_per_dim(dictionary)
    if not isinstance(per_dim, (int, np.integer)) or per_dim < 1:
        raise ContractViolation(f"per_dim must be a positive integer, got {per_dim!r}")
    if mode not in ("lattice", "random"):
        raise ContractViolation(f"unknown sampling mode {mode!r}")
    if mode == "lattice" and per_dim < 2:
        raise ContractViolation("lattice sampling needs at least 2 points per dimension")
    if n * math.log10(per_dim) > math.log10(MAX_SAMPLE_POINTS):
        raise ResourceLimitError(f"{per_dim}^{n} sample points exceeds the limit of {MAX_SAMPLE_POINTS}")

    lo, hi = dictionary.domain_lo, dictionary.domain_hi
    if mode == "lattice":
        axes = [np.linspace(a, b, per_dim) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=1)
    else:
        rng = np.random.default_rng(seed)
        points = rng.uniform(lo, hi, size=(per_dim ** n, n))

    if points.shape[0] < dictionary.n_centers:
        logger.warning(
            "sample grid has %d points for %d centers; the fit is underdetermined",
            points.shape[0], dictionary.n_centers,
        )
    points.setflags(write=False)
    return SampleGrid(points=points, mode=mode, per_dim=int(per_dim), seed=seed if mode == "random" else None)


# ---- LEAST SQUARES ----
@dataclass(frozen=True)
class LeastSquaresSolution:
    coefficients: np.ndarray
    rank: int
    rank_deficient: bool


def solve_least_squares(A: np.ndarray, B: np.ndarray, ridge: float = 0.0) -> LeastSquaresSolution:
    """
    Minimize ||A X - B||_F^2 + ridge ||X||_F^2 for all columns of B at once.

    One pivoted QR of A (augmented with sqrt(ridge) I when ridge > 0) is shared
    by every right-hand side. A numerically rank-deficient system falls back to
    the SVD-based minimum-norm solution.
    """
    if ridge < 0 or not np.isfinite(ridge):
        raise ContractViolation(f"ridge must be a finite non-negative number, got {ridge}")
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    if A.shape[0] != B.shape[0]:
        raise ContractViolation(f"design has {A.shape[0]} rows but targets have {B.shape[0]}")
    p = A.shape[1]
    if ridge > 0.0:
        A = np.vstack([A, math.sqrt(ridge) * np.eye(p)])
        B = np.vstack([B, np.zeros((p, B.shape[1]))])

    Q, R, perm = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        X = np.zeros((p, B.shape[1]))
        return LeastSquaresSolution(X[:, 0] if squeeze else X, 0, True)
    rank = int(np.sum(diag > RANK_TOLERANCE * diag[0]))

    if rank == p:
        X = np.empty((p, B.shape[1]))
        X[perm] = scipy.linalg.solve_triangular(R[:p, :p], Q.T @ B)
        deficient = False
    else:
        logger.warning("design matrix is rank deficient (rank %d of %d); using the minimum-norm solution", rank, p)
        X, _, _, _ = scipy.linalg.lstsq(A, B, cond=RANK_TOLERANCE)
        deficient = True
    return LeastSquaresSolution(X[:, 0] if squeeze else X, rank, deficient)


# ---- WEIGHTS AND REPORT ----
@dataclass(frozen=True)
class WeightMatrix:
    """Regression weights W (n x N_L): f(x) ~= W Lambda(x)."""

    W: np.ndarray

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        if not np.all(np.isfinite(W)):
            raise NumericalError("regression weights contain non-finite entries")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    @property
    def state_dim(self) -> int:
        return self.W.shape[0]

    @property
    def n_centers(self) -> int:
        return self.W.shape[1]

    def predict(self, X: np.ndarray, dictionary: SILLDictionary) -> np.ndarray:
        """W Lambda(x) for each row of X; shape (S, n)."""
        check_weights(self, dictionary)
        return lambda_block(X, dictionary) @ self.W.T


@dataclass(frozen=True)
class RegressionReport:
    """Regression error over the fitting grid."""

    rel_l2_error: np.ndarray
    max_abs_residual: np.ndarray
    ridge: float
    rank: int
    rank_deficient: bool
    n_samples: int
    zero_norm_components: Tuple[int, ...] = field(default_factory=tuple)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rel_l2_error": [float(v) for v in self.rel_l2_error],
            "max_abs_residual": [float(v) for v in self.max_abs_residual],
            "ridge": float(self.ridge),
            "rank": int(self.rank),
            "rank_deficient": bool(self.rank_deficient),
            "n_samples": int(self.n_samples),
            "zero_norm_components": list(self.zero_norm_components),
        }


def check_weights(weights: WeightMatrix, dictionary: SILLDictionary) -> None:
    if weights.W.shape != (dictionary.state_dim, dictionary.n_centers):
        raise ContractViolation(
            f"weights of shape {weights.W.shape} do not fit a dictionary with "
            f"n={dictionary.state_dim}, N_L={dictionary.n_centers}"
        )


def summarize_residuals(F: np.ndarray, residual: np.ndarray, ridge: float, rank: int, deficient: bool) -> RegressionReport:
    """Relative L2 error per component; absolute L2 where ||f_i|| vanishes on the grid."""
    target_norm = np.linalg.norm(F, axis=0)
    error_norm = np.linalg.norm(residual, axis=0)
    zero = tuple(int(i) for i in np.flatnonzero(target_norm == 0.0))
    rel = np.where(target_norm > 0.0, error_norm / np.where(target_norm > 0.0, target_norm, 1.0), error_norm)
    if zero:
        logger.info("components %s of f vanish on the grid; reporting absolute L2 error for them", zero)
    return RegressionReport(
        rel_l2_error=rel,
        max_abs_residual=np.max(np.abs(residual), axis=0),
        ridge=float(ridge),
        rank=rank,
        rank_deficient=deficient,
        n_samples=F.shape[0],
        zero_norm_components=zero,
    )


def fit_weights(
    f: "VectorField",
    dictionary: SILLDictionary,
    grid: SampleGrid,
    ridge: float = DEFAULT_RIDGE,
) -> Tuple[WeightMatrix, RegressionReport]:
    """Fit W minimizing sum_s ||f(x_s) - W Lambda(x_s)||^2 + ridge ||W||_F^2."""
    if f.state_dim != dictionary.state_dim:
        raise ContractViolation(f"vector field has {f.state_dim} states, dictionary has {dictionary.state_dim}")
    if np.any(grid.points < dictionary.domain_lo) or np.any(grid.points > dictionary.domain_hi):
        raise ContractViolation("sample grid points must lie inside the dictionary domain")

    F = f.evaluate_batch(grid.points)
    design = lambda_block(grid.points, dictionary)
    solution = solve_least_squares(design, F, ridge)
    weights = WeightMatrix(solution.coefficients.T)
    report = summarize_residuals(F, F - design @ weights.W.T, ridge, solution.rank, solution.rank_deficient)
    logger.info(
        "fitted %dx%d weights on %s; relative L2 error %s",
        weights.state_dim, weights.n_centers, grid.describe(),
        np.array2string(report.rel_l2_error, precision=3),
    )
    return weights, report


def residual_at(f: "VectorField", weights: WeightMatrix, dictionary: SILLDictionary, x: np.ndarray) -> np.ndarray:
    """delta(x) = f(x) - W Lambda(x)."""
    check_weights(weights, dictionary)
    x = np.asarray(x, dtype=float)
    if not dictionary.contains(x):
        logger.warning("evaluating the regression residual outside the dictionary domain at %s", x)
    return f(x) - weights.predict(x[None, :], dictionary)[0]
