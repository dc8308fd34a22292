"""
Koopman generator assembly over a SILL dictionary, the closure diagnostics and
the discrete-time EDMD baseline.

Row layout of the m x m generator (m = 1 + n + N_L):

    row 0            d(1)/dt = 0
    rows 1..n        dx/dt = W Lambda(x)        -> [0 | 0 | W]
    rows n+1..m-1    dLambda_l/dt projected onto span(psi) over a sample grid
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg

from config.config import (
    DEFAULT_RIDGE,
    EDMD_MAX_ITERATIONS,
    EDMD_POWER_ITERATIONS,
    EDMD_TOLERANCE,
    GROWTH_WARNING_RATE,
)
from koopman_sill.dictionary import SILLDictionary, lambda_block, lambda_derivatives, lift_batch, stable_logistic
from koopman_sill.errors import ContractViolation, InvariantViolation, NumericalError
from koopman_sill.regression import SampleGrid, WeightMatrix, check_weights, solve_least_squares
from koopman_sill.simulation import VectorField

logger = logging.getLogger(__name__)

ASSEMBLY_MODES = ("projection", "state_only")


# ---- GENERATOR ----
@dataclass(frozen=True)
class KoopmanGenerator:
    """Constant generator matrix K acting on psi = [1, x, Lambda]."""

    K: np.ndarray
    state_dim: int
    n_centers: int
    assembly_mode: str = "projection"
    row_residuals: Optional[np.ndarray] = field(default=None, compare=False)
    rank_deficient: bool = False

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        m = 1 + self.state_dim + self.n_centers
        if K.shape != (m, m):
            raise ContractViolation(f"generator must be {m}x{m} for n={self.state_dim}, N_L={self.n_centers}, got {K.shape}")
        if self.assembly_mode not in ASSEMBLY_MODES:
            raise ContractViolation(f"unknown assembly mode {self.assembly_mode!r}")
        if not np.all(np.isfinite(K)):
            raise NumericalError("generator contains non-finite entries")
        if np.any(K[0] != 0.0):
            raise InvariantViolation("row 0 of the generator (constant observable) must be zero")
        if np.any(K[1:1 + self.state_dim, :1 + self.state_dim] != 0.0):
            raise InvariantViolation("state rows of the generator must vanish outside the Lambda block")
        K.setflags(write=False)
        object.__setattr__(self, "K", K)

    @property
    def lifting_dim(self) -> int:
        return self.K.shape[0]

    @property
    def state_rows(self) -> np.ndarray:
        """The W block of rows 1..n."""
        return self.K[1:1 + self.state_dim, 1 + self.state_dim:]

    @property
    def lambda_rows(self) -> np.ndarray:
        return self.K[1 + self.state_dim:]

    @property
    def spectral_abscissa(self) -> float:
        """Largest real part over the eigenvalues of K; positive means the lifted flow has growing modes."""
        return float(np.max(scipy.linalg.eigvals(self.K).real))


def assemble_generator(
    dictionary: SILLDictionary,
    weights: WeightMatrix,
    f: VectorField,
    grid: SampleGrid,
    ridge: float = DEFAULT_RIDGE,
    mode: str = "projection",
) -> KoopmanGenerator:
    """
    Build K_G from the fitted weights and the exact Lambda derivatives.

    In projection mode each Lambda row is the least-squares fit of
    dLambda_l/dt(x_s) by K_row psi(x_s) on the grid; all rows share one
    factorization of the lifted design matrix. In state_only mode the Lambda
    rows stay zero.
    """
    check_weights(weights, dictionary)
    if mode not in ASSEMBLY_MODES:
        raise ContractViolation(f"unknown assembly mode {mode!r} (choose from {ASSEMBLY_MODES})")
    if f.state_dim != dictionary.state_dim:
        raise ContractViolation(f"vector field has {f.state_dim} states, dictionary has {dictionary.state_dim}")

    n, n_centers, m = dictionary.state_dim, dictionary.n_centers, dictionary.lifting_dim
    K = np.zeros((m, m))
    K[1:1 + n, 1 + n:] = weights.W

    points = grid.points
    psi = lift_batch(points, dictionary)
    derivatives = lambda_derivatives(points, f.evaluate_batch(points), dictionary)
    deficient = False
    if mode == "projection":
        solution = solve_least_squares(psi, derivatives, ridge)
        K[1 + n:] = solution.coefficients.T
        deficient = solution.rank_deficient
    residual = derivatives - psi @ K[1 + n:].T
    row_residuals = np.sqrt(np.mean(residual ** 2, axis=0))

    logger.info(
        "assembled %dx%d generator (%s) on %s; worst Lambda-row RMS residual %.3e",
        m, m, mode, grid.describe(), float(np.max(row_residuals)),
    )
    generator = KoopmanGenerator(
        K=K, state_dim=n, n_centers=n_centers, assembly_mode=mode,
        row_residuals=row_residuals, rank_deficient=deficient,
    )
    abscissa = generator.spectral_abscissa
    if abscissa > GROWTH_WARNING_RATE:
        logger.warning("generator has growing modes (max Re eigenvalue %.3g); long lifted runs will not track", abscissa)
    return generator


def generator_from_matrix(K: np.ndarray, dictionary: SILLDictionary, mode: str = "projection") -> KoopmanGenerator:
    """Wrap a stored matrix (e.g. loaded from a model file) as a generator."""
    return KoopmanGenerator(K=K, state_dim=dictionary.state_dim, n_centers=dictionary.n_centers, assembly_mode=mode)


# ---- CLOSURE DIAGNOSTICS ----
def closure_rhs_join(x: np.ndarray, l: int, dictionary: SILLDictionary, weights: WeightMatrix) -> float:
    """
    Join-collapsed approximation of dLambda_l/dt at x:

        sum_i sum_k alpha (1 - lambda(x_i; v_l,i)) w_ik Lambda_{max(v_l, v_k)}(x)

    The coefficient keeps its dependence on x.
    """
    check_weights(weights, dictionary)
    if not isinstance(l, (int, np.integer)) or not 0 <= l < dictionary.n_centers:
        raise ContractViolation(f"l={l!r} is not a valid center index (N_L={dictionary.n_centers})")
    x = np.asarray(x, dtype=float)
    if x.shape != (dictionary.state_dim,):
        raise ContractViolation(f"state must have {dictionary.state_dim} entries, got shape {x.shape}")
    alpha = dictionary.alpha
    coefficient = alpha * stable_logistic(-alpha * (x - dictionary.centers[l]))
    joined = lambda_block(x, dictionary)[0][dictionary.join_table[l]]
    return float(coefficient @ weights.W @ joined)


@dataclass(frozen=True)
class ClosureResidualReport:
    """Closure residual eps(x) = ||dpsi/dt - K psi||_2 on an evaluation grid."""

    epsilon: np.ndarray
    row_rms: np.ndarray
    row_sup: np.ndarray
    state_residual: np.ndarray
    n_samples: int

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.epsilon ** 2)))

    @property
    def sup(self) -> float:
        return float(np.max(self.epsilon))

    def to_dict(self) -> dict:
        return {
            "rms": self.rms,
            "sup": self.sup,
            "row_rms": [float(v) for v in self.row_rms],
            "row_sup": [float(v) for v in self.row_sup],
            "n_samples": int(self.n_samples),
        }


def closure_residual(
    dictionary: SILLDictionary,
    weights: WeightMatrix,
    f: VectorField,
    generator: KoopmanGenerator,
    grid: SampleGrid,
) -> ClosureResidualReport:
    """Evaluate eps(x_s) with dpsi/dt computed exactly (0, f, dLambda/dt)."""
    check_weights(weights, dictionary)
    if generator.lifting_dim != dictionary.lifting_dim:
        raise ContractViolation(
            f"generator is {generator.lifting_dim}x{generator.lifting_dim}, dictionary lifts to {dictionary.lifting_dim}"
        )
    n = dictionary.state_dim
    points = grid.points
    F = f.evaluate_batch(points)
    exact = np.hstack([np.zeros((points.shape[0], 1)), F, lambda_derivatives(points, F, dictionary)])
    residual = exact - lift_batch(points, dictionary) @ generator.K.T
    return ClosureResidualReport(
        epsilon=np.linalg.norm(residual, axis=1),
        row_rms=np.sqrt(np.mean(residual ** 2, axis=0)),
        row_sup=np.max(np.abs(residual), axis=0),
        state_residual=np.linalg.norm(residual[:, 1:1 + n], axis=1),
        n_samples=points.shape[0],
    )


# ---- EDMD BASELINE ----
@dataclass(frozen=True)
class EDMDResult:
    K: np.ndarray
    zeta: float
    converged: bool
    iterations: int
    objective_history: List[float] = field(default_factory=list)


def edmd_objective(K: np.ndarray, prev: np.ndarray, nxt: np.ndarray, zeta: float) -> float:
    """||Psi_f - K Psi_p||_F^2 + zeta * sum_j ||K[:, j]||_2."""
    fit = float(np.sum((nxt - K @ prev) ** 2))
    return fit + zeta * float(np.sum(np.linalg.norm(K, axis=0)))


def column_soft_threshold(K: np.ndarray, threshold: float) -> np.ndarray:
    """Proximal map of threshold * ||.||_{2,1}: shrink each column towards 0."""
    norms = np.linalg.norm(K, axis=0)
    scale = np.maximum(0.0, 1.0 - threshold / np.where(norms > 0.0, norms, 1.0))
    return K * np.where(norms > 0.0, scale, 0.0)


def _largest_eigenvalue(G: np.ndarray, iterations: int) -> float:
    """Power iteration on a symmetric positive semidefinite matrix."""
    v = np.ones(G.shape[0]) / np.sqrt(G.shape[0])
    estimate = 0.0
    for _ in range(iterations):
        w = G @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        estimate = float(v @ G @ v)
    return estimate


def edmd_discrete(
    snapshots_prev: np.ndarray,
    snapshots_next: np.ndarray,
    zeta: float = 0.0,
    tolerance: float = EDMD_TOLERANCE,
    max_iterations: int = EDMD_MAX_ITERATIONS,
) -> EDMDResult:
    """
    Discrete-time EDMD: minimize ||Psi_f - K Psi_p||^2 + zeta ||K||_{2,1}.

    zeta = 0 is solved in closed form with the pseudoinverse. zeta > 0 runs a
    monotone accelerated proximal gradient with step 1/L, L = 2 lambda_max(Psi_p Psi_p^T).
    """
    prev = np.atleast_2d(np.asarray(snapshots_prev, dtype=float))
    nxt = np.atleast_2d(np.asarray(snapshots_next, dtype=float))
    if prev.shape != nxt.shape or prev.shape[1] < 1:
        raise ContractViolation(f"snapshot matrices must match and hold at least one column: {prev.shape} vs {nxt.shape}")
    if not (np.all(np.isfinite(prev)) and np.all(np.isfinite(nxt))):
        raise NumericalError("snapshot matrices contain non-finite entries")
    if not np.isfinite(zeta) or zeta < 0.0:
        raise ContractViolation(f"zeta must be a finite non-negative number, got {zeta}")

    if zeta == 0.0:
        K = nxt @ scipy.linalg.pinv(prev)
        return EDMDResult(K=K, zeta=0.0, converged=True, iterations=0, objective_history=[edmd_objective(K, prev, nxt, 0.0)])

    m = prev.shape[0]
    gram = prev @ prev.T
    cross = nxt @ prev.T
    lipschitz = 2.0 * _largest_eigenvalue(gram, EDMD_POWER_ITERATIONS) * 1.01
    if lipschitz == 0.0:
        K = np.zeros((m, m))
        return EDMDResult(K=K, zeta=zeta, converged=True, iterations=0, objective_history=[edmd_objective(K, prev, nxt, zeta)])
    step = 1.0 / lipschitz

    x = np.zeros((m, m))
    y = x.copy()
    t = 1.0
    best = edmd_objective(x, prev, nxt, zeta)
    history = [best]
    converged = False
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        gradient = 2.0 * (y @ gram - cross)
        z = column_soft_threshold(y - step * gradient, zeta * step)
        candidate = edmd_objective(z, prev, nxt, zeta)
        accepted = candidate <= best
        x_next = z if accepted else x
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_next + (t / t_next) * (z - x_next) + ((t - 1.0) / t_next) * (x_next - x)
        change = best - candidate if accepted else np.inf
        x, t = x_next, t_next
        if accepted:
            best = candidate
        history.append(best)
        if change <= tolerance * max(abs(history[-2]), np.finfo(float).tiny):
            converged = True
            break

    if not converged:
        logger.warning("EDMD proximal gradient stopped at the iteration cap (%d) before converging", max_iterations)
    return EDMDResult(K=x, zeta=float(zeta), converged=converged, iterations=iteration, objective_history=history)


def lifted_snapshots(trajectory_lifted: np.ndarray) -> tuple:
    """Consecutive snapshot matrices (m x T) from a T+1 x m lifted trajectory."""
    Z = np.asarray(trajectory_lifted, dtype=float)
    if Z.ndim != 2 or Z.shape[0] < 2:
        raise ContractViolation("need at least two lifted samples to form snapshot pairs")
    return Z[:-1].T, Z[1:].T
