"""
Closure-error terms of the join approximation and the bounds built on them.

For a pair of centers the join approximation replaces Lambda_l Lambda_k by
Lambda_{max(v_l, v_k)}. The pair error

    E_lk(x) = alpha (Lambda_l(x) Lambda_k(x) - Lambda_{max(v_l, v_k)}(x))

vanishes as alpha grows for every x off the center hyperplanes. Its supremum
M_lk, weighted by |W|, gives a linear-in-time budget for the state error.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from tqdm import tqdm

from config.config import MAX_WORKERS, MIN_SUP_DENSITY, SHOW_PROGRESS, SUP_REFINE_ITERATIONS, SUP_SEARCH_PADDING
from koopman_sill.dictionary import SILLDictionary, dominates, join, stable_logistic
from koopman_sill.errors import ContractViolation
from koopman_sill.regression import WeightMatrix, check_weights

logger = logging.getLogger(__name__)


# ---- PAIR ERRORS ----
@dataclass(frozen=True)
class PairErrorSpec:
    """
    A pair of centers (l, k) of one dictionary.

    Built directly, v_l must dominate v_k componentwise so that the join is
    v_l. Use `ordered` to have the pair swapped when needed, or `joined` to
    allow incomparable centers, whose join is a third center.
    """

    dictionary: SILLDictionary = field(repr=False, compare=False)
    l: int
    k: int
    general: bool = False
    top: int = field(init=False)

    def __post_init__(self):
        top = join(self.l, self.k, self.dictionary)
        if not self.general and top != self.l:
            raise ContractViolation(
                f"center {self.l} does not dominate center {self.k}; use PairErrorSpec.ordered or PairErrorSpec.joined"
            )
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "top", top)

    @classmethod
    def ordered(cls, dictionary: SILLDictionary, l: int, k: int) -> "PairErrorSpec":
        if dominates(dictionary, l, k):
            return cls(dictionary, l, k)
        if dominates(dictionary, k, l):
            return cls(dictionary, k, l)
        raise ContractViolation(f"centers {l} and {k} are not comparable")

    @classmethod
    def joined(cls, dictionary: SILLDictionary, l: int, k: int) -> "PairErrorSpec":
        return cls(dictionary, l, k, general=True)

    @property
    def centers(self) -> np.ndarray:
        """Rows v_l, v_k, v_top."""
        return self.dictionary.centers[[self.l, self.k, self.top]]


def _conjunctive(X: np.ndarray, v: np.ndarray, alpha: float) -> np.ndarray:
    return np.prod(stable_logistic(alpha * (X - v)), axis=-1)


def pair_error_batch(X: np.ndarray, spec: PairErrorSpec, alpha: Optional[float] = None) -> np.ndarray:
    """Signed E_lk at every row of X."""
    alpha = spec.dictionary.alpha if alpha is None else float(alpha)
    X = np.asarray(X, dtype=float)
    v_l, v_k, v_top = spec.centers
    product = _conjunctive(X, v_l, alpha) * _conjunctive(X, v_k, alpha)
    return alpha * (product - _conjunctive(X, v_top, alpha))


def pair_error(x: np.ndarray, spec: PairErrorSpec, alpha: Optional[float] = None) -> float:
    """Signed E_lk(x) = alpha Lambda_l Lambda_k - alpha Lambda_join."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dictionary.state_dim,):
        raise ContractViolation(f"state must have {spec.dictionary.state_dim} entries, got shape {x.shape}")
    if alpha is not None and (not np.isfinite(alpha) or alpha <= 0.0):
        raise ContractViolation(f"alpha must be a finite positive number, got {alpha}")
    return float(pair_error_batch(x[None, :], spec, alpha)[0])


def _check_alphas(alphas: Sequence[float]) -> np.ndarray:
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1 or alphas.size == 0:
        raise ContractViolation("alphas must be a non-empty list")
    if np.any(~np.isfinite(alphas)) or np.any(alphas <= 0.0):
        raise ContractViolation("alphas must be finite and positive")
    if np.any(np.diff(alphas) <= 0.0):
        raise ContractViolation("alphas must be strictly increasing")
    return alphas


def alpha_convergence_study(x: np.ndarray, spec: PairErrorSpec, alphas: Sequence[float]) -> np.ndarray:
    """|E_lk(x)| for each alpha; x must avoid every center coordinate of the pair."""
    alphas = _check_alphas(alphas)
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dictionary.state_dim,):
        raise ContractViolation(f"state must have {spec.dictionary.state_dim} entries, got shape {x.shape}")
    if np.any(x[None, :] == spec.centers):
        raise ContractViolation(f"{x} lies on a center coordinate of the pair; the error need not vanish there")
    return np.abs(np.array([pair_error_batch(x[None, :], spec, a)[0] for a in alphas]))


# ---- SUPREMUM ESTIMATES ----
def _search_axes(spec: PairErrorSpec, density: int) -> List[np.ndarray]:
    d = spec.dictionary
    pad = SUP_SEARCH_PADDING * d.mesh_spacing
    lo, hi = d.domain_lo - pad, d.domain_hi + pad
    centers = spec.centers
    axes = []
    for i in range(d.state_dim):
        knots = np.concatenate([np.linspace(lo[i], hi[i], density), centers[:, i]])
        axes.append(np.unique(knots))
    return axes


def estimate_sup_error(
    spec: PairErrorSpec,
    alpha: Optional[float] = None,
    density: int = MIN_SUP_DENSITY,
    refine_iterations: int = SUP_REFINE_ITERATIONS,
) -> float:
    """
    M_hat_lk: max |E_lk| on a grid over the padded domain, then refined.

    The grid holds `density` uniform points per axis plus the pair's center
    coordinates. Refinement runs coordinate-wise bounded Brent searches from
    the first grid argmax, one grid cell either side, and only ever raises
    the estimate.
    """
    if not isinstance(density, (int, np.integer)) or density < MIN_SUP_DENSITY:
        raise ContractViolation(f"sup search density must be an integer >= {MIN_SUP_DENSITY}, got {density!r}")
    alpha = spec.dictionary.alpha if alpha is None else float(alpha)
    axes = _search_axes(spec, density)
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    values = np.abs(pair_error_batch(points, spec, alpha))
    best_index = int(np.argmax(values))
    best = float(values[best_index])
    x = points[best_index].copy()

    cell = np.array([(a[-1] - a[0]) / (density - 1) for a in axes])
    for _ in range(refine_iterations):
        start = best
        for i in range(x.shape[0]):
            trial = x.copy()

            def negative_error(t: float) -> float:
                trial[i] = t
                return -abs(float(pair_error_batch(trial[None, :], spec, alpha)[0]))

            result = minimize_scalar(
                negative_error, bounds=(x[i] - cell[i], x[i] + cell[i]), method="bounded",
                options={"xatol": 1e-10},
            )
            if -result.fun > best:
                best = float(-result.fun)
                x[i] = result.x
        if best - start <= 1e-12 * max(best, 1.0):
            break
    return best


@dataclass(frozen=True)
class ErrorBoundReport:
    """Pairwise sup estimates and the per-row rates of the trajectory budget."""

    M_hat: np.ndarray
    row_rates: np.ndarray
    alpha: float
    density: int
    refine_iterations: int
    padding: float = SUP_SEARCH_PADDING

    @property
    def total_rate(self) -> float:
        return float(np.sum(self.row_rates))

    def to_dict(self) -> Dict[str, object]:
        return {
            "alpha": float(self.alpha),
            "density": int(self.density),
            "refine_iterations": int(self.refine_iterations),
            "padding_mesh_spacings": float(self.padding),
            "M_hat": [[float(v) for v in row] for row in self.M_hat],
            "M_hat_Lambda": [float(v) for v in self.row_rates],
            "total_rate": self.total_rate,
        }


def row_rates(M_hat: np.ndarray, weights: WeightMatrix) -> np.ndarray:
    """M_hat_Lambda_l = sum_i sum_k |w_ik| M_hat_lk."""
    return np.abs(M_hat) @ np.abs(weights.W).sum(axis=0)


def build_error_bound_report(
    dictionary: SILLDictionary,
    weights: WeightMatrix,
    density: int = MIN_SUP_DENSITY,
    refine_iterations: int = SUP_REFINE_ITERATIONS,
    jobs: Optional[int] = None,
    show_progress: bool = SHOW_PROGRESS,
) -> ErrorBoundReport:
    """Estimate M_hat for every pair (the table is symmetric) and aggregate per row."""
    check_weights(weights, dictionary)
    n_centers = dictionary.n_centers
    pairs: List[Tuple[int, int]] = [(l, k) for l in range(n_centers) for k in range(l, n_centers)]

    def estimate(pair: Tuple[int, int]) -> float:
        return estimate_sup_error(PairErrorSpec.joined(dictionary, *pair), None, density, refine_iterations)

    with ThreadPoolExecutor(max_workers=jobs or MAX_WORKERS) as executor:
        values = list(tqdm(
            executor.map(estimate, pairs), total=len(pairs), desc="📊 Pair sup estimates",
            disable=not show_progress,
        ))

    M_hat = np.zeros((n_centers, n_centers))
    for (l, k), value in zip(pairs, values):
        M_hat[l, k] = M_hat[k, l] = value
    report = ErrorBoundReport(
        M_hat=M_hat, row_rates=row_rates(M_hat, weights), alpha=dictionary.alpha,
        density=int(density), refine_iterations=int(refine_iterations),
    )
    logger.info("estimated %d pair sups; total budget rate %.4e per unit time", len(pairs), report.total_rate)
    return report


# ---- BUDGETS ----
def trajectory_error_budget(dictionary: SILLDictionary, weights: WeightMatrix, report: ErrorBoundReport, t):
    """t * sum_l M_hat_Lambda_l, for a scalar or an array of times."""
    check_weights(weights, dictionary)
    if report.M_hat.shape != (dictionary.n_centers, dictionary.n_centers):
        raise ContractViolation("error bound report does not match the dictionary")
    times = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(times)) or np.any(times < 0.0):
        raise ContractViolation("budget times must be finite and non-negative")
    budget = times * float(np.sum(row_rates(report.M_hat, weights)))
    return float(budget) if budget.ndim == 0 else budget


def _check_delta(delta_sup: Sequence[float]) -> np.ndarray:
    delta = np.atleast_1d(np.asarray(delta_sup, dtype=float))
    if np.any(~np.isfinite(delta)) or np.any(delta < 0.0):
        raise ContractViolation("delta_sup must hold finite non-negative values")
    return delta


def delta_propagation_bound(delta_sup: Sequence[float], alpha: float) -> float:
    """Extra per-row derivative error from imperfect regression: sum_i sup|delta_i| * alpha."""
    return float(np.sum(_check_delta(delta_sup)) * alpha)


def refined_delta_propagation_bound(delta_sup: Sequence[float], alpha: float) -> float:
    """As delta_propagation_bound with alpha (1 - lambda) lambda <= alpha / 4."""
    return float(np.sum(_check_delta(delta_sup)) * alpha / 4.0)


def delta_error_budget(delta_sup: Sequence[float], alpha: float, n_centers: int, t):
    """t * (sum_i sup|delta_i| + N_L * delta_propagation_bound): the regression share of the state budget."""
    delta = _check_delta(delta_sup)
    times = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(times)) or np.any(times < 0.0):
        raise ContractViolation("budget times must be finite and non-negative")
    budget = times * (float(np.sum(delta)) + n_centers * delta_propagation_bound(delta, alpha))
    return float(budget) if budget.ndim == 0 else budget


def estimate_delta_sup(f, weights: WeightMatrix, dictionary: SILLDictionary, per_dim: int = 64) -> np.ndarray:
    """Componentwise max |f(x) - W Lambda(x)| over a dense lattice of the domain."""
    axes = [np.linspace(a, b, per_dim) for a, b in zip(dictionary.domain_lo, dictionary.domain_hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    residual = f.evaluate_batch(points) - weights.predict(points, dictionary)
    return np.max(np.abs(residual), axis=0)


# ---- SAMPLERS AND SWEEPS ----
def offcenter_points(dictionary: SILLDictionary, count: int, seed: int = 0, jitter: float = 0.02) -> np.ndarray:
    """Random points near lattice-cell midpoints, at least (0.5 - jitter) spacings from any center coordinate."""
    if not 0.0 <= jitter < 0.5:
        raise ContractViolation(f"jitter must lie in [0, 0.5), got {jitter}")
    if count < 1:
        raise ContractViolation("count must be positive")
    rng = np.random.default_rng(seed)
    n = dictionary.state_dim
    points = np.empty((count, n))
    for i in range(n):
        coords = np.unique(dictionary.centers[:, i])
        h = dictionary.mesh_spacing[i]
        if coords.size > 1:
            midpoints = 0.5 * (coords[:-1] + coords[1:])
            base = midpoints[rng.integers(0, midpoints.size, size=count)]
        else:
            base = coords[0] + 0.5 * h * rng.choice([-1.0, 1.0], size=count)
        points[:, i] = base + jitter * h * rng.uniform(-1.0, 1.0, size=count)
    return points


def max_pair_error(dictionary: SILLDictionary, points: np.ndarray, alpha: Optional[float] = None) -> float:
    """max over points and all center pairs of |E_lk|."""
    alpha = dictionary.alpha if alpha is None else float(alpha)
    X = np.asarray(points, dtype=float)
    lam = np.prod(stable_logistic(alpha * (X[:, None, :] - dictionary.centers[None, :, :])), axis=2)
    products = lam[:, :, None] * lam[:, None, :]
    joined = lam[:, dictionary.join_table]
    return float(np.max(np.abs(alpha * (products - joined))))


@dataclass(frozen=True)
class ShiftErrorRow:
    alpha: float
    shift: float
    sup_error: float


def shift_error_grid(alphas: Sequence[float], shifts: Sequence[float], density: int = 64) -> List[ShiftErrorRow]:
    """
    For two 1-D centers 0 and shift, sup_x of alpha |lambda(x) lambda(x - shift) - lambda(x - shift)|,
    for every (alpha, shift) combination. shift = 0 is the same-center case, alpha / 4.
    """
    alphas = _check_alphas(alphas)
    shifts = np.asarray(shifts, dtype=float)
    if np.any(~np.isfinite(shifts)) or np.any(shifts < 0.0):
        raise ContractViolation("shifts must be finite and non-negative")
    rows = []
    for shift in shifts:
        if shift == 0.0:
            dictionary = SILLDictionary(np.array([[0.0]]), 1.0, np.array([-1.0]), np.array([1.0]), np.array([1.0]))
            l, k = 0, 0
        else:
            centers = np.array([[0.0], [shift]])
            dictionary = SILLDictionary(centers, 1.0, np.array([0.0]), np.array([shift]), np.array([shift]))
            l, k = 1, 0
        spec = PairErrorSpec(dictionary, l, k)
        for alpha in alphas:
            rows.append(ShiftErrorRow(float(alpha), float(shift), estimate_sup_error(spec, alpha, density)))
    return rows
