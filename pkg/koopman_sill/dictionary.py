"""
Logistic and conjunctive-logistic dictionary functions, the state-inclusive
logistic lifting (SILL) map and lattice construction.

A SILL dictionary lifts a state x in R^n to

    psi(x) = [1, x_1, ..., x_n, Lambda_1(x), ..., Lambda_NL(x)]

where Lambda_l(x) = prod_i lambda(x_i; mu_i^l, alpha) and
lambda(x; mu, alpha) = 1 / (1 + exp(-alpha (x - mu))).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from koopman_sill.errors import ContractViolation, DomainError, InvariantViolation

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

# Relative slack used when checking that centers sit inside the domain box
_DOMAIN_SLACK = 1e-9


# ---- LOGISTIC PRIMITIVES ----
def _check_alpha(alpha: float) -> float:
    try:
        alpha = float(alpha)
    except (TypeError, ValueError) as e:
        raise ContractViolation(f"steepness alpha must be a number, got {alpha!r}") from e
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise ContractViolation(f"steepness alpha must be a finite positive number, got {alpha}")
    return alpha


def _as_finite(values: ArrayLike, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{name} contains non-finite values")
    return array


def stable_logistic(z: ArrayLike) -> np.ndarray:
    """1 / (1 + exp(-z)) with exp only ever called on non-positive arguments."""
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def logistic_eval(x: ArrayLike, mu: ArrayLike, alpha: float) -> Union[float, np.ndarray]:
    """Evaluate lambda_mu(x) = 1 / (1 + exp(-alpha (x - mu))), elementwise."""
    alpha = _check_alpha(alpha)
    x = _as_finite(x, "x")
    mu = _as_finite(mu, "mu")
    out = stable_logistic(alpha * (x - mu))
    return float(out) if out.ndim == 0 else out


def _state_pair(x: ArrayLike, v: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    x = np.atleast_1d(_as_finite(x, "x"))
    v = np.atleast_1d(_as_finite(v, "center"))
    if x.ndim != 1 or x.shape != v.shape:
        raise ContractViolation(f"state shape {x.shape} does not match center shape {v.shape}")
    return x, v


def conjunctive_eval(x: ArrayLike, v: ArrayLike, alpha: float) -> float:
    """Conjunctive logistic Lambda_v(x): the product of per-coordinate logistics."""
    alpha = _check_alpha(alpha)
    x, v = _state_pair(x, v)
    return float(np.prod(stable_logistic(alpha * (x - v))))


def conjunctive_gradient(x: ArrayLike, v: ArrayLike, alpha: float) -> np.ndarray:
    """Gradient of Lambda_v at x; component i is alpha (1 - lambda_i) Lambda_v."""
    alpha = _check_alpha(alpha)
    x, v = _state_pair(x, v)
    z = alpha * (x - v)
    big_lambda = np.prod(stable_logistic(z))
    # 1 - lambda(z) == lambda(-z), evaluated without cancellation
    return alpha * stable_logistic(-z) * big_lambda


def exact_lambda_derivative(x: ArrayLike, fx: ArrayLike, v: ArrayLike, alpha: float) -> float:
    """Time derivative of Lambda_v along the flow, given fx = f(x)."""
    gradient = conjunctive_gradient(x, v, alpha)
    fx = np.atleast_1d(_as_finite(fx, "fx"))
    if fx.shape != gradient.shape:
        raise ContractViolation(f"f(x) shape {fx.shape} does not match state shape {gradient.shape}")
    return float(gradient @ fx)


# ---- DICTIONARY ----
@dataclass(frozen=True)
class SILLDictionary:
    """Join-closed set of conjunctive-logistic centers sharing one steepness."""

    centers: np.ndarray
    alpha: float
    domain_lo: np.ndarray
    domain_hi: np.ndarray
    mesh_spacing: np.ndarray
    _index: Dict[Tuple[float, ...], int] = field(init=False, repr=False, compare=False)
    _join_table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        alpha = _check_alpha(self.alpha)
        centers = np.atleast_2d(_as_finite(self.centers, "centers")).astype(float)
        if centers.size == 0:
            raise ContractViolation("a dictionary needs at least one center")
        n = centers.shape[1]
        lo = np.atleast_1d(_as_finite(self.domain_lo, "domain_lo")).astype(float)
        hi = np.atleast_1d(_as_finite(self.domain_hi, "domain_hi")).astype(float)
        spacing = np.atleast_1d(_as_finite(self.mesh_spacing, "mesh_spacing")).astype(float)
        for name, vector in (("domain_lo", lo), ("domain_hi", hi), ("mesh_spacing", spacing)):
            if vector.shape != (n,):
                raise ContractViolation(f"{name} must have {n} entries, got shape {vector.shape}")
        if np.any(lo >= hi):
            raise ContractViolation("domain_lo must be below domain_hi in every component")
        if np.any(spacing <= 0.0):
            raise ContractViolation("mesh_spacing must be positive in every component")

        slack = _DOMAIN_SLACK * np.maximum(1.0, hi - lo)
        if np.any(centers < lo - slack) or np.any(centers > hi + slack):
            raise ContractViolation("every center must lie inside [domain_lo, domain_hi]")

        # Lexicographic order, first coordinate most significant
        order = np.lexsort(centers.T[::-1])
        centers = centers[order]
        index = {tuple(c): i for i, c in enumerate(centers)}
        if len(index) != len(centers):
            raise ContractViolation("dictionary centers must be pairwise distinct")

        joins = np.maximum(centers[:, None, :], centers[None, :, :])
        table = np.empty(joins.shape[:2], dtype=int)
        for l in range(len(centers)):
            for k in range(l, len(centers)):
                j = index.get(tuple(joins[l, k]))
                if j is None:
                    raise ContractViolation(
                        f"center set is not join-closed: max of {centers[l]} and {centers[k]} is missing"
                    )
                table[l, k] = table[k, l] = j

        for array in (centers, lo, hi, spacing, table):
            array.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "domain_lo", lo)
        object.__setattr__(self, "domain_hi", hi)
        object.__setattr__(self, "mesh_spacing", spacing)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_join_table", table)

    @property
    def state_dim(self) -> int:
        return self.centers.shape[1]

    @property
    def n_centers(self) -> int:
        return self.centers.shape[0]

    @property
    def lifting_dim(self) -> int:
        return 1 + self.state_dim + self.n_centers

    @property
    def join_table(self) -> np.ndarray:
        """join_table[l, k] is the index of the componentwise max of centers l and k."""
        return self._join_table

    def index_of(self, center: ArrayLike) -> int:
        key = tuple(np.asarray(center, dtype=float).ravel())
        try:
            return self._index[key]
        except KeyError:
            raise InvariantViolation(f"center {key} is not part of the dictionary") from None

    def contains(self, x: ArrayLike) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.domain_lo) and np.all(x <= self.domain_hi))

    def with_alpha(self, alpha: float) -> "SILLDictionary":
        """Same centers and mesh, different steepness."""
        return SILLDictionary(self.centers, alpha, self.domain_lo, self.domain_hi, self.mesh_spacing)

    def __len__(self) -> int:
        return self.n_centers


def _check_index(dictionary: SILLDictionary, index: int, name: str) -> int:
    if not isinstance(index, (int, np.integer)) or not 0 <= index < dictionary.n_centers:
        raise ContractViolation(f"{name}={index!r} is not a valid center index (N_L={dictionary.n_centers})")
    return int(index)


def join(l: int, k: int, dictionary: SILLDictionary) -> int:
    """Index of the center equal to the componentwise max of centers l and k."""
    l = _check_index(dictionary, l, "l")
    k = _check_index(dictionary, k, "k")
    return dictionary.index_of(np.maximum(dictionary.centers[l], dictionary.centers[k]))


def dominates(dictionary: SILLDictionary, l: int, k: int) -> bool:
    """True when center l is componentwise >= center k."""
    l = _check_index(dictionary, l, "l")
    k = _check_index(dictionary, k, "k")
    return bool(np.all(dictionary.centers[l] >= dictionary.centers[k]))


def build_lattice(domain_lo: ArrayLike, domain_hi: ArrayLike, spacing: ArrayLike, alpha: float) -> SILLDictionary:
    """Full Cartesian lattice of centers {lo_i, lo_i + eps_i, ... <= hi_i}."""
    lo = np.atleast_1d(_as_finite(domain_lo, "domain_lo")).astype(float)
    hi = np.atleast_1d(_as_finite(domain_hi, "domain_hi")).astype(float)
    eps = np.atleast_1d(_as_finite(spacing, "spacing")).astype(float)
    if not (lo.shape == hi.shape == eps.shape) or lo.ndim != 1:
        raise ContractViolation("domain_lo, domain_hi and spacing must be vectors of equal length")
    if np.any(eps <= 0.0):
        raise ContractViolation("lattice spacing must be positive in every component")
    if np.any(lo >= hi):
        raise ContractViolation("domain_lo must be below domain_hi in every component")

    axes = []
    for a, b, h in zip(lo, hi, eps):
        count = int(np.floor((b - a) / h + 1.0 + 1e-9))
        axes.append(np.minimum(a + h * np.arange(count), b))
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=1)
    logger.debug("built lattice with %d centers (%s per axis)", len(centers), [len(a) for a in axes])
    return SILLDictionary(centers, alpha, lo, hi, eps)


# ---- LIFTING ----
def _as_states(X: ArrayLike, dictionary: SILLDictionary) -> np.ndarray:
    X = _as_finite(X, "states")
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dictionary.state_dim:
        raise ContractViolation(f"states must have {dictionary.state_dim} columns, got shape {X.shape}")
    return X


def lambda_block(X: ArrayLike, dictionary: SILLDictionary) -> np.ndarray:
    """Lambda_l(x_s) for every row x_s of X; shape (S, N_L)."""
    X = _as_states(X, dictionary)
    z = dictionary.alpha * (X[:, None, :] - dictionary.centers[None, :, :])
    return np.prod(stable_logistic(z), axis=2)


def lift(x: ArrayLike, dictionary: SILLDictionary) -> np.ndarray:
    """psi(x) = [1, x, Lambda(x)] of length 1 + n + N_L."""
    x = np.atleast_1d(_as_finite(x, "x"))
    if x.shape != (dictionary.state_dim,):
        raise ContractViolation(f"state must have {dictionary.state_dim} entries, got shape {x.shape}")
    return lift_batch(x[None, :], dictionary)[0]


def lift_batch(X: ArrayLike, dictionary: SILLDictionary) -> np.ndarray:
    """Row-wise lifting of a batch of states; shape (S, 1 + n + N_L)."""
    X = _as_states(X, dictionary)
    ones = np.ones((X.shape[0], 1))
    return np.hstack([ones, X, lambda_block(X, dictionary)])


def lambda_derivatives(X: ArrayLike, F: ArrayLike, dictionary: SILLDictionary) -> np.ndarray:
    """Exact dLambda_l/dt at each row of X given F = f(X); shape (S, N_L)."""
    X = _as_states(X, dictionary)
    F = _as_finite(F, "f(x)")
    if F.ndim == 1:
        F = F[None, :]
    if F.shape != X.shape:
        raise ContractViolation(f"f(x) shape {F.shape} does not match states shape {X.shape}")
    z = dictionary.alpha * (X[:, None, :] - dictionary.centers[None, :, :])
    big_lambda = np.prod(stable_logistic(z), axis=2)
    complement = stable_logistic(-z)
    return dictionary.alpha * big_lambda * np.einsum("sli,si->sl", complement, F)
