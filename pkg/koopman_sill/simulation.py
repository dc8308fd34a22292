"""
Ground-truth and lifted-system integration, trajectory records and the two
benchmark systems (Van der Pol oscillator, bistable toggle switch).

Both integrators use the same fixed-step classical Runge-Kutta scheme so that
differences between a reference and a lifted prediction come from the
generator, not from the discretization.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from config.config import SYSTEM_DEFAULTS
from koopman_sill.dictionary import SILLDictionary, lift
from koopman_sill.errors import ContractViolation, DomainError

if TYPE_CHECKING:
    from koopman_sill.generator import KoopmanGenerator

logger = logging.getLogger(__name__)


# ---- VECTOR FIELDS ----
@dataclass(frozen=True)
class VectorField:
    """Named right-hand side f: R^n -> R^n, vectorized over leading axes."""

    name: str
    state_dim: int
    params: Mapping[str, float]
    rhs: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    nonnegative: bool = False

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.state_dim,):
            raise ContractViolation(f"{self.name} expects a state of length {self.state_dim}, got shape {x.shape}")
        return np.asarray(self.rhs(x), dtype=float)

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        """f evaluated on every row of X; shape (S, n)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.state_dim:
            raise ContractViolation(f"{self.name} expects states with {self.state_dim} columns, got shape {X.shape}")
        return np.asarray(self.rhs(X), dtype=float).reshape(X.shape)


def _merge_params(name: str, params: Optional[Mapping[str, float]]) -> Dict[str, float]:
    merged = dict(SYSTEM_DEFAULTS[name])
    for key, value in (params or {}).items():
        if key not in merged:
            raise ContractViolation(f"unknown parameter {key!r} for {name} (expected {sorted(merged)})")
        merged[key] = float(value)
    return merged


def benchmark_vdp(params: Optional[Mapping[str, float]] = None) -> VectorField:
    """Van der Pol: x1' = x2, x2' = -x1 + a1 (1 - x1^2) x2 (default a1 = -0.2)."""
    p = _merge_params("vdp", params)
    a1 = p["a1"]

    def rhs(x: np.ndarray) -> np.ndarray:
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([x2, -x1 + a1 * (1.0 - x1 ** 2) * x2], axis=-1)

    return VectorField("vdp", 2, p, rhs)


def benchmark_toggle(params: Optional[Mapping[str, float]] = None) -> VectorField:
    """Two-state mutual repression: x1' = a1/(1 + x2^n1) - delta x1, and symmetrically."""
    p = _merge_params("toggle", params)
    if p["delta"] <= 0.0:
        raise ContractViolation("toggle switch needs delta > 0")
    if p["n1"] < 1.0 or p["n2"] < 1.0:
        raise ContractViolation("toggle switch needs Hill exponents n1, n2 >= 1")
    a1, a2, n1, n2, delta = p["a1"], p["a2"], p["n1"], p["n2"], p["delta"]

    def rhs(x: np.ndarray) -> np.ndarray:
        x1, x2 = x[..., 0], x[..., 1]
        if np.any(x < 0.0):
            logger.debug("toggle switch evaluated at a negative concentration; clamping the Hill terms at 0")
        h1 = a1 / (1.0 + np.maximum(x2, 0.0) ** n1)
        h2 = a2 / (1.0 + np.maximum(x1, 0.0) ** n2)
        return np.stack([h1 - delta * x1, h2 - delta * x2], axis=-1)

    return VectorField("toggle", 2, p, rhs, nonnegative=True)


BENCHMARKS = {
    "vdp": benchmark_vdp,
    "toggle": benchmark_toggle,
}


def make_vector_field(name: str, params: Optional[Mapping[str, float]] = None) -> VectorField:
    try:
        factory = BENCHMARKS[name]
    except KeyError:
        raise ContractViolation(f"unknown system {name!r} (choose from {sorted(BENCHMARKS)})") from None
    return factory(params)


# ---- TRAJECTORIES ----
@dataclass(frozen=True)
class TrajectoryRecord:
    """Time-stamped states, optionally with the lifted states and a reference."""

    times: np.ndarray
    states: np.ndarray
    lifted: Optional[np.ndarray] = None
    reference: Optional[np.ndarray] = None
    errors: Optional[np.ndarray] = None
    diverged: bool = False
    clamped: bool = False

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if times.ndim != 1 or states.ndim != 2 or states.shape[0] != times.shape[0]:
            raise ContractViolation(f"times {times.shape} and states {states.shape} are inconsistent")
        if np.any(np.diff(times) <= 0.0):
            raise ContractViolation("trajectory times must be strictly increasing")
        for name in ("lifted", "reference"):
            value = getattr(self, name)
            if value is not None and np.asarray(value).shape[0] != times.shape[0]:
                raise ContractViolation(f"{name} has {np.asarray(value).shape[0]} rows for {times.shape[0]} times")
        if self.reference is not None and np.asarray(self.reference).shape != states.shape:
            raise ContractViolation("reference states must match the predicted state columns")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.times.shape[0]

    def truncated(self, length: int) -> "TrajectoryRecord":
        """First `length` samples of the record."""
        cut = lambda a: None if a is None else np.asarray(a)[:length]
        return replace(
            self, times=self.times[:length], states=self.states[:length], lifted=cut(self.lifted),
            reference=cut(self.reference), errors=cut(self.errors),
        )

    def with_reference(self, reference: "TrajectoryRecord") -> "TrajectoryRecord":
        """Attach reference states and the per-step error column ||x_hat - x||_2."""
        if not np.array_equal(reference.times, self.times):
            raise ContractViolation("reference and prediction must share one time grid")
        errors = np.linalg.norm(self.states - reference.states, axis=1)
        return replace(self, reference=reference.states, errors=errors)


def _step_count(dt: float, horizon: float) -> int:
    if not (np.isfinite(dt) and dt > 0.0):
        raise ContractViolation(f"dt must be a positive finite number, got {dt}")
    if not (np.isfinite(horizon) and horizon >= dt):
        raise ContractViolation(f"horizon must be finite and at least dt, got T={horizon}, dt={dt}")
    return max(1, int(math.floor(horizon / dt + 1e-9)))


def _rk4(rhs: Callable[[np.ndarray], np.ndarray], y0: np.ndarray, dt: float, n_steps: int) -> Tuple[np.ndarray, bool]:
    """Classical RK4 path; stops at the first non-finite state."""
    path = np.empty((n_steps + 1,) + y0.shape)
    path[0] = y = y0
    for i in range(n_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * dt * k1)
            k3 = rhs(y + 0.5 * dt * k2)
            k4 = rhs(y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            return path[: i + 1], True
        path[i + 1] = y
    return path, False


def integrate_nonlinear(f: VectorField, x0: np.ndarray, dt: float, horizon: float) -> TrajectoryRecord:
    """Fixed-step RK4 integration of x' = f(x) from x0, sampled at 0, dt, 2 dt, ..."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (f.state_dim,):
        raise ContractViolation(f"x0 must have {f.state_dim} entries, got shape {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise DomainError("x0 contains non-finite values")
    n_steps = _step_count(dt, horizon)
    states, diverged = _rk4(f.rhs, x0, dt, n_steps)
    if diverged:
        logger.warning("%s trajectory from %s diverged after %d steps", f.name, x0, len(states) - 1)
    clamped = bool(f.nonnegative and np.any(states < 0.0))
    if clamped:
        logger.warning("%s trajectory from %s left the nonnegative orthant; Hill terms were clamped", f.name, x0)
    times = dt * np.arange(states.shape[0])
    return TrajectoryRecord(times=times, states=states, diverged=diverged, clamped=clamped)


def integrate_ensemble(f: VectorField, X0: np.ndarray, dt: float, horizon: float) -> np.ndarray:
    """Endpoints of RK4 trajectories for a batch of initial conditions (NaN rows for divergent runs)."""
    X0 = np.asarray(X0, dtype=float)
    n_steps = _step_count(dt, horizon)
    y = X0.copy()
    alive = np.ones(len(X0), dtype=bool)
    for _ in range(n_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = f.rhs(y)
            k2 = f.rhs(y + 0.5 * dt * k1)
            k3 = f.rhs(y + 0.5 * dt * k2)
            k4 = f.rhs(y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        bad = ~np.all(np.isfinite(y), axis=1)
        if np.any(bad & alive):
            alive &= ~bad
            y[bad] = 0.0
    y[~alive] = np.nan
    return y


def rk4_propagator(K: np.ndarray, dt: float) -> np.ndarray:
    """One RK4 step of z' = K z as a matrix: I + hK + (hK)^2/2 + (hK)^3/6 + (hK)^4/24."""
    hK = dt * np.asarray(K, dtype=float)
    step = np.eye(hK.shape[0])
    term = np.eye(hK.shape[0])
    for order in range(1, 5):
        term = term @ hK / order
        step = step + term
    return step


def integrate_lifted(generator: "KoopmanGenerator", z0: np.ndarray, dt: float, horizon: float) -> TrajectoryRecord:
    """RK4 integration of the lifted linear system z' = K z, run open loop from z0."""
    K = generator.K
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (K.shape[0],):
        raise ContractViolation(f"z0 must have {K.shape[0]} entries, got shape {z0.shape}")
    if not np.all(np.isfinite(z0)):
        raise DomainError("z0 contains non-finite values")
    n_steps = _step_count(dt, horizon)
    # For a linear right-hand side the four RK4 stages collapse into one matrix
    P = rk4_propagator(K, dt)
    lifted, diverged = _rk4_linear(P, z0, n_steps)
    if diverged:
        logger.warning("lifted trajectory diverged after %d steps (unstable generator modes)", len(lifted) - 1)
    n = generator.state_dim
    times = dt * np.arange(lifted.shape[0])
    return TrajectoryRecord(times=times, states=lifted[:, 1:1 + n], lifted=lifted, diverged=diverged)


def _rk4_linear(P: np.ndarray, z0: np.ndarray, n_steps: int) -> Tuple[np.ndarray, bool]:
    path = np.empty((n_steps + 1, z0.shape[0]))
    path[0] = z = z0
    for i in range(n_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            z = P @ z
        if not np.all(np.isfinite(z)):
            return path[: i + 1], True
        path[i + 1] = z
    return path, False


def extract_state(lifted: TrajectoryRecord, state_dim: Optional[int] = None) -> TrajectoryRecord:
    """Predicted state x_hat(t): columns 1..n of the lifted trajectory."""
    if lifted.lifted is None:
        raise ContractViolation("record carries no lifted states")
    n = lifted.state_dim if state_dim is None else int(state_dim)
    if lifted.lifted.shape[1] < 1 + n:
        raise ContractViolation(f"lifted states have {lifted.lifted.shape[1]} columns, need at least {1 + n}")
    return TrajectoryRecord(times=lifted.times, states=lifted.lifted[:, 1:1 + n], diverged=lifted.diverged)


# ---- COMPARISON ----
@dataclass(frozen=True)
class TrajectoryComparison:
    """Error statistics of a predicted trajectory against a reference."""

    times: np.ndarray
    errors: np.ndarray
    rmse: float
    sup: float
    per_component_rmse: np.ndarray

    def to_dict(self) -> Dict[str, object]:
        return {
            "rmse": float(self.rmse),
            "sup": float(self.sup),
            "per_component_rmse": [float(v) for v in self.per_component_rmse],
            "samples": int(self.errors.shape[0]),
        }


def compare_trajectories(reference: TrajectoryRecord, predicted: TrajectoryRecord) -> TrajectoryComparison:
    """RMSE, sup and per-time ||x_hat(t) - x(t)||_2 over a shared time grid."""
    if not np.array_equal(reference.times, predicted.times):
        raise ContractViolation("trajectories must share one time grid")
    if reference.states.shape != predicted.states.shape:
        raise ContractViolation(f"state shapes differ: {reference.states.shape} vs {predicted.states.shape}")
    diff = predicted.states - reference.states
    errors = np.linalg.norm(diff, axis=1)
    return TrajectoryComparison(
        times=reference.times,
        errors=errors,
        rmse=float(np.sqrt(np.mean(errors ** 2))),
        sup=float(np.max(errors)),
        per_component_rmse=np.sqrt(np.mean(diff ** 2, axis=0)),
    )


# ---- TOGGLE SWITCH EQUILIBRIA ----
@dataclass(frozen=True)
class Equilibrium:
    point: np.ndarray
    eigenvalues: np.ndarray

    @property
    def stable(self) -> bool:
        return bool(np.all(self.eigenvalues.real < 0.0))


def jacobian(f: VectorField, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of f at x."""
    x = np.asarray(x, dtype=float)
    J = np.empty((f.state_dim, f.state_dim))
    for j in range(f.state_dim):
        h = np.zeros_like(x)
        h[j] = step * max(1.0, abs(x[j]))
        J[:, j] = (f(x + h) - f(x - h)) / (2.0 * h[j])
    return J


def toggle_equilibria(f: VectorField, scan_points: int = 4000) -> List[Equilibrium]:
    """All equilibria of the toggle switch, found on the scalar fixed-point map in x1."""
    if f.name != "toggle":
        raise ContractViolation(f"toggle_equilibria needs the toggle switch, got {f.name!r}")
    a1, a2, n1, n2, delta = (f.params[k] for k in ("a1", "a2", "n1", "n2", "delta"))

    def partner(x1: float) -> float:
        return a2 / (delta * (1.0 + x1 ** n2))

    def gap(x1: float) -> float:
        return x1 - a1 / (delta * (1.0 + partner(x1) ** n1))

    grid = np.linspace(0.0, a1 / delta, scan_points)
    values = np.array([gap(x) for x in grid])
    roots = []
    for i in range(scan_points - 1):
        if values[i] == 0.0:
            roots.append(grid[i])
        elif values[i] * values[i + 1] < 0.0:
            roots.append(brentq(gap, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-14))
    if values[-1] == 0.0:
        roots.append(grid[-1])

    equilibria = []
    for x1 in roots:
        point = np.array([x1, partner(x1)])
        equilibria.append(Equilibrium(point=point, eigenvalues=np.linalg.eigvals(jacobian(f, point))))
    return equilibria


@dataclass(frozen=True)
class BasinSample:
    initial_conditions: np.ndarray
    endpoints: np.ndarray
    attractors: np.ndarray
    labels: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.labels[self.labels >= 0], minlength=len(self.attractors))


def sample_basins(
    f: VectorField,
    count: int,
    lo: np.ndarray,
    hi: np.ndarray,
    seed: int = 0,
    dt: float = 0.01,
    horizon: float = 40.0,
    tolerance: float = 1e-3,
) -> BasinSample:
    """Integrate random initial conditions and group endpoints into distinct attractors."""
    rng = np.random.default_rng(seed)
    X0 = rng.uniform(lo, hi, size=(count, f.state_dim))
    endpoints = integrate_ensemble(f, X0, dt, horizon)
    attractors: List[np.ndarray] = []
    labels = np.full(count, -1, dtype=int)
    for i, end in enumerate(endpoints):
        if not np.all(np.isfinite(end)):
            continue
        for j, centre in enumerate(attractors):
            if np.linalg.norm(end - centre) <= tolerance:
                labels[i] = j
                break
        else:
            attractors.append(end)
            labels[i] = len(attractors) - 1
    return BasinSample(
        initial_conditions=X0,
        endpoints=endpoints,
        attractors=np.array(attractors).reshape(-1, f.state_dim),
        labels=labels,
    )


# ---- PREDICTION RUNS ----
@dataclass(frozen=True)
class SimulationOutcome:
    """Reference and lifted prediction from one initial condition."""

    x0: np.ndarray
    reference: TrajectoryRecord
    predicted: TrajectoryRecord
    comparison: TrajectoryComparison
    constant_drift: float

    @property
    def diverged(self) -> bool:
        return self.reference.diverged or self.predicted.diverged

    def summary(self) -> Dict[str, object]:
        out = {
            "x0": [float(v) for v in self.x0],
            "diverged": self.diverged,
            "clamped": self.reference.clamped,
            "compared_until": float(self.comparison.times[-1]),
            "constant_observable_drift": float(self.constant_drift),
        }
        out.update(self.comparison.to_dict())
        return out


def predict_and_compare(
    dictionary: SILLDictionary,
    generator: "KoopmanGenerator",
    f: VectorField,
    x0: np.ndarray,
    dt: float,
    horizon: float,
) -> SimulationOutcome:
    """Integrate f and the lifted system from lift(x0); compare over the samples both runs produced."""
    x0 = np.asarray(x0, dtype=float)
    reference = integrate_nonlinear(f, x0, dt, horizon)
    lifted = integrate_lifted(generator, lift(x0, dictionary), dt, horizon)
    length = min(len(reference), len(lifted))
    if length < len(reference) or length < len(lifted):
        logger.warning("comparing %s only up to t=%.4g, where one run diverged", x0, reference.times[length - 1])
    reference = reference.truncated(length)
    lifted = lifted.truncated(length)
    predicted = extract_state(lifted).with_reference(reference)
    return SimulationOutcome(
        x0=x0,
        reference=reference,
        predicted=predicted,
        comparison=compare_trajectories(reference, predicted),
        constant_drift=float(np.max(np.abs(lifted.lifted[:, 0] - 1.0))),
    )
