"""
Experiment configuration: loading, validation with line-anchored messages,
hashing and the derived objects (dictionary, vector field, grids, initial
conditions) every command starts from.
"""

import hashlib
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from config.config import validate_config, with_defaults
from koopman_sill.dictionary import SILLDictionary, build_lattice
from koopman_sill.errors import ConfigError
from koopman_sill.regression import SampleGrid, make_sample_grid
from koopman_sill.simulation import VectorField, make_vector_field

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegressionSettings:
    per_dim: Optional[int]
    mode: str
    seed: int
    ridge: float


@dataclass(frozen=True)
class SimulationSettings:
    dt: float
    horizon: float
    initial_conditions: Tuple[Tuple[float, ...], ...]
    ensemble: Optional[Dict[str, Any]]


@dataclass(frozen=True)
class AnalysisSettings:
    alphas: Tuple[float, ...]
    sup_density: int
    refine_iterations: int
    offcenter_samples: int
    offcenter_jitter: float
    seed: int
    budget_points: int


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment document with defaults filled in."""

    system_name: str
    system_params: Dict[str, float]
    domain_lo: np.ndarray
    domain_hi: np.ndarray
    spacing: np.ndarray
    alpha: float
    regression: RegressionSettings
    simulation: SimulationSettings
    analysis: AnalysisSettings
    output_dir: Path
    document: Dict[str, Any]
    source: str = "<memory>"

    @property
    def state_dim(self) -> int:
        return self.domain_lo.shape[0]

    def build_dictionary(self, alpha: Optional[float] = None) -> SILLDictionary:
        return build_lattice(self.domain_lo, self.domain_hi, self.spacing, self.alpha if alpha is None else alpha)

    def build_field(self) -> VectorField:
        return make_vector_field(self.system_name, self.system_params)

    def build_grid(self, dictionary: SILLDictionary) -> SampleGrid:
        return make_sample_grid(dictionary, self.regression.per_dim, self.regression.mode, self.regression.seed)

    def config_hash(self) -> str:
        return config_hash(self.document)


# ---- LOADING ----
def _line_of(text: str, path: str) -> int:
    """Line of the key named by a dotted error path, following the path through the document."""
    position = 0
    for token in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", path):
        match = re.search(r'"%s"\s*:' % re.escape(token), text[position:])
        if match is None:
            break
        position += match.start()
    return text.count("\n", 0, position) + 1


def experiment_from_dict(raw: Dict[str, Any], source: str = "<memory>", text: Optional[str] = None) -> ExperimentConfig:
    """Validate a parsed document and build the typed configuration."""
    errors = validate_config(raw)
    if errors:
        lines = []
        for error in errors:
            path = error.split(":", 1)[0]
            anchor = f"{source}:{_line_of(text, path)}" if text is not None else source
            lines.append(f"{anchor}: {error}")
        raise ConfigError("\n".join(lines))

    cfg = with_defaults(raw)
    simulation = cfg["simulation"]
    analysis = cfg["analysis"]
    regression = cfg["regression"]
    return ExperimentConfig(
        system_name=cfg["system"]["name"],
        system_params={k: float(v) for k, v in cfg["system"]["params"].items()},
        domain_lo=np.array(cfg["domain"]["lo"], dtype=float),
        domain_hi=np.array(cfg["domain"]["hi"], dtype=float),
        spacing=np.array(cfg["dictionary"]["spacing"], dtype=float),
        alpha=float(cfg["dictionary"]["alpha"]),
        regression=RegressionSettings(
            per_dim=regression["per_dim"], mode=regression["mode"],
            seed=int(regression["seed"]), ridge=float(regression["ridge"]),
        ),
        simulation=SimulationSettings(
            dt=float(simulation["dt"]),
            horizon=float(simulation["horizon"]),
            initial_conditions=tuple(tuple(float(v) for v in x0) for x0 in simulation["initial_conditions"]),
            ensemble=simulation["ensemble"],
        ),
        analysis=AnalysisSettings(
            alphas=tuple(float(a) for a in analysis["alphas"]),
            sup_density=int(analysis["sup_density"]),
            refine_iterations=int(analysis["refine_iterations"]),
            offcenter_samples=int(analysis["offcenter_samples"]),
            offcenter_jitter=float(analysis["offcenter_jitter"]),
            seed=int(analysis["seed"]),
            budget_points=int(analysis["budget_points"]),
        ),
        output_dir=Path(cfg["output"]["directory"]),
        document=cfg,
        source=source,
    )


def load_experiment_config(path) -> ExperimentConfig:
    """Read a JSON experiment document; problems raise ConfigError anchored to file:line."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config ({e.strerror or e})") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from e
    config = experiment_from_dict(raw, source=str(path), text=text)
    logger.info("loaded %s experiment from %s (hash %s)", config.system_name, path, config.config_hash()[:12])
    return config


# ---- DERIVED VALUES ----
def canonical_json(document: Dict[str, Any]) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(document: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a configuration document."""
    return hashlib.sha256(canonical_json(document).encode("utf-8")).hexdigest()


def initial_conditions(config: ExperimentConfig) -> np.ndarray:
    """Explicit initial conditions followed by the seeded ensemble draws, one row each."""
    n = config.state_dim
    rows = [np.array(x0, dtype=float) for x0 in config.simulation.initial_conditions]
    ensemble = config.simulation.ensemble
    if ensemble:
        lo = np.array(ensemble.get("lo", config.domain_lo), dtype=float)
        hi = np.array(ensemble.get("hi", config.domain_hi), dtype=float)
        rng = np.random.default_rng(ensemble.get("seed", 0))
        rows.extend(rng.uniform(lo, hi, size=(ensemble["count"], n)))
    if not rows:
        raise ConfigError(f"{config.source}: no initial conditions given")
    return np.vstack(rows).reshape(-1, n)
