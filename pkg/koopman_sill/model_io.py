"""
Model file persistence and result emission (trajectory CSVs, JSON reports).

Floats are written in their shortest round-trip decimal form, so loading a
saved model reproduces every matrix bitwise.
"""

import json
import logging
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from config.config import MODEL_FORMAT_VERSION
from koopman_sill.dictionary import SILLDictionary
from koopman_sill.errors import ConfigError, SILLError
from koopman_sill.generator import KoopmanGenerator
from koopman_sill.regression import WeightMatrix
from koopman_sill.simulation import TrajectoryRecord

logger = logging.getLogger(__name__)

MODEL_KEYS = {
    "format_version", "state_dim", "alpha", "centers", "W", "K",
    "domain_lo", "domain_hi", "mesh_spacing", "assembly_mode", "provenance",
}


@dataclass(frozen=True)
class ModelFile:
    """Everything needed to rebuild a fitted SILL model."""

    dictionary: SILLDictionary
    weights: WeightMatrix
    generator: KoopmanGenerator
    provenance: Dict[str, Any] = field(default_factory=dict)
    format_version: str = MODEL_FORMAT_VERSION

    @property
    def state_dim(self) -> int:
        return self.dictionary.state_dim

    def to_document(self) -> Dict[str, Any]:
        d = self.dictionary
        return {
            "format_version": self.format_version,
            "state_dim": d.state_dim,
            "alpha": float(d.alpha),
            "centers": d.centers.tolist(),
            "W": self.weights.W.tolist(),
            "K": self.generator.K.tolist(),
            "domain_lo": d.domain_lo.tolist(),
            "domain_hi": d.domain_hi.tolist(),
            "mesh_spacing": d.mesh_spacing.tolist(),
            "assembly_mode": self.generator.assembly_mode,
            "provenance": dict(self.provenance),
        }


def _to_builtin(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_json(path, payload: Dict[str, Any]) -> Path:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False, default=_to_builtin)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text + "\n")
    return path


def save_model(model: ModelFile, path) -> Path:
    path = write_json(path, model.to_document())
    logger.info("saved model (N_L=%d, m=%d) to %s", model.dictionary.n_centers, model.generator.lifting_dim, path)
    return path


def _matrix(document: Dict[str, Any], key: str, shape) -> np.ndarray:
    try:
        array = np.array(document[key], dtype=float)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"model field {key!r} is not a numeric array") from e
    if array.shape != shape:
        raise ConfigError(f"model field {key!r} has shape {array.shape}, expected {shape}")
    return array


def load_model(path) -> ModelFile:
    """Read and check a model file written by save_model."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"{path}: cannot read model ({e.strerror or e})") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: model file must hold a JSON object")
    missing = MODEL_KEYS - set(document)
    if missing:
        raise ConfigError(f"{path}: model file lacks {sorted(missing)}")
    if document["format_version"] != MODEL_FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported model format {document['format_version']!r}")

    n = document["state_dim"]
    if not isinstance(n, int) or n < 1:
        raise ConfigError(f"{path}: state_dim must be a positive integer")
    try:
        centers = np.array(document["centers"], dtype=float)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: centers must be a numeric N_L x {n} array") from e
    if centers.ndim != 2 or centers.shape[1] != n:
        raise ConfigError(f"{path}: centers must be an N_L x {n} array")
    n_centers = centers.shape[0]
    m = 1 + n + n_centers
    try:
        dictionary = SILLDictionary(
            centers, document["alpha"],
            _matrix(document, "domain_lo", (n,)), _matrix(document, "domain_hi", (n,)),
            _matrix(document, "mesh_spacing", (n,)),
        )
        if not np.array_equal(dictionary.centers, centers):
            raise ConfigError(f"{path}: centers are not in lexicographic order")
        weights = WeightMatrix(_matrix(document, "W", (n, n_centers)))
        generator = KoopmanGenerator(
            K=_matrix(document, "K", (m, m)), state_dim=n, n_centers=n_centers,
            assembly_mode=document["assembly_mode"],
        )
    except ConfigError:
        raise
    except SILLError as e:
        raise ConfigError(f"{path}: {e}") from e
    if not isinstance(document["provenance"], dict):
        raise ConfigError(f"{path}: provenance must be a JSON object")
    return ModelFile(dictionary, weights, generator, provenance=dict(document["provenance"]))


# ---- TRAJECTORY CSV ----
def trajectory_frame(record: TrajectoryRecord) -> pd.DataFrame:
    """t,x1..xn for a reference; t,x1..xn,xhat1..xhatn,err_l2 for a prediction with a reference attached."""
    n = record.state_dim
    columns: Dict[str, np.ndarray] = {"t": record.times}
    if record.reference is None:
        for i in range(n):
            columns[f"x{i + 1}"] = record.states[:, i]
    else:
        for i in range(n):
            columns[f"x{i + 1}"] = record.reference[:, i]
        for i in range(n):
            columns[f"xhat{i + 1}"] = record.states[:, i]
        errors = record.errors if record.errors is not None else np.linalg.norm(record.states - record.reference, axis=1)
        columns["err_l2"] = errors
    return pd.DataFrame(columns)


def write_trajectory_csv(path, record: TrajectoryRecord) -> Path:
    """RFC-4180 CSV (CRLF, header row, UTF-8, '.' decimal separator)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trajectory_frame(record).to_csv(path, index=False, lineterminator="\r\n", encoding="utf-8")
    return path


def read_trajectory_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def write_table_csv(path, rows, columns: Optional[list] = None) -> Path:
    """Rows of dicts or dataclasses as an RFC-4180 CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([asdict(r) if is_dataclass(r) else dict(r) for r in rows], columns=columns)
    frame.to_csv(path, index=False, lineterminator="\r\n", encoding="utf-8")
    return path
