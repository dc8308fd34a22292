"""
Configuration file for the SILL Koopman generator toolkit
Runtime settings come from the environment (.env); experiment documents are validated here
"""

import copy
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

# Load environment variables from .env file
try:
    from dotenv import load_dotenv

    # Get the project root directory (parent of config directory)
    config_dir = Path(__file__).parent
    project_root = config_dir.parent
    env_path = project_root / '.env'

    if env_path.exists():
        load_dotenv(env_path)

except ImportError:
    print("⚠️  python-dotenv not installed. Environment variables from .env file will not be loaded.")
    print("   Install with: pip install python-dotenv")


def _env_flag(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


# ---- LOGGING CONFIGURATION ----
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")  # DEBUG, INFO, WARNING, ERROR
LOG_FILE = os.getenv("LOG_FILE", "sill_koopman.log")
ENABLE_CONSOLE_LOGGING = _env_flag("ENABLE_CONSOLE_LOGGING", True)
ENABLE_FILE_LOGGING = _env_flag("ENABLE_FILE_LOGGING", False)
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# ---- PERFORMANCE SETTINGS ----
MAX_WORKERS = int(os.getenv("MAX_WORKERS", str(os.cpu_count() or 1)))
SHOW_PROGRESS = _env_flag("SHOW_PROGRESS", True)

# ---- OUTPUT CONFIGURATION ----
OUT_DIR = Path(os.getenv("OUT_DIR", "data"))
MODEL_FILENAME = "model.json"
REGRESSION_REPORT_FILENAME = "regression_report.json"
SIMULATION_SUMMARY_FILENAME = "simulation_summary.json"
ALPHA_SWEEP_FILENAME = "alpha_sweep.csv"
ERROR_BOUNDS_FILENAME = "error_bounds.json"
CONFIG_FILENAME = "config.json"
MODEL_FORMAT_VERSION = "1"

# ---- NUMERICAL DEFAULTS ----
DEFAULT_RIDGE = 0.0
SAMPLES_PER_CENTER = 4           # default regression grid holds ~4 points per center
MAX_SAMPLE_POINTS = 10 ** 7
RANK_TOLERANCE = 1e-12           # relative to the largest |R_ii| of the pivoted QR
EDMD_TOLERANCE = 1e-10           # relative objective change
EDMD_MAX_ITERATIONS = 10 ** 4
EDMD_POWER_ITERATIONS = 100
GROWTH_WARNING_RATE = 1e-3       # max Re eigenvalue of K above which assembly warns
SUP_SEARCH_PADDING = 2           # mesh spacings added on each side of the domain
SUP_REFINE_ITERATIONS = 10
MIN_SUP_DENSITY = 16

# ---- BENCHMARK SYSTEMS ----
# Parameters accepted per system, with their defaults
SYSTEM_DEFAULTS = {
    "vdp": {"a1": -0.2},
    "toggle": {"a1": 3.0, "a2": 3.0, "n1": 2.0, "n2": 2.0, "delta": 1.0},
}

# ---- EXPERIMENT DEFAULTS ----
REGRESSION_DEFAULTS = {"per_dim": None, "mode": "lattice", "seed": 0, "ridge": DEFAULT_RIDGE}
ANALYSIS_DEFAULTS = {
    "alphas": [1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
    "sup_density": MIN_SUP_DENSITY,
    "refine_iterations": SUP_REFINE_ITERATIONS,
    "offcenter_samples": 100,
    "offcenter_jitter": 0.02,
    "seed": 0,
    "budget_points": 5,
}
SIMULATION_DEFAULTS = {"initial_conditions": [], "ensemble": None}
OUTPUT_DEFAULTS = {"directory": str(OUT_DIR)}

# ---- DEMO EXPERIMENTS ----
DEMO_CONFIGS = {
    "vdp": {
        "system": {"name": "vdp", "params": {"a1": -0.2}},
        "domain": {"lo": [-3.0, -3.0], "hi": [3.0, 3.0]},
        "dictionary": {"spacing": [0.5, 0.5], "alpha": 4.0},
        "regression": {"per_dim": 30, "mode": "lattice", "seed": 0, "ridge": 0.0},
        "simulation": {
            "dt": 0.01,
            "horizon": 20.0,
            "initial_conditions": [[1.0, 1.0], [0.2, 0.2], [-1.0, -1.0]],
            "ensemble": None,
        },
        "analysis": dict(ANALYSIS_DEFAULTS),
        "output": {"directory": "data/vdp"},
    },
    "toggle": {
        "system": {"name": "toggle", "params": {"a1": 3.0, "a2": 3.0, "n1": 2.0, "n2": 2.0, "delta": 1.0}},
        "domain": {"lo": [0.0, 0.0], "hi": [3.0, 3.0]},
        "dictionary": {"spacing": [0.6, 0.6], "alpha": 1.5},
        "regression": {"per_dim": 24, "mode": "lattice", "seed": 0, "ridge": 0.0},
        "simulation": {
            "dt": 0.01,
            "horizon": 10.0,
            "initial_conditions": [[0.5, 2.0], [2.0, 0.5], [1.0, 1.5]],
            "ensemble": None,
        },
        "analysis": dict(ANALYSIS_DEFAULTS),
        "output": {"directory": "data/toggle"},
    },
}

# ---- SCHEMA ----
SECTION_KEYS = {
    "system": {"name", "params"},
    "domain": {"lo", "hi"},
    "dictionary": {"spacing", "alpha"},
    "regression": set(REGRESSION_DEFAULTS),
    "simulation": {"dt", "horizon", "initial_conditions", "ensemble"},
    "analysis": set(ANALYSIS_DEFAULTS),
    "output": set(OUTPUT_DEFAULTS),
}
REQUIRED_SECTIONS = ["system", "domain", "dictionary", "simulation"]
ENSEMBLE_KEYS = {"count", "seed", "lo", "hi"}


def setup_logging(level: Optional[str] = None) -> None:
    """Configure root logging from the settings above"""
    handlers: List[logging.Handler] = []
    if ENABLE_CONSOLE_LOGGING:
        handlers.append(logging.StreamHandler())
    if ENABLE_FILE_LOGGING:
        handlers.append(logging.FileHandler(LOG_FILE, encoding="utf-8"))
    if not handlers:
        handlers.append(logging.NullHandler())
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def with_defaults(raw: Dict[str, Any]) -> Dict[str, Any]:
    """Return a deep copy of an experiment document with optional sections filled in"""
    cfg = copy.deepcopy(raw)
    for section, defaults in (
        ("regression", REGRESSION_DEFAULTS),
        ("analysis", ANALYSIS_DEFAULTS),
        ("output", OUTPUT_DEFAULTS),
    ):
        merged = copy.deepcopy(defaults)
        merged.update(cfg.get(section) or {})
        cfg[section] = merged
    if isinstance(cfg.get("simulation"), dict):
        for key, value in SIMULATION_DEFAULTS.items():
            cfg["simulation"].setdefault(key, copy.deepcopy(value))
    if isinstance(cfg.get("system"), dict):
        name = cfg["system"].get("name")
        params = copy.deepcopy(SYSTEM_DEFAULTS.get(name, {}) if isinstance(name, str) else {})
        given = cfg["system"].get("params") or {}
        if isinstance(given, dict):
            params.update(given)
        cfg["system"]["params"] = params
    return cfg


# ---- VALIDATION FUNCTIONS ----
def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_vector(errors: List[str], path: str, value: Any, dim: Optional[int]) -> Optional[List[float]]:
    if not isinstance(value, list) or not value or not all(_is_number(v) for v in value):
        errors.append(f"{path}: must be a non-empty list of finite numbers")
        return None
    if dim is not None and len(value) != dim:
        errors.append(f"{path}: expected {dim} entries, got {len(value)}")
        return None
    return [float(v) for v in value]


def validate_config(raw: Dict[str, Any]) -> List[str]:
    """Validate an experiment document; every error reads 'dotted.path: message'"""
    errors: List[str] = []

    if not isinstance(raw, dict):
        return ["config: top level must be a JSON object"]

    for key in raw:
        if key not in SECTION_KEYS:
            errors.append(f"{key}: unknown section")
    for section in REQUIRED_SECTIONS:
        if section not in raw:
            errors.append(f"{section}: required section missing")
    for section, allowed in SECTION_KEYS.items():
        body = raw.get(section)
        if body is None:
            continue
        if not isinstance(body, dict):
            errors.append(f"{section}: must be an object")
            continue
        for key in body:
            if key not in allowed:
                errors.append(f"{section}.{key}: unknown key")
    if errors:
        return errors

    cfg = with_defaults(raw)

    # System
    system = cfg["system"]
    name = system.get("name")
    if not isinstance(name, str) or name not in SYSTEM_DEFAULTS:
        errors.append(f"system.name: unknown system {name!r} (choose from {sorted(SYSTEM_DEFAULTS)})")
    else:
        params = system["params"]
        if not isinstance(raw["system"].get("params", {}), dict):
            errors.append("system.params: must be an object")
        else:
            for key, value in params.items():
                if key not in SYSTEM_DEFAULTS[name]:
                    errors.append(f"system.params.{key}: unknown parameter for {name}")
                elif not _is_number(value):
                    errors.append(f"system.params.{key}: must be a finite number")
            if name == "toggle" and not errors:
                if params["delta"] <= 0:
                    errors.append("system.params.delta: must be > 0")
                for key in ("n1", "n2"):
                    if params[key] < 1:
                        errors.append(f"system.params.{key}: must be >= 1")

    # Domain and dictionary
    lo = _check_vector(errors, "domain.lo", cfg["domain"].get("lo"), None)
    dim = len(lo) if lo is not None else None
    hi = _check_vector(errors, "domain.hi", cfg["domain"].get("hi"), dim)
    if lo is not None and hi is not None and any(a >= b for a, b in zip(lo, hi)):
        errors.append("domain.hi: must exceed domain.lo in every component")
    if name == "vdp" or name == "toggle":
        if dim is not None and dim != 2:
            errors.append(f"domain.lo: system {name} has 2 states, got {dim}")

    spacing = _check_vector(errors, "dictionary.spacing", cfg["dictionary"].get("spacing"), dim)
    if spacing is not None and any(s <= 0 for s in spacing):
        errors.append("dictionary.spacing: must be > 0 in every component")
    alpha = cfg["dictionary"].get("alpha")
    if not _is_number(alpha) or alpha <= 0:
        errors.append("dictionary.alpha: must be a finite number > 0")

    # Regression
    regression = cfg["regression"]
    if regression["mode"] not in ("lattice", "random"):
        errors.append("regression.mode: must be 'lattice' or 'random'")
    per_dim = regression["per_dim"]
    if per_dim is not None:
        if not _is_int(per_dim) or per_dim < 1:
            errors.append("regression.per_dim: must be a positive integer")
        elif regression["mode"] == "lattice" and per_dim < 2:
            errors.append("regression.per_dim: lattice mode needs at least 2 points per dimension")
        elif dim is not None and dim * math.log10(per_dim) > math.log10(MAX_SAMPLE_POINTS):
            errors.append(f"regression.per_dim: {per_dim}^{dim} points exceeds {MAX_SAMPLE_POINTS}")
    if not _is_int(regression["seed"]):
        errors.append("regression.seed: must be an integer")
    if not _is_number(regression["ridge"]) or regression["ridge"] < 0:
        errors.append("regression.ridge: must be a finite number >= 0")

    # Simulation
    simulation = cfg["simulation"]
    dt = simulation.get("dt")
    horizon = simulation.get("horizon")
    if not _is_number(dt) or dt <= 0:
        errors.append("simulation.dt: must be a finite number > 0")
    if not _is_number(horizon) or horizon <= 0:
        errors.append("simulation.horizon: must be a finite number > 0")
    elif _is_number(dt) and dt > horizon:
        errors.append("simulation.dt: must not exceed simulation.horizon")
    initial = simulation["initial_conditions"]
    if not isinstance(initial, list):
        errors.append("simulation.initial_conditions: must be a list of state vectors")
        initial = []
    for index, x0 in enumerate(initial):
        _check_vector(errors, f"simulation.initial_conditions[{index}]", x0, dim)
    ensemble = simulation["ensemble"]
    if ensemble is not None:
        if not isinstance(ensemble, dict):
            errors.append("simulation.ensemble: must be an object or null")
        else:
            for key in ensemble:
                if key not in ENSEMBLE_KEYS:
                    errors.append(f"simulation.ensemble.{key}: unknown key")
            count = ensemble.get("count")
            if not _is_int(count) or count < 1:
                errors.append("simulation.ensemble.count: must be a positive integer")
            if not _is_int(ensemble.get("seed", 0)):
                errors.append("simulation.ensemble.seed: must be an integer")
            e_lo = _check_vector(errors, "simulation.ensemble.lo", ensemble.get("lo", lo), dim)
            e_hi = _check_vector(errors, "simulation.ensemble.hi", ensemble.get("hi", hi), dim)
            if e_lo is not None and e_hi is not None and any(a > b for a, b in zip(e_lo, e_hi)):
                errors.append("simulation.ensemble.hi: must not be below simulation.ensemble.lo")
    if not initial and ensemble is None:
        errors.append("simulation.initial_conditions: no initial conditions given")

    # Analysis
    analysis = cfg["analysis"]
    alphas = analysis["alphas"]
    if not isinstance(alphas, list) or not alphas or not all(_is_number(a) and a > 0 for a in alphas):
        errors.append("analysis.alphas: must be a non-empty list of positive numbers")
    elif any(b <= a for a, b in zip(alphas, alphas[1:])):
        errors.append("analysis.alphas: must be strictly increasing")
    if not _is_int(analysis["sup_density"]) or analysis["sup_density"] < MIN_SUP_DENSITY:
        errors.append(f"analysis.sup_density: must be an integer >= {MIN_SUP_DENSITY}")
    for key in ("refine_iterations", "seed"):
        if not _is_int(analysis[key]) or analysis[key] < 0:
            errors.append(f"analysis.{key}: must be a non-negative integer")
    for key in ("offcenter_samples", "budget_points"):
        if not _is_int(analysis[key]) or analysis[key] < 1:
            errors.append(f"analysis.{key}: must be a positive integer")
    jitter = analysis["offcenter_jitter"]
    if not _is_number(jitter) or not (0.0 <= jitter < 0.5):
        errors.append("analysis.offcenter_jitter: must lie in [0, 0.5)")

    # Output
    if not isinstance(cfg["output"]["directory"], str) or not cfg["output"]["directory"]:
        errors.append("output.directory: must be a non-empty string")

    return errors


# ---- CONFIGURATION SUMMARY ----
def print_config_summary(cfg: Dict[str, Any]) -> None:
    """Print configuration summary"""
    dims = len(cfg["domain"]["lo"])
    print("🔧 CONFIGURATION SUMMARY")
    print("=" * 50)
    print(f"⚙️  System: {cfg['system']['name']} {cfg['system']['params']}")
    print(f"📐 Domain: {cfg['domain']['lo']} → {cfg['domain']['hi']} ({dims} states)")
    print(f"🔢 Lattice spacing: {cfg['dictionary']['spacing']}, alpha = {cfg['dictionary']['alpha']}")
    print(f"📊 Regression: {cfg['regression']['mode']} grid, per_dim = {cfg['regression']['per_dim']}, "
          f"ridge = {cfg['regression']['ridge']}")
    print(f"⏱️  Simulation: dt = {cfg['simulation']['dt']}, horizon = {cfg['simulation']['horizon']}")
    print(f"📁 Output directory: {cfg['output']['directory']}")
    print("=" * 50)


if __name__ == "__main__":
    # Validate the demo experiments when run directly
    for demo_name, demo_cfg in DEMO_CONFIGS.items():
        errors = validate_config(demo_cfg)
        if errors:
            print(f"❌ Configuration errors in demo '{demo_name}':")
            for error in errors:
                print(f"   • {error}")
        else:
            print(f"✅ Demo '{demo_name}' configuration is valid")
            print_config_summary(with_defaults(demo_cfg))
