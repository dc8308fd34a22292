"""Shared fixtures for the SILL Koopman test suite."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to sys.path so `config` and `koopman_sill` import from a checkout
project_root = str(Path(__file__).resolve().parents[1])
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from config.config import DEMO_CONFIGS  # noqa: E402
from koopman_sill.dictionary import SILLDictionary, build_lattice  # noqa: E402
from koopman_sill.generator import assemble_generator  # noqa: E402
from koopman_sill.regression import fit_weights, make_sample_grid  # noqa: E402
from koopman_sill.simulation import VectorField, benchmark_toggle, benchmark_vdp  # noqa: E402


def linear_field(rate: float, n: int = 1) -> VectorField:
    """x' = rate * x."""
    return VectorField("linear", n, {"rate": rate}, lambda x: rate * x)


def constant_field(values) -> VectorField:
    values = np.asarray(values, dtype=float)
    return VectorField("constant", values.size, {}, lambda x: np.broadcast_to(values, np.shape(x)).copy())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def single_center():
    """One center at 0 in 1-D, alpha = 2."""
    return SILLDictionary(np.array([[0.0]]), 2.0, np.array([-1.0]), np.array([1.0]), np.array([1.0]))


@pytest.fixture
def lattice_1d():
    return build_lattice([0.0], [2.0], [0.5], 3.0)


@pytest.fixture
def lattice_2d():
    """3 x 3 lattice on [0, 1]^2."""
    return build_lattice([0.0, 0.0], [1.0, 1.0], [0.5, 0.5], 4.0)


@pytest.fixture(scope="session")
def toggle_setup():
    cfg = DEMO_CONFIGS["toggle"]
    dictionary = build_lattice(cfg["domain"]["lo"], cfg["domain"]["hi"], cfg["dictionary"]["spacing"],
                               cfg["dictionary"]["alpha"])
    field = benchmark_toggle(cfg["system"]["params"])
    grid = make_sample_grid(dictionary, cfg["regression"]["per_dim"])
    return dictionary, field, grid


@pytest.fixture(scope="session")
def toggle_model(toggle_setup):
    """Fitted weights, report and projected generator for the toggle demo."""
    dictionary, field, grid = toggle_setup
    weights, report = fit_weights(field, dictionary, grid)
    generator = assemble_generator(dictionary, weights, field, grid)
    return dictionary, field, grid, weights, report, generator


@pytest.fixture(scope="session")
def vdp_model():
    cfg = DEMO_CONFIGS["vdp"]
    dictionary = build_lattice(cfg["domain"]["lo"], cfg["domain"]["hi"], cfg["dictionary"]["spacing"],
                               cfg["dictionary"]["alpha"])
    field = benchmark_vdp(cfg["system"]["params"])
    grid = make_sample_grid(dictionary, cfg["regression"]["per_dim"])
    weights, report = fit_weights(field, dictionary, grid)
    generator = assemble_generator(dictionary, weights, field, grid)
    return dictionary, field, grid, weights, report, generator
