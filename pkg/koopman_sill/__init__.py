"""
SILL Koopman generator toolkit: state-inclusive logistic lifting dictionaries,
generator assembly, closure-error analysis and lifted-system simulation.
"""

__version__ = "0.1.0"
