"""Numerical laboratory for LIL-type asymptotics of one-dimensional SDEs.

Modules
-------
model
    Coefficient families, :class:`ModelSpec` and sampling validation.
special
    Modified Bessel series, squared Bessel density/CDF and tail bounds.
diffusion
    Scale functions, speed measures, Feller's test and Motoo's criterion.
sim
    Euler simulation of the primary SDE and its comparison processes.
stats
    LIL ratios, occupation fractions, time averages, ``F_c`` and reports.
cli
    The ``motoo-lab`` command.
"""

from . import diffusion, model, special, sim, stats
from ._backend import BACKEND
from .model import ModelSpec, brownian_model, reference_model, validate_model

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ModelSpec",
    "brownian_model",
    "diffusion",
    "model",
    "reference_model",
    "sim",
    "special",
    "stats",
    "validate_model",
]
