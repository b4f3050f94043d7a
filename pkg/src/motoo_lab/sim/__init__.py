"""Euler simulation of the primary SDE, its comparison processes and the
squared Bessel / CIR transforms."""

from ._runner import MAX_STORED_STEPS, SimulationError, kernels, n_steps
from .paths import (
    CoupledTriple,
    PathGrid,
    TimeChange,
    simulate_coupled,
    simulate_primary,
    simulate_sqbessel,
    time_change_of,
    u_transform,
)
from .stream import (
    CoupledStream,
    LilBlocks,
    SqBesselStream,
    coupled_stream,
    dyadic_block_times,
    lil_blocks,
    sqbessel_endpoints,
    sqbessel_stream,
)

__all__ = [
    "MAX_STORED_STEPS",
    "SimulationError",
    "kernels",
    "n_steps",
    "CoupledTriple",
    "PathGrid",
    "TimeChange",
    "simulate_coupled",
    "simulate_primary",
    "simulate_sqbessel",
    "time_change_of",
    "u_transform",
    "CoupledStream",
    "LilBlocks",
    "SqBesselStream",
    "coupled_stream",
    "dyadic_block_times",
    "lil_blocks",
    "sqbessel_endpoints",
    "sqbessel_stream",
]
