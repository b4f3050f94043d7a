"""Shared test helpers."""

import math

import numpy as np

from motoo_lab.model import Diffusion, Drift, ModelSpec


def constant_model(value: float, x0: float = 0.0, mu: float = 0.0) -> ModelSpec:
    """``f = 0``, ``g = value`` with the tightest constants."""
    g2 = value * value
    return ModelSpec(Drift.of("zero"), Diffusion.of("constant", value=value), 1.0, mu, value, g2, g2, x0)


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.abs(a - b) / np.abs(b)


def law_cdf(spec):
    """``sqbessel_cdf`` extended by 0 on ``c <= 0`` (the law has no atom at 0)."""
    from motoo_lab import special

    def cdf(c):
        c = np.asarray(c, dtype=float)
        out = np.zeros(c.shape)
        pos = c > 0
        if pos.any():
            out[pos] = special.sqbessel_cdf(spec, c[pos])
        return out

    return cdf


ACCEPTANCE_LINES: list[str] = []


def record(label: str, ok: bool, detail: str) -> None:
    """Log one acceptance line (shown in the terminal summary) and assert it."""
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# (integrand, t0, convergent?) with known answers: p-integrals and log-corrected p-integrals
CORPUS = [
    (lambda t: t**-2.0, 1.0, True),
    (lambda t: t**-1.5, 1.0, True),
    (lambda t: t**-3.0, 2.0, True),
    (lambda t: np.exp(-t), 1.0, True),
    (lambda t: 1.0 / (t * np.log(t) ** 2), math.e, True),
    (lambda t: 1.0 / t, 1.0, False),
    (lambda t: t**-0.5, 1.0, False),
    (lambda t: t**-0.9, 1.0, False),
    (lambda t: 1.0 / (t * np.log(t)), math.e, False),
    (lambda t: np.ones_like(t), 1.0, False),
]
