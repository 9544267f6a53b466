"""Kernel functions and their analytic functionals."""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidBandwidthError


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric kernel supported on [-support_halfwidth, support_halfwidth].

    lam = int K^2, cee = lam^-1 int (K')^2 and mu2 = int u^2 K are stored
    exactly; they enter the band constants directly.
    """

    name: str
    eval: Callable
    derivative: Callable
    support_halfwidth: float
    lam: float
    cee: float
    mu2: float

    def __post_init__(self):
        if not self.support_halfwidth > 0:
            raise ValueError("KernelSpec.support_halfwidth must be positive.")
        if not (self.lam > 0 and self.cee > 0 and self.mu2 > 0):
            raise ValueError("KernelSpec functionals must be positive.")


def _quarticEval(u):
    u = np.asarray(u, dtype=np.float64)
    inside = np.abs(u) <= 1.0
    return np.where(inside, 0.9375 * (1.0 - u * u) ** 2, 0.0)


def _quarticDerivative(u):
    u = np.asarray(u, dtype=np.float64)
    inside = np.abs(u) <= 1.0
    return np.where(inside, -3.75 * u * (1.0 - u * u), 0.0)


def quarticKernel():
    """Quartic (biweight) kernel K(u) = 15(1-u^2)^2/16 on [-1, 1]."""
    return KernelSpec(
        name="quartic",
        eval=_quarticEval,
        derivative=_quarticDerivative,
        support_halfwidth=1.0,
        lam=5.0 / 7.0,
        cee=3.0,
        mu2=1.0 / 7.0)


def rescaledEval(spec, u, h):
    """Return K_h(u) = K(u/h)/h."""
    if not h > 0:
        raise InvalidBandwidthError("bandwidth must be positive, got {0}".format(h))
    value = spec.eval(np.asarray(u, dtype=np.float64) / h) / h
    if np.ndim(value) == 0:
        return float(value)
    return value
