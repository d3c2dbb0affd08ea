"""Bernstein polynomial basis sampled on a uniform time grid."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np


class DimensionError(ValueError):
    """Raised when array or basis dimensions are invalid or inconsistent."""


def _bernstein(degree: int, tau: np.ndarray) -> np.ndarray:
    # (len(tau), degree + 1); zero columns for degree < 0 are never requested
    k = np.arange(degree + 1)
    coef = np.array([comb(degree, i) for i in k], dtype=float)
    return coef * tau[:, None] ** k * (1.0 - tau[:, None]) ** (degree - k)


@dataclass(frozen=True)
class BasisSet:
    """Sampled basis ``P`` and its time derivatives ``Pdot``, ``Pddot``.

    Coefficients live on normalized time ``tau = t / T``; the derivative
    matrices carry physical units (1/s and 1/s^2).
    """

    n: int
    degree: int
    t_samples: np.ndarray
    P: np.ndarray
    Pdot: np.ndarray
    Pddot: np.ndarray

    @property
    def total_time(self) -> float:
        return float(self.t_samples[-1])

    @property
    def n_coeffs(self) -> int:
        return self.degree + 1

    @property
    def dt(self) -> float:
        return float(self.t_samples[1] - self.t_samples[0])


def build_basis(n: int, degree: int, total_time: float) -> BasisSet:
    """Evaluate a degree-``degree`` Bernstein basis at ``n`` uniform times on [0, T]."""
    if int(n) != n or n < 3:
        raise DimensionError(f"n must be an integer >= 3, got {n}")
    if int(degree) != degree or degree < 4:
        raise DimensionError(f"degree must be an integer >= 4, got {degree}")
    if not np.isfinite(total_time) or total_time <= 0:
        raise DimensionError(f"total_time must be positive, got {total_time}")
    n, degree, T = int(n), int(degree), float(total_time)

    t = np.linspace(0.0, T, n)
    tau = np.linspace(0.0, 1.0, n)

    P = _bernstein(degree, tau)

    # d/dtau B_{i,d} = d (B_{i-1,d-1} - B_{i,d-1})
    low1 = _bernstein(degree - 1, tau)
    dP = np.zeros_like(P)
    dP[:, 1:] += low1
    dP[:, :-1] -= low1
    dP *= degree

    low2 = _bernstein(degree - 2, tau)
    ddP = np.zeros_like(P)
    ddP[:, 2:] += low2
    ddP[:, 1:-1] -= 2.0 * low2
    ddP[:, :-2] += low2
    ddP *= degree * (degree - 1)

    for arr in (t, P, dP, ddP):
        arr.setflags(write=False)
    return BasisSet(n=n, degree=degree, t_samples=t, P=P, Pdot=dP / T, Pddot=ddP / T**2)


def eval_curve(basis: BasisSet, coeffs, order: int = 0) -> np.ndarray:
    """Sample the curve (``order=0``) or its first/second time derivative."""
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (basis.n_coeffs,):
        raise DimensionError(f"expected {basis.n_coeffs} coefficients, got shape {c.shape}")
    if order == 0:
        return basis.P @ c
    if order == 1:
        return basis.Pdot @ c
    if order == 2:
        return basis.Pddot @ c
    raise DimensionError(f"order must be 0, 1 or 2, got {order}")
