"""Control recovery and evaluation metrics for a solved trajectory.

The bank angle is not an optimization variable; it is recovered from the
coordinated-turn relation psi_dot = g tan(phi) / v once the trajectory is known.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSet
from .model import Limits, ProblemSpec


@dataclass(frozen=True)
class ControlProfile:
    v_dot: np.ndarray
    gamma_dot: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray
    psi_dot: np.ndarray


@dataclass(frozen=True)
class SolutionMetrics:
    gamma_dot_norm: float
    phi_dot_norm: float
    v_dot_norm: float
    final_position_residual: float
    arc_length: float
    wall_time: float
    iterations: int
    converged: bool

    def as_dict(self) -> dict:
        return {
            "gamma_dot_norm": self.gamma_dot_norm,
            "phi_dot_norm": self.phi_dot_norm,
            "v_dot_norm": self.v_dot_norm,
            "final_position_residual": self.final_position_residual,
            "arc_length": self.arc_length,
            "wall_time": self.wall_time,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def finite_difference(values: np.ndarray, dt: float) -> np.ndarray:
    """Central differences inside, first-order one-sided at both ends."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return np.zeros_like(values)
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * dt)
    out[0] = (values[1] - values[0]) / dt
    out[-1] = (values[-1] - values[-2]) / dt
    return out


def bank_angle(v, psi_dot, g: float) -> np.ndarray:
    return np.arctan(np.asarray(v) * np.asarray(psi_dot) / g)


def recover_controls(state, basis: BasisSet, limits: Limits) -> ControlProfile:
    """Forward acceleration, flight-path rate, bank angle and bank rate along the solution."""
    dt = basis.dt
    psi_dot = basis.Pdot @ state.c_psi
    phi = bank_angle(state.v, psi_dot, limits.g)
    return ControlProfile(
        v_dot=finite_difference(state.v, dt),
        gamma_dot=finite_difference(state.gamma, dt),
        phi=phi,
        phi_dot=finite_difference(phi, dt),
        psi_dot=psi_dot,
    )


def arc_length(points: np.ndarray) -> float:
    """Sum of chord lengths of an (n, 3) polyline."""
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def compute_metrics(
    state, controls: ControlProfile, spec: ProblemSpec, basis: BasisSet,
    wall_time: float = 0.0, iterations: int = 0, converged: bool = False,
) -> SolutionMetrics:
    """Unweighted control norms over all samples, endpoint miss distance and chordal arc length."""
    P = basis.P
    pts = np.stack([P @ state.c_x, P @ state.c_y, P @ state.c_z], axis=1)
    return SolutionMetrics(
        gamma_dot_norm=float(np.linalg.norm(controls.gamma_dot)),
        phi_dot_norm=float(np.linalg.norm(controls.phi_dot)),
        v_dot_norm=float(np.linalg.norm(controls.v_dot)),
        final_position_residual=float(np.linalg.norm(pts[-1] - spec.goal)),
        arc_length=arc_length(pts),
        wall_time=float(wall_time),
        iterations=int(iterations),
        converged=bool(converged),
    )


def summarize(solution) -> tuple:
    """``(controls, metrics)`` for a :class:`~fwtrajopt.solver.TrajectorySolution`."""
    controls = recover_controls(solution.state, solution.basis, solution.spec.limits)
    metrics = compute_metrics(
        solution.state, controls, solution.spec, solution.basis,
        solution.wall_time, solution.iterations, solution.converged,
    )
    return controls, metrics
