"""Alternating-minimization trajectory optimizer.

One iteration updates, in order: the three position axes (one shared KKT
factorization), the heading polynomial, flight-path angle, forward speed,
obstacle angles, obstacle distances, and finally the coefficient-space
Bregman multipliers.

Collision multipliers are also kept per obstacle and sample (``mu_c``). Their
image under ``P^T`` summed over obstacles is exactly the collision part of the
coefficient-space increment, and the obstacle-angle and distance steps project
the positions shifted by them.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from . import steps
from .basis import BasisSet, build_basis
from .model import ProblemSpec, eval_collision_residual, eval_kinematic_residual
from .postprocess import arc_length

AXES = ("x", "y", "z")
MIN_TIME_PER_SAMPLE = 0.01


class SolverError(RuntimeError):
    pass


class SingularKKTError(SolverError):
    """The KKT matrix is numerically singular, typically too few samples for the polynomial degree."""


class DegenerateSpecError(SolverError, ValueError):
    """The problem has no well-defined initial heading."""


class NumericalError(SolverError):
    """A NaN or Inf appeared in the solver state."""

    def __init__(self, iteration: int, block: str):
        super().__init__(f"non-finite value after block '{block}' at iteration {iteration}")
        self.iteration = iteration
        self.block = block


class HeadingVariant(str, enum.Enum):
    UNCONSTRAINED_ADMM = "unconstrained-admm"
    CONSTRAINED_QP = "constrained-qp"


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max-iter-reached"


@dataclass(frozen=True)
class SolverConfig:
    """Loop controls and optional penalty overrides.

    ``rho_*`` left as ``None`` fall back to the problem's ``weights``.
    ``shift_collision_targets`` makes the obstacle-angle and distance steps
    project multiplier-shifted positions; turning it off gives the plain
    scheme where those steps see the raw positions.
    """

    max_iter: int = 300
    residual_tol: float = 1e-3
    rho_nh: Optional[float] = None
    rho_c: Optional[float] = None
    rho_in: Optional[float] = None
    pre_iterations: int = 30
    heading_variant: HeadingVariant = HeadingVariant.UNCONSTRAINED_ADMM
    shift_collision_targets: bool = True

    def __post_init__(self):
        object.__setattr__(self, "heading_variant", HeadingVariant(self.heading_variant))
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be > 0")
        if self.pre_iterations < 0:
            raise ValueError("pre_iterations must be >= 0")
        for name in ("rho_nh", "rho_c", "rho_in"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise ValueError(f"{name} must be >= 0")

    def penalties(self, spec: ProblemSpec):
        w = spec.weights
        return (
            w.rho_nh if self.rho_nh is None else self.rho_nh,
            w.rho_c if self.rho_c is None else self.rho_c,
            w.rho_in if self.rho_in is None else self.rho_in,
        )


@dataclass
class SolverState:
    c_x: np.ndarray
    c_y: np.ndarray
    c_z: np.ndarray
    c_psi: np.ndarray
    v: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    d: np.ndarray
    lambda_x: np.ndarray
    lambda_y: np.ndarray
    lambda_z: np.ndarray
    lambda_psi: np.ndarray
    lambda_in: np.ndarray
    s_in: np.ndarray
    heading_target: np.ndarray
    mu_c: np.ndarray
    iter: int = 0

    def coeffs(self, axis: str) -> np.ndarray:
        return getattr(self, f"c_{axis}")

    def multiplier(self, axis: str) -> np.ndarray:
        return getattr(self, f"lambda_{axis}")

    def copy(self) -> "SolverState":
        kw = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in vars(self).items()}
        return SolverState(**kw)


@dataclass
class ResidualReport:
    mean_kinematic: list = field(default_factory=list)
    mean_collision: list = field(default_factory=list)
    mean_heading_rate_violation: list = field(default_factory=list)

    def append(self, kinematic: float, collision: float, heading_rate: float) -> None:
        self.mean_kinematic.append(float(kinematic))
        self.mean_collision.append(float(collision))
        self.mean_heading_rate_violation.append(float(heading_rate))

    def __len__(self) -> int:
        return len(self.mean_kinematic)

    def last(self):
        return (
            self.mean_kinematic[-1],
            self.mean_collision[-1],
            self.mean_heading_rate_violation[-1],
        )

    def rows(self):
        """(iteration, kinematic, collision, heading_rate) tuples, 1-based iterations."""
        return [
            (i + 1, k, c, h)
            for i, (k, c, h) in enumerate(
                zip(self.mean_kinematic, self.mean_collision, self.mean_heading_rate_violation)
            )
        ]


# ---------------------------------------------------------------------------
# KKT assembly


def _factor(kkt: np.ndarray):
    lu, piv = scipy.linalg.lu_factor(kkt, check_finite=False)
    diag = np.abs(np.diag(lu))
    if not np.all(np.isfinite(diag)) or diag.min() <= 1e-13 * max(diag.max(), 1.0):
        raise SingularKKTError(
            f"KKT matrix of size {kkt.shape[0]} is singular; use more samples or a lower degree"
        )
    return lu, piv


def assemble_kkt(H: np.ndarray, A_eq: np.ndarray) -> np.ndarray:
    q = A_eq.shape[0]
    return np.block([[H, A_eq.T], [A_eq, np.zeros((q, q))]])


@dataclass
class KktCache:
    """Constant matrices and factorizations for fixed basis, obstacle count and penalties."""

    basis: BasisSet
    m: int
    rho_nh: float
    rho_c: float
    rho_in: float
    w_goal: float
    w_smooth: float
    Q_x: np.ndarray
    H_pos: np.ndarray
    A_eq: np.ndarray
    Q_psi: np.ndarray
    H_psi: np.ndarray
    A_eq_psi: np.ndarray
    A_in: np.ndarray
    pos_factor: tuple
    psi_factor: tuple

    @property
    def A_fc(self) -> np.ndarray:
        """The sample basis stacked once per obstacle."""
        return np.tile(self.basis.P, (self.m, 1))

    def solve_position(self, rhs: np.ndarray) -> np.ndarray:
        return scipy.linalg.lu_solve(self.pos_factor, rhs, check_finite=False)

    def solve_heading(self, rhs: np.ndarray) -> np.ndarray:
        return scipy.linalg.lu_solve(self.psi_factor, rhs, check_finite=False)


def build_kkt_cache(
    basis: BasisSet, m: int, rho_nh: float, rho_c: float, rho_in: float,
    w_goal: float = 1.0, w_smooth: float = 1.0,
) -> KktCache:
    P, Pd, Pdd = basis.P, basis.Pdot, basis.Pddot
    Pn = P[-1:]
    PtP = P.T @ P
    Q_x = w_smooth * Pdd.T @ Pdd + w_goal * Pn.T @ Pn
    H_pos = Q_x + rho_c * m * PtP + rho_nh * Pd.T @ Pd
    A_eq = np.vstack([P[0], Pd[0], Pdd[0]])

    Q_psi = w_smooth * Pdd.T @ Pdd + rho_nh * PtP
    A_in = np.vstack([Pd, -Pd])
    H_psi = Q_psi + rho_in * A_in.T @ A_in
    A_eq_psi = np.vstack([P[0], Pd[0]])

    return KktCache(
        basis=basis, m=m, rho_nh=rho_nh, rho_c=rho_c, rho_in=rho_in,
        w_goal=w_goal, w_smooth=w_smooth,
        Q_x=Q_x, H_pos=H_pos, A_eq=A_eq,
        Q_psi=Q_psi, H_psi=H_psi, A_eq_psi=A_eq_psi, A_in=A_in,
        pos_factor=_factor(assemble_kkt(H_pos, A_eq)),
        psi_factor=_factor(assemble_kkt(H_psi, A_eq_psi)),
    )


# ---------------------------------------------------------------------------
# Problem context shared by the block updates


@dataclass
class Problem:
    """A spec bound to a basis and a KKT cache; what the block updates read."""

    spec: ProblemSpec
    basis: BasisSet
    cache: KktCache
    psi0: float
    heading_variant: HeadingVariant = HeadingVariant.UNCONSTRAINED_ADMM
    kinematics: bool = True
    shift_collision_targets: bool = True

    def __post_init__(self):
        self.centers = self.spec.centers()
        self.axes = self.spec.semi_axes()
        s = self.spec.start
        self.b_eq = np.array([s.position, s.velocity, s.acceleration])  # (3, 3): row = order
        self.b_eq_psi = np.array([self.psi0, s.heading_rate])


def resolve_start_heading(spec: ProblemSpec) -> float:
    s = spec.start
    if s.heading is not None:
        return float(s.heading)
    if np.hypot(s.velocity[0], s.velocity[1]) > 0:
        return float(np.arctan2(s.velocity[1], s.velocity[0]))
    delta = spec.goal - s.position
    if np.hypot(delta[0], delta[1]) > 0:
        return float(np.arctan2(delta[1], delta[0]))
    raise DegenerateSpecError("start equals goal horizontally and no start heading or velocity is given")


def make_problem(spec: ProblemSpec, basis: BasisSet, config: SolverConfig, kinematics: bool = True) -> Problem:
    rho_nh, rho_c, rho_in = config.penalties(spec)
    if not kinematics:
        rho_nh, rho_in = 0.0, 0.0
    cache = build_kkt_cache(
        basis, spec.m, rho_nh, rho_c, rho_in, spec.weights.w_goal, spec.weights.w_smooth
    )
    try:
        psi0 = resolve_start_heading(spec)
    except DegenerateSpecError:
        if kinematics:
            raise
        psi0 = 0.0  # the pre-solve has no heading block
    return Problem(
        spec, basis, cache, psi0, config.heading_variant, kinematics,
        config.shift_collision_targets,
    )


# ---------------------------------------------------------------------------
# Initialization


def _collision_targets(state: SolverState, prob: Problem):
    """Per-axis collision targets, each (m, n)."""
    from .model import polar_points

    return polar_points(state.alpha, state.beta, state.d, prob.centers, prob.axes)


def initialize_state(spec: ProblemSpec, basis: BasisSet, psi0: Optional[float] = None) -> SolverState:
    """Straight-line start->goal initialization with zero multipliers and slacks."""
    if psi0 is None:
        psi0 = resolve_start_heading(spec)
    start, goal = spec.start.position, spec.goal
    delta = goal - start
    if np.hypot(delta[0], delta[1]) > 0:
        psi_line = float(np.arctan2(delta[1], delta[0]))
    else:
        psi_line = psi0

    n, N = basis.n, basis.n_coeffs
    tau = basis.t_samples / basis.total_time
    line = start[None, :] + tau[:, None] * delta[None, :]  # (n, 3)

    A_eq = np.vstack([basis.P[0], basis.Pdot[0], basis.Pddot[0]])
    b_eq = np.array([spec.start.position, spec.start.velocity, spec.start.acceleration])
    kkt = assemble_kkt(basis.P.T @ basis.P, A_eq)
    rhs = np.vstack([basis.P.T @ line, b_eq])
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:N]

    centers, axes = spec.centers(), spec.semi_axes()
    alpha, beta = steps.obstacle_angles(line[:, 0], line[:, 1], line[:, 2], centers, axes)
    d = steps.obstacle_distance(line[:, 0], line[:, 1], line[:, 2], alpha, beta, centers, axes)

    v0 = np.linalg.norm(delta) / basis.total_time
    v0 = float(np.clip(v0, spec.limits.v_min, spec.limits.v_max))
    zeros_c = np.zeros(N)
    return SolverState(
        c_x=sol[:, 0].copy(), c_y=sol[:, 1].copy(), c_z=sol[:, 2].copy(),
        c_psi=np.full(N, psi_line),
        v=np.full(n, v0), gamma=np.zeros(n),
        alpha=alpha, beta=beta, d=d,
        lambda_x=zeros_c.copy(), lambda_y=zeros_c.copy(), lambda_z=zeros_c.copy(),
        lambda_psi=zeros_c.copy(),
        lambda_in=np.zeros(2 * n), s_in=np.zeros(2 * n),
        heading_target=np.full(n, psi_line),
        mu_c=np.zeros((len(centers), n, 3)),
    )


# ---------------------------------------------------------------------------
# Block updates


def kinematic_targets(state: SolverState, prob: Problem) -> np.ndarray:
    """(n, 3) velocity implied by speed, heading and flight-path angle."""
    psi = prob.basis.P @ state.c_psi
    cg = np.cos(state.gamma)
    return np.stack(
        [state.v * np.cos(psi) * cg, state.v * np.sin(psi) * cg, -state.v * np.sin(state.gamma)],
        axis=1,
    )


def position_rhs(state: SolverState, prob: Problem) -> np.ndarray:
    """Right-hand side of the position KKT system for all three axes, (N + 3, 3)."""
    cache, basis = prob.cache, prob.basis
    lin = np.zeros((basis.n_coeffs, 3))
    lin += cache.w_goal * np.outer(basis.P[-1], prob.spec.goal)
    if cache.rho_nh:
        lin += cache.rho_nh * basis.Pdot.T @ kinematic_targets(state, prob)
    if prob.spec.m and cache.rho_c:
        px, py, pz = _collision_targets(state, prob)
        summed = np.stack([px.sum(axis=0), py.sum(axis=0), pz.sum(axis=0)], axis=1)
        lin += cache.rho_c * basis.P.T @ summed
    lin += np.stack([state.lambda_x, state.lambda_y, state.lambda_z], axis=1)
    return np.vstack([lin, prob.b_eq])


def step_positions(state: SolverState, prob: Problem) -> np.ndarray:
    """Minimize the position QPs for x, y and z with one shared factorization.

    Returns an (N, 3) coefficient array.
    """
    sol = prob.cache.solve_position(position_rhs(state, prob))
    return sol[: prob.basis.n_coeffs]


def step_position_axis(axis: str, state: SolverState, prob: Problem) -> np.ndarray:
    """Coefficient vector minimizing the position QP of one axis."""
    j = AXES.index(axis)
    rhs = position_rhs(state, prob)[:, j]
    return prob.cache.solve_position(rhs)[: prob.basis.n_coeffs]


def heading_linear_term(state: SolverState, prob: Problem, theta: np.ndarray) -> np.ndarray:
    """Linear cost of the heading QP, excluding the ADMM penalty."""
    return -prob.cache.rho_nh * prob.basis.P.T @ theta - state.lambda_psi


def rate_bound(v: np.ndarray, prob: Problem) -> np.ndarray:
    cap = prob.spec.limits.turn_rate_cap(v)
    return np.concatenate([cap, cap])


def step_heading(state: SolverState, prob: Problem):
    """Fit the heading polynomial to the current course angle.

    Returns ``(c_psi, lambda_in, s_in, theta)``.
    """
    basis, cache = prob.basis, prob.cache
    xdot = basis.Pdot @ state.c_x
    ydot = basis.Pdot @ state.c_y
    theta = steps.heading_target(xdot, ydot, prob.psi0)
    b_in = rate_bound(state.v, prob)
    q = heading_linear_term(state, prob, theta)

    if prob.heading_variant is HeadingVariant.CONSTRAINED_QP:
        c_psi = _heading_qp(cache, q, prob.b_eq_psi, b_in, state.c_psi)
        return c_psi, state.lambda_in, state.s_in, theta

    rho_in = cache.rho_in
    if rho_in > 0:
        shift = -b_in + state.s_in + state.lambda_in / rho_in
        q = q + rho_in * cache.A_in.T @ shift
    sol = cache.solve_heading(np.concatenate([-q, prob.b_eq_psi]))
    c_psi = sol[: basis.n_coeffs]
    if rho_in > 0:
        s_in, lambda_in = steps.admm_slack_update(cache.A_in @ c_psi, b_in, state.lambda_in, rho_in)
    else:
        s_in, lambda_in = state.s_in, state.lambda_in
    return c_psi, lambda_in, s_in, theta


def _heading_qp(cache: KktCache, q, b_eq, b_in, c0):
    """Inequality-constrained heading QP (cross-check variant), solved with SLSQP."""
    Q = cache.Q_psi
    A_eq, A_in = cache.A_eq_psi, cache.A_in
    # feasible start: project c0 onto the equality rows
    c0 = c0 + np.linalg.lstsq(A_eq, b_eq - A_eq @ c0, rcond=None)[0]
    res = scipy.optimize.minimize(
        lambda c: 0.5 * c @ Q @ c + q @ c,
        c0,
        jac=lambda c: Q @ c + q,
        method="SLSQP",
        constraints=[
            {"type": "eq", "fun": lambda c: A_eq @ c - b_eq, "jac": lambda c: A_eq},
            {"type": "ineq", "fun": lambda c: b_in - A_in @ c, "jac": lambda c: -A_in},
        ],
        options={"ftol": 1e-12, "maxiter": 500},
    )
    return res.x


def step_flight_path(state: SolverState, prob: Problem) -> np.ndarray:
    basis = prob.basis
    return steps.flight_path_angle(
        basis.Pdot @ state.c_x, basis.Pdot @ state.c_y, basis.Pdot @ state.c_z,
        basis.P @ state.c_psi, prob.spec.limits.gamma_max,
    )


def step_velocity(state: SolverState, prob: Problem) -> np.ndarray:
    basis = prob.basis
    return steps.forward_speed(
        basis.Pdot @ state.c_x, basis.Pdot @ state.c_y, basis.Pdot @ state.c_z,
        basis.Pdot @ state.c_psi, prob.spec.limits,
    )


def _positions(state: SolverState, basis: BasisSet):
    P = basis.P
    return P @ state.c_x, P @ state.c_y, P @ state.c_z


def projection_points(state: SolverState, prob: Problem) -> np.ndarray:
    """(m, n, 3) points the obstacle-angle and distance steps project.

    With target shifting on, each obstacle sees the sample positions minus
    its scaled per-sample multiplier, so a multiplier built up while a sample
    was inside can unwind once the sample is clear. Otherwise every obstacle
    sees the raw positions.
    """
    pos = np.stack(_positions(state, prob.basis), axis=1)[None]
    if prob.shift_collision_targets and prob.cache.rho_c:
        return pos - state.mu_c / prob.cache.rho_c
    return np.broadcast_to(pos, state.mu_c.shape)


def step_obstacle_angles(state: SolverState, prob: Problem):
    Q = projection_points(state, prob)
    return steps.obstacle_angles(Q[..., 0], Q[..., 1], Q[..., 2], prob.centers, prob.axes)


def step_obstacle_distance(state: SolverState, prob: Problem) -> np.ndarray:
    Q = projection_points(state, prob)
    return steps.obstacle_distance(Q[..., 0], Q[..., 1], Q[..., 2], state.alpha, state.beta, prob.centers, prob.axes)


def collision_residual_samples(state: SolverState, prob: Problem) -> np.ndarray:
    """(m, n, 3) differences between sample positions and their polar reconstructions."""
    pos = np.stack(_positions(state, prob.basis), axis=1)
    return pos[None] - np.stack(_collision_targets(state, prob), axis=-1)


def update_collision_multipliers(state: SolverState, prob: Problem) -> np.ndarray:
    """Per-sample collision multipliers; their coefficient-space image is the
    collision part of the position multipliers."""
    if not (prob.spec.m and prob.cache.rho_c):
        return state.mu_c
    return state.mu_c - prob.cache.rho_c * collision_residual_samples(state, prob)


def bregman_increments(state: SolverState, prob: Problem):
    """Multiplier increments ``(dx, dy, dz, dpsi)`` from the current residuals."""
    basis, cache = prob.basis, prob.cache
    P, Pd = basis.P, basis.Pdot
    C = np.stack([state.c_x, state.c_y, state.c_z], axis=1)
    inc = np.zeros_like(C)
    if cache.rho_nh:
        r_nh = Pd @ C - kinematic_targets(state, prob)
        inc -= cache.rho_nh * Pd.T @ r_nh
    if prob.spec.m and cache.rho_c:
        r_fc = collision_residual_samples(state, prob).sum(axis=0)
        inc -= cache.rho_c * P.T @ r_fc
    if cache.rho_nh and prob.kinematics:
        dpsi = -cache.rho_nh * P.T @ (P @ state.c_psi - state.heading_target)
    else:
        dpsi = np.zeros_like(state.c_psi)
    return inc[:, 0], inc[:, 1], inc[:, 2], dpsi


def update_bregman_multipliers(state: SolverState, prob: Problem):
    """New ``(lambda_x, lambda_y, lambda_z, lambda_psi)``."""
    dx, dy, dz, dpsi = bregman_increments(state, prob)
    return (
        state.lambda_x + dx, state.lambda_y + dy, state.lambda_z + dz, state.lambda_psi + dpsi,
    )


# ---------------------------------------------------------------------------
# Residuals and the augmented Lagrangian


def compute_residuals(state: SolverState, prob: Problem):
    """Mean kinematic, collision and heading-rate residuals of ``state``."""
    basis, spec = prob.basis, prob.spec
    C = np.stack([state.c_x, state.c_y, state.c_z], axis=1)
    vel = basis.Pdot @ C
    r_nh = vel - kinematic_targets(state, prob)
    kinematic = float(np.mean(np.linalg.norm(r_nh, axis=1)))

    if spec.m:
        dist = np.linalg.norm(collision_residual_samples(state, prob), axis=-1)
        collision = float(dist.mean())
    else:
        collision = 0.0

    psidot = basis.Pdot @ state.c_psi
    excess = np.maximum(0.0, np.abs(psidot) - spec.limits.turn_rate_cap(state.v))
    return kinematic, collision, float(excess.mean())


def augmented_lagrangian(state: SolverState, prob: Problem) -> float:
    """The penalized objective the block updates descend (multiplier terms excluded).

    Smoothness and goal terms carry the factor 1/2 used by the QP blocks.
    """
    basis, cache, spec = prob.basis, prob.cache, prob.spec
    C = np.stack([state.c_x, state.c_y, state.c_z], axis=1)
    acc = basis.Pddot @ C
    psidd = basis.Pddot @ state.c_psi
    end = basis.P[-1] @ C
    value = 0.5 * cache.w_smooth * (np.sum(acc**2) + np.sum(psidd**2))
    value += 0.5 * cache.w_goal * np.sum((end - spec.goal) ** 2)
    psi = basis.P @ state.c_psi
    vel = basis.Pdot @ C
    f_nh = eval_kinematic_residual(vel[:, 0], vel[:, 1], vel[:, 2], psi, state.gamma, state.v)
    value += 0.5 * cache.rho_nh * np.sum(f_nh**2)
    if spec.m:
        pos = basis.P @ C
        f_c = eval_collision_residual(
            pos[:, 0], pos[:, 1], pos[:, 2], state.alpha, state.beta, state.d, spec.obstacles
        )
        value += 0.5 * cache.rho_c * np.sum(f_c**2)
    return float(value)


# ---------------------------------------------------------------------------
# Iteration


BLOCKS = ("position", "heading", "flight_path", "velocity", "angles", "distance", "multipliers")


def _check_finite(state: SolverState, block: str, arrays) -> None:
    # a NaN or Inf anywhere propagates into the sum
    for a in arrays:
        if not np.isfinite(a.sum()):
            raise NumericalError(state.iter, block)


def iterate(
    state: SolverState,
    prob: Problem,
    callback: Optional[Callable[[str, SolverState], None]] = None,
    freeze_multipliers: bool = False,
) -> SolverState:
    """Run one full sweep over the blocks, mutating and returning ``state``.

    ``callback(block, state)`` fires after every block.
    """
    state.iter += 1

    def done(block, *arrays):
        _check_finite(state, block, arrays)
        if callback is not None:
            callback(block, state)

    C = step_positions(state, prob)
    state.c_x, state.c_y, state.c_z = C[:, 0].copy(), C[:, 1].copy(), C[:, 2].copy()
    done("position", C)

    if prob.kinematics:
        state.c_psi, state.lambda_in, state.s_in, state.heading_target = step_heading(state, prob)
        done("heading", state.c_psi, state.lambda_in, state.s_in)
        state.gamma = step_flight_path(state, prob)
        done("flight_path", state.gamma)
        state.v = step_velocity(state, prob)
        done("velocity", state.v)

    if prob.spec.m:
        state.alpha, state.beta = step_obstacle_angles(state, prob)
        done("angles", state.alpha, state.beta)
        state.d = step_obstacle_distance(state, prob)
        done("distance", state.d)

    if not freeze_multipliers:
        state.lambda_x, state.lambda_y, state.lambda_z, state.lambda_psi = (
            update_bregman_multipliers(state, prob)
        )
        state.mu_c = update_collision_multipliers(state, prob)
        done("multipliers", state.lambda_x, state.lambda_y, state.lambda_z, state.lambda_psi, state.mu_c)
    return state


# ---------------------------------------------------------------------------
# Traversal time


def estimate_traversal_time(spec: ProblemSpec, config: SolverConfig = SolverConfig()) -> float:
    """Arc length of a smoothness-plus-collision pre-solve divided by ``v_min``.

    The pre-solve uses a provisional horizon of straight-line distance over
    ``v_min``. Multipliers stay frozen at zero during the pre-solve: with the
    kinematic penalty off, collision multipliers accumulated while the
    initial line crosses an obstacle keep pushing the curve outward and the
    arc length grows without bound.
    """
    n = spec.horizon.n
    floor = n * MIN_TIME_PER_SAMPLE
    straight = float(np.linalg.norm(spec.goal - spec.start.position))
    provisional = max(straight / spec.limits.v_min, floor)
    basis = build_basis(n, spec.horizon.degree, provisional)
    prob = make_problem(spec, basis, config, kinematics=False)
    state = initialize_state(spec, basis, prob.psi0)
    for _ in range(config.pre_iterations):
        iterate(state, prob, freeze_multipliers=True)
    pts = np.stack(_positions(state, basis), axis=1)
    return max(arc_length(pts) / spec.limits.v_min, floor)


# ---------------------------------------------------------------------------
# Driver


@dataclass
class TrajectorySolution:
    spec: ProblemSpec
    basis: BasisSet
    state: SolverState
    residuals: ResidualReport
    status: Status
    iterations: int
    wall_time: float
    psi0: float

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def total_time(self) -> float:
        return self.basis.total_time

    @property
    def t(self) -> np.ndarray:
        return self.basis.t_samples

    def positions(self) -> np.ndarray:
        """(n, 3) sampled positions."""
        return np.stack(_positions(self.state, self.basis), axis=1)

    def velocities(self) -> np.ndarray:
        P = self.basis.Pdot
        return np.stack([P @ self.state.c_x, P @ self.state.c_y, P @ self.state.c_z], axis=1)

    @property
    def psi(self) -> np.ndarray:
        return self.basis.P @ self.state.c_psi

    @property
    def psi_dot(self) -> np.ndarray:
        return self.basis.Pdot @ self.state.c_psi


def solve(
    spec: ProblemSpec,
    config: SolverConfig = SolverConfig(),
    callback: Optional[Callable[[SolverState, ResidualReport], None]] = None,
) -> TrajectorySolution:
    """Run the alternating minimization until the residuals or the iteration budget run out.

    ``callback(state, report)`` is invoked after every iteration.
    """
    t0 = time.perf_counter()
    if spec.horizon.is_auto:
        spec = spec.with_total_time(estimate_traversal_time(spec, config))
    h = spec.horizon
    basis = build_basis(h.n, h.degree, float(h.total_time))
    prob = make_problem(spec, basis, config)
    state = initialize_state(spec, basis, prob.psi0)

    report = ResidualReport()
    status = Status.MAX_ITER
    tol = config.residual_tol
    for _ in range(config.max_iter):
        iterate(state, prob)
        report.append(*compute_residuals(state, prob))
        if callback is not None:
            callback(state, report)
        if max(report.last()) <= tol:
            status = Status.CONVERGED
            break
    wall = time.perf_counter() - t0
    return TrajectorySolution(spec, basis, state, report, status, state.iter, wall, prob.psi0)
