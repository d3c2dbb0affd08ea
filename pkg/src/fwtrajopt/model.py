"""Problem data model and constraint residual evaluators."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .basis import DimensionError


class ValidationError(ValueError):
    """A problem definition violates one of its invariants.

    ``field`` names the offending entry using the scenario-file path
    (for example ``limits.v_min``).
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValidationError(name, f"expected 3 components, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(name, "must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Ellipsoid:
    """Axis-aligned ellipsoid; semi-axes are already inflated by the vehicle radius."""

    center: np.ndarray
    semi_axes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        object.__setattr__(self, "semi_axes", _vec3(self.semi_axes, "semi_axes"))
        if np.any(self.semi_axes <= 0):
            raise ValidationError("semi_axes", "all semi-axes must be > 0")

    def __eq__(self, other):
        if not isinstance(other, Ellipsoid):
            return NotImplemented
        return bool(
            np.array_equal(self.center, other.center)
            and np.array_equal(self.semi_axes, other.semi_axes)
        )

    __hash__ = None


@dataclass(frozen=True)
class Limits:
    v_min: float
    v_max: float
    gamma_max: float
    phi_max: float
    g: float = 9.81

    def __post_init__(self):
        if not self.v_min > 0:
            raise ValidationError("limits.v_min", "must be > 0")
        if not self.v_min < self.v_max:
            raise ValidationError("limits.v_min", "must be strictly less than limits.v_max")
        if not 0 < self.gamma_max < np.pi / 2:
            raise ValidationError("limits.gamma_max", "must lie in (0, pi/2)")
        if not 0 < self.phi_max < np.pi / 2:
            raise ValidationError("limits.phi_max", "must lie in (0, pi/2)")
        if not self.g > 0:
            raise ValidationError("limits.g", "must be > 0")

    def turn_rate_cap(self, v) -> np.ndarray:
        """Largest admissible |heading rate| at speed ``v``."""
        return self.g * np.tan(self.phi_max) / np.asarray(v, dtype=float)


@dataclass(frozen=True)
class BoundaryState:
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    heading: Optional[float] = None
    heading_rate: float = 0.0

    def __post_init__(self):
        for name in ("position", "velocity", "acceleration"):
            object.__setattr__(self, name, _vec3(getattr(self, name), f"start.{name}"))
        if self.heading is not None and not np.isfinite(self.heading):
            raise ValidationError("start.heading", "must be finite")
        if not np.isfinite(self.heading_rate):
            raise ValidationError("start.heading_rate", "must be finite")

    def __eq__(self, other):
        if not isinstance(other, BoundaryState):
            return NotImplemented
        return (
            np.array_equal(self.position, other.position)
            and np.array_equal(self.velocity, other.velocity)
            and np.array_equal(self.acceleration, other.acceleration)
            and self.heading == other.heading
            and self.heading_rate == other.heading_rate
        )

    __hash__ = None


@dataclass(frozen=True)
class Weights:
    rho_nh: float = 1.0
    rho_c: float = 1.0
    rho_in: float = 1.0
    w_goal: float = 1.0
    w_smooth: float = 1.0

    def __post_init__(self):
        for name in ("rho_nh", "rho_c", "rho_in"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"weights.{name}", "must be >= 0")
        for name in ("w_goal", "w_smooth"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"weights.{name}", "must be > 0")


AUTO = "auto"


@dataclass(frozen=True)
class Horizon:
    n: int = 50
    degree: int = 10
    total_time: Union[float, str] = AUTO

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValidationError("horizon.n", "must be an integer >= 3")
        if int(self.degree) != self.degree or self.degree < 4:
            raise ValidationError("horizon.degree", "must be an integer >= 4")
        if self.total_time != AUTO:
            if isinstance(self.total_time, str) or not self.total_time > 0:
                raise ValidationError("horizon.total_time", "must be > 0 or 'auto'")

    @property
    def is_auto(self) -> bool:
        return self.total_time == AUTO


@dataclass(frozen=True)
class ProblemSpec:
    start: BoundaryState
    goal: np.ndarray
    limits: Limits
    obstacles: tuple = ()
    weights: Weights = Weights()
    horizon: Horizon = Horizon()

    def __post_init__(self):
        object.__setattr__(self, "goal", _vec3(self.goal, "goal"))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        for i, obs in enumerate(self.obstacles):
            if avoidance_lhs(self.start.position[None, :], obs)[0] >= 0:
                raise ValidationError(
                    f"obstacles[{i}]", "start position lies inside or on the inflated obstacle"
                )

    @property
    def m(self) -> int:
        return len(self.obstacles)

    def centers(self) -> np.ndarray:
        """(m, 3) array of obstacle centers."""
        if not self.obstacles:
            return np.zeros((0, 3))
        return np.array([o.center for o in self.obstacles])

    def semi_axes(self) -> np.ndarray:
        """(m, 3) array of inflated semi-axes."""
        if not self.obstacles:
            return np.zeros((0, 3))
        return np.array([o.semi_axes for o in self.obstacles])

    def with_total_time(self, total_time: float) -> "ProblemSpec":
        return replace(self, horizon=replace(self.horizon, total_time=float(total_time)))

    def __eq__(self, other):
        if not isinstance(other, ProblemSpec):
            return NotImplemented
        return (
            self.start == other.start
            and np.array_equal(self.goal, other.goal)
            and self.limits == other.limits
            and self.obstacles == other.obstacles
            and self.weights == other.weights
            and self.horizon == other.horizon
        )

    __hash__ = None


def inflate_obstacles(raw: Sequence[Ellipsoid], vehicle_radius: float) -> list:
    """Grow every semi-axis by the vehicle radius."""
    if vehicle_radius < 0:
        raise ValidationError("vehicle_radius", "must be >= 0")
    return [Ellipsoid(o.center, o.semi_axes + vehicle_radius) for o in raw]


def _same_length(*arrays):
    arrs = [np.asarray(a, dtype=float) for a in arrays]
    n = arrs[0].shape
    for a in arrs[1:]:
        if a.shape != n:
            raise DimensionError(f"inconsistent sample shapes {n} vs {a.shape}")
    return arrs


def eval_kinematic_residual(xdot, ydot, zdot, psi, gamma, v) -> np.ndarray:
    """Stacked non-holonomic residuals ``[rx; ry; rz]`` (length 3n)."""
    xdot, ydot, zdot, psi, gamma, v = _same_length(xdot, ydot, zdot, psi, gamma, v)
    cg = np.cos(gamma)
    return np.concatenate(
        [
            xdot - v * np.cos(psi) * cg,
            ydot - v * np.sin(psi) * cg,
            zdot + v * np.sin(gamma),
        ]
    )


def polar_points(alpha, beta, d, centers, semi_axes):
    """Points reconstructed from the polar collision variables, each (m, n)."""
    sb = np.sin(beta)
    px = centers[:, 0:1] + semi_axes[:, 0:1] * d * sb * np.cos(alpha)
    py = centers[:, 1:2] + semi_axes[:, 1:2] * d * sb * np.sin(alpha)
    pz = centers[:, 2:3] + semi_axes[:, 2:3] * d * np.cos(beta)
    return px, py, pz


def eval_collision_residual(x, y, z, alpha, beta, d, obstacles) -> np.ndarray:
    """Stacked polar collision residuals, ordered ``[x-part; y-part; z-part]``.

    Each part is the row-major flattening of an (m, n) array, so the
    result has length 3*m*n.
    """
    x, y, z = _same_length(x, y, z)
    alpha, beta, d = _same_length(alpha, beta, d)
    m = len(obstacles)
    if alpha.shape != (m, x.size):
        raise DimensionError(f"angle arrays must have shape {(m, x.size)}, got {alpha.shape}")
    if m == 0:
        return np.zeros(0)
    centers = np.array([o.center for o in obstacles])
    axes = np.array([o.semi_axes for o in obstacles])
    px, py, pz = polar_points(alpha, beta, d, centers, axes)
    return np.concatenate(
        [(x[None, :] - px).ravel(), (y[None, :] - py).ravel(), (z[None, :] - pz).ravel()]
    )


def avoidance_lhs(points: np.ndarray, obstacle: Ellipsoid) -> np.ndarray:
    """Left-hand side of the ellipsoidal avoidance inequality; <= 0 means clear."""
    q = (np.atleast_2d(points) - obstacle.center) / obstacle.semi_axes
    return 1.0 - np.sum(q * q, axis=1)


def check_avoidance(x, y, z, obstacles, margin: float = 1e-2):
    """Return ``(passes, worst)``.

    ``passes`` is an (m, n) boolean array; ``worst`` is the largest
    left-hand side over all obstacle/sample pairs (``-inf`` without obstacles).
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    x, y, z = _same_length(x, y, z)
    pts = np.stack([x, y, z], axis=1)
    if not obstacles:
        return np.ones((0, x.size), dtype=bool), -np.inf
    lhs = np.array([avoidance_lhs(pts, o) for o in obstacles])
    return lhs <= margin, float(lhs.max())
