"""Closed-form block updates of the alternating minimization.

Every function here works on plain sample arrays so it can be checked
against brute-force minimization independently of the solver loop.
Obstacle quantities are (m, n) arrays: one row per obstacle.
"""

from __future__ import annotations

import numpy as np

from .model import Limits

D_FLOOR = 1e-12


def flight_path_angle(xdot, ydot, zdot, psi, gamma_max: float) -> np.ndarray:
    """Per-sample minimizer of the kinematic penalty over the flight-path angle.

    Clipped to ``[-gamma_max, gamma_max]``. ``arctan2(0, 0)`` is 0.
    """
    horizontal = xdot * np.cos(psi) + ydot * np.sin(psi)
    return np.clip(np.arctan2(-zdot, horizontal), -gamma_max, gamma_max)


def speed_upper_bound(psidot, limits: Limits) -> np.ndarray:
    """min(v_max, g tan(phi_max) / |psidot|), with a zero rate imposing no cap."""
    rate = np.abs(np.asarray(psidot, dtype=float))
    with np.errstate(divide="ignore"):
        cap = np.where(rate > 0, limits.g * np.tan(limits.phi_max) / rate, np.inf)
    return np.minimum(limits.v_max, cap)


def forward_speed(xdot, ydot, zdot, psidot, limits: Limits) -> np.ndarray:
    """Speed of the position curve clipped into the admissible interval.

    When the turn-rate cap falls below ``v_min`` the lower bound wins: the
    vehicle cannot fly slower than stall speed, and the violation is left
    to the heading-rate residual.
    """
    raw = np.sqrt(xdot**2 + ydot**2 + zdot**2)
    upper = speed_upper_bound(psidot, limits)
    return np.maximum(np.minimum(raw, upper), limits.v_min)


def obstacle_angles(x, y, z, centers, semi_axes):
    """Solid angles (alpha, beta) of each sample seen from each obstacle.

    Angles are taken in the obstacle's normalized frame, where the
    ellipsoid is a unit sphere and the update is a radial projection.
    A sample exactly at the center gets alpha = 0, beta = pi/2.
    """
    qx = (np.atleast_2d(x) - centers[:, 0:1]) / semi_axes[:, 0:1]
    qy = (np.atleast_2d(y) - centers[:, 1:2]) / semi_axes[:, 1:2]
    qz = (np.atleast_2d(z) - centers[:, 2:3]) / semi_axes[:, 2:3]
    alpha = np.arctan2(qy, qx)
    radial = np.sqrt(qx * qx + qy * qy)
    beta = np.arctan2(radial, qz)
    beta = np.where((radial == 0) & (qz == 0), np.pi / 2, beta)
    return alpha, np.clip(beta, 0.0, np.pi)


def obstacle_distance(x, y, z, alpha, beta, centers, semi_axes) -> np.ndarray:
    """Normalized distance d >= 1 minimizing the collision penalty at fixed angles."""
    sb = np.sin(beta)
    ux = semi_axes[:, 0:1] * sb * np.cos(alpha)
    uy = semi_axes[:, 1:2] * sb * np.sin(alpha)
    uz = semi_axes[:, 2:3] * np.cos(beta)
    num = (
        ux * (np.atleast_2d(x) - centers[:, 0:1])
        + uy * (np.atleast_2d(y) - centers[:, 1:2])
        + uz * (np.atleast_2d(z) - centers[:, 2:3])
    )
    den = np.maximum(ux * ux + uy * uy + uz * uz, D_FLOOR)
    return np.maximum(num / den, 1.0)


def heading_target(xdot, ydot, psi0: float) -> np.ndarray:
    """Unwrapped course angle of the velocity, anchored within pi of ``psi0``."""
    theta = np.unwrap(np.arctan2(ydot, xdot))
    return theta + 2.0 * np.pi * np.round((psi0 - theta[0]) / (2.0 * np.pi))


def admm_slack_update(Ac, b_in, lam, rho_in: float):
    """Slack projection followed by the dual ascent step for ``A c <= b``.

    Returns ``(s_new, lam_new)``.
    """
    violation = Ac - b_in
    unclipped = -violation - lam / rho_in
    inactive = unclipped >= 0
    s_new = np.where(inactive, unclipped, 0.0)
    # lam + rho * (violation + s) is identically zero on inactive rows
    lam_new = np.where(inactive, 0.0, lam + rho_in * violation)
    return s_new, lam_new
