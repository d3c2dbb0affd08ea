"""Problem builders shared by the test modules."""

import numpy as np

from fwtrajopt.basis import build_basis
from fwtrajopt.model import BoundaryState, Ellipsoid, Horizon, Limits, ProblemSpec, Weights
from fwtrajopt.scenario import bundled_dir
from fwtrajopt.solver import SolverConfig, augmented_lagrangian, initialize_state, iterate, make_problem

# acceptance verdicts, filled by test_acceptance and printed at the end of the run
VERDICTS = {}


def record_verdict(number: int, passed: bool, detail: str) -> None:
    VERDICTS[number] = (bool(passed), detail)


def urban_paths():
    return sorted((bundled_dir() / "urban").glob("*.json"))


def sphere_spec(n=10, degree=10, radius=8.0, center=(50.0, 3.0, 30.0), total_time=8.0, **weights):
    lim = Limits(v_min=10.0, v_max=20.0, gamma_max=0.4, phi_max=0.7)
    start = BoundaryState(position=[0.0, 0.0, 30.0], velocity=[12.0, 0.0, 0.0], heading=0.0)
    obstacles = [Ellipsoid(center, [radius] * 3)] if radius else []
    return ProblemSpec(
        start=start, goal=[100.0, 10.0, 32.0], limits=lim, obstacles=obstacles,
        weights=Weights(**weights), horizon=Horizon(n=n, degree=degree, total_time=total_time),
    )


def descent_instance(seed):
    """Random small problem: n = 10, one sphere near the start-goal line, random penalties."""
    rng = np.random.default_rng(seed)
    start = rng.uniform(-5, 5, 3)
    goal = start + np.array([rng.uniform(80, 120), rng.uniform(-30, 30), rng.uniform(-10, 10)])
    r = rng.uniform(5, 15)
    center = start + (goal - start) * rng.uniform(0.3, 0.7) + rng.normal(0, 3, 3)
    psi0 = rng.uniform(-0.5, 0.5)
    return ProblemSpec(
        BoundaryState(start, [12 * np.cos(psi0), 12 * np.sin(psi0), 0], heading=psi0), goal,
        Limits(10, 20, 0.4, 0.7), [Ellipsoid(center, [r, r, r])],
        Weights(rho_nh=rng.uniform(0.5, 5), rho_c=rng.uniform(0.5, 5)),
        Horizon(n=10, degree=10, total_time=10.0),
    )


def block_changes(spec, iterations=1):
    """Augmented-Lagrangian change and its scale per block, multipliers frozen at zero.

    Returns a list of ``(iteration, block, increase, scale)`` for every block
    of the first ``iterations`` sweeps.
    """
    basis = build_basis(spec.horizon.n, spec.horizon.degree, spec.horizon.total_time)
    prob = make_problem(spec, basis, SolverConfig())
    state = initialize_state(spec, basis, prob.psi0)
    out = []
    for k in range(1, iterations + 1):
        prev = [augmented_lagrangian(state, prob)]

        def record(block, s):
            value = augmented_lagrangian(s, prob)
            out.append((k, block, value - prev[0], max(1.0, abs(prev[0]))))
            prev[0] = value

        iterate(state, prob, callback=record, freeze_multipliers=True)
    return out
