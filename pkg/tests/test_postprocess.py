from types import SimpleNamespace

import numpy as np
import numpy.testing as npt
import pytest

from fwtrajopt.basis import build_basis
from fwtrajopt.model import BoundaryState, Limits, ProblemSpec
from fwtrajopt.postprocess import (
    ControlProfile,
    arc_length,
    bank_angle,
    compute_metrics,
    finite_difference,
    recover_controls,
    summarize,
)
from fwtrajopt.scenario import bundled_dir, load_scenario_file
from fwtrajopt.solver import solve

LIM = Limits(v_min=10.0, v_max=25.0, gamma_max=0.3, phi_max=0.7, g=9.81)


def _linear_coeffs(basis, start, slope):
    """Bernstein coefficients of start + slope * t (exact for any degree)."""
    k = np.arange(basis.n_coeffs)
    return start + slope * basis.total_time * k / basis.degree


def _state(basis, v, gamma, c_psi, C=None):
    if C is None:
        C = np.zeros((basis.n_coeffs, 3))
    return SimpleNamespace(v=np.asarray(v, float), gamma=np.asarray(gamma, float), c_psi=c_psi,
                           c_x=C[:, 0], c_y=C[:, 1], c_z=C[:, 2])


@pytest.fixture(scope="module")
def open_field():
    sc = load_scenario_file(bundled_dir() / "open_field.json")
    return solve(sc.spec, sc.config)


class TestFiniteDifference:
    def test_linear_is_exact(self):
        t = np.linspace(0, 2, 21)
        npt.assert_allclose(finite_difference(3 * t + 1, t[1] - t[0]), 3.0, rtol=1e-12)

    def test_one_sided_ends(self):
        d = finite_difference(np.array([0.0, 1.0, 4.0, 9.0]), 1.0)
        npt.assert_array_equal(d, [1.0, 2.0, 4.0, 5.0])

    def test_single_sample(self):
        npt.assert_array_equal(finite_difference(np.array([2.0]), 0.1), [0.0])


class TestRecoverControls:
    def test_steady_straight_flight(self):
        basis = build_basis(40, 10, 8.0)
        state = _state(basis, np.full(40, 15.0), np.full(40, 0.1), np.full(11, 0.4))
        ctl = recover_controls(state, basis, LIM)
        npt.assert_array_equal(ctl.v_dot, 0.0)
        npt.assert_array_equal(ctl.gamma_dot, 0.0)
        npt.assert_allclose(ctl.phi, 0.0, atol=1e-12)
        npt.assert_allclose(ctl.phi_dot, 0.0, atol=1e-10)

    def test_unit_bank_tangent(self):
        basis = build_basis(30, 8, 5.0)
        v = 12.0
        state = _state(basis, np.full(30, v), np.zeros(30), _linear_coeffs(basis, 0.2, LIM.g / v))
        ctl = recover_controls(state, basis, LIM)
        npt.assert_allclose(ctl.psi_dot, LIM.g / v, rtol=1e-10)
        npt.assert_allclose(ctl.phi, np.pi / 4, rtol=1e-10)

    def test_shapes(self):
        basis = build_basis(17, 6, 3.0)
        ctl = recover_controls(_state(basis, np.full(17, 12.0), np.zeros(17), np.zeros(7)), basis, LIM)
        for name in ("v_dot", "gamma_dot", "phi", "phi_dot", "psi_dot"):
            assert getattr(ctl, name).shape == (17,)

    def test_coordinated_turn_speed_rate(self):
        # accelerating turn: v = v0 + a t + b sin(w t), analytic v_dot known
        v0, a, b, w = 14.0, 0.4, 1.5, 0.9

        def errors(n):
            basis = build_basis(n, 10, 10.0)
            t = basis.t_samples
            v = v0 + a * t + b * np.sin(w * t)
            psi_rate = 0.2
            state = _state(basis, v, np.zeros(n), _linear_coeffs(basis, 0.0, psi_rate))
            ctl = recover_controls(state, basis, LIM)
            exact = a + b * w * np.cos(w * t)
            return np.max(np.abs(ctl.v_dot - exact)[1:-1]), basis.dt

        err, dt = errors(50)
        # central difference truncation bound: max|v'''| dt^2 / 6
        assert err <= b * w**3 * dt**2 / 6 * (1 + 1e-6)
        err2, _ = errors(99)
        npt.assert_allclose(err / err2, 4.0, rtol=0.1)

    def test_bank_within_limit_on_converged_run(self, open_field):
        assert open_field.converged
        assert open_field.residuals.mean_heading_rate_violation[-1] <= 1e-3
        ctl, _ = summarize(open_field)
        assert np.max(np.abs(ctl.phi)) <= open_field.spec.limits.phi_max + 0.05

    def test_bank_angle_sign(self):
        npt.assert_allclose(bank_angle([10.0, 10.0], [0.981, -0.981], 9.81), [np.pi / 4, -np.pi / 4])


class TestMetrics:
    def test_ending_at_goal(self):
        basis = build_basis(20, 8, 4.0)
        C = np.random.default_rng(0).normal(size=(9, 3)) * 10
        goal = basis.P[-1] @ C
        spec = ProblemSpec(BoundaryState(basis.P[0] @ C), goal, LIM)
        state = _state(basis, np.full(20, 12.0), np.zeros(20), np.zeros(9), C)
        m = compute_metrics(state, recover_controls(state, basis, LIM), spec, basis)
        assert m.final_position_residual == 0.0
        npt.assert_allclose(m.arc_length, arc_length(basis.P @ C))

    def test_zero_controls(self):
        basis = build_basis(10, 6, 2.0)
        zero = np.zeros(10)
        ctl = ControlProfile(zero, zero, zero, zero, zero)
        spec = ProblemSpec(BoundaryState([0.0, 0.0, 0.0]), [1.0, 0.0, 0.0], LIM)
        m = compute_metrics(_state(basis, zero + 12, zero, np.zeros(7)), ctl, spec, basis,
                            wall_time=0.5, iterations=7, converged=True)
        assert m.gamma_dot_norm == m.phi_dot_norm == m.v_dot_norm == 0.0
        assert (m.wall_time, m.iterations, m.converged) == (0.5, 7, True)
        assert m.final_position_residual == 1.0

    def test_unweighted_norm(self):
        basis = build_basis(4, 4, 1.0)
        ones = np.ones(4)
        ctl = ControlProfile(ones * 2, ones, ones, ones, ones)
        spec = ProblemSpec(BoundaryState([0.0, 0.0, 0.0]), [1.0, 0.0, 0.0], LIM)
        m = compute_metrics(_state(basis, ones * 12, ones * 0, np.zeros(5)), ctl, spec, basis)
        assert m.v_dot_norm == 4.0 and m.gamma_dot_norm == 2.0

    def test_arc_length(self):
        pts = np.array([[0, 0, 0], [3, 4, 0], [3, 4, 12]], dtype=float)
        assert arc_length(pts) == 17.0

    def test_open_field_endpoint(self, open_field):
        _, m = summarize(open_field)
        assert m.final_position_residual <= 3.0
        assert all(v >= 0 for v in m.as_dict().values())

    def test_deterministic(self, open_field):
        a = summarize(open_field)
        b = summarize(open_field)
        assert a[1] == b[1]
        for name in ("v_dot", "gamma_dot", "phi", "phi_dot", "psi_dot"):
            npt.assert_array_equal(getattr(a[0], name), getattr(b[0], name))
