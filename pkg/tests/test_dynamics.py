import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIG1, SYMMETRIC, strict_params
from oracles import integrate_scipy, rhs_explicit
from scarf_hirota import _ode
from scarf_hirota.dynamics import (
    CSV_HEADER,
    CycleReport,
    IntegrationConfig,
    Termination,
    TerminationKind,
    Trajectory,
    detect_limit_cycle,
    distance_to_ray,
    integrate,
    rhs,
    simplex_plane_coords,
)
from scarf_hirota.economy import EndowmentParams, from_params
from scarf_hirota.errors import DomainError, InsufficientCrossings
from scarf_hirota.experiments import figure1_matrix, sample_params, Region
from scarf_hirota.stability import criteria, edge_fixed_point

FIG1_START = (0.3, 0.2, 0.5)


# --- configuration ---------------------------------------------------------------------


def test_config_validation_and_round_trip():
    cfg = IntegrationConfig(gamma=0.5, t_span=(0, -3), boundary_floor=1e-3)
    assert cfg.backward
    assert IntegrationConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.to_dict()["max_step"] is None
    with pytest.raises(ValueError):
        IntegrationConfig(rel_tol=0)
    with pytest.raises(ValueError):
        IntegrationConfig(convergence_radius=0)
    with pytest.raises(ValueError):
        IntegrationConfig(t_span=(1, 1))
    with pytest.raises(ValueError):
        IntegrationConfig(gamma=-1)
    assert cfg.with_overrides(rel_tol=None, abs_tol=1e-9).abs_tol == 1e-9


def test_termination_labels():
    assert str(Termination(TerminationKind.REACHED_BOUNDARY, 3, node=True)) == "ReachedBoundary(node 3)"
    assert str(Termination(TerminationKind.REACHED_BOUNDARY, 2)) == "ReachedBoundary(edge 2)"
    assert str(Termination(TerminationKind.PRICE_WENT_NEGATIVE, 1)) == "PriceWentNegative(1)"
    t = Termination(TerminationKind.PRICE_WENT_NEGATIVE, 1)
    assert Termination.from_dict(t.to_dict()) == t


# --- vector field -----------------------------------------------------------------------------


@pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0, 2.0])
def test_rhs_vanishes_at_equilibrium(gamma, fig1_matrix):
    np.testing.assert_allclose(rhs([1, 1, 1], gamma, fig1_matrix), 0, atol=1e-15)


def test_rhs_gamma_relation(fig1_matrix):
    p = np.array(FIG1_START)
    np.testing.assert_allclose(rhs(p, 1, fig1_matrix), p * rhs(p, 0, fig1_matrix), atol=1e-15)


@given(strict_params(), st.sampled_from([0.0, 0.5, 1.0, 2.0]))
def test_rhs_matches_explicit_formulas(params, gamma):
    A = from_params(params)
    p = np.array([0.2, 0.5, 1.3])
    np.testing.assert_allclose(rhs(p, gamma, A), rhs_explicit(p, np.asarray(A), gamma), atol=1e-12)


def test_rhs_at_edge_fixed_point_is_zero_on_the_edge():
    fp = edge_fixed_point(1, FIG1)
    v = rhs(fp.point.as_array(), 1.0, from_params(FIG1))
    np.testing.assert_allclose(v, 0, atol=1e-12)


def test_rhs_domain_error_for_fractional_gamma():
    with pytest.raises(DomainError):
        rhs([-0.1, 0.5, 0.6], 0.5, from_params(FIG1))
    # gamma = 0 is defined past the boundary: 0^0 = 1.
    assert np.all(np.isfinite(rhs([-0.1, 0.5, 0.6], 0.0, from_params(FIG1))))


# --- integration ------------------------------------------------------------------------------------


def test_reference_forward_converges():
    traj = integrate(FIG1_START, figure1_matrix(), IntegrationConfig(t_span=(0, 5000)))
    assert traj.termination.kind is TerminationKind.CONVERGED
    np.testing.assert_allclose(traj.final, 1 / 3, atol=1e-6)
    assert np.all(np.diff(traj.t) > 0)


def test_reference_backward_reaches_node_three():
    cfg = IntegrationConfig(t_span=(0, -3), boundary_floor=1e-3)
    traj = integrate(FIG1_START, figure1_matrix(), cfg)
    assert str(traj.termination) == "ReachedBoundary(node 3)"
    assert np.all(np.diff(traj.t) < 0)
    assert np.sort(traj.final)[:2].max() < 1e-3 * (1 + 1e-9)
    assert traj.t_event == pytest.approx(-2.1844, abs=1e-3)
    assert traj.node_time_estimate < traj.t_event
    assert abs(traj.node_time_estimate - (-2.18)) < 0.1


def test_matches_scipy_reference(fig1_matrix):
    for gamma in (0.0, 1.0, 2.0):
        traj = integrate(FIG1_START, fig1_matrix,
                         IntegrationConfig(gamma=gamma, t_span=(0, 5), stop_on_convergence=False))
        ref = integrate_scipy(FIG1_START, np.asarray(fig1_matrix), gamma, 5.0)
        np.testing.assert_allclose(traj.final, ref, rtol=1e-8)


def test_time_reversal_returns_to_start(fig1_matrix):
    cfg = IntegrationConfig(t_span=(0, 3), stop_on_convergence=False)
    fwd = integrate(FIG1_START, fig1_matrix, cfg)
    back = integrate(fwd.final, fig1_matrix, IntegrationConfig(t_span=(3, 0), stop_on_convergence=False))
    assert back.t_final == pytest.approx(0.0)
    np.testing.assert_allclose(back.final, FIG1_START, atol=1e-6)


@pytest.mark.parametrize("gamma", [0.0, 1.0, 2.0])
def test_equilibrium_ray_is_invariant(gamma, fig1_matrix):
    cfg = IntegrationConfig(gamma=gamma, t_span=(0, 50), stop_on_convergence=False)
    traj = integrate([0.4, 0.4, 0.4], fig1_matrix, cfg)
    assert np.max(np.abs(traj.p - 0.4)) <= 1e-10


@pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0, 2.0])
def test_first_integral_is_conserved(gamma, rng):
    for _ in range(3):
        params, _ = sample_params(rng, Region.ANY)
        cfg = IntegrationConfig(gamma=gamma, t_span=(0, 100), stop_on_convergence=False)
        traj = integrate(rng.dirichlet(np.ones(3)) + 0.05, from_params(params), cfg)
        if traj.termination.kind is TerminationKind.STEP_FAILURE:
            continue
        assert traj.max_drift <= 1e-6
        assert traj.relative_drift().max() <= 1e-6


def test_gamma_zero_symmetric_converges_on_sphere(rng):
    A = from_params(SYMMETRIC)
    for _ in range(5):
        p0 = rng.uniform(0.2, 1.0, 3)
        p0 *= math.sqrt(3) / np.linalg.norm(p0)
        traj = integrate(p0, A, IntegrationConfig(gamma=0, t_span=(0, 500)))
        assert traj.termination.kind is TerminationKind.CONVERGED
        np.testing.assert_allclose(traj.final, 1.0, atol=1e-6)
        assert np.all(np.diff(traj.phi) <= 1e-12)


def test_lyapunov_decreases_when_h_positive(rng):
    for _ in range(10):
        params, _ = sample_params(rng, Region.GLOBALLY_STABLE)
        for gamma in (0.0, 1.0, 2.0):
            traj = integrate(rng.dirichlet(np.ones(3)), from_params(params),
                             IntegrationConfig(gamma=gamma, t_span=(0, 50)))
            assert np.all(np.diff(traj.phi) <= 1e-12 * np.abs(traj.phi[:-1]))


def test_global_convergence_with_rate_scaled_horizon(rng):
    """With a horizon matched to the slowest linear rate, every H > 0 run converges."""
    from scarf_hirota.stability import classify

    for _ in range(15):
        params, _ = sample_params(rng, Region.GLOBALLY_STABLE)
        rate = min(-z.real for z in classify(params).jacobian_eigenvalues)
        for gamma in (0.0, 1.0, 2.0):
            p0 = rng.dirichlet(np.ones(3))
            c = p0.mean()
            horizon = 50 + 40 / (rate * c ** (gamma - 1))
            traj = integrate(p0, from_params(params),
                             IntegrationConfig(gamma=gamma, t_span=(0, horizon), convergence_radius=1e-6))
            assert traj.termination.kind is TerminationKind.CONVERGED, (params, gamma, p0)


def test_gamma_one_keeps_the_simplex_open(rng):
    for _ in range(10):
        params, _ = sample_params(rng, Region.ANY)
        traj = integrate(rng.dirichlet(np.ones(3)), from_params(params),
                         IntegrationConfig(t_span=(0, 200)))
        assert traj.termination.kind is not TerminationKind.PRICE_WENT_NEGATIVE
        assert np.all(traj.p > 0)


def test_gamma_zero_escape_is_possible():
    fp_start = [1e-3, 0.69, 0.309]
    traj = integrate(fp_start, from_params(FIG1), IntegrationConfig(gamma=0, t_span=(0, 10)))
    assert str(traj.termination) == "PriceWentNegative(1)"
    assert traj.final[0] == pytest.approx(0, abs=1e-9)


def test_renormalize_pins_first_integral(fig1_matrix):
    cfg = IntegrationConfig(gamma=0, t_span=(0, 100), rel_tol=1e-6, abs_tol=1e-8,
                            renormalize=True, stop_on_convergence=False)
    traj = integrate([0.5, 1.0, 1.2], fig1_matrix, cfg)
    assert traj.relative_drift().max() <= 1e-14


def test_boundary_start_allowed_for_gamma_one():
    fp = edge_fixed_point(1, FIG1).point.as_array()
    traj = integrate(fp, from_params(FIG1), IntegrationConfig(t_span=(0, 5), stop_on_convergence=False))
    np.testing.assert_allclose(traj.final, fp, atol=1e-10)
    with pytest.raises(DomainError):
        integrate(fp, from_params(FIG1), IntegrationConfig(gamma=0, t_span=(0, 5)))


def test_sample_decimation(fig1_matrix):
    cfg = IntegrationConfig(t_span=(0, 100), sample_every=0.01, max_samples=500, stop_on_convergence=False)
    traj = integrate(FIG1_START, fig1_matrix, cfg)
    assert len(traj) <= 500
    assert traj.t[0] == 0 and traj.t_final == pytest.approx(100)


def test_distance_to_ray():
    assert distance_to_ray([0.3, 0.3, 0.3], 1) == pytest.approx(0, abs=1e-15)
    assert distance_to_ray([0.2, 0.3, 0.5], 1) == pytest.approx(1 / 3 - 0.2 + (0.5 - 1 / 3) - (0.5 - 1 / 3) + (0.5 - 1 / 3) - (1 / 3 - 0.2), abs=1e-12)


# --- serialization --------------------------------------------------------------------------------------


def test_csv_and_json_round_trip(fig1_matrix):
    traj = integrate(FIG1_START, fig1_matrix, IntegrationConfig(t_span=(0, 2), stop_on_convergence=False))
    text = traj.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    back = Trajectory.from_csv(text, gamma=1.0, termination=traj.termination)
    np.testing.assert_array_equal(back.p, traj.p)
    np.testing.assert_array_equal(back.t, traj.t)
    j = Trajectory.from_json(traj.to_json())
    np.testing.assert_array_equal(j.p, traj.p)
    assert j.termination == traj.termination
    # CSV -> JSON -> CSV is lossless at 17 significant digits.
    assert Trajectory.from_json(back.to_json()).to_csv() == text
    buf = io.StringIO()
    traj.to_csv(buf)
    assert buf.getvalue() == text


# --- limit cycles ------------------------------------------------------------------------------------------


_BASIS = np.array([[1 / math.sqrt(2), -1 / math.sqrt(2), 0.0],
                   [1 / math.sqrt(6), 1 / math.sqrt(6), -2 / math.sqrt(6)]])


def _planar_trajectory(field, xy0, t1, dt=0.01):
    sol = _ode.solve(field, 0.0, xy0, t1, rtol=1e-10, atol=1e-12, sample_every=dt)
    xy = np.array(sol.y)
    q = 1 / 3 + xy @ _BASIS
    n = len(q)
    return Trajectory(t=np.array(sol.t), p=q, E=np.zeros((n, 3)), g=q.sum(axis=1), phi=np.zeros(n),
                      termination=Termination(TerminationKind.TIME_EXHAUSTED), gamma=1.0)


def test_synthetic_limit_cycle_is_detected():
    R, omega = 0.1, 2.0

    def hopf(t, z):
        x, y = z
        r2 = x * x + y * y
        return np.array([5 * x * (R * R - r2) / (R * R) - omega * y, 5 * y * (R * R - r2) / (R * R) + omega * x])

    traj = _planar_trajectory(hopf, [0.02, 0.0], 60.0)
    report = detect_limit_cycle(traj)
    assert isinstance(report, CycleReport)
    assert report.detected
    assert report.closure_residual <= 1e-6
    assert report.period_estimate == pytest.approx(2 * math.pi / omega, rel=0.01)
    np.testing.assert_allclose(np.linalg.norm(simplex_plane_coords(report.section_points[-1])), R, rtol=1e-3)


def test_converging_spiral_is_not_a_cycle():
    def focus(t, z):
        x, y = z
        return np.array([-0.2 * x - y, x - 0.2 * y])

    report = detect_limit_cycle(_planar_trajectory(focus, [0.2, 0.0], 60.0))
    assert not report.detected
    assert np.all(np.diff(report.return_radii) < 0)


def test_fig1_forward_is_not_a_cycle():
    cfg = IntegrationConfig(t_span=(0, 1000), sample_every=0.05, stop_on_convergence=False)
    report = detect_limit_cycle(integrate(FIG1_START, figure1_matrix(), cfg))
    assert not report.detected
    assert np.all(np.diff(report.return_radii) < 0)


def test_constant_trajectory_has_no_crossings(fig1_matrix):
    traj = integrate([1, 1, 1], fig1_matrix, IntegrationConfig(t_span=(0, 10), stop_on_convergence=False,
                                                               sample_every=0.1))
    with pytest.raises(InsufficientCrossings):
        detect_limit_cycle(traj)
