"""
Unit tests for special Kähler charts: Darboux coordinates, Hessian structure,
Monge–Ampère constant and integral affine transitions.

Run with: pytest tests/test_special_kahler.py -v
"""
import numpy as np
import pytest

from k3collapse.errors import AffineCompatibilityError, DomainError
from k3collapse.fibration import engineered_fibration, singular_fibers
from k3collapse.schemas import ChartSpec
from k3collapse.special_kahler import (
    FibrationChart,
    SeriesChart,
    affine_cocycle_check,
    affine_monodromy,
    chart_from_spec,
    darboux,
    darboux_differential_check,
    fibration_density,
    grid_points,
    hessian_structure_check,
    metric_at,
    metric_in_darboux,
    monge_ampere_check,
    monge_ampere_constant,
    realify,
    sample_points,
    symplectic_form,
    transition,
)
from k3collapse.volume import volume_density


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def make_cubic_chart(**kwargs) -> SeriesChart:
    """F = y³/6, so Z = y and Im Z > 0 on the upper half plane."""
    defaults = {"expression": "y1**3/6", "n": 1, "center": (1j,), "radius": 0.5, "label": "cubic"}
    defaults.update(kwargs)
    return SeriesChart(**defaults)


def make_two_dim_chart(**kwargs) -> SeriesChart:
    defaults = {
        "expression": "(y1**3 + y2**3)/6 + y1*y2",
        "n": 2,
        "center": (1j, 1j),
        "radius": 0.4,
        "label": "cubic-2d",
    }
    defaults.update(kwargs)
    return SeriesChart(**defaults)


SHEAR = np.array([[1, 1], [0, 1]])


# ---------------------------------------------------------------------------
# Linear algebra helpers
# ---------------------------------------------------------------------------

class TestLinearAlgebra:
    def test_symplectic_form_is_antisymmetric(self):
        J0 = symplectic_form(2)
        assert np.array_equal(J0.T, -J0)
        assert np.array_equal(J0 @ J0, -np.eye(4))

    def test_realify_multiplication_by_i(self):
        assert np.array_equal(realify(np.array([[1j]])), np.array([[0, -1], [1, 0]]))


# ---------------------------------------------------------------------------
# Series charts
# ---------------------------------------------------------------------------

class TestSeriesChart:
    def setup_method(self):
        self.chart = make_cubic_chart()

    def test_period_matrix_is_hessian(self):
        assert self.chart.Z(0.2 + 1.1j)[0, 0] == pytest.approx(0.2 + 1.1j)

    def test_metric_is_im_z(self):
        assert metric_at(self.chart, 0.3 + 0.8j)[0, 0] == pytest.approx(0.8)

    def test_lower_half_plane_is_outside_domain(self):
        with pytest.raises(DomainError):
            metric_at(self.chart, -0.5j)

    def test_darboux_coordinates(self):
        # v = (Re y, Re y²/2)
        y = 0.3 + 0.8j
        assert np.allclose(darboux(self.chart, y), [0.3, (y**2 / 2).real])

    def test_darboux_jacobian_matches_finite_differences(self):
        assert darboux_differential_check(self.chart, 0.1 + 0.9j) < 1e-7

    def test_two_dim_period_matrix_is_symmetric(self):
        Z = make_two_dim_chart().Z([0.1 + 1j, -0.2 + 0.9j])
        assert np.allclose(Z, Z.T)
        assert Z[0, 1] == pytest.approx(1.0)

    def test_grid_points_stay_inside(self):
        chart = make_two_dim_chart()
        grid = grid_points(chart, k=3)
        assert len(grid) == 81
        assert all(chart.contains(y) for y in grid)

    def test_sample_points_are_reproducible(self):
        a = sample_points(self.chart, 5, seed=3)
        b = sample_points(self.chart, 5, seed=3)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        assert all(self.chart.contains(y) for y in a)

    def test_rebased_chart_vanishes_at_point(self):
        y = 0.2 + 1.1j
        assert np.allclose(darboux(self.chart.rebased(y), y), 0)

    def test_chart_from_spec(self):
        spec = ChartSpec(expression="y1**3/6", center=[(0.0, 1.0)], radius=0.3)
        chart = chart_from_spec(spec)
        assert isinstance(chart, SeriesChart)
        assert chart.radius == 0.3
        assert chart.center[0] == 1j

    def test_fibration_spec_without_fibration_raises(self):
        with pytest.raises(DomainError):
            chart_from_spec(ChartSpec(kind="fibration"))


# ---------------------------------------------------------------------------
# Hessian structure and Monge–Ampère
# ---------------------------------------------------------------------------

class TestHessianStructure:
    @pytest.mark.parametrize("make_chart", [make_cubic_chart, make_two_dim_chart])
    def test_metric_is_hessian_in_darboux_coordinates(self, make_chart):
        chart = make_chart()
        result = hessian_structure_check(chart, grid_points(chart, k=3))
        assert result["passed"]
        assert result["excluded"] == 0

    def test_metric_in_darboux_is_positive_definite(self):
        g = metric_in_darboux(make_two_dim_chart(), [0.1 + 1j, 1j])
        assert np.all(np.linalg.eigvalsh(g) > 0)


class TestMongeAmpere:
    def test_constant_for_unit_polarization(self):
        chart = make_cubic_chart()
        result = monge_ampere_check(chart, grid_points(chart))
        assert result["passed"]
        assert result["mean"] == pytest.approx(4.0, rel=1e-10)
        assert result["expected"] == 4.0

    def test_constant_in_two_dimensions(self):
        chart = make_two_dim_chart()
        result = monge_ampere_check(chart, grid_points(chart, k=3))
        assert result["mean"] == pytest.approx(16.0, rel=1e-10)

    def test_polarization_divides_constant(self):
        chart = make_cubic_chart(polarization=[2])
        result = monge_ampere_check(chart, grid_points(chart))
        assert monge_ampere_constant(chart) == 1.0
        assert result["mean"] == pytest.approx(1.0, rel=1e-10)

    def test_frame_change_keeps_constant(self):
        chart = make_cubic_chart().with_frame(frame=SHEAR)
        result = monge_ampere_check(chart, grid_points(chart))
        assert result["mean"] == pytest.approx(4.0, rel=1e-10)


# ---------------------------------------------------------------------------
# Affine transitions
# ---------------------------------------------------------------------------

class TestTransitions:
    def setup_method(self):
        self.chart = make_cubic_chart()
        self.samples = grid_points(self.chart, k=3)

    def test_identity_transition(self):
        tr = transition(self.chart, self.chart, self.samples)
        assert np.array_equal(tr.P, np.eye(2))
        assert np.allclose(tr.b, 0)

    def test_integral_frame_change_is_recovered(self):
        other = self.chart.with_frame(frame=SHEAR, offset=[0.25, -1.5])
        tr = transition(self.chart, other, self.samples)
        assert np.array_equal(tr.P, np.linalg.inv(SHEAR).round())
        assert tr.symplectic
        assert tr.fit_residual < 1e-10

    def test_non_integral_frame_raises(self):
        other = self.chart.with_frame(frame=np.diag([2.0, 0.5]))
        with pytest.raises(AffineCompatibilityError):
            transition(self.chart, other, self.samples)

    def test_too_few_samples_raise(self):
        with pytest.raises(AffineCompatibilityError):
            transition(self.chart, self.chart, self.samples[:2])

    def test_cocycle(self):
        B = self.chart.with_frame(frame=SHEAR)
        C = self.chart.with_frame(frame=np.array([[0, -1], [1, 0]]), offset=[0.3, -0.2])
        result = affine_cocycle_check(self.chart, B, C, self.samples)
        assert result["passed"]


# ---------------------------------------------------------------------------
# Fibration-backed charts
# ---------------------------------------------------------------------------

class TestFibrationChart:
    def setup_method(self):
        self.W = engineered_fibration("I1")
        self.chart = FibrationChart(self.W, 0.5 + 0.5j)

    def test_default_radius_is_half_the_clearance(self):
        assert self.chart.radius == pytest.approx(0.5 * abs(0.5 + 0.5j))

    def test_period_matrix_is_tau(self):
        assert self.chart.Z(0.5 + 0.5j)[0, 0] == pytest.approx(self.chart.basis.tau)

    def test_special_coordinates_start_at_origin(self):
        u, u_D = self.chart.special(0.5 + 0.5j)
        assert u[0] == 0 and u_D[0] == 0

    def test_special_coordinate_derivative_is_pi1(self):
        h = 1e-4
        t = 0.55 + 0.45j
        u_plus, _ = self.chart.special(t + h)
        u_minus, _ = self.chart.special(t - h)
        assert (u_plus[0] - u_minus[0]) / (2 * h) == pytest.approx(self.chart.jacobian(t)[0, 0], rel=1e-6)

    def test_hessian_structure(self):
        grid = grid_points(self.chart, k=3)
        assert hessian_structure_check(self.chart, grid)["passed"]

    def test_monge_ampere(self):
        result = monge_ampere_check(self.chart, grid_points(self.chart, k=3))
        assert result["mean"] == pytest.approx(4.0, rel=1e-8)

    def test_density_is_half_the_volume_density(self):
        y = np.array([0.3 + 0.2j, -0.4 + 0.1j])
        assert np.allclose(volume_density(self.W, y) / fibration_density(self.W, y), 2.0)


class TestAffineMonodromy:
    @pytest.mark.parametrize("label, radius", [("I1", 0.002), ("II", 0.5)])
    def test_linear_part_matches_period_monodromy(self, label, radius):
        W = engineered_fibration(label)
        fiber = next(f for f in singular_fibers(W) if abs(f.location) < 1e-12)
        result = affine_monodromy(W, fiber, radius)
        assert result["matches"]
        assert np.array_equal(result["P"], result["T"])
