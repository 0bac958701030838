"""
Unit tests for fiber volume asymptotics: exponent table, fits on synthetic densities
and on the homogeneous engineered models, punctured-disc mass.

Run with: pytest tests/test_volume.py -v
"""
from fractions import Fraction

import numpy as np
import pytest

from k3collapse.errors import DomainError
from k3collapse.fibration import engineered_fibration, singular_fibers
from k3collapse.models import FAMILIES, KodairaType
from k3collapse.volume import (
    EXPONENT_TABLE,
    alpha_within_bound,
    default_rho0,
    fiber_volume,
    fit_asymptotics,
    multiplicity_bound,
    plot_fit,
    predicted_exponents,
    punctured_disc_mass,
    volume_density,
)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def power(alpha):
    return lambda y: np.abs(y) ** alpha


def power_log(alpha, d):
    return lambda y: np.abs(y) ** alpha * (1 - np.log(np.abs(y))) ** d


def fiber_at_origin(W):
    return next(f for f in singular_fibers(W) if not f.at_infinity and abs(f.location) < 1e-12)


# ---------------------------------------------------------------------------
# Exponent table
# ---------------------------------------------------------------------------

class TestExponentTable:
    def test_every_family_has_an_entry(self):
        assert set(EXPONENT_TABLE) == set(FAMILIES)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_alpha_respects_multiplicity_bound(self, family):
        kodaira = KodairaType(family, 1 if family in ("I", "I*") else 0)
        alpha, _ = predicted_exponents(kodaira)
        assert alpha >= multiplicity_bound(kodaira)
        assert alpha > -2

    def test_bound_for_semistable_is_zero(self):
        assert multiplicity_bound(KodairaType("I", 4)) == 0

    def test_bound_for_ii_star(self):
        assert multiplicity_bound(KodairaType("II*")) == Fraction(-5, 3)

    def test_only_semistable_and_ik_star_carry_a_log(self):
        logs = {family for family, (_, d) in EXPONENT_TABLE.items() if d}
        assert logs == {"I", "I*"}


# ---------------------------------------------------------------------------
# Volume density
# ---------------------------------------------------------------------------

class TestVolumeDensity:
    def setup_method(self):
        self.W = engineered_fibration("I1")

    def test_batched_matches_single_point(self):
        y = np.array([0.3 + 0.1j, -0.2 + 0.4j])
        batched = volume_density(self.W, y)
        assert batched[0] == pytest.approx(fiber_volume(self.W, y[0]), rel=1e-12)
        assert batched[1] == pytest.approx(fiber_volume(self.W, y[1]), rel=1e-12)

    def test_positive(self):
        y = 0.5 * np.exp(2j * np.pi * np.arange(16) / 16)
        assert np.all(volume_density(self.W, y) > 0)

    def test_shape_is_preserved(self):
        y = np.full((3, 4), 0.5 + 0.5j)
        assert volume_density(self.W, y).shape == (3, 4)


# ---------------------------------------------------------------------------
# fit_asymptotics on synthetic densities
# ---------------------------------------------------------------------------

class TestSyntheticFits:
    @pytest.mark.parametrize("alpha", [0.0, -0.5, -1.0, -1.5])
    def test_pure_power(self, alpha):
        fit = fit_asymptotics(None, None, rho0=0.25, evaluate=power(alpha))
        assert fit.alpha_fit == pytest.approx(alpha, abs=1e-8)
        assert fit.d_fit == 0

    @pytest.mark.parametrize("d", [1, 2])
    def test_power_with_log(self, d):
        fit = fit_asymptotics(None, None, rho0=0.25, evaluate=power_log(-1.0, d))
        assert fit.alpha_fit == pytest.approx(-1.0, abs=1e-8)
        assert fit.d_fit == d

    def test_constant_is_recovered(self):
        fit = fit_asymptotics(None, None, rho0=0.25, evaluate=lambda y: 3 * np.abs(y) ** -0.5)
        assert fit.C_fit == pytest.approx(3.0, rel=1e-8)

    def test_off_center(self):
        c = 0.4 - 0.2j
        fit = fit_asymptotics(None, None, rho0=0.1, evaluate=lambda y: np.abs(y - c) ** -0.5, center=c)
        assert fit.alpha_fit == pytest.approx(-0.5, abs=1e-8)
        assert fit.center == c

    def test_too_few_levels_raise(self):
        with pytest.raises(DomainError):
            fit_asymptotics(None, None, rho0=0.25, levels=6, evaluate=power(0.0))

    def test_too_deep_raises(self):
        with pytest.raises(DomainError) as info:
            fit_asymptotics(None, None, rho0=1e-5, levels=12, evaluate=power(0.0))
        assert info.value.diagnostics["levels"] == 12

    def test_alpha_violation_is_logged(self, caplog):
        fit_asymptotics(None, None, rho0=0.25, evaluate=power(-2.5))
        assert "violates alpha > -1.99" in caplog.text

    def test_alpha_inside_the_margin_is_rejected(self, caplog):
        fit = fit_asymptotics(None, None, rho0=0.25, evaluate=power(-1.995))
        assert fit.alpha_fit == pytest.approx(-1.995, abs=1e-8)
        assert not alpha_within_bound(fit.alpha_fit)
        assert "violates" in caplog.text

    def test_alpha_bound_margin(self):
        assert alpha_within_bound(-1.98)
        assert not alpha_within_bound(-1.995)
        assert not alpha_within_bound(-2.0)

    def test_samples_avoid_the_real_axis(self):
        fit = fit_asymptotics(None, None, rho0=0.25, evaluate=power(0.0))
        assert np.all(np.abs(np.sin(fit.angles)) > 0)

    def test_plot_is_svg(self, tmp_path):
        fit = fit_asymptotics(None, None, rho0=0.25, evaluate=power(-0.5))
        out = tmp_path / "fit.svg"
        plot_fit(fit, str(out), title="synthetic")
        assert out.read_text().lstrip().startswith("<?xml")


# ---------------------------------------------------------------------------
# fit_asymptotics on engineered models
# ---------------------------------------------------------------------------

class TestEngineeredFits:
    # these models are homogeneous, so φ is an exact power of |t|
    @pytest.mark.parametrize("label", ["II", "III", "IV", "I0*", "IV*", "III*", "II*"])
    def test_fitted_alpha_matches_table(self, label):
        W = engineered_fibration(label)
        fiber = fiber_at_origin(W)
        fit = fit_asymptotics(W, fiber, rho0=default_rho0(W, fiber))
        assert fit.alpha_fit == pytest.approx(float(fiber.alpha_pred), abs=1e-6)
        assert fit.d_fit == fiber.d_pred

    def test_default_rho0_is_capped(self):
        W = engineered_fibration("II")
        assert default_rho0(W, fiber_at_origin(W)) == 0.25

    def test_default_rho0_respects_other_fiber(self):
        W = engineered_fibration("I1")
        assert default_rho0(W, fiber_at_origin(W)) == pytest.approx(1 / 600)


# ---------------------------------------------------------------------------
# punctured_disc_mass
# ---------------------------------------------------------------------------

class TestPuncturedDiscMass:
    def test_integrable_density_converges(self):
        result = punctured_disc_mass(None, None, rho0=0.25, evaluate=power(-1.0))
        assert result["converged"]
        assert result["ratio"] == pytest.approx(0.5, rel=1e-6)
        # ∫ |y|⁻¹ dA over the disc of radius 1/4 is π/2
        assert result["masses"][-1] == pytest.approx(np.pi / 2, rel=1e-5)

    def test_borderline_density_does_not_converge(self):
        result = punctured_disc_mass(None, None, rho0=0.25, evaluate=power(-2.0))
        assert not result["converged"]
        assert result["ratio"] == pytest.approx(1.0, rel=1e-6)
