"""
Unit tests for fiber periods: AGM lattice, continuation and monodromy on engineered models.

Run with: pytest tests/test_periods.py -v
"""
from fractions import Fraction

import numpy as np
import pytest

from k3collapse.errors import DiscriminantProximityError, MonodromyError, QuasiUnipotenceError
from k3collapse.fibration import engineered_fibration, singular_fibers
from k3collapse.models import KodairaType, MonodromyMatrix
from k3collapse.periods import (
    circle_path,
    continue_periods,
    fiber_periods,
    j_defect,
    j_from_coefficients,
    j_invariant,
    lattice_coordinates,
    lattice_defect,
    loop_matrix,
    matches_kodaira,
    monodromy,
    monodromy_about,
    mp_quadrature_periods,
    period_lattice,
    quasi_unipotence,
    reduce_basis,
    untwist_check,
)


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def make_matrix(rows) -> MonodromyMatrix:
    return MonodromyMatrix.from_array(np.array(rows))


def fiber_at_origin(W):
    return next(f for f in singular_fibers(W) if not f.at_infinity and abs(f.location) < 1e-12)


# ---------------------------------------------------------------------------
# Period lattice
# ---------------------------------------------------------------------------

class TestPeriodLattice:
    def test_square_lattice(self):
        # x³ − x has j = 1728
        pi1, pi2 = period_lattice(-1.0, 0.0)
        assert abs(pi2 / pi1 - 1j) < 1e-10

    def test_hexagonal_lattice_has_j_zero(self):
        pi1, pi2 = period_lattice(0.0, -1.0)
        assert abs(pi2 / pi1 - np.exp(1j * np.pi / 3)) < 1e-10
        assert abs(j_invariant(pi2 / pi1)) < 1e-6

    def test_j_matches_coefficients(self):
        a, b = 0.3 - 0.7j, 1.1 + 0.2j
        pi1, pi2 = period_lattice(a, b)
        j_tau = j_invariant(pi2 / pi1)
        j_ab = j_from_coefficients(a, b)
        assert abs(j_tau - j_ab) < 1e-6 * (1 + abs(j_ab))

    def test_j_consistency_over_random_coefficients(self):
        rng = np.random.default_rng(11)
        a = rng.normal(size=200) + 1j * rng.normal(size=200)
        b = rng.normal(size=200) + 1j * rng.normal(size=200)
        pi1, pi2 = period_lattice(a, b)
        assert np.max(j_defect(pi2 / pi1, a, b)) < 1e-8

    def test_batched_over_arrays(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=50) + 1j * rng.normal(size=50)
        b = rng.normal(size=50) + 1j * rng.normal(size=50)
        pi1, pi2 = period_lattice(a, b)
        assert pi1.shape == (50,)
        assert np.all((pi2 / pi1).imag > 0)
        assert np.all(lattice_defect(pi1, pi2, a, b) < 1e-8)

    def test_basis_is_reduced(self):
        pi1, pi2 = period_lattice(2.0 - 1j, 0.5 + 3j)
        tau = pi2 / pi1
        assert abs(tau.real) <= 0.5 + 1e-12
        assert abs(tau) >= 1 - 1e-12

    def test_quadrature_agrees_with_agm(self):
        agm = np.array(period_lattice(-1.0, 0.0))
        quad = np.array(reduce_basis(*mp_quadrature_periods(-1.0, 0.0)))
        M = lattice_coordinates(agm, quad)
        assert np.allclose(M, np.rint(M), atol=1e-8)
        assert abs(round(np.linalg.det(M))) == 1

    def test_scaling_by_lambda(self):
        # (a, b) -> (λ⁴a, λ⁶b) scales the lattice by 1/λ
        lam = 1.7
        p = np.array(period_lattice(0.4, 0.9))
        q = np.array(period_lattice(0.4 * lam**4, 0.9 * lam**6))
        M = lattice_coordinates(lam * q, p)
        assert np.allclose(M, np.rint(M), atol=1e-8)


class TestFiberPeriods:
    def setup_method(self):
        self.W = engineered_fibration("I1")

    def test_point_on_discriminant_raises(self):
        with pytest.raises(DiscriminantProximityError):
            fiber_periods(self.W, 0j)

    def test_oriented(self):
        p = fiber_periods(self.W, 0.3 + 0.1j)
        assert p.tau.imag > 0
        assert p.path_id == "raw"

    @pytest.mark.parametrize("label", ["I1", "II", "III", "I0*"])
    def test_j_consistency_at_random_regular_fibers(self, label):
        W = engineered_fibration(label)
        rng = np.random.default_rng(3)
        ys = rng.uniform(0.1, 1.0, size=20) * np.exp(2j * np.pi * rng.uniform(size=20))
        for y in ys[W.distance_to_discriminant(ys) > 0.05]:
            p = fiber_periods(W, complex(y))
            assert float(j_defect(p.tau, W.a_at(p.y), W.b_at(p.y))) < 1e-8


# ---------------------------------------------------------------------------
# Continuation
# ---------------------------------------------------------------------------

class TestContinuation:
    def setup_method(self):
        self.W = engineered_fibration("I1")

    def test_contractible_loop_has_trivial_monodromy(self):
        start = fiber_periods(self.W, 0.6 + 0j)
        T = loop_matrix(self.W, start, 0.5 + 0j)
        assert T.entries == ((1, 0), (0, 1))

    def test_straight_path_keeps_tau_continuous(self):
        start = fiber_periods(self.W, 0.5 + 0.5j)
        end = continue_periods(self.W, start, [0.5 + 0.5j, -0.5 + 0.5j])
        assert end.y == -0.5 + 0.5j
        assert end.tau.imag > 0
        assert float(lattice_defect(end.pi1, end.pi2, self.W.a_at(end.y), self.W.b_at(end.y))) < 1e-8

    def test_path_then_reverse_returns_the_start_basis(self):
        path = [0.5 + 0.5j, -0.5 + 0.5j, -0.5 - 0.5j]
        start = fiber_periods(self.W, path[0])
        there = continue_periods(self.W, start, path)
        back = continue_periods(self.W, there, path[::-1])
        assert back.y == start.y
        M = lattice_coordinates(back.basis(), start.basis())
        assert np.allclose(M, np.eye(2), atol=1e-9)

    def test_concatenated_paths_compose(self):
        first, second = [0.5 + 0.5j, -0.5 + 0.5j], [-0.5 + 0.5j, -0.5 - 0.5j, 0.5 - 0.5j]
        start = fiber_periods(self.W, first[0])
        stepwise = continue_periods(self.W, continue_periods(self.W, start, first), second)
        at_once = continue_periods(self.W, start, first + second[1:])
        M = lattice_coordinates(at_once.basis(), stepwise.basis())
        assert np.allclose(M, np.eye(2), atol=1e-9)

    def test_circle_path_is_closed(self):
        path = circle_path(0.2j, 0.3, 16, start_angle=0.4)
        assert path[0] == path[-1]
        assert len(path) == 17


# ---------------------------------------------------------------------------
# Monodromy
# ---------------------------------------------------------------------------

class TestMonodromy:
    def test_i1_monodromy_is_unipotent(self):
        W = engineered_fibration("I1")
        T = monodromy(W, fiber_at_origin(W), radius=0.002)
        assert matches_kodaira(T, KodairaType("I", 1))
        q = quasi_unipotence(T)
        assert (q.beta, q.d) == (1, 2)

    @pytest.mark.parametrize("label", ["II", "III", "IV", "I0*"])
    def test_finite_order_monodromy_matches_type(self, label):
        W = engineered_fibration(label)
        T = monodromy(W, fiber_at_origin(W), radius=0.5)
        assert T.det == 1
        assert matches_kodaira(T, KodairaType.parse(label))

    def test_loop_near_other_fiber_raises(self):
        W = engineered_fibration("I1")
        with pytest.raises(MonodromyError):
            monodromy_about(W, 0j, 0.005)

    def test_untwist_of_i1_is_single_valued(self):
        W = engineered_fibration("I1")
        defect = untwist_check(W, fiber_at_origin(W), 0.002 + 0j)
        assert defect < 1e-7

    @pytest.mark.parametrize("fraction", [0.05, 0.025, 0.0125])
    def test_untwist_of_ii_after_order_six_base_change(self, fraction):
        W = engineered_fibration("II")
        fiber = fiber_at_origin(W)
        assert quasi_unipotence(monodromy(W, fiber, radius=0.5)).beta == 6
        w = fraction ** (1 / 6) * np.exp(0.3j)
        assert untwist_check(W, fiber, w, beta=6) < 1e-7

    def test_untwist_with_trivial_monodromy_needs_no_correction(self):
        # six turns around a type II fiber close up: U = T^6 = I and N = 0
        W = engineered_fibration("II")
        fiber = fiber_at_origin(W)
        T = monodromy(W, fiber, radius=0.5)
        U = make_matrix(np.linalg.matrix_power(np.array(T.entries), 6))
        assert U.entries == ((1, 0), (0, 1))
        assert untwist_check(W, fiber, 0.05 ** (1 / 6) + 0j, beta=6) < 1e-7


# ---------------------------------------------------------------------------
# Quasi-unipotence and conjugacy signatures
# ---------------------------------------------------------------------------

class TestQuasiUnipotence:
    def test_identity(self):
        q = quasi_unipotence(make_matrix([[1, 0], [0, 1]]))
        assert (q.beta, q.d) == (1, 1)
        assert not np.any(q.N_array())

    def test_parabolic(self):
        q = quasi_unipotence(make_matrix([[1, 1], [0, 1]]))
        assert (q.beta, q.d) == (1, 2)
        assert q.N == ((Fraction(0), Fraction(1)), (Fraction(0), Fraction(0)))

    def test_minus_identity(self):
        q = quasi_unipotence(make_matrix([[-1, 0], [0, -1]]))
        assert (q.beta, q.d) == (2, 1)
        assert not np.any(q.N_array())

    def test_order_six(self):
        q = quasi_unipotence(make_matrix([[1, -1], [1, 0]]))
        assert (q.beta, q.d) == (6, 1)

    def test_negative_parabolic_needs_base_change_of_order_two(self):
        q = quasi_unipotence(make_matrix([[-1, -3], [0, -1]]))
        assert (q.beta, q.d) == (2, 2)
        assert q.N[0][1] == Fraction(6)

    def test_hyperbolic_raises(self):
        with pytest.raises(QuasiUnipotenceError):
            quasi_unipotence(make_matrix([[2, 1], [1, 1]]))

    def test_determinant_must_be_one(self):
        with pytest.raises(QuasiUnipotenceError):
            quasi_unipotence(make_matrix([[2, 0], [0, 1]]))


class TestMatchesKodaira:
    def test_ik_uses_gcd_of_n(self):
        T = make_matrix([[1, 3], [0, 1]])
        assert matches_kodaira(T, KodairaType("I", 3))
        assert not matches_kodaira(T, KodairaType("I", 2))

    def test_conjugate_form_still_matches(self):
        # conjugates of [[1, 1], [0, 1]] are I1 too
        T = make_matrix([[0, 1], [-1, 2]])
        assert matches_kodaira(T, KodairaType("I", 1))

    def test_ik_star(self):
        assert matches_kodaira(make_matrix([[-1, -2], [0, -1]]), KodairaType("I*", 2))

    def test_identity_is_not_i1(self):
        assert not matches_kodaira(make_matrix([[1, 0], [0, 1]]), KodairaType("I", 1))

    def test_i0_star(self):
        assert matches_kodaira(make_matrix([[-1, 0], [0, -1]]), KodairaType("I0*"))

    def test_order_four_is_iii(self):
        T = make_matrix([[0, -1], [1, 0]])
        assert matches_kodaira(T, KodairaType("III"))
        assert not matches_kodaira(T, KodairaType("II"))
