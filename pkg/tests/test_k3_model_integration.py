"""
Integration tests on the generic elliptic K3 model: 24 I1 fibers, global monodromy,
volume fits near a semistable fiber and the fibration-backed limit metric.
These continue periods around every fiber and mesh both charts of the sphere; expect minutes.

Run with: pytest tests/test_k3_model_integration.py -v -s -m integration
The -s flag shows the per-fiber fit table.
"""
import networkx as nx
import numpy as np
import pytest

from k3collapse.fibration import euler_characteristic, generic_k3, singular_fibers
from k3collapse.limit_metric import build_metric, completion_summary, distance
from k3collapse.models import KodairaType
from k3collapse.periods import global_monodromy_product, matches_kodaira
from k3collapse.schemas import MeshParams, Tolerances
from k3collapse.special_kahler import fibration_density
from k3collapse.volume import default_rho0, fit_asymptotics

pytestmark = pytest.mark.integration

I1 = KodairaType("I", 1)


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def W():
    return generic_k3(0)


@pytest.fixture(scope="module")
def fibers(W):
    return singular_fibers(W)


@pytest.fixture(scope="module")
def metric(W):
    return build_metric(W, MeshParams(grid=24, boundary_points=48))


# ---------------------------------------------------------------------------
# Fibers and monodromy
# ---------------------------------------------------------------------------

class TestGenericModel:
    def test_twenty_four_nodal_fibers(self, W, fibers):
        assert len(fibers) == 24
        assert all(f.kodaira_type == I1 for f in fibers)
        assert euler_characteristic(W) == 24

    def test_global_monodromy_product_is_identity(self, W):
        result = global_monodromy_product(W)
        assert len(result["matrices"]) == 24
        assert np.array_equal(result["product"], np.eye(2, dtype=np.int64))

    def test_every_lasso_is_a_nodal_monodromy(self, W):
        result = global_monodromy_product(W)
        assert all(matches_kodaira(T, I1) for T in result["matrices"])


# ---------------------------------------------------------------------------
# Volume asymptotics
# ---------------------------------------------------------------------------

class TestVolumeFits:
    def test_fits_near_nodal_fibers(self, W, fibers):
        tol = Tolerances().alpha
        print(f"\n{'fiber':<36} {'alpha_fit':>10} {'d_fit':>6}")
        for fiber in fibers[:4]:
            fit = fit_asymptotics(W, fiber, rho0=default_rho0(W, fiber))
            print(f"{fiber.label:<36} {fit.alpha_fit:>10.4f} {fit.d_fit:>6}")
            assert fit.alpha_fit == pytest.approx(0.0, abs=tol)
            assert fit.d_fit == 1


# ---------------------------------------------------------------------------
# Limit metric
# ---------------------------------------------------------------------------

class TestFibrationMetric:
    def test_area_is_normalized_and_graph_connected(self, metric):
        assert metric.total_area == pytest.approx(1.0)
        assert nx.is_connected(metric.graph)

    def test_every_fiber_is_a_puncture(self, metric):
        assert len(metric.punctures()) == 24

    def test_density_is_proportional_to_period_density(self, W, metric):
        mesh = metric.meshes["t"]
        ratio = mesh.phi / fibration_density(W, mesh.points)
        assert np.allclose(ratio, 2.0, rtol=1e-8)

    def test_distance_is_symmetric(self, W, metric):
        # the two interior mesh points farthest from the discriminant
        points = metric.meshes["t"].points
        inner = points[np.abs(points) < 0.8 * metric.chart("t").radius]
        a, b = inner[np.argsort(W.distance_to_discriminant(inner))[-2:]]
        d_ab = distance(metric, a, b).distance
        d_ba = distance(metric, b, a).distance
        assert d_ab == pytest.approx(d_ba, rel=1e-2)

    def test_completion_points_are_at_positive_distance(self, metric):
        summary = completion_summary(metric)
        assert len(summary["points"]) == 24
        assert summary["min_pairwise"] > 0
        assert summary["diameter"] >= summary["min_pairwise"]
