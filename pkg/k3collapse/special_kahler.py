import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
import sympy
from scipy.integrate import simpson

from k3collapse import config
from k3collapse.errors import AffineCompatibilityError, DomainError
from k3collapse.fibration import WeierstrassFibration, infinity_chart
from k3collapse.models import AffineTransition, PeriodPoint, SingularFiberRecord
from k3collapse.periods import circle_path, fiber_periods, monodromy_about, period_lattice, track_periods

logger = logging.getLogger(__name__)

# Gauss-Legendre nodes for the special coordinate integrals u = ∫π₁ dt, u_D = ∫π₂ dt
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_LOOP_POINTS = 256


def symplectic_form(n: int) -> np.ndarray:
    return np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])


def realify(C: np.ndarray) -> np.ndarray:
    """Real 2n×2n matrix of the complex-linear map C in (Re, Im) coordinates."""
    C = np.atleast_2d(C)
    return np.block([[C.real, -C.imag], [C.imag, C.real]])


# ---------------------------------------------------------------------------
# Charts
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SeriesChart:
    """
    Prepotential F(y1, ..., yn) given as a sympy expression on the polydisc
    |y_i − center_i| < radius. Special coordinates are the y_i themselves.
    `frame` is an integral symplectic change of Darboux frame and `offset` a translation.
    """
    expression: str
    n: int = 1
    center: Sequence[complex] = (1j,)
    radius: float = 0.5
    polarization: Optional[Sequence[int]] = None
    frame: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None
    label: str = "series"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=complex).reshape(self.n)
        self.polarization = np.asarray(self.polarization or [1] * self.n, dtype=float)
        self.frame = np.eye(2 * self.n) if self.frame is None else np.asarray(self.frame, dtype=float)
        self.offset = np.zeros(2 * self.n) if self.offset is None else np.asarray(self.offset, dtype=float)

    @cached_property
    def symbols(self) -> list:
        return list(sympy.symbols(f"y1:{self.n + 1}"))

    @cached_property
    def _compiled(self):
        F = sympy.sympify(self.expression, locals={str(s): s for s in self.symbols})
        grad = [sympy.diff(F, s) for s in self.symbols]
        hess = [[sympy.diff(g, s) for s in self.symbols] for g in grad]
        return (
            sympy.lambdify(self.symbols, grad, "numpy"),
            sympy.lambdify(self.symbols, hess, "numpy"),
        )

    def contains(self, y) -> bool:
        return bool(np.all(np.abs(_point(y, self.n) - self.center) < self.radius))

    def Z(self, y) -> np.ndarray:
        y = _point(y, self.n)
        Z = np.array(self._compiled[1](*y), dtype=complex).reshape(self.n, self.n)
        return (Z + Z.T) / 2

    def jacobian(self, y) -> np.ndarray:
        return np.eye(self.n, dtype=complex)

    def special(self, y) -> tuple[np.ndarray, np.ndarray]:
        y = _point(y, self.n)
        return y, np.array(self._compiled[0](*y), dtype=complex).reshape(self.n)

    def with_frame(self, frame=None, offset=None) -> "SeriesChart":
        return SeriesChart(
            self.expression, self.n, self.center, self.radius, self.polarization.astype(int).tolist(),
            self.frame if frame is None else frame, self.offset if offset is None else offset, self.label,
        )

    def rebased(self, y) -> "SeriesChart":
        """Same chart with Darboux coordinates vanishing at y."""
        return self.with_frame(offset=self.offset - darboux(self, y))


@dataclass(eq=False)
class FibrationChart:
    """
    n = 1 chart backed by a Weierstrass fibration: u = ∫π₁ dt, u_D = ∫π₂ dt from the
    basepoint, so Z = du_D/du = τ and du/dt = π₁. F itself is never formed.
    """
    W: WeierstrassFibration
    basepoint: complex
    basis: Optional[PeriodPoint] = None
    origin: tuple = (0j, 0j)
    radius: Optional[float] = None
    polarization: Optional[Sequence[int]] = None
    frame: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None
    _periods: dict = field(default_factory=dict, repr=False)

    n = 1

    def __post_init__(self):
        self.basepoint = complex(self.basepoint)
        if self.basis is None:
            self.basis = fiber_periods(self.W, self.basepoint)
        if self.radius is None:
            self.radius = 0.5 * float(self.W.distance_to_discriminant(self.basepoint))
        self.polarization = np.asarray(self.polarization or [1], dtype=float)
        self.frame = np.eye(2) if self.frame is None else np.asarray(self.frame, dtype=float)
        self.offset = np.zeros(2) if self.offset is None else np.asarray(self.offset, dtype=float)

    @property
    def label(self) -> str:
        return f"{self.W.label}@{self.basepoint:.4g}"

    @property
    def center(self) -> np.ndarray:
        return np.array([self.basepoint])

    def contains(self, t) -> bool:
        return abs(complex(_point(t, 1)[0]) - self.basepoint) < self.radius

    def periods_at(self, t) -> PeriodPoint:
        """Basis continued along the straight segment from the basepoint."""
        t = complex(_point(t, 1)[0])
        if t not in self._periods:
            if t == self.basepoint:
                self._periods[t] = self.basis
            else:
                self._periods[t] = track_periods(self.W, self.basis, [self.basepoint, t], path_id="chart")[-1]
        return self._periods[t]

    def Z(self, t) -> np.ndarray:
        return np.array([[self.periods_at(t).tau]])

    def jacobian(self, t) -> np.ndarray:
        return np.array([[self.periods_at(t).pi1]])

    def special(self, t) -> tuple[np.ndarray, np.ndarray]:
        t = complex(_point(t, 1)[0])
        u, u_D = self.origin
        if t != self.basepoint:
            nodes = self.basepoint + (t - self.basepoint) * (_GL_X + 1) / 2
            tracked = track_periods(self.W, self.basis, np.concatenate([[self.basepoint], nodes]), path_id="chart")
            pi = np.array([p.basis() for p in tracked[1:]])
            u, u_D = np.array([u, u_D]) + (t - self.basepoint) / 2 * (_GL_W @ pi)
        return np.array([u]), np.array([u_D])

    def rebased(self, t) -> "FibrationChart":
        return FibrationChart(
            self.W, self.basepoint, self.basis, self.origin, self.radius,
            self.polarization.astype(int).tolist(), self.frame, self.offset - darboux(self, t),
        )


Chart = Union[SeriesChart, FibrationChart]


def chart_from_spec(spec, W: Optional[WeierstrassFibration] = None) -> Chart:
    """Build a chart from a ChartSpec config entry."""
    if spec.kind == "fibration":
        if W is None:
            raise DomainError("fibration-backed chart needs a fibration")
        base = complex(*spec.basepoint) if spec.basepoint else complex(*spec.center[0])
        return FibrationChart(W, base, radius=spec.radius, polarization=spec.polarization)
    return SeriesChart(
        expression=spec.expression,
        n=spec.n,
        center=[complex(*c) for c in spec.center],
        radius=spec.radius,
        polarization=spec.polarization,
        label=spec.expression,
    )


def _point(y, n: int) -> np.ndarray:
    return np.asarray(y, dtype=complex).reshape(n)


def grid_points(chart: Chart, k: int = 5, fill: float = 0.6) -> list[np.ndarray]:
    """k×k square grid per coordinate inside fill·radius, product over coordinates."""
    offsets = fill * chart.radius * np.linspace(-1, 1, k) / np.sqrt(2)
    disc = [a + 1j * b for a in offsets for b in offsets]
    per_coordinate = [[c + w for w in disc] for c in chart.center]
    return [np.array(p) for p in itertools.product(*per_coordinate)]


def sample_points(chart: Chart, count: int, seed: int = 0, fill: float = 0.8) -> list[np.ndarray]:
    """Uniform random points in fill·(polydisc), reproducible from the seed."""
    rng = np.random.default_rng(seed)
    r = fill * chart.radius * np.sqrt(rng.uniform(size=(count, chart.n)))
    theta = 2 * np.pi * rng.uniform(size=(count, chart.n))
    return list(chart.center + r * np.exp(1j * theta))


# ---------------------------------------------------------------------------
# Metric and Darboux coordinates
# ---------------------------------------------------------------------------

def metric_at(chart: Chart, y) -> np.ndarray:
    """Im Z(y); raises DomainError when it is not positive definite."""
    A = chart.Z(y).imag
    eig = np.linalg.eigvalsh((A + A.T) / 2)
    if eig.min() <= 0:
        raise DomainError(f"[{chart.label}] Im Z not positive definite", y=str(y), min_eigenvalue=float(eig.min()))
    return A


def darboux(chart: Chart, y) -> np.ndarray:
    """v = (d_i Re y_i, Re ∂F/∂y_i) in special coordinates, then the chart's frame and offset."""
    ys, dF = chart.special(y)
    v = np.concatenate([chart.polarization * ys.real, dF.real])
    return chart.frame @ v + chart.offset


def darboux_jacobian(chart: Chart, y) -> np.ndarray:
    """∂v/∂(Re x, Im x) for the chart's base coordinates x."""
    Z = chart.Z(y)
    n = chart.n
    M = np.block([[np.diag(chart.polarization), np.zeros((n, n))], [Z.real, -Z.imag]])
    return chart.frame @ M @ realify(chart.jacobian(y))


def metric_in_darboux(chart: Chart, y) -> np.ndarray:
    """g = 2(Im Z)|dy|² written in v-coordinates."""
    A = metric_at(chart, y)
    n = chart.n
    Z = chart.Z(y)
    M = chart.frame @ np.block([[np.diag(chart.polarization), np.zeros((n, n))], [Z.real, -Z.imag]])
    g_y = 2 * np.block([[A, np.zeros((n, n))], [np.zeros((n, n)), A]])
    M_inv = np.linalg.inv(M)
    g = M_inv.T @ g_y @ M_inv
    return (g + g.T) / 2


def _real_directions(n: int) -> list[np.ndarray]:
    eye = np.eye(n, dtype=complex)
    return [eye[k] for k in range(n)] + [1j * eye[k] for k in range(n)]


def _metric_derivatives(chart: Chart, y, h: float) -> np.ndarray:
    """∂g_ij/∂x_m by central differences along the real base directions."""
    y = _point(y, chart.n)
    return np.stack(
        [(metric_in_darboux(chart, y + h * e) - metric_in_darboux(chart, y - h * e)) / (2 * h) for e in _real_directions(chart.n)],
        axis=-1,
    )


def darboux_differential_check(chart: Chart, y, h: float = config.FD_STEP) -> float:
    """Finite-difference dv against (d_i Re dy_i, Re Σ Z_ij dy_j)."""
    y = _point(y, chart.n)
    fd = np.column_stack(
        [(darboux(chart, y + h * e) - darboux(chart, y - h * e)) / (2 * h) for e in _real_directions(chart.n)]
    )
    return float(np.max(np.abs(fd - darboux_jacobian(chart, y))))


def hessian_structure_check(chart: Chart, grid: Sequence, h: float = config.FD_STEP,
                            h_fine: float = config.FD_STEP_FINE, tol: float = config.HESSIAN_TOL) -> dict:
    """
    max |∂g_ij/∂v_k − ∂g_ik/∂v_j| over the grid. Derivatives come from central
    differences in the base coordinates at two steps, Richardson-combined, then the
    chain rule through the inverse Darboux Jacobian.
    """
    worst, worst_point, consistency = 0.0, None, 0.0
    excluded = []
    for y in grid:
        Jv = darboux_jacobian(chart, y)
        if np.linalg.cond(Jv) > 1e12:
            excluded.append(y)
            continue
        coarse = _metric_derivatives(chart, y, h)
        fine = _metric_derivatives(chart, y, h_fine)
        dg_dx = (4 * fine - coarse) / 3
        consistency = max(consistency, float(np.max(np.abs(fine - coarse))))
        dg_dv = dg_dx @ np.linalg.inv(Jv)
        defect = float(np.max(np.abs(dg_dv - np.swapaxes(dg_dv, 1, 2))))
        if defect > worst:
            worst, worst_point = defect, y
    if excluded:
        logger.warning(f"[sk] [{chart.label}] {len(excluded)} grid points with near-singular Darboux Jacobian excluded")
    passed = worst < tol
    if not passed:
        logger.error(f"[sk] [{chart.label}] Hessian defect {worst:.2e} at {worst_point}")
    return {
        "defect": worst,
        "worst_point": None if worst_point is None else [[c.real, c.imag] for c in worst_point],
        "richardson_consistency": consistency,
        "excluded": len(excluded),
        "passed": passed,
    }


def monge_ampere_constant(chart: Chart) -> float:
    """4ⁿ Π d_i⁻² under g = 2(Im Z)|dy|²."""
    return float(4**chart.n / np.prod(chart.polarization**2))


def monge_ampere_check(chart: Chart, grid: Sequence, tol: float = config.MONGE_AMPERE_TOL) -> dict:
    dets = np.array([np.linalg.det(metric_in_darboux(chart, y)) for y in grid])
    mean = float(dets.mean())
    spread = float(dets.std() / abs(mean))
    worst = int(np.argmax(np.abs(dets - mean)))
    passed = spread < tol
    if not passed:
        logger.error(f"[sk] [{chart.label}] Monge-Ampere spread {spread:.2e} worst det {dets[worst]:.6g}")
    logger.info(f"[sk] [{chart.label}] det g = {mean:.12g} (expected {monge_ampere_constant(chart):g}) spread={spread:.2e}")
    return {
        "mean": mean,
        "spread": spread,
        "expected": monge_ampere_constant(chart),
        "worst_point": [[c.real, c.imag] for c in _point(grid[worst], chart.n)],
        "passed": passed,
    }


# ---------------------------------------------------------------------------
# Integral affine structure
# ---------------------------------------------------------------------------

def transition(A: Chart, B: Chart, samples: Sequence, tol: float = config.AFFINE_RESIDUAL) -> AffineTransition:
    """Least-squares v_A = P v_B + b over overlap samples; P must round to Sp(2n, Z)."""
    vA = np.array([darboux(A, y) for y in samples])
    vB = np.array([darboux(B, y) for y in samples])
    dim = vA.shape[1]
    X = np.column_stack([vB, np.ones(len(vB))])
    if np.linalg.matrix_rank(X) < dim + 1:
        raise AffineCompatibilityError(
            f"need {dim + 1} affinely independent overlap samples", samples=len(samples), rank=int(np.linalg.matrix_rank(X))
        )
    coeffs, *_ = np.linalg.lstsq(X, vA, rcond=None)
    P_fit, b_fit = coeffs[:dim].T, coeffs[dim]
    P = np.rint(P_fit)
    residual = float(np.max(np.abs(P_fit - P)))
    b = (vA - vB @ P.T).mean(axis=0)
    fit_residual = float(np.max(np.abs(vA - (vB @ P.T + b))))
    J0 = symplectic_form(dim // 2)
    symplectic = bool(np.array_equal(P.T @ J0 @ P, J0))

    if residual >= tol or fit_residual >= tol or not symplectic:
        raise AffineCompatibilityError(
            f"[{A.label} -> {B.label}] charts are not integral-affinely compatible",
            residual=residual, fit_residual=fit_residual, symplectic=symplectic, P=P_fit.tolist(),
        )
    return AffineTransition(P=P.astype(np.int64), b=b, residual=residual, fit_residual=fit_residual, symplectic=symplectic)


def affine_cocycle_check(A: Chart, B: Chart, C: Chart, samples: Sequence) -> dict:
    """P_AC = P_AB P_BC and b_AC = P_AB b_BC + b_AB on a common overlap."""
    ab, bc, ac = transition(A, B, samples), transition(B, C, samples), transition(A, C, samples)
    linear = float(np.max(np.abs(ac.P - ab.P @ bc.P)))
    translation = float(np.max(np.abs(ac.b - (ab.P @ bc.b + ab.b))))
    return {
        "linear_defect": linear,
        "translation_defect": translation,
        "passed": linear == 0 and translation < config.AFFINE_RESIDUAL,
    }


def loop_chart(W: WeierstrassFibration, center: complex, base: FibrationChart, points: int = _LOOP_POINTS) -> FibrationChart:
    """The chart `base` analytically continued once counterclockwise around `center`."""
    t0 = base.basepoint
    radius = abs(t0 - center)
    path = circle_path(center, radius, points, float(np.angle(t0 - center)))
    path[0] = path[-1] = t0
    tracked = track_periods(W, base.basis, path, path_id="affine-loop")
    theta = np.linspace(0, 2 * np.pi, points + 1)
    dt = 1j * (path - center)
    pi = np.array([p.basis() for p in tracked])
    # ∮ (π₁, π₂) dt, with the basis carried along the loop
    gained = simpson(pi * dt[:, None], x=theta, axis=0)
    origin = tuple(np.array(base.origin) + gained)
    end = PeriodPoint(t0, tracked[-1].pi1, tracked[-1].pi2, "affine-loop")
    return FibrationChart(W, t0, end, origin, base.radius, base.polarization.astype(int).tolist(), base.frame, base.offset)


def affine_monodromy(W: WeierstrassFibration, fiber: SingularFiberRecord, radius: float, start_angle: float = 0.0) -> dict:
    """
    Linear part of the affine transition between a chart and its continuation around the
    fiber, compared with the period monodromy along the same loop.
    """
    chart_W = infinity_chart(W) if fiber.at_infinity else W
    center = 0j if fiber.at_infinity else fiber.location
    t0 = center + radius * np.exp(1j * start_angle)
    base = FibrationChart(chart_W, t0, radius=0.25 * radius)
    continued = loop_chart(chart_W, center, base)
    samples = [t0] + [t0 + 0.1 * radius * np.exp(2j * np.pi * k / 8) for k in range(8)]
    tr = transition(continued, base, samples)
    T = monodromy_about(chart_W, center, radius, start_angle).as_array()
    matches = bool(np.array_equal(tr.P, T))
    if not matches:
        logger.error(f"[sk] [{fiber.label}] affine monodromy {tr.P.tolist()} differs from period monodromy {T.tolist()}")
    else:
        logger.info(f"[sk] [{fiber.label}] affine monodromy {tr.P.tolist()} b={np.round(tr.b, 12).tolist()}")
    return {"fiber": fiber.label, "P": tr.P, "b": tr.b, "T": T, "residual": tr.residual, "matches": matches}


def fibration_density(W: WeierstrassFibration, y) -> np.ndarray:
    """Im τ·|π₁|², the special Kähler density pulled back to the base coordinate."""
    y = np.asarray(y, dtype=complex)
    pi1, pi2 = period_lattice(W.a_at(y), W.b_at(y))
    return (pi2 / pi1).imag * np.abs(pi1) ** 2
