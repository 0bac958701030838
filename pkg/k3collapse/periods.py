import itertools
import logging
import math
from fractions import Fraction

import mpmath
import numpy as np
import sympy
from scipy.linalg import expm

from k3collapse import config
from k3collapse.errors import (
    AGMConvergenceError,
    ContinuationError,
    DiscriminantProximityError,
    MonodromyError,
    QuasiUnipotenceError,
)
from k3collapse.fibration import WeierstrassFibration, infinity_chart, singular_fibers
from k3collapse.models import (
    KodairaType,
    MonodromyMatrix,
    PeriodPoint,
    QuasiUnipotenceData,
    SingularFiberRecord,
)

logger = logging.getLogger(__name__)

TWO_PI = 2 * np.pi

# divisor sums for the q-expansions of E4 and E6
_N = np.arange(1, config.EISENSTEIN_TERMS + 1)
_SIGMA3 = np.array([sum(d**3 for d in range(1, n + 1) if n % d == 0) for n in _N], dtype=float)
_SIGMA5 = np.array([sum(d**5 for d in range(1, n + 1) if n % d == 0) for n in _N], dtype=float)

# (trace, order) of the finite-order monodromy classes
_FINITE_ORDER_SIGNATURE = {
    "II":   (1, 6),
    "II*":  (1, 6),
    "III":  (0, 4),
    "III*": (0, 4),
    "IV":   (-1, 3),
    "IV*":  (-1, 3),
}


# ---------------------------------------------------------------------------
# Cubic roots and the complex AGM
# ---------------------------------------------------------------------------

def cubic_roots(a, b) -> np.ndarray:
    """Roots of x³ + a x + b, batched over arrays, shape (..., 3)."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    shape = a.shape
    a, b = a.ravel(), b.ravel()
    companion = np.zeros((a.size, 3, 3), dtype=complex)
    companion[:, 1, 0] = 1
    companion[:, 2, 1] = 1
    companion[:, 0, 2] = -b
    companion[:, 1, 2] = -a
    roots = np.linalg.eigvals(companion)
    for _ in range(3):
        f = roots**3 + a[:, None] * roots + b[:, None]
        fp = 3 * roots**2 + a[:, None]
        ok = np.abs(fp) > 0
        roots = roots - np.where(ok, f / np.where(ok, fp, 1), 0)
    return roots.reshape(shape + (3,))


def _right_sign(x, y):
    """Sign of y making |x − y| <= |x + y|."""
    return np.where(np.abs(x - y) > np.abs(x + y), -y, y)


def agm(x, y) -> np.ndarray:
    """Complex arithmetic-geometric mean with the right choice of square root at every step."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    for _ in range(config.AGM_MAX_ITER):
        if np.all(np.abs(x - y) <= config.AGM_TOL * np.abs(x)):
            return (x + y) / 2
        x, y = (x + y) / 2, np.sqrt(x * y)
        y = _right_sign(x, y)
    raise AGMConvergenceError(
        "complex AGM did not converge",
        max_gap=float(np.max(np.abs(x - y) / np.maximum(np.abs(x), 1e-300))),
        iterations=config.AGM_MAX_ITER,
    )


def _agm_basis(e1, e2, e3):
    a0 = np.sqrt(e1 - e3)
    b0 = _right_sign(a0, np.sqrt(e1 - e2))
    c0 = _right_sign(a0, np.sqrt(e2 - e3))
    return TWO_PI / agm(a0, b0), 1j * TWO_PI / agm(a0, c0)


# ---------------------------------------------------------------------------
# Lattice normalization and validation
# ---------------------------------------------------------------------------

def orient(pi1, pi2):
    """Flip π₂ so that Im(π₂/π₁) > 0."""
    pi1, pi2 = np.asarray(pi1, dtype=complex), np.asarray(pi2, dtype=complex)
    return pi1, np.where((pi2 / pi1).imag < 0, -pi2, pi2)


def reduce_basis(pi1, pi2):
    """Move τ = π₂/π₁ into the fundamental domain, carrying the basis along."""
    pi1, pi2 = orient(pi1, pi2)
    for _ in range(200):
        n = np.rint((pi2 / pi1).real)
        pi2 = pi2 - n * pi1
        flip = np.abs(pi2 / pi1) < 1 - 1e-12
        if not np.any(flip):
            break
        pi1, pi2 = np.where(flip, pi2, pi1), np.where(flip, -pi1, pi2)
    return pi1, pi2


def eisenstein(tau):
    """(E4, E6) by q-series; τ should already be reduced."""
    q = np.exp(1j * TWO_PI * np.asarray(tau, dtype=complex))
    qn = q[..., None] ** _N
    return 1 + 240 * (_SIGMA3 * qn).sum(axis=-1), 1 - 504 * (_SIGMA5 * qn).sum(axis=-1)


def j_invariant(tau):
    """Klein j of τ (any representative)."""
    pi1, pi2 = reduce_basis(np.ones_like(np.asarray(tau, dtype=complex)), np.asarray(tau, dtype=complex))
    e4, e6 = eisenstein(pi2 / pi1)
    return 1728 * e4**3 / (e4**3 - e6**2)


def j_from_coefficients(a, b):
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    return 1728 * 4 * a**3 / (4 * a**3 + 27 * b**2)


def j_defect(tau, a, b):
    """|j(τ) − j(a, b)| / max(1, |j(a, b)|)."""
    j = j_from_coefficients(a, b)
    return np.abs(j_invariant(tau) - j) / np.maximum(1.0, np.abs(j))


def lattice_defect(pi1, pi2, a, b):
    """
    How far the lattice spanned by (π₁, π₂) is from the period lattice of dx/w on
    w² = x³ + a x + b, measured through g₂ = −4a, g₃ = −4b on a common scale.
    """
    r1, r2 = reduce_basis(pi1, pi2)
    e4, e6 = eisenstein(r2 / r1)
    g2 = -4 * np.asarray(a, dtype=complex)
    g3 = -4 * np.asarray(b, dtype=complex)
    g2c = (64 * np.pi**4 / 3) * e4 / r1**4
    g3c = (512 * np.pi**6 / 27) * e6 / r1**6
    scale = np.maximum(np.abs(g2) ** 0.25, np.abs(g3) ** (1 / 6))
    return np.maximum(np.abs(g2c - g2) / scale**4, np.abs(g3c - g3) / scale**6)


# ---------------------------------------------------------------------------
# Quadrature fallback, also the test oracle
# ---------------------------------------------------------------------------

def _middle_first(e):
    """Order roots (e_i, e_mid, e_j) so the middle root has the smallest distance sum."""
    dist = np.abs(e[..., :, None] - e[..., None, :]).sum(axis=-1)
    mid = np.argmin(dist, axis=-1)
    order = np.array([[1, 0, 2], [0, 1, 2], [0, 2, 1]])[mid]
    return np.take_along_axis(e, order, axis=-1)


def _cycle_trapezoid(ei, ej, ek, nodes: int = 512):
    # x = m − d cos θ runs from e_i to e_j; the loop integral is ∫₀^{2π} dθ / (i √(x − e_k))
    m, d = (ei + ej) / 2, (ej - ei) / 2
    c = m - ek
    theta = TWO_PI * np.arange(nodes) / nodes
    h = np.sqrt(c)[..., None] * np.sqrt(1 - (d / c)[..., None] * np.cos(theta))
    return (TWO_PI / nodes) * (1 / (1j * h)).sum(axis=-1)


def quadrature_periods(a, b, nodes: int = 512):
    """Vectorized cycle integrals around root pairs (e1,e2) and (e2,e3), periodic trapezoid rule."""
    e = _middle_first(cubic_roots(a, b))
    e1, e2, e3 = e[..., 0], e[..., 1], e[..., 2]
    return orient(_cycle_trapezoid(e1, e2, e3, nodes), _cycle_trapezoid(e2, e3, e1, nodes))


def mp_quadrature_periods(a: complex, b: complex, dps: int = 30) -> tuple[complex, complex]:
    """Adaptive mpmath quadrature of the same cycle integrals, one point at a time."""
    e = _middle_first(cubic_roots(a, b))

    def cycle(ei, ej, ek):
        m, d = (ei + ej) / 2, (ej - ei) / 2
        c = mpmath.mpc(m - ek)
        ratio = mpmath.mpc(d) / c
        integrand = lambda th: 1 / (1j * mpmath.sqrt(c) * mpmath.sqrt(1 - ratio * mpmath.cos(th)))
        return complex(2 * mpmath.quad(integrand, [0, mpmath.pi]))

    with mpmath.workdps(dps):
        p1 = cycle(e[0], e[1], e[2])
        p2 = cycle(e[1], e[2], e[0])
    pi1, pi2 = orient(p1, p2)
    return complex(pi1), complex(pi2)


# ---------------------------------------------------------------------------
# Period lattice
# ---------------------------------------------------------------------------

def period_lattice(a, b):
    """
    Reduced, positively oriented period basis (π₁, π₂) of dx/w on w² = x³ + a x + b,
    batched over arrays of coefficient values.

    The AGM basis is accepted when it reproduces g₂, g₃; failing entries retry the
    other root orderings, then the trapezoid quadrature, then mpmath quadrature.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    shape = a.shape
    a, b = a.ravel(), b.ravel()
    roots = cubic_roots(a, b)
    order = np.argsort(-roots.real, axis=-1, kind="stable")
    roots = np.take_along_axis(roots, order, axis=-1)

    pi1 = np.full(a.size, np.nan + 0j)
    pi2 = np.full(a.size, np.nan + 0j)
    todo = np.ones(a.size, dtype=bool)

    with np.errstate(all="ignore"):
        for perm in itertools.permutations(range(3)):
            idx = np.flatnonzero(todo)
            if idx.size == 0:
                break
            e = roots[idx][:, perm]
            try:
                c1, c2 = _agm_basis(e[:, 0], e[:, 1], e[:, 2])
            except AGMConvergenceError:
                continue
            c1, c2 = reduce_basis(c1, c2)
            good = lattice_defect(c1, c2, a[idx], b[idx]) < config.LATTICE_CHECK_TOL
            pi1[idx[good]], pi2[idx[good]] = c1[good], c2[good]
            todo[idx[good]] = False

        idx = np.flatnonzero(todo)
        if idx.size:
            logger.debug(f"[periods] {idx.size} points fall back to trapezoid quadrature")
            c1, c2 = reduce_basis(*quadrature_periods(a[idx], b[idx]))
            good = lattice_defect(c1, c2, a[idx], b[idx]) < config.LATTICE_CHECK_TOL
            pi1[idx[good]], pi2[idx[good]] = c1[good], c2[good]
            todo[idx[good]] = False

    for i in np.flatnonzero(todo):
        logger.debug(f"[periods] mpmath quadrature at a={a[i]:.6g}, b={b[i]:.6g}")
        c1, c2 = reduce_basis(*mp_quadrature_periods(a[i], b[i]))
        defect = float(lattice_defect(c1, c2, a[i], b[i]))
        if not defect < config.LATTICE_CHECK_TOL:
            raise AGMConvergenceError(
                "no period basis reproduces the lattice invariants",
                a=[a[i].real, a[i].imag], b=[b[i].real, b[i].imag], defect=defect,
            )
        pi1[i], pi2[i] = c1, c2

    return pi1.reshape(shape), pi2.reshape(shape)


def fiber_periods(W: WeierstrassFibration, y: complex) -> PeriodPoint:
    """Periods of dx/w over the fiber at y in a reduced, positively oriented basis."""
    dist = W.distance_to_discriminant(y)
    if dist < config.DISCRIMINANT_PROXIMITY:
        raise DiscriminantProximityError(
            f"[{W.label}] y={y} is {dist:.3g} from the discriminant",
            y=[complex(y).real, complex(y).imag], distance=dist,
        )
    pi1, pi2 = period_lattice(W.a_at(y), W.b_at(y))
    return PeriodPoint(complex(y), complex(pi1), complex(pi2))


def lattice_coordinates(P, Q) -> np.ndarray:
    """Real 2×2 M with P = M·Q for complex 2-vectors P, Q."""
    P, Q = np.asarray(P, dtype=complex), np.asarray(Q, dtype=complex)
    A = np.array([[Q[0].real, Q[1].real], [Q[0].imag, Q[1].imag]])
    B = np.array([[P[0].real, P[1].real], [P[0].imag, P[1].imag]])
    return np.linalg.solve(A, B).T


def _rounded(M: np.ndarray) -> tuple[np.ndarray, float]:
    Mi = np.rint(M)
    return Mi.astype(np.int64), float(np.max(np.abs(M - Mi)))


# ---------------------------------------------------------------------------
# Analytic continuation
# ---------------------------------------------------------------------------

def _try_step(W, current: PeriodPoint, previous, y_new: complex, path_id: str):
    if W.distance_to_discriminant(y_new) < config.DISCRIMINANT_PROXIMITY:
        return None
    basis = current.basis()
    predicted = basis
    if previous is not None and previous.y != current.y:
        ratio = (y_new - current.y) / (current.y - previous.y)
        if abs(ratio) <= 4:
            predicted = basis + (basis - previous.basis()) * ratio
    raw = np.array(period_lattice(W.a_at(y_new), W.b_at(y_new)), dtype=complex)
    M, residual = _rounded(lattice_coordinates(predicted, raw))
    if residual > config.MARKING_RESIDUAL or round(np.linalg.det(M)) != 1:
        return None
    new = M @ raw
    if abs(new[1] / new[0] - current.tau) > config.MAX_DELTA_TAU:
        return None
    return PeriodPoint(complex(y_new), complex(new[0]), complex(new[1]), path_id), residual


def track_periods(W: WeierstrassFibration, start: PeriodPoint, path, path_id: str = "path") -> list[PeriodPoint]:
    """
    Transport the basis of `start` along the polyline `path` (path[0] = start.y).
    Returns the transported basis at every path vertex.
    """
    path = np.asarray(path, dtype=complex)
    if abs(path[0] - start.y) > 1e-12 * (1 + abs(start.y)):
        raise ContinuationError("path does not begin at the start point", start=str(start.y), path0=str(path[0]))
    current = PeriodPoint(start.y, start.pi1, start.pi2, path_id)
    previous = None
    out = [current]
    closest = W.distance_to_discriminant(current.y)
    h = None
    steps = 0

    for target in path[1:]:
        while current.y != target:
            seg = target - current.y
            remaining = abs(seg)
            dist = W.distance_to_discriminant(current.y)
            closest = min(closest, dist)
            h_max = config.STEP_FRACTION_OF_DISTANCE * dist
            h = h_max if h is None else min(h, h_max)
            while True:
                if h < config.MIN_STEP * (1 + abs(current.y)):
                    raise ContinuationError(
                        f"[{W.label}] step size underflow at y={current.y:.6g}",
                        y=[current.y.real, current.y.imag], closest_approach=float(closest), step=h,
                    )
                y_new = target if h >= remaining * (1 - 1e-12) else current.y + seg / remaining * h
                step = _try_step(W, current, previous, y_new, path_id)
                if step is not None:
                    break
                h /= 2
            previous, (current, residual) = current, step
            steps += 1
            if residual < config.MARKING_GROW_RESIDUAL:
                h *= config.STEP_GROWTH
        out.append(current)

    logger.debug(f"[{W.label}] continued along {len(path)} vertices in {steps} steps, closest approach {closest:.3g}")
    return out


def continue_periods(W: WeierstrassFibration, start: PeriodPoint, path, path_id: str = "path") -> PeriodPoint:
    """Parallel transport of the period basis along a polyline; returns the end point."""
    return track_periods(W, start, path, path_id)[-1]


# ---------------------------------------------------------------------------
# Monodromy
# ---------------------------------------------------------------------------

def circle_path(center: complex, radius: float, points: int, start_angle: float = 0.0, turns: int = 1) -> np.ndarray:
    """Closed counterclockwise polyline; the last vertex repeats the first exactly."""
    theta = start_angle + TWO_PI * turns * np.arange(points * turns + 1) / (points * turns)
    path = center + radius * np.exp(1j * theta)
    path[-1] = path[0]
    return path


def _local_chart(W: WeierstrassFibration, fiber: SingularFiberRecord):
    if fiber.at_infinity:
        return infinity_chart(W), 0j
    return W, fiber.location


def _check_isolated(W, center, radius):
    roots = W.roots
    others = roots[np.abs(roots - center) > 1e-12]
    if others.size and np.min(np.abs(others - center)) < 1.5 * radius:
        raise MonodromyError(
            f"[{W.label}] loop of radius {radius:g} around {center:.6g} comes near another fiber",
            radius=radius, nearest=float(np.min(np.abs(others - center))),
        )


def loop_matrix(W, start: PeriodPoint, center: complex, turns: int = 1) -> MonodromyMatrix:
    """
    Monodromy of `turns` counterclockwise loops around `center` through start.y,
    expressed in the basis of `start`; loop points are doubled until two runs agree.
    """
    radius = abs(start.y - center)
    angle = float(np.angle(start.y - center))
    previous = None
    points = config.MONODROMY_MIN_POINTS
    while points <= config.MONODROMY_MAX_POINTS:
        path = circle_path(center, radius, points, angle, turns)
        path[0] = path[-1] = start.y
        end = continue_periods(W, start, path, path_id=f"loop{turns}x{points}")
        T, residual = _rounded(lattice_coordinates(end.basis(), start.basis()))
        if previous is not None and np.array_equal(T, previous) and residual < config.MONODROMY_RESIDUAL:
            return MonodromyMatrix.from_array(T, residual, points)
        previous = T
        points *= 2
    raise MonodromyError(
        f"[{W.label}] monodromy did not stabilize around {center:.6g}",
        residual=residual, points=points // 2,
    )


def monodromy_about(W: WeierstrassFibration, center: complex, radius: float, start_angle: float = 0.0) -> MonodromyMatrix:
    """Monodromy of the circle of given radius around an arbitrary center."""
    _check_isolated(W, center, radius)
    start = fiber_periods(W, center + radius * np.exp(1j * start_angle))
    return loop_matrix(W, start, center)


def monodromy(W: WeierstrassFibration, fiber: SingularFiberRecord, radius: float) -> MonodromyMatrix:
    """Counterclockwise monodromy around a singular fiber (s-chart for the fiber at infinity)."""
    chart, center = _local_chart(W, fiber)
    T = monodromy_about(chart, center, radius)
    logger.info(f"[{W.label}] [{fiber.kodaira_type}] monodromy {T.entries} residual={T.residual:.2e} points={T.points}")
    return T


def quasi_unipotence(T: MonodromyMatrix) -> QuasiUnipotenceData:
    """Minimal (β, d) with (T^β − I)^d = 0 and N = (U−I) − (U−I)²/2 for U = T^β."""
    M = sympy.Matrix(T.entries)
    if M.det() != 1:
        raise QuasiUnipotenceError("monodromy must have determinant 1", det=int(M.det()))
    identity = sympy.eye(2)
    for beta in range(1, config.QUASI_UNIPOTENT_MAX_BETA + 1):
        U = M**beta
        for d in (1, 2):
            if ((U - identity) ** d).is_zero_matrix:
                N = (U - identity) - (U - identity) ** 2 / 2
                return QuasiUnipotenceData(
                    beta=beta,
                    d=d,
                    N=tuple(tuple(Fraction(str(N[i, j])) for j in range(2)) for i in range(2)),
                )
    raise QuasiUnipotenceError(
        f"not quasi-unipotent within bound {config.QUASI_UNIPOTENT_MAX_BETA}",
        T=[list(r) for r in T.entries],
    )


def matches_kodaira(T: MonodromyMatrix, kodaira: KodairaType) -> bool:
    """Conjugacy-class signature of T against the expected Kodaira type."""
    A = T.as_array()
    I = np.eye(2, dtype=np.int64)
    if T.det != 1:
        return False
    family = kodaira.family
    if family in ("I", "I*"):
        B = A if family == "I" else -A
        N = B - I
        return (
            int(np.trace(B)) == 2
            and bool(np.any(N))
            and not bool(np.any(N @ N))
            and math.gcd(*(int(abs(x)) for x in N.ravel())) == kodaira.k
        )
    if family == "I0*":
        return np.array_equal(A, -I)
    trace, order = _FINITE_ORDER_SIGNATURE[family]
    if T.trace != trace:
        return False
    power = I.copy()
    for k in range(1, order + 1):
        power = power @ A
        if np.array_equal(power, I):
            return k == order
    return False


def untwist_check(W: WeierstrassFibration, fiber: SingularFiberRecord, w_sample: complex, beta=None) -> float:
    """
    Single-valuedness defect of σ(w) = exp(−N log w / 2πi)·e(w) after the base change
    y − p = w^β, where N = log of the unipotent monodromy in the w-disc.
    log w takes its imaginary part in [0, 2π); the loop end uses log w + 2πi.
    """
    chart, center = _local_chart(W, fiber)
    if beta is None:
        T = fiber.monodromy or monodromy_about(chart, center, abs(w_sample))
        beta = quasi_unipotence(T).beta
    y0 = center + w_sample**beta
    _check_isolated(chart, center, abs(w_sample) ** beta)
    start = fiber_periods(chart, y0)
    U = loop_matrix(chart, start, center, turns=beta)
    data = quasi_unipotence(U)
    if data.beta != 1:
        raise QuasiUnipotenceError(
            f"monodromy after base change of order {beta} is not unipotent",
            U=[list(r) for r in U.entries], beta=beta,
        )
    N = data.N_array()
    end = continue_periods(chart, start, circle_path(center, abs(y0 - center), U.points, float(np.angle(y0 - center)), beta))

    log_w = np.log(complex(w_sample))
    if log_w.imag < 0:
        log_w += TWO_PI * 1j
    sigma_start = expm(-N * log_w / (TWO_PI * 1j)) @ start.basis()
    sigma_end = expm(-N * (log_w + TWO_PI * 1j) / (TWO_PI * 1j)) @ end.basis()
    defect = float(np.max(np.abs(sigma_end - sigma_start)))
    logger.info(f"[{W.label}] [{fiber.kodaira_type}] untwist beta={beta} |w|={abs(w_sample):.3g} defect={defect:.2e}")
    return defect


def _lasso_basepoint(roots: np.ndarray) -> complex:
    """Far basepoint whose straight tails to the roots keep the most clearance from other roots."""
    centroid = roots.mean()
    reach = 3 * max(np.abs(roots - centroid).max(), 1.0)
    best, best_clearance = None, -1.0
    for phi in TWO_PI * np.arange(16) / 16:
        b = centroid + reach * np.exp(1j * phi)
        clearance = np.inf
        for k, p in enumerate(roots):
            seg = p - b
            s = np.clip(((roots - b) * np.conj(seg)).real / abs(seg) ** 2, 0, 1)
            gap = np.abs(roots - (b + s * seg))
            gap[k] = np.inf
            clearance = min(clearance, gap.min())
        if clearance > best_clearance:
            best, best_clearance = b, clearance
    return complex(best)


def global_monodromy_product(W: WeierstrassFibration, loop_fraction: float = 0.3) -> dict:
    """
    Lassos from a far basepoint around every finite singular fiber, ordered by argument
    (counterclockwise). When infinity is a smooth fiber the ordered product is I.
    """
    fibers = singular_fibers(W, include_infinity=False)
    roots = np.array([f.location for f in fibers], dtype=complex)
    b = _lasso_basepoint(roots)
    centroid = roots.mean()
    angles = np.angle((roots - b) / (centroid - b))
    order = np.argsort(angles)
    start = fiber_periods(W, b)

    matrices = []
    product = np.eye(2, dtype=np.int64)
    for k in order:
        p = roots[k]
        others = np.delete(roots, k)
        radius = loop_fraction * (np.abs(others - p).min() if others.size else 1.0)
        entry = p - radius * (p - b) / abs(p - b)
        loop = circle_path(p, radius, 2 * config.MONODROMY_MIN_POINTS, float(np.angle(entry - p)))
        loop[0] = loop[-1] = entry
        path = np.concatenate([[b], loop, [b]])
        end = continue_periods(W, start, path, path_id=f"lasso{k}")
        T, residual = _rounded(lattice_coordinates(end.basis(), start.basis()))
        if residual > config.MONODROMY_RESIDUAL:
            raise MonodromyError(f"[{W.label}] lasso around {p:.6g} has residual {residual:.2e}", residual=residual)
        matrices.append(MonodromyMatrix.from_array(T, residual, 2 * config.MONODROMY_MIN_POINTS))
        product = product @ T

    logger.info(f"[{W.label}] global monodromy product {product.tolist()} over {len(matrices)} fibers")
    return {
        "basepoint": b,
        "order": [fibers[k] for k in order],
        "matrices": matrices,
        "product": product,
    }
