import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import numpy.polynomial.polynomial as npoly
import sympy

from k3collapse import config
from k3collapse.errors import (
    DegenerateFibrationError,
    DegreeOverflowError,
    NonMinimalFiberError,
    RootClusterError,
    RootFindingError,
)
from k3collapse.models import KodairaType, SingularFiberRecord

logger = logging.getLogger(__name__)

_T = sympy.Symbol("t")

# ---------------------------------------------------------------------------
# Engineered models: each exhibits the named fiber type at t = 0.
# The I1 / I1* models put the log-term constant of the volume density near 1.
# ---------------------------------------------------------------------------

ENGINEERED_MODELS: dict[str, tuple[list[float], list[float]]] = {
    "I1":   ([-3.0],            [2.0, 600.0]),
    "II":   ([0.0],             [0.0, 1.0]),
    "III":  ([0.0, 1.0],        [0.0]),
    "IV":   ([0.0],             [0.0, 0.0, 1.0]),
    "I0*":  ([0.0, 0.0, 1.0],   [0.0, 0.0, 0.0, 1.0]),
    "I1*":  ([0.0, 0.0, -3.0],  [0.0, 0.0, 0.0, 2.0, 600.0]),
    "IV*":  ([0.0],             [0.0, 0.0, 0.0, 0.0, 1.0]),
    "III*": ([0.0, 0.0, 0.0, 1.0], [0.0]),
    "II*":  ([0.0],             [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
}


# ---------------------------------------------------------------------------
# Polynomial helpers (ascending coefficient arrays)
# ---------------------------------------------------------------------------

def degree(coeffs) -> int:
    """Index of the last non-zero coefficient; -1 for the zero polynomial."""
    nz = np.flatnonzero(np.asarray(coeffs))
    return int(nz[-1]) if nz.size else -1


def _exact(z: complex) -> sympy.Expr:
    # floats are dyadic rationals, so this conversion is exact
    return sympy.Rational(z.real) + sympy.I * sympy.Rational(z.imag)


def _to_sympy(coeffs) -> sympy.Expr:
    return sum((_exact(complex(c)) * _T**i for i, c in enumerate(coeffs)), sympy.Integer(0))


def _poly_to_array(poly: sympy.Poly) -> np.ndarray:
    return np.array([complex(c) for c in reversed(poly.all_coeffs())], dtype=complex)


def vanishing_order(coeffs, t0: complex) -> int:
    """
    Order of vanishing of a polynomial at t0 from its Taylor coefficients.
    A coefficient counts as zero when it is below ORDER_REL_TOL relative to the
    size the same coefficient would have without cancellation.
    """
    c = np.asarray(coeffs, dtype=complex)
    deg = degree(c)
    if deg < 0:
        return config.INFINITE_ORDER
    t0 = complex(t0)
    for k in range(deg + 1):
        idx = np.arange(k, deg + 1)
        weights = np.array([math.comb(int(i), k) for i in idx], dtype=float)
        terms = weights * c[idx] * t0 ** (idx - k)
        if abs(terms.sum()) > config.ORDER_REL_TOL * np.abs(terms).sum():
            return k
    return deg


def _polish(coeffs: np.ndarray, roots: np.ndarray, iterations: int = 8) -> np.ndarray:
    """Newton steps on the companion-matrix roots."""
    deriv = npoly.polyder(coeffs)
    for _ in range(iterations):
        f = npoly.polyval(roots, coeffs)
        fp = npoly.polyval(roots, deriv)
        safe = fp != 0
        roots = np.where(safe, roots - np.where(safe, f / np.where(safe, fp, 1), 0), roots)
    return roots


def _relative_residual(coeffs: np.ndarray, roots: np.ndarray) -> np.ndarray:
    scale = np.array([np.sum(np.abs(coeffs) * np.abs(r) ** np.arange(len(coeffs))) for r in roots])
    return np.abs(npoly.polyval(roots, coeffs)) / np.maximum(scale, np.finfo(float).tiny)


def _simple_roots(coeffs: np.ndarray) -> np.ndarray:
    deg = degree(coeffs)
    if deg <= 0:
        return np.zeros(0, dtype=complex)
    c = coeffs[: deg + 1]
    roots = _polish(c, npoly.polyroots(c).astype(complex))
    residual = _relative_residual(c, roots)
    if np.any(residual > config.NEWTON_RESIDUAL_TOL):
        worst = int(np.argmax(residual))
        raise RootFindingError(
            "Newton polishing did not reach the residual target",
            root=complex(roots[worst]), residual=float(residual[worst]),
        )
    return roots


def _min_separation(roots: np.ndarray) -> float:
    if len(roots) < 2:
        return math.inf
    gaps = np.abs(roots[:, None] - roots[None, :])
    gaps[np.diag_indices(len(roots))] = np.inf
    return float(gaps.min())


# ---------------------------------------------------------------------------
# Weierstrass fibration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeierstrassFibration:
    """
    w² = x³ + a(t)x + b(t) over the projective line.
    Coefficients are ascending in t. Minimality is not enforced here: singular_fibers
    reports non-minimal points instead, so non-minimal charts at infinity stay usable.
    """
    a_coeffs: tuple
    b_coeffs: tuple
    label: str = "fibration"

    def __post_init__(self):
        object.__setattr__(self, "a_coeffs", tuple(complex(c) for c in self.a_coeffs) or (0j,))
        object.__setattr__(self, "b_coeffs", tuple(complex(c) for c in self.b_coeffs) or (0j,))
        if self.delta_exact.is_zero:
            raise DegenerateFibrationError(
                f"[{self.label}] discriminant 4a³ + 27b² vanishes identically",
                label=self.label,
            )

    @cached_property
    def a(self) -> np.ndarray:
        return np.array(self.a_coeffs, dtype=complex)

    @cached_property
    def b(self) -> np.ndarray:
        return np.array(self.b_coeffs, dtype=complex)

    @cached_property
    def is_real(self) -> bool:
        return not np.any(self.a.imag) and not np.any(self.b.imag)

    @cached_property
    def delta_exact(self) -> sympy.Poly:
        expr = sympy.expand(4 * _to_sympy(self.a_coeffs) ** 3 + 27 * _to_sympy(self.b_coeffs) ** 2)
        if self.is_real:
            return sympy.Poly(expr, _T, domain=sympy.QQ)
        return sympy.Poly(expr, _T, extension=True)

    @cached_property
    def delta(self) -> np.ndarray:
        if self.delta_exact.is_zero:
            return np.zeros(1, dtype=complex)
        return _poly_to_array(self.delta_exact)

    @cached_property
    def delta_roots(self) -> tuple[tuple[complex, int], ...]:
        """Distinct discriminant roots with multiplicities."""
        delta = self.delta_exact
        # repeated roots scatter to ~eps^(1/m) numerically, so detect them exactly first
        clustered = delta.gcd(delta.diff(_T)).degree() > 0
        if not clustered:
            try:
                numeric = _simple_roots(self.delta)
                scale = 1.0 + (np.abs(numeric).max() if numeric.size else 0.0)
                clustered = _min_separation(numeric) <= config.ROOT_CLUSTER_HINT * scale
            except RootFindingError:
                clustered = True
        if clustered:
            found = self._exact_roots()
        else:
            found = [(complex(r), 1) for r in numeric]
        roots = np.array([r for r, _ in found], dtype=complex)
        separation = _min_separation(roots)
        if separation < config.ROOT_SEPARATION_TOL:
            raise RootClusterError(
                f"[{self.label}] distinct discriminant roots closer than {config.ROOT_SEPARATION_TOL:g}",
                separation=separation,
                roots=[[r.real, r.imag] for r in roots],
            )
        return tuple(sorted(found, key=lambda rm: (round(rm[0].real, 12), round(rm[0].imag, 12))))

    def _exact_roots(self) -> list[tuple[complex, int]]:
        logger.debug(f"[{self.label}] clustered discriminant roots, using exact squarefree split")
        _, factors = sympy.sqf_list(self.delta_exact)
        found = []
        for factor, multiplicity in factors:
            for r in _simple_roots(_poly_to_array(factor)):
                found.append((complex(r), int(multiplicity)))
        return found

    # -- evaluation -------------------------------------------------------

    def a_at(self, y):
        return npoly.polyval(np.asarray(y, dtype=complex), self.a)

    def b_at(self, y):
        return npoly.polyval(np.asarray(y, dtype=complex), self.b)

    def delta_at(self, y):
        return npoly.polyval(np.asarray(y, dtype=complex), self.delta)

    @property
    def roots(self) -> np.ndarray:
        return np.array([r for r, _ in self.delta_roots], dtype=complex)

    def distance_to_discriminant(self, y):
        """Distance from y (scalar or array) to the nearest finite discriminant root."""
        y = np.asarray(y, dtype=complex)
        roots = self.roots
        if roots.size == 0:
            return np.full(y.shape, np.inf) if y.shape else math.inf
        dist = np.abs(y[..., None] - roots).min(axis=-1)
        return dist if y.shape else float(dist)

    def scaled(self, lam: complex) -> "WeierstrassFibration":
        """(a, b) -> (λ⁴a, λ⁶b); periods scale by λ⁻¹."""
        return WeierstrassFibration(
            tuple(lam**4 * c for c in self.a_coeffs),
            tuple(lam**6 * c for c in self.b_coeffs),
            label=f"{self.label}*{lam}",
        )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def discriminant(W: WeierstrassFibration) -> np.ndarray:
    """Δ = 4a³ + 27b², ascending complex coefficients, computed exactly."""
    return W.delta.copy()


def classify(orders: tuple[int, int, int]) -> KodairaType:
    """Kodaira type from (ord a, ord b, ord Δ) of a Weierstrass model."""
    oa, ob, od = orders
    if oa >= 4 and ob >= 6:
        raise NonMinimalFiberError("non-minimal Weierstrass model", orders=list(orders))
    if od < 1:
        raise RootFindingError("ord Δ must be positive at a singular fiber", orders=list(orders))
    if oa == 0 and ob == 0:
        return KodairaType("I", od)
    if od == 2 and ob == 1:
        return KodairaType("II")
    if od == 3 and oa == 1:
        return KodairaType("III")
    if od == 4 and ob == 2:
        return KodairaType("IV")
    if od == 6 and oa >= 2 and ob >= 3:
        return KodairaType("I0*")
    if oa == 2 and ob == 3 and od > 6:
        return KodairaType("I*", od - 6)
    if od == 8 and ob == 4:
        return KodairaType("IV*")
    if od == 9 and oa == 3:
        return KodairaType("III*")
    if od == 10 and ob == 5:
        return KodairaType("II*")
    raise RootFindingError("order triple matches no Kodaira type", orders=list(orders))


def infinity_chart(W: WeierstrassFibration) -> WeierstrassFibration:
    """ã(s) = s⁸a(1/s), b̃(s) = s¹²b(1/s)."""
    for name, coeffs, limit in (("a", W.a, config.MAX_DEG_A), ("b", W.b, config.MAX_DEG_B)):
        deg = degree(coeffs)
        if deg > limit:
            raise DegreeOverflowError(
                f"[{W.label}] coefficient {name}[{deg}] exceeds degree {limit}",
                coefficient=f"{name}[{deg}]", degree=deg, limit=limit,
            )
    a_pad = np.zeros(config.MAX_DEG_A + 1, dtype=complex)
    b_pad = np.zeros(config.MAX_DEG_B + 1, dtype=complex)
    a_pad[: len(W.a)] = W.a
    b_pad[: len(W.b)] = W.b
    label = W.label[:-4] if W.label.endswith("@inf") else f"{W.label}@inf"
    return WeierstrassFibration(tuple(a_pad[::-1]), tuple(b_pad[::-1]), label=label)


def orders_at_infinity(W: WeierstrassFibration) -> tuple[int, int, int]:
    def order(coeffs, weight):
        deg = degree(coeffs)
        return config.INFINITE_ORDER if deg < 0 else weight - deg

    return order(W.a, config.MAX_DEG_A), order(W.b, config.MAX_DEG_B), order(W.delta, 24)


def _record(location, orders, kodaira, at_infinity=False) -> SingularFiberRecord:
    from k3collapse.volume import predicted_exponents  # volume imports this module

    alpha, d = predicted_exponents(kodaira)
    return SingularFiberRecord(
        location=complex(location),
        orders=orders,
        kodaira_type=kodaira,
        alpha_pred=alpha,
        d_pred=d,
        at_infinity=at_infinity,
    )


def singular_fibers(
    W: WeierstrassFibration,
    include_infinity: bool = True,
    strict_minimal: bool = False,
) -> list[SingularFiberRecord]:
    """
    One record per discriminant point. Finite orders are computed on the t-chart,
    the point at infinity (if singular) on the s-chart at s = 0.
    Non-minimal points are skipped with a warning, or raise when strict_minimal is set.
    """
    records = []
    for root, multiplicity in W.delta_roots:
        orders = (vanishing_order(W.a, root), vanishing_order(W.b, root), multiplicity)
        try:
            kodaira = classify(orders)
        except NonMinimalFiberError as e:
            if strict_minimal:
                raise NonMinimalFiberError(str(e), location=[root.real, root.imag], orders=list(orders))
            logger.warning(f"[{W.label}] skipping non-minimal point t={root:.6g} orders={orders}")
            continue
        records.append(_record(root, orders, kodaira))

    if include_infinity:
        orders = orders_at_infinity(W)
        if orders[2] >= 1:
            try:
                records.append(_record(0j, orders, classify(orders), at_infinity=True))
            except NonMinimalFiberError:
                if strict_minimal:
                    raise NonMinimalFiberError("non-minimal at infinity", location="inf", orders=list(orders))
                logger.warning(f"[{W.label}] skipping non-minimal point at infinity orders={orders}")

    logger.info(f"[{W.label}] {len(records)} singular fibers: {', '.join(str(r.kodaira_type) for r in records)}")
    return records


def minimality_violations(W: WeierstrassFibration) -> list:
    """Locations (complex, or the string 'inf') where ord a >= 4 and ord b >= 6."""
    bad = []
    for root, _ in W.delta_roots:
        if vanishing_order(W.a, root) >= 4 and vanishing_order(W.b, root) >= 6:
            bad.append(root)
    oa, ob, _ = orders_at_infinity(W)
    if oa >= 4 and ob >= 6:
        bad.append("inf")
    return bad


def euler_characteristic(W: WeierstrassFibration) -> int:
    """Sum of fiber Euler numbers; each equals ord Δ for a minimal model. 24 for K3."""
    return sum(r.orders[2] for r in singular_fibers(W))


def generic_k3(seed: int = 0) -> WeierstrassFibration:
    """Random real coefficients of full degree (8, 12): 24 simple I1 fibers."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=config.MAX_DEG_A + 1)
    b = rng.normal(size=config.MAX_DEG_B + 1)
    return WeierstrassFibration(tuple(a), tuple(b), label=f"generic-k3-{seed}")


def engineered_fibration(kodaira) -> WeierstrassFibration:
    """The fixed local model exhibiting `kodaira` (a KodairaType or its label) at t = 0."""
    label = str(kodaira)
    if label not in ENGINEERED_MODELS:
        raise KeyError(f"no engineered model for {label}; available: {', '.join(ENGINEERED_MODELS)}")
    a, b = ENGINEERED_MODELS[label]
    return WeierstrassFibration(tuple(a), tuple(b), label=f"engineered-{label}")


def fibration_from_lists(label: str, a: list, b: list) -> WeierstrassFibration:
    """Build from the JSON file shape: lists of [re, im] pairs."""
    return WeierstrassFibration(
        tuple(complex(re, im) for re, im in a),
        tuple(complex(re, im) for re, im in b),
        label=label,
    )
