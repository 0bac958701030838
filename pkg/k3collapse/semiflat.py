import logging
from math import comb, factorial
from typing import Optional, Sequence

import numpy as np
import sympy

from k3collapse import config
from k3collapse.errors import DomainError
from k3collapse.models import SemiFlatPointFrame
from k3collapse.special_kahler import Chart, metric_at, realify, sample_points

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Real frame (y', y'', z', z''): block k occupies rows k·n .. (k+1)·n
# ---------------------------------------------------------------------------

Y1, Y2, Z1, Z2 = range(4)


def _blocks(n: int):
    return [slice(k * n, (k + 1) * n) for k in range(4)]


def _wedge_blocks(n: int, pairs) -> np.ndarray:
    """Form matrix of Σ M_ij dx^(p)_i ∧ dx^(q)_j for (p, q, M) in pairs."""
    W = np.zeros((4 * n, 4 * n))
    b = _blocks(n)
    for p, q, M in pairs:
        W[b[p], b[q]] += M
        W[b[q], b[p]] -= M.T
    return W


def lattice_basis(chart: Chart, y) -> np.ndarray:
    """Columns d₁e₁ .. d_ne_n, Z₁ .. Z_n."""
    return np.hstack([np.diag(chart.polarization).astype(complex), chart.Z(y)])


def reduce_mod_lattice(z, lattice: np.ndarray) -> np.ndarray:
    """Representative of z in the fundamental parallelogram of the lattice."""
    z = np.asarray(z, dtype=complex)
    L = np.vstack([lattice.real, lattice.imag])
    coords = np.linalg.solve(L, np.concatenate([z.real, z.imag]))
    coords = coords - np.floor(coords + 1e-12)
    return lattice @ coords


def frame_at(chart: Chart, y, z=None, A: Optional[np.ndarray] = None) -> SemiFlatPointFrame:
    """
    Semi-flat tensors at (y, z), taken from the zero section and translated along the
    fiber. `A` overrides the base metric block (default Im Z) to build broken frames.
    """
    n = chart.n
    y = np.asarray(y, dtype=complex).reshape(n)
    Z = chart.Z(y)
    A_true = metric_at(chart, y)
    try:
        C = np.linalg.inv(A_true)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"[{chart.label}] Im Z singular at {y}") from exc
    A = A_true if A is None else np.asarray(A, dtype=float)
    lattice = lattice_basis(chart, y)
    z = np.zeros(n, dtype=complex) if z is None else reduce_mod_lattice(np.asarray(z, dtype=complex).reshape(n), lattice)

    I = np.eye(n)
    omega_sf = _wedge_blocks(n, [(Z1, Z2, 2 * C)])
    base_form = _wedge_blocks(n, [(Y1, Y2, 2 * A)])
    theta_re = _wedge_blocks(n, [(Z1, Y1, I), (Z2, Y2, -I)])
    theta_im = _wedge_blocks(n, [(Z1, Y2, I), (Z2, Y1, I)])
    zeros = np.zeros((n, n))
    g = np.block([
        [A, zeros, zeros, zeros],
        [zeros, A, zeros, zeros],
        [zeros, zeros, C, zeros],
        [zeros, zeros, zeros, C],
    ])
    return SemiFlatPointFrame(
        y=y, z=z, Z=Z, lattice=lattice, omega_sf=omega_sf, base_form=base_form,
        theta_re=theta_re, theta_im=theta_im, g=g, J=np.linalg.solve(g, theta_re),
    )


# ---------------------------------------------------------------------------
# Complex structures
# ---------------------------------------------------------------------------

def expected_block_action(frame: SemiFlatPointFrame) -> np.ndarray:
    """
    J by blocks: ∂z' ↦ −A⁻¹∂y', ∂z'' ↦ A⁻¹∂y'', ∂y' ↦ C⁻¹∂z', ∂y'' ↦ −C⁻¹∂z''.
    Column blocks are the source vectors.
    """
    n = frame.n
    b = _blocks(n)
    A = frame.g[b[Y1], b[Y1]]
    C = frame.g[b[Z1], b[Z1]]
    J = np.zeros((4 * n, 4 * n))
    J[b[Y1], b[Z1]] = -np.linalg.inv(A)
    J[b[Y2], b[Z2]] = np.linalg.inv(A)
    J[b[Z1], b[Y1]] = np.linalg.inv(C)
    J[b[Z2], b[Y2]] = -np.linalg.inv(C)
    return J


def complex_structure(frame: SemiFlatPointFrame) -> dict:
    """J from Re Θ(u, v) = g(u, Jv), checked against the block action and J² = −1."""
    J = frame.J
    identity = np.eye(4 * frame.n)
    block_defect = float(np.max(np.abs(J - expected_block_action(frame))))
    square_defect = float(np.max(np.abs(J @ J + identity)))
    orthogonality = float(np.max(np.abs(J.T @ frame.g @ J - frame.g)))
    return {
        "J": J,
        "block_defect": block_defect,
        "square_defect": square_defect,
        "orthogonality_defect": orthogonality,
        "passed": block_defect < config.J_MATCH_TOL and square_defect < config.J_MATCH_TOL,
    }


def hyperkahler_triple(frame: SemiFlatPointFrame) -> dict:
    """
    Almost-complex structures of ω₁ = ω_SF + f*ω, Re Θ and Im Θ with respect to g.
    ω₁ carries twice the scale of Θ under the i dy∧dȳ = 2 dy'∧dy'' convention.
    """
    K = np.linalg.solve(frame.g, frame.omega_sf + frame.base_form) / 2
    J = frame.J
    L = np.linalg.solve(frame.g, frame.theta_im)
    identity = np.eye(4 * frame.n)
    squares = {name: float(np.max(np.abs(M @ M + identity))) for name, M in (("K", K), ("J", J), ("L", L))}
    anticommutators = {
        "KJ": float(np.max(np.abs(K @ J + J @ K))),
        "KL": float(np.max(np.abs(K @ L + L @ K))),
        "JL": float(np.max(np.abs(J @ L + L @ J))),
    }
    return {
        "structures": {"K": K, "J": J, "L": L},
        "squares": squares,
        "anticommutators": anticommutators,
        "passed": max(anticommutators.values()) < 1e-8 and max(squares.values()) < 1e-8,
    }


# ---------------------------------------------------------------------------
# Top exterior powers
# ---------------------------------------------------------------------------

def pfaffian(M: np.ndarray):
    """Pfaffian of an antisymmetric matrix by expansion along the first row."""
    m = M.shape[0]
    if m == 0:
        return 1.0
    if m % 2:
        return 0.0
    total = 0
    rest = np.arange(1, m)
    for k, j in enumerate(rest):
        if M[0, j] == 0:
            continue
        keep = np.delete(rest, k)
        total += (-1) ** k * M[0, j] * pfaffian(M[np.ix_(keep, keep)])
    return total


def top_power(W: np.ndarray) -> float:
    """ω^m / vol for a 2-form on a 2m-dimensional space: m!·Pf(W)."""
    return factorial(W.shape[0] // 2) * pfaffian(W)


def theta_power(frame: SemiFlatPointFrame) -> complex:
    """Θⁿ∧Θ̄ⁿ / vol, read off the sⁿ coefficient of (sΘ + Θ̄)^{2n}."""
    n = frame.n
    W_theta = frame.theta_re + 1j * frame.theta_im
    W_bar = np.conj(W_theta)
    degree = 2 * n
    roots = np.exp(2j * np.pi * np.arange(degree + 1) / (degree + 1))
    values = np.array([pfaffian(s * W_theta + W_bar) for s in roots])
    coefficient = np.sum(values * roots ** (-n)) / (degree + 1)
    return factorial(degree) * coefficient / comb(degree, n)


def volume_ratio(frame: SemiFlatPointFrame) -> complex:
    """(ω_SF + f*ω)^{2n} / (C(2n, n)·Θⁿ∧Θ̄ⁿ)."""
    n = frame.n
    return top_power(frame.omega_sf + frame.base_form) / (comb(2 * n, n) * theta_power(frame))


def hyperkahler_volume_check(chart: Chart, samples: Sequence, tol: float = config.VOLUME_IDENTITY_TOL) -> dict:
    defects = []
    for y in samples:
        ratio = volume_ratio(frame_at(chart, y))
        defects.append(abs(ratio - 1))
    defects = np.array(defects)
    worst = float(defects.max())
    if worst >= tol:
        logger.error(f"[semiflat] [{chart.label}] volume identity defect {worst:.2e}")
    logger.info(f"[semiflat] [{chart.label}] volume identity over {len(samples)} samples, max defect {worst:.2e}")
    return {"defects": defects, "max_defect": worst, "passed": worst < tol}


# ---------------------------------------------------------------------------
# Scaling limit
# ---------------------------------------------------------------------------

def section_jacobian(chart: Chart, section: Sequence[str]):
    """∂σ_i/∂y_j for a polynomial section given componentwise as expressions in y1..yn."""
    symbols = list(sympy.symbols(f"y1:{chart.n + 1}"))
    exprs = [sympy.sympify(s, locals={str(v): v for v in symbols}) for s in section]
    if len(exprs) != chart.n:
        raise DomainError(f"section has {len(exprs)} components, chart has {chart.n}")
    jac = sympy.lambdify(symbols, [[sympy.diff(e, v) for v in symbols] for e in exprs], "numpy")
    return lambda y: np.array(jac(*y), dtype=complex).reshape(chart.n, chart.n)


def pulled_back_theta(frame: SemiFlatPointFrame, dsigma: np.ndarray, t: float) -> np.ndarray:
    """
    Complex form matrix of √t Θ pulled back by (y, z) ↦ (y, t^{-1/2} z + σ(y)).
    """
    n = frame.n
    D = np.eye(4 * n)
    z_block = slice(2 * n, 4 * n)
    y_block = slice(0, 2 * n)
    D[z_block, z_block] = np.eye(2 * n) / np.sqrt(t)
    D[z_block, y_block] = realify(dsigma)
    W_theta = frame.theta_re + 1j * frame.theta_im
    return D.T @ (np.sqrt(t) * W_theta) @ D


def scaling_limit(chart: Chart, section: Sequence[str], t_values: Sequence[float],
                  samples: int = 64, seed: int = 0) -> dict:
    """
    Deviation of the rescaled, translated Θ from Θ, max over samples, for each t.
    The difference is exactly √t Σ ∂_jσ_i dy_j∧dy_i, so only the antisymmetric part of dσ
    contributes: gradient sections vanish, and otherwise the log-log slope is 1/2.
    """
    dsigma = section_jacobian(chart, section)
    points = sample_points(chart, samples, seed)
    frames = [(frame_at(chart, y), dsigma(y)) for y in points]
    t_values = np.asarray(t_values, dtype=float)
    deviations = []
    for t in t_values:
        worst = 0.0
        for frame, ds in frames:
            W_theta = frame.theta_re + 1j * frame.theta_im
            worst = max(worst, float(np.linalg.norm(pulled_back_theta(frame, ds, t) - W_theta)))
        deviations.append(worst)
    deviations = np.array(deviations)

    vanishes = bool(np.all(deviations < 1e-14))
    slope = None
    passed = True
    if not vanishes:
        slope = float(np.polyfit(np.log(t_values), np.log(deviations), 1)[0])
        passed = abs(slope - config.SCALING_SLOPE) <= config.SCALING_SLOPE_TOL
        if not passed:
            logger.error(f"[semiflat] [{chart.label}] scaling slope {slope:.4f}")
    logger.info(f"[semiflat] [{chart.label}] scaling deviations {np.array2string(deviations, precision=3)} slope={slope}")
    return {"t": t_values, "deviations": deviations, "slope": slope, "vanishes": vanishes, "passed": passed}
