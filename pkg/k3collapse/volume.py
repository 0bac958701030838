import logging
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from k3collapse import config
from k3collapse.errors import DomainError
from k3collapse.fibration import WeierstrassFibration, infinity_chart
from k3collapse.models import KodairaType, SingularFiberRecord, VolumeSampleSet
from k3collapse.periods import fiber_periods, period_lattice

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Attained exponents (α, d) of φ ~ |y|^α (1 − log|y|)^d per Kodaira family.
# Every entry satisfies α >= −2(ℓ−1)/ℓ with ℓ the largest component multiplicity.
# ---------------------------------------------------------------------------

EXPONENT_TABLE: dict[str, tuple[Fraction, int]] = {
    "I":    (Fraction(0), 1),
    "II":   (Fraction(-1, 3), 0),
    "III":  (Fraction(-1, 2), 0),
    "IV":   (Fraction(-2, 3), 0),
    "I0*":  (Fraction(-1), 0),
    "I*":   (Fraction(-1), 1),
    "IV*":  (Fraction(-4, 3), 0),
    "III*": (Fraction(-3, 2), 0),
    "II*":  (Fraction(-5, 3), 0),
}

_BATCH = 50_000


def predicted_exponents(kodaira: KodairaType) -> tuple[Fraction, int]:
    return EXPONENT_TABLE[kodaira.family]


def multiplicity_bound(kodaira: KodairaType) -> Fraction:
    """−2(ℓ−1)/ℓ."""
    ell = kodaira.multiplicity_max
    return Fraction(-2 * (ell - 1), ell)


def alpha_within_bound(alpha: float) -> bool:
    """Fitted exponents must clear the universal lower bound by ALPHA_MARGIN."""
    return alpha > config.ALPHA_LOWER_BOUND + config.ALPHA_MARGIN


def volume_density(W: WeierstrassFibration, y) -> np.ndarray:
    """φ(y) = 2 Im(conj(π₁)π₂), batched; independent of the marked basis."""
    y = np.asarray(y, dtype=complex)
    flat = y.ravel()
    out = np.empty(flat.shape, dtype=float)
    for start in range(0, flat.size, _BATCH):
        chunk = flat[start:start + _BATCH]
        pi1, pi2 = period_lattice(W.a_at(chunk), W.b_at(chunk))
        out[start:start + _BATCH] = 2 * (np.conj(pi1) * pi2).imag
    return out.reshape(y.shape)


def fiber_volume(W: WeierstrassFibration, y: complex) -> float:
    """φ(y) = 2|π₁|² Im τ for the fiber over y."""
    p = fiber_periods(W, y)
    return float(2 * abs(p.pi1) ** 2 * p.tau.imag)


def _local_density(W: WeierstrassFibration, fiber: SingularFiberRecord, rho0: float):
    chart = infinity_chart(W) if fiber.at_infinity else W
    center = 0j if fiber.at_infinity else fiber.location
    roots = chart.roots
    others = roots[np.abs(roots - center) > 1e-12]
    if others.size and np.abs(others - center).min() <= rho0:
        raise DomainError(
            f"[{W.label}] disc of radius {rho0:g} around {fiber.label} contains another fiber",
            rho0=rho0, nearest=float(np.abs(others - center).min()),
        )
    return chart, center


def default_rho0(W: WeierstrassFibration, fiber: SingularFiberRecord) -> float:
    """A quarter of the distance to the nearest other fiber, capped at 1/4."""
    chart = infinity_chart(W) if fiber.at_infinity else W
    center = 0j if fiber.at_infinity else fiber.location
    roots = chart.roots
    others = roots[np.abs(roots - center) > 1e-12]
    gap = np.abs(others - center).min() if others.size else 1.0
    return float(min(0.25, gap / 4))


def _fit_for_d(log_rho, log_mean, d):
    target = log_mean - d * np.log(1 - log_rho)
    A = np.column_stack([log_rho, np.ones_like(log_rho)])
    (alpha, log_c), *_ = np.linalg.lstsq(A, target, rcond=None)
    rms = float(np.sqrt(np.mean((A @ np.array([alpha, log_c]) - target) ** 2)))
    return float(alpha), float(np.exp(log_c)), rms


def _unimodal(values) -> bool:
    k = int(np.argmin(values))
    slack = 1e-12 * max(1.0, float(np.max(values)))
    return bool(np.all(np.diff(values[: k + 1]) <= slack) and np.all(np.diff(values[k:]) >= -slack))


def fit_asymptotics(
    W: Optional[WeierstrassFibration],
    fiber: Optional[SingularFiberRecord],
    rho0: float,
    levels: int = config.MIN_FIT_LEVELS,
    n_angles: int = 16,
    evaluate: Optional[Callable] = None,
    center: complex = 0j,
) -> VolumeSampleSet:
    """
    Fit log φ̄(ρ) = α log ρ + d log(1 − log ρ) + log C over dyadic radii ρ₀·2^−j,
    j = 0..levels, for every d in 0..3, and keep the d with the smallest RMS residual.
    `evaluate` replaces the fibration density (synthetic inputs centred at `center`).
    """
    if levels < config.MIN_FIT_LEVELS:
        raise DomainError(f"need at least {config.MIN_FIT_LEVELS} dyadic levels, got {levels}", levels=levels)
    if rho0 * 2.0 ** -levels < config.MIN_FIT_RADIUS:
        raise DomainError(
            f"deepest radius {rho0 * 2.0 ** -levels:.3g} is below {config.MIN_FIT_RADIUS:g}",
            rho0=rho0, levels=levels,
        )

    if evaluate is None:
        chart, center = _local_density(W, fiber, rho0)
        evaluate = lambda y: volume_density(chart, y)

    radii = rho0 * 2.0 ** -np.arange(levels + 1)
    # half-step offset keeps samples off the real axis, where engineered models put other roots
    angles = 2 * np.pi * (np.arange(n_angles) + 0.5) / n_angles
    points = center + radii[:, None] * np.exp(1j * angles[None, :])
    values = np.asarray(evaluate(points), dtype=float)
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise DomainError("volume density must be finite and positive on the sample circles", min=float(np.min(values)))

    log_rho = np.log(radii)
    log_mean = np.log(values.mean(axis=1))
    fits = [_fit_for_d(log_rho, log_mean, d) for d in range(config.MAX_LOG_POWER + 1)]
    rms = np.array([f[2] for f in fits])
    best = int(np.argmin(rms))
    alpha, C, residual = fits[best]
    ambiguous = not _unimodal(rms)

    where = fiber.label if fiber is not None else f"synthetic@{center}"
    if ambiguous:
        logger.warning(f"[volume] [{where}] ambiguous d: rms by d = {np.array2string(rms, precision=3)}")
    if not alpha_within_bound(alpha):
        logger.error(f"[volume] [{where}] fitted alpha={alpha:.4f} violates alpha > {config.ALPHA_LOWER_BOUND + config.ALPHA_MARGIN:g}")
    logger.info(f"[volume] [{where}] alpha={alpha:.4f} d={best} C={C:.4g} rms={residual:.2e}")

    return VolumeSampleSet(
        center=complex(center),
        radii=radii,
        angles=angles,
        values=values,
        alpha_fit=alpha,
        d_fit=best,
        C_fit=C,
        rms_residual=residual,
        rms_by_d=tuple(float(r) for r in rms),
        ambiguous_d=ambiguous,
        at_infinity=bool(fiber is not None and fiber.at_infinity),
    )


def punctured_disc_mass(
    W: Optional[WeierstrassFibration],
    fiber: Optional[SingularFiberRecord],
    rho0: float,
    levels: int = 20,
    evaluate: Optional[Callable] = None,
    center: complex = 0j,
    n_radial: int = 8,
    n_angles: int = 32,
) -> dict:
    """
    ∫ φ dA over the annuli ρ₀2^−(j+1) < |y − p| < ρ₀2^−j, accumulated inward.
    Gauss-Legendre in log r, periodic trapezoid in θ. Increments shrink
    geometrically when φ is integrable at the puncture.
    """
    if evaluate is None:
        chart, center = _local_density(W, fiber, rho0)
        evaluate = lambda y: volume_density(chart, y)

    x, w = np.polynomial.legendre.leggauss(n_radial)
    theta = 2 * np.pi * np.arange(n_angles) / n_angles
    increments = []
    for j in range(levels):
        lo, hi = np.log(rho0) - (j + 1) * np.log(2), np.log(rho0) - j * np.log(2)
        u = (hi - lo) / 2 * x + (hi + lo) / 2
        r = np.exp(u)
        phi = np.asarray(evaluate(center + r[:, None] * np.exp(1j * theta[None, :])), dtype=float)
        # dA = r dr dθ = r² du dθ
        radial = (phi.mean(axis=1) * 2 * np.pi) * r**2
        increments.append(float((hi - lo) / 2 * np.sum(w * radial)))

    increments = np.array(increments)
    masses = np.cumsum(increments)
    ratios = increments[1:] / increments[:-1]
    converged = bool(increments[-1] < 1e-3 * masses[-1] and np.all(ratios[-3:] < 1))
    return {
        "masses": masses,
        "increments": increments,
        "ratio": float(np.median(ratios[-5:])),
        "converged": converged,
    }


def plot_fit(sample: VolumeSampleSet, path: str, title: str = "") -> None:
    """Log-log SVG of the circle means with the fitted model."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rho = sample.radii
    model = sample.C_fit * rho**sample.alpha_fit * (1 - np.log(rho)) ** sample.d_fit
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(rho, sample.circle_means, "o", label="circle mean of φ")
    ax.loglog(rho, model, "-", label=f"α={sample.alpha_fit:.3f}, d={sample.d_fit}")
    ax.set_xlabel("ρ")
    ax.set_ylabel("φ̄(ρ)")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
