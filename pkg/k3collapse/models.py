from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

# ---------------------------------------------------------------------------
# Kodaira types
# ---------------------------------------------------------------------------

FAMILIES = ("I", "II", "III", "IV", "I0*", "I*", "IV*", "III*", "II*")

# largest component multiplicity of the normal-crossings model of each fiber type
MULTIPLICITY_MAX: dict[str, int] = {
    "I":    1,
    "II":   6,
    "III":  4,
    "IV":   3,
    "I0*":  2,
    "I*":   2,
    "IV*":  3,
    "III*": 4,
    "II*":  6,
}


@dataclass(frozen=True)
class KodairaType:
    """A Kodaira fiber type. `k` is only meaningful for the I_k and I_k* families."""
    family: str
    k: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown Kodaira family '{self.family}'")
        if self.family in ("I", "I*") and self.k < 1:
            raise ValueError(f"{self.family} needs k >= 1, got {self.k}")

    def __str__(self) -> str:
        if self.family == "I":
            return f"I{self.k}"
        if self.family == "I*":
            return f"I{self.k}*"
        return self.family

    @classmethod
    def parse(cls, label: str) -> "KodairaType":
        """Inverse of str(): 'I3' -> I_3, 'I0*' -> I_0*, 'I2*' -> I_2*, 'III*' -> III*."""
        label = label.strip()
        if label in FAMILIES and label not in ("I", "I*"):
            return cls(label)
        starred = label.endswith("*")
        digits = label[1:-1] if starred else label[1:]
        if not label.startswith("I") or not digits.isdigit():
            raise ValueError(f"cannot parse Kodaira label '{label}'")
        k = int(digits)
        if starred:
            return cls("I0*") if k == 0 else cls("I*", k)
        return cls("I", k)

    @property
    def multiplicity_max(self) -> int:
        return MULTIPLICITY_MAX[self.family]

    @property
    def is_semistable(self) -> bool:
        return self.family == "I"


# ---------------------------------------------------------------------------
# Monodromy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonodromyMatrix:
    """Integer matrix T with P_end = T·P_start on the column (π₁, π₂)."""
    entries: tuple[tuple[int, int], tuple[int, int]]
    residual: float = 0.0
    points: int = 0  # loop discretization that produced it

    @classmethod
    def from_array(cls, m, residual: float = 0.0, points: int = 0) -> "MonodromyMatrix":
        m = np.asarray(m)
        return cls(
            entries=((int(m[0, 0]), int(m[0, 1])), (int(m[1, 0]), int(m[1, 1]))),
            residual=float(residual),
            points=points,
        )

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)

    @property
    def trace(self) -> int:
        return self.entries[0][0] + self.entries[1][1]

    @property
    def det(self) -> int:
        (p, q), (r, s) = self.entries
        return p * s - q * r


@dataclass(frozen=True)
class QuasiUnipotenceData:
    """Minimal (β, d) with (T^β − I)^d = 0, and N = log T^β as exact rationals."""
    beta: int
    d: int
    N: tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]

    def N_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.N])


# ---------------------------------------------------------------------------
# Fibers and periods
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingularFiberRecord:
    location: complex                # chart coordinate; 0 in the s-chart when at_infinity
    orders: tuple[int, int, int]     # (ord a, ord b, ord Δ)
    kodaira_type: KodairaType
    alpha_pred: Fraction
    d_pred: int
    at_infinity: bool = False
    monodromy: Optional[MonodromyMatrix] = None
    quasi: Optional[tuple[int, int]] = None
    alpha_fit: Optional[float] = None
    d_fit: Optional[int] = None

    @property
    def multiplicity_max(self) -> int:
        return self.kodaira_type.multiplicity_max

    @property
    def label(self) -> str:
        where = "inf" if self.at_infinity else f"{self.location.real:.6g}{self.location.imag:+.6g}j"
        return f"{self.kodaira_type}@{where}"


@dataclass(frozen=True)
class PeriodPoint:
    """A marked period basis of dx/w over the fiber at y."""
    y: complex
    pi1: complex
    pi2: complex
    path_id: str = "raw"

    @property
    def tau(self) -> complex:
        return self.pi2 / self.pi1

    def basis(self) -> np.ndarray:
        return np.array([self.pi1, self.pi2], dtype=complex)


# ---------------------------------------------------------------------------
# Volume fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VolumeSampleSet:
    center: complex
    radii: np.ndarray
    angles: np.ndarray
    values: np.ndarray               # φ at (radius, angle), shape (len(radii), len(angles))
    alpha_fit: float
    d_fit: int
    C_fit: float
    rms_residual: float
    rms_by_d: tuple[float, ...] = ()
    ambiguous_d: bool = False
    at_infinity: bool = False

    @property
    def circle_means(self) -> np.ndarray:
        return self.values.mean(axis=1)


# ---------------------------------------------------------------------------
# Special Kähler / semi-flat
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AffineTransition:
    """v_A = P·v_B + b on the overlap of two charts."""
    P: np.ndarray
    b: np.ndarray
    residual: float                  # distance of the fitted linear part from integers
    fit_residual: float = 0.0        # max |v_A − (P v_B + b)| with P rounded
    symplectic: bool = True


@dataclass(frozen=True, eq=False)
class SemiFlatPointFrame:
    """
    Semi-flat tensors at (y, z) in the real frame (y', y'', z', z''), each block of size n.
    Form matrices W satisfy ω(u, v) = uᵀ W v.
    """
    y: np.ndarray
    z: np.ndarray
    Z: np.ndarray
    lattice: np.ndarray              # n × 2n complex, columns d_i e_i then Z_i
    omega_sf: np.ndarray
    base_form: np.ndarray
    theta_re: np.ndarray
    theta_im: np.ndarray
    g: np.ndarray
    J: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return self.Z.shape[0]
