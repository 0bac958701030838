from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, field_validator

from k3collapse import config


# ---------------------------------------------------------------------------
# Input files
# ---------------------------------------------------------------------------

class FibrationFile(BaseModel):
    """Shape of a fibration JSON file: coefficients as [re, im] pairs, ascending degree."""
    label: str
    a: list[tuple[float, float]]
    b: list[tuple[float, float]]

    def to_fibration(self):
        from k3collapse.fibration import fibration_from_lists
        return fibration_from_lists(self.label, self.a, self.b)


# ---------------------------------------------------------------------------
# Report rows, read straight from the frozen domain records
# ---------------------------------------------------------------------------

class SingularFiberRow(BaseModel):
    location_re: float
    location_im: float
    at_infinity: bool = False
    ord_a: int
    ord_b: int
    ord_delta: int
    type: str
    alpha_pred: str
    d_pred: int

    @classmethod
    def from_record(cls, r) -> "SingularFiberRow":
        return cls(
            location_re=r.location.real,
            location_im=r.location.imag,
            at_infinity=r.at_infinity,
            ord_a=r.orders[0],
            ord_b=r.orders[1],
            ord_delta=r.orders[2],
            type=str(r.kodaira_type),
            alpha_pred=str(r.alpha_pred),
            d_pred=r.d_pred,
        )


class MonodromyReport(BaseModel):
    location: tuple[float, float]
    at_infinity: bool = False
    type: str
    T: list[list[int]]
    beta: int
    d: int
    N: list[list[str]]
    residual: float
    matches_type: bool


class FitRow(BaseModel):
    fiber_location: str
    type: str
    alpha_pred: str
    d_pred: int
    alpha_fit: float
    d_fit: int
    C_fit: float
    rms: float
    ambiguous_d: bool = False


class PeriodRecord(BaseModel):
    """One line of the period cache."""
    label: str
    y: tuple[float, float]
    pi1: tuple[float, float]
    pi2: tuple[float, float]
    path_id: str = "raw"
    residuals: dict[str, float] = {}

    model_config = ConfigDict(frozen=True)


# ---------------------------------------------------------------------------
# Mesh and chart parameters
# ---------------------------------------------------------------------------

class MeshParams(BaseModel):
    """Resolution of the base mesh at refinement level 0; every count doubles per level."""
    grid: PositiveInt = 32                # grid points across each chart diameter
    boundary_points: PositiveInt = 64     # points on each chart's boundary circle
    ring_angles: PositiveInt = config.RING_ANGLES
    r_min: PositiveFloat = config.R_MIN
    max_ring_radius: PositiveFloat = 0.25
    second_ring_edges: bool = True
    gl_nodes: PositiveInt = 8

    model_config = ConfigDict(frozen=True)


class ChartSpec(BaseModel):
    """A special Kähler chart: a prepotential expression or a fibration-backed n = 1 chart."""
    kind: Literal["series", "fibration"] = "series"
    expression: Optional[str] = None            # F(y1, ..., yn) for series charts
    n: PositiveInt = 1
    polarization: Optional[list[PositiveInt]] = None
    center: list[tuple[float, float]] = [(0.0, 1.0)]
    radius: PositiveFloat = 0.5
    basepoint: Optional[tuple[float, float]] = None


# ---------------------------------------------------------------------------
# Job configuration
# ---------------------------------------------------------------------------

class Tolerances(BaseModel):
    monodromy_residual: PositiveFloat = config.MONODROMY_RESIDUAL
    untwist: PositiveFloat = config.UNTWIST_TOL
    alpha: PositiveFloat = 0.05
    hessian: PositiveFloat = config.HESSIAN_TOL
    monge_ampere: PositiveFloat = config.MONGE_AMPERE_TOL
    affine: PositiveFloat = config.AFFINE_RESIDUAL
    volume_identity: PositiveFloat = config.VOLUME_IDENTITY_TOL
    j_match: PositiveFloat = config.J_MATCH_TOL
    scaling_slope: PositiveFloat = config.SCALING_SLOPE_TOL
    diameter_change: PositiveFloat = 0.02
    cauchy: PositiveFloat = config.CAUCHY_TOL


class PeriodsConfig(BaseModel):
    samples: PositiveInt = 32
    sample_radius: PositiveFloat = 2.0
    loop_fraction: PositiveFloat = Field(default=0.3, lt=0.5)
    untwist_fractions: list[PositiveFloat] = [0.05, 0.025, 0.0125]


class VolumeConfig(BaseModel):
    rho0: Optional[PositiveFloat] = None         # default: a quarter of the gap to the next fiber
    levels: int = Field(default=config.MIN_FIT_LEVELS, ge=config.MIN_FIT_LEVELS)
    angles: PositiveInt = 16
    plot: bool = False


class MetricConfig(BaseModel):
    mesh: MeshParams = MeshParams()
    refinements: int = Field(default=1, ge=0)
    distance_pairs: list[tuple[tuple[float, float], tuple[float, float]]] = []
    plot: bool = False


class SpecialKahlerConfig(BaseModel):
    charts: list[ChartSpec] = [
        ChartSpec(expression="y1**3/6", center=[(0.0, 1.0)], radius=0.5),
        ChartSpec(expression="(y1**3 + y2**3)/6 + y1*y2", n=2, center=[(0.0, 1.0), (0.0, 1.0)], radius=0.4),
    ]
    grid: PositiveInt = 5


class SemiflatConfig(BaseModel):
    charts: list[ChartSpec] = [
        ChartSpec(expression="y1**3/6", center=[(0.0, 1.0)], radius=0.5),
        ChartSpec(expression="(y1**3 + y2**3)/6 + y1*y2", n=2, center=[(0.0, 1.0), (0.0, 1.0)], radius=0.4),
    ]
    samples: PositiveInt = 1000
    section: list[str] = ["y2**2", "0"]
    t_exponents: list[int] = list(range(1, 11))    # t = 4^-k


class JobConfig(BaseModel):
    """Everything a CLI command needs; loaded from the JSON file named by --config."""
    fibration: Optional[str] = None
    generic_seed: Optional[int] = None           # use the generic K3 model with this seed
    engineered: list[str] = []                   # engineered Kodaira models to include
    out: str = config.DEFAULT_OUT_DIR
    cache: str = config.DEFAULT_CACHE
    seed: int = Field(default=config.DEFAULT_SEED, ge=0)
    jobs: PositiveInt = config.DEFAULT_JOBS
    periods: PeriodsConfig = PeriodsConfig()
    volume: VolumeConfig = VolumeConfig()
    metric: MetricConfig = MetricConfig()
    special_kahler: SpecialKahlerConfig = SpecialKahlerConfig()
    semiflat: SemiflatConfig = SemiflatConfig()
    tolerances: Tolerances = Tolerances()

    @field_validator("cache")
    @classmethod
    def _cache_policy(cls, v: str) -> str:
        if not v:
            raise ValueError("cache must be a path or 'off'")
        return v
