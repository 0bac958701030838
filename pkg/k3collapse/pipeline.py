import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from k3collapse import config, limit_metric, periods, semiflat, special_kahler, volume
from k3collapse.cache import PeriodCache, cached_fiber_periods
from k3collapse.errors import CollapseError, ConfigError
from k3collapse.fibration import (
    WeierstrassFibration,
    engineered_fibration,
    euler_characteristic,
    generic_k3,
    infinity_chart,
    minimality_violations,
    singular_fibers,
)
from k3collapse.models import KodairaType, SingularFiberRecord
from k3collapse.reports import collect_summaries, write_csv, write_failures, write_json, write_models_csv
from k3collapse.schemas import (
    ChartSpec,
    FibrationFile,
    FitRow,
    JobConfig,
    MonodromyReport,
    SingularFiberRow,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def load_config(path: Optional[str] = None, **overrides) -> JobConfig:
    """JSON file named by --config, then non-None flag overrides on top."""
    data = {}
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}", path=path)
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}", path=path) from exc
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return JobConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError("invalid job configuration", errors=json.loads(exc.json(include_url=False))) from exc


@dataclass
class JobContext:
    """State shared by one CLI invocation: config, cache, output directory and collected failures."""
    config: JobConfig
    cache: PeriodCache = None
    failures: list = field(default_factory=list)

    def __post_init__(self):
        if self.cache is None:
            self.cache = PeriodCache(self.config.cache)
        os.makedirs(self.config.out, exist_ok=True)

    @property
    def tol(self):
        return self.config.tolerances

    def path(self, name: str) -> str:
        return os.path.join(self.config.out, name)

    def fail(self, stage: str, error, **context) -> None:
        """Record a contract failure; the run continues with the remaining items."""
        if isinstance(error, CollapseError):
            entry = error.to_dict()
        else:
            entry = {"error": "ContractFailure", "message": str(error), "diagnostics": {}}
        entry.update({"stage": stage, **context})
        logger.error(f"[{stage}] {entry['message']}")
        self.failures.append(entry)

    def map(self, stage: str, fn: Callable, items: Sequence, describe: Callable = str) -> list:
        """fn over items on the worker pool; results keep input order, failures become None."""
        with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
            futures = [pool.submit(fn, item) for item in items]
            results = []
            for item, future in zip(items, futures):
                try:
                    results.append(future.result())
                except CollapseError as exc:
                    self.fail(stage, exc, item=describe(item))
                    results.append(None)
        return results

    def summary(self, name: str, payload: dict) -> str:
        payload = {"seed": self.config.seed, **payload}
        return write_json(self.path(f"{name}.json"), payload)

    def fibrations(self) -> list[WeierstrassFibration]:
        cfg = self.config
        out = []
        if cfg.fibration:
            try:
                with open(cfg.fibration, encoding="utf-8") as fh:
                    out.append(FibrationFile.model_validate_json(fh.read()).to_fibration())
            except OSError as exc:
                raise ConfigError(f"cannot read fibration file {cfg.fibration}", path=cfg.fibration) from exc
            except ValidationError as exc:
                raise ConfigError("invalid fibration file", errors=json.loads(exc.json(include_url=False))) from exc
        if cfg.generic_seed is not None:
            out.append(generic_k3(cfg.generic_seed))
        for label in cfg.engineered:
            try:
                out.append(engineered_fibration(KodairaType.parse(label)))
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"unknown engineered model '{label}'", label=label) from exc
        return out

    def require_fibrations(self) -> list[WeierstrassFibration]:
        fibs = self.fibrations()
        if not fibs:
            raise ConfigError("no fibration selected: set fibration, generic_seed or engineered")
        return fibs


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def fiber_gap(W: WeierstrassFibration, fiber: SingularFiberRecord) -> float:
    """Distance from the fiber to the nearest other discriminant root in its own chart."""
    chart = infinity_chart(W) if fiber.at_infinity else W
    center = 0j if fiber.at_infinity else fiber.location
    roots = chart.roots
    others = roots[np.abs(roots - center) > 1e-12]
    return float(np.abs(others - center).min()) if others.size else 1.0


def _fiber_where(fiber: SingularFiberRecord) -> str:
    return "inf" if fiber.at_infinity else f"{fiber.location.real:.17g}{fiber.location.imag:+.17g}j"


def regular_basepoint(W: WeierstrassFibration, radii: Sequence[float] = (0.25, 0.5, 1.0)) -> complex:
    """The candidate point with the largest clearance from the discriminant."""
    candidates = np.concatenate([r * np.exp(2j * np.pi * np.arange(16) / 16) for r in radii])
    return complex(candidates[int(np.argmax(W.distance_to_discriminant(candidates)))])


def _fibers(W: WeierstrassFibration) -> list[SingularFiberRecord]:
    return singular_fibers(W)


# ---------------------------------------------------------------------------
# fibration
# ---------------------------------------------------------------------------

def run_classify(ctx: JobContext) -> dict:
    result = {}
    for W in ctx.require_fibrations():
        fibers = _fibers(W)
        rows = [SingularFiberRow.from_record(f) for f in fibers]
        write_models_csv(ctx.path(f"fibers_{W.label}.csv"), rows)
        result[W.label] = {
            "fibers": rows,
            "euler_characteristic": euler_characteristic(W),
            "minimality_violations": minimality_violations(W),
        }
    ctx.summary("fibration", {"fibrations": result})
    return result


# ---------------------------------------------------------------------------
# periods
# ---------------------------------------------------------------------------

def run_period_samples(ctx: JobContext) -> dict:
    cfg = ctx.config.periods
    rng = np.random.default_rng(ctx.config.seed)
    result = {}
    for W in ctx.require_fibrations():
        r = cfg.sample_radius * np.sqrt(rng.uniform(size=cfg.samples))
        ys = r * np.exp(2j * np.pi * rng.uniform(size=cfg.samples))
        ys = ys[W.distance_to_discriminant(ys) > 1e-6]
        points = ctx.map("periods", lambda y: cached_fiber_periods(W, complex(y), ctx.cache), list(ys))
        rows, worst, worst_j = [], 0.0, 0.0
        for p in points:
            if p is None:
                continue
            a, b = W.a_at(p.y), W.b_at(p.y)
            defect = float(periods.lattice_defect(p.pi1, p.pi2, a, b))
            j_defect = float(periods.j_defect(p.tau, a, b))
            worst, worst_j = max(worst, defect), max(worst_j, j_defect)
            rows.append([p.y.real, p.y.imag, p.pi1.real, p.pi1.imag, p.pi2.real, p.pi2.imag, p.tau.real, p.tau.imag, defect, j_defect])
        write_csv(
            ctx.path(f"periods_{W.label}.csv"),
            ["y_re", "y_im", "pi1_re", "pi1_im", "pi2_re", "pi2_im", "tau_re", "tau_im", "lattice_defect", "j_defect"],
            rows,
        )
        if worst >= config.LATTICE_CHECK_TOL:
            ctx.fail("periods", f"[{W.label}] lattice invariant defect {worst:.2e}", fibration=W.label)
        if worst_j >= config.J_CONSISTENCY_TOL:
            ctx.fail("periods", f"[{W.label}] j(tau) disagrees with j(a, b) by {worst_j:.2e}", fibration=W.label)
        result[W.label] = {"samples": len(rows), "max_lattice_defect": worst, "max_j_defect": worst_j}
    ctx.summary("periods", {"periods": result})
    return result


def _monodromy_row(W: WeierstrassFibration, fiber: SingularFiberRecord, ctx: JobContext) -> MonodromyReport:
    T = periods.monodromy(W, fiber, ctx.config.periods.loop_fraction * fiber_gap(W, fiber))
    data = periods.quasi_unipotence(T)
    matches = periods.matches_kodaira(T, fiber.kodaira_type)
    if not matches:
        ctx.fail("monodromy", f"[{W.label}] {fiber.label}: T={T.entries} does not match its Kodaira type", fiber=fiber.label)
    if T.residual >= ctx.tol.monodromy_residual:
        ctx.fail("monodromy", f"[{W.label}] {fiber.label}: integer residual {T.residual:.2e}", fiber=fiber.label)
    return MonodromyReport(
        location=(fiber.location.real, fiber.location.imag),
        at_infinity=fiber.at_infinity,
        type=str(fiber.kodaira_type),
        T=[list(r) for r in T.entries],
        beta=data.beta,
        d=data.d,
        N=[[str(x) for x in row] for row in data.N],
        residual=T.residual,
        matches_type=matches,
    )


def run_monodromy(ctx: JobContext) -> dict:
    result = {}
    for W in ctx.require_fibrations():
        fibers = _fibers(W)
        rows = [r for r in ctx.map("monodromy", lambda f: _monodromy_row(W, f, ctx), fibers, _fiber_where) if r]
        entry = {"fibers": rows}
        if not any(f.at_infinity for f in fibers) and len(fibers) > 1:
            try:
                glob = periods.global_monodromy_product(W, ctx.config.periods.loop_fraction)
                identity = bool(np.array_equal(glob["product"], np.eye(2, dtype=np.int64)))
                entry["global_product"] = glob["product"]
                entry["global_product_is_identity"] = identity
                if not identity:
                    ctx.fail("monodromy", f"[{W.label}] ordered monodromy product is {glob['product'].tolist()}")
            except CollapseError as exc:
                ctx.fail("monodromy", exc, fibration=W.label)
        result[W.label] = entry
    ctx.summary("monodromy", {"monodromy": result})
    return result


def _untwist(W, fiber, ctx) -> dict:
    gap = fiber_gap(W, fiber)
    beta = periods.quasi_unipotence(periods.monodromy(W, fiber, ctx.config.periods.loop_fraction * gap)).beta
    defects = []
    for fraction in ctx.config.periods.untwist_fractions:
        w = (fraction * gap) ** (1 / beta) * np.exp(0.3j)
        defects.append(periods.untwist_check(W, fiber, w, beta))
    passed = max(defects) < ctx.tol.untwist
    if not passed:
        ctx.fail("untwist", f"[{W.label}] {fiber.label}: untwist defect {max(defects):.2e}", fiber=fiber.label)
    return {"fiber": fiber.label, "beta": beta, "defects": defects, "passed": passed}


def run_untwist(ctx: JobContext) -> dict:
    result = {}
    for W in ctx.require_fibrations():
        fibers = [f for f in _fibers(W) if not f.at_infinity]
        result[W.label] = [r for r in ctx.map("untwist", lambda f: _untwist(W, f, ctx), fibers, _fiber_where) if r]
    ctx.summary("untwist", {"untwist": result})
    return result


# ---------------------------------------------------------------------------
# volume
# ---------------------------------------------------------------------------

def _fit(W, fiber, ctx) -> tuple[FitRow, dict]:
    cfg = ctx.config.volume
    rho0 = cfg.rho0 or volume.default_rho0(W, fiber)
    sample = volume.fit_asymptotics(W, fiber, rho0, cfg.levels, cfg.angles)
    mass = volume.punctured_disc_mass(W, fiber, rho0)
    if cfg.plot:
        volume.plot_fit(sample, ctx.path(f"fit_{W.label}_{_fiber_where(fiber)}.svg"), f"{W.label} {fiber.label}")
    alpha_ok = abs(sample.alpha_fit - float(fiber.alpha_pred)) <= ctx.tol.alpha and sample.d_fit == fiber.d_pred
    if not alpha_ok:
        ctx.fail(
            "volume",
            f"[{W.label}] {fiber.label}: fitted (alpha, d) = ({sample.alpha_fit:.4f}, {sample.d_fit}), "
            f"expected ({fiber.alpha_pred}, {fiber.d_pred})",
            fiber=fiber.label,
        )
    if not volume.alpha_within_bound(sample.alpha_fit) or not mass["converged"]:
        ctx.fail("volume", f"[{W.label}] {fiber.label}: density not integrable near the fiber", fiber=fiber.label)
    row = FitRow(
        fiber_location=_fiber_where(fiber),
        type=str(fiber.kodaira_type),
        alpha_pred=str(fiber.alpha_pred),
        d_pred=fiber.d_pred,
        alpha_fit=sample.alpha_fit,
        d_fit=sample.d_fit,
        C_fit=sample.C_fit,
        rms=sample.rms_residual,
        ambiguous_d=sample.ambiguous_d,
    )
    return row, {"mass": mass["masses"][-1], "mass_ratio": mass["ratio"], "mass_converged": mass["converged"]}


def run_volume(ctx: JobContext) -> dict:
    result = {}
    for W in ctx.require_fibrations():
        fibers = _fibers(W)
        fits = [f for f in ctx.map("volume", lambda f: _fit(W, f, ctx), fibers, _fiber_where) if f]
        rows = [row for row, _ in fits]
        write_models_csv(ctx.path(f"fits_{W.label}.csv"), rows)
        result[W.label] = [{"fit": row, **mass} for row, mass in fits]
    ctx.summary("volume", {"volume": result})
    return result


# ---------------------------------------------------------------------------
# metric
# ---------------------------------------------------------------------------

def _metric_levels(ctx: JobContext, W: WeierstrassFibration) -> list:
    cfg = ctx.config.metric
    levels = [limit_metric.build_metric(W, cfg.mesh)]
    for _ in range(cfg.refinements):
        levels.append(limit_metric.refine(levels[-1]))
    return levels


def _levels_or_fail(ctx: JobContext, W: WeierstrassFibration, stage: str = "metric") -> Optional[list]:
    try:
        return _metric_levels(ctx, W)
    except CollapseError as exc:
        ctx.fail(stage, exc, fibration=W.label)
        return None


def _proportionality(L) -> float:
    """Relative spread of φ / (Im τ |π₁|²) over the t-chart mesh."""
    mesh = L.meshes["t"]
    ratio = mesh.phi / special_kahler.fibration_density(L.charts[0].density.W, mesh.points)
    return float(ratio.std() / ratio.mean())


def run_metric_build(ctx: JobContext) -> dict:
    result = {}
    for W in ctx.require_fibrations():
        levels = _levels_or_fail(ctx, W)
        if levels is None:
            continue
        integrals = [L.integral for L in levels]
        change = abs(integrals[-1] - integrals[-2]) / integrals[-1] if len(levels) > 1 else None
        if change is not None and change >= config.AREA_REFINEMENT_TOL:
            ctx.fail("metric", f"[{W.label}] area changed by {change:.2e} at the finest refinement")
        spread = _proportionality(levels[-1])
        if spread >= 1e-6:
            ctx.fail("metric", f"[{W.label}] density not proportional to Im tau |pi1|^2 (spread {spread:.2e})")
        if ctx.config.metric.plot:
            limit_metric.plot_density(levels[-1], ctx.path(f"density_{W.label}.svg"))
        result[W.label] = {
            "levels": [
                {"level": L.level, "vertices": L.vertex_count, "edges": L.graph.number_of_edges(),
                 "integral": L.integral, "c": L.c, "excluded": L.excluded}
                for L in levels
            ],
            "area_change": change,
            "proportionality_spread": spread,
        }
    ctx.summary("metric", {"metric": result})
    return result


def run_metric_distance(ctx: JobContext) -> dict:
    pairs = ctx.config.metric.distance_pairs
    if not pairs:
        raise ConfigError("metric.distance_pairs is empty")
    result = {}
    for W in ctx.require_fibrations():
        levels = _levels_or_fail(ctx, W)
        if levels is None:
            continue
        rows = []
        for (a, b) in pairs:
            q1, q2 = complex(*a), complex(*b)
            coarse = levels[-2] if len(levels) > 1 else levels[-1]
            refined = levels[-1] if len(levels) > 1 else None
            try:
                d = limit_metric.distance(coarse, q1, q2, refined=refined)
            except CollapseError as exc:
                ctx.fail("metric", exc, fibration=W.label, q1=str(q1), q2=str(q2))
                continue
            gap = d.refinement_gap
            if gap is not None and gap < -1e-12 * d.distance:
                ctx.fail("metric", f"[{W.label}] distance {q1} -> {q2} grew under refinement")
            rows.append([q1.real, q1.imag, q2.real, q2.imag, d.distance, abs(gap) if gap is not None else float("nan")])
        write_csv(ctx.path(f"distances_{W.label}.csv"), ["q1_re", "q1_im", "q2_re", "q2_im", "distance", "refinement_gap"], rows)
        result[W.label] = {"pairs": len(rows)}
    ctx.summary("distance", {"distance": result})
    return result


def run_metric_diameter(ctx: JobContext) -> dict:
    result = {}
    for W in ctx.require_fibrations():
        levels = _levels_or_fail(ctx, W)
        if levels is None:
            continue
        diameters = [limit_metric.diameter(L) for L in levels]
        change = abs(diameters[-1] - diameters[-2]) / diameters[-1] if len(diameters) > 1 else None
        if change is not None and change >= ctx.tol.diameter_change:
            ctx.fail("metric", f"[{W.label}] diameter changed by {change:.2%} over the last refinement")
        result[W.label] = {"diameters": diameters, "relative_change": change}
    ctx.summary("diameter", {"diameter": result})
    return result


def run_completion(ctx: JobContext) -> dict:
    result = {}
    for W in ctx.require_fibrations():
        levels = _levels_or_fail(ctx, W, "completion")
        if levels is None:
            continue
        refined = levels[-1] if len(levels) > 1 else None
        summary = limit_metric.completion_summary(levels[-2] if refined else levels[0], refined)
        if not summary["distinct"]:
            ctx.fail("completion", f"[{W.label}] {len(summary['merge_candidates'])} merge candidates")
        L = levels[-1]
        q = regular_basepoint(W, (0.5 * L.chart("t").radius,))
        limits = []
        for chart, k, p in L.punctures():
            d = limit_metric.distance_to_singular(L, q, k, chart=chart, q_chart="t", tol=ctx.tol.cauchy)
            if d["failed"] or not d["angle_independent"]:
                ctx.fail("completion", f"[{W.label}] distance to {chart}:{k} is not Cauchy or depends on the angle")
            limits.append({"puncture": f"{chart}:{k}", **{key: d[key] for key in ("limit", "converged", "extrapolated", "angle_independent")}})
        result[W.label] = {**summary, "distance_to_singular": limits}
    ctx.summary("completion", {"completion": result})
    return result


def run_length_bound(ctx: JobContext) -> dict:
    result = {}
    for W in ctx.require_fibrations():
        levels = _levels_or_fail(ctx, W, "bound")
        if levels is None:
            continue
        L = levels[-1]
        rows = []
        for f in (f for f in _fibers(W) if not f.at_infinity):
            chart = L.chart("t")
            k = int(np.argmin(np.abs(np.array(chart.punctures) - f.location))) if chart.punctures else None
            if k is None or abs(chart.punctures[k] - f.location) > 1e-9:
                continue
            bound = limit_metric.verify_length_bound(L, k, float(f.alpha_pred), f.d_pred, chart="t")
            if not bound["passed"]:
                ctx.fail("bound", f"[{W.label}] length bound ratio grows at {f.label}", fiber=f.label)
            rows.append({"fiber": f.label, "C_est": bound["C_est"], "passed": bound["passed"]})
        result[W.label] = rows
    ctx.summary("bound", {"bound": result})
    return result


# ---------------------------------------------------------------------------
# special Kähler
# ---------------------------------------------------------------------------

def _charts(ctx: JobContext, specs: list[ChartSpec]) -> list:
    fibs = ctx.fibrations()
    charts = [special_kahler.chart_from_spec(s, fibs[0] if fibs else None) for s in specs]
    if fibs and not any(s.kind == "fibration" for s in specs):
        W = fibs[0]
        charts.append(special_kahler.FibrationChart(W, regular_basepoint(W)))
    return charts


def run_sk_check(ctx: JobContext) -> dict:
    cfg = ctx.config.special_kahler
    charts = _charts(ctx, cfg.charts)

    def check(chart):
        grid = special_kahler.grid_points(chart, cfg.grid)
        for y in grid:
            special_kahler.metric_at(chart, y)
        hessian = special_kahler.hessian_structure_check(chart, grid, tol=ctx.tol.hessian)
        ma = special_kahler.monge_ampere_check(chart, grid, tol=ctx.tol.monge_ampere)
        darboux = max(special_kahler.darboux_differential_check(chart, y) for y in grid)
        if not hessian["passed"]:
            ctx.fail("sk", f"[{chart.label}] Hessian defect {hessian['defect']:.2e}")
        if not ma["passed"]:
            ctx.fail("sk", f"[{chart.label}] Monge-Ampere spread {ma['spread']:.2e}")
        if darboux >= 1e-8:
            ctx.fail("sk", f"[{chart.label}] Darboux differential defect {darboux:.2e}")
        return {"chart": chart.label, "hessian": hessian, "monge_ampere": ma, "darboux_defect": darboux}

    result = [r for r in ctx.map("sk", check, charts, lambda c: c.label) if r]
    ctx.summary("sk", {"charts": result})
    return {"charts": result}


def run_sk_transitions(ctx: JobContext) -> dict:
    cfg = ctx.config.special_kahler
    rows, report = [], {"charts": [], "affine_monodromy": []}
    for chart in _charts(ctx, cfg.charts):
        samples = special_kahler.sample_points(chart, 2 * (2 * chart.n + 1), ctx.config.seed, fill=0.5)
        n = chart.n
        shear = np.eye(2 * n, dtype=np.int64)
        shear[:n, n:] = np.eye(n, dtype=np.int64)
        try:
            rebased = chart.rebased(samples[0])
            framed = chart.with_frame(frame=shear) if isinstance(chart, special_kahler.SeriesChart) else rebased
            for name, other in (("rebased", rebased), ("frame", framed)):
                tr = special_kahler.transition(other, chart, samples)
                rows.append([chart.label, name, tr.P.tolist(), tr.b.tolist(), tr.residual, tr.fit_residual])
            cocycle = special_kahler.affine_cocycle_check(framed, rebased, chart, samples)
            if not cocycle["passed"]:
                ctx.fail("sk", f"[{chart.label}] affine cocycle defect {cocycle}")
            report["charts"].append({"chart": chart.label, "cocycle": cocycle})
        except CollapseError as exc:
            ctx.fail("sk", exc, chart=chart.label)

    for W in ctx.fibrations():
        fibers = [f for f in _fibers(W) if not f.at_infinity]

        def monodromy_match(f):
            return special_kahler.affine_monodromy(W, f, ctx.config.periods.loop_fraction * fiber_gap(W, f))

        for entry in ctx.map("sk", monodromy_match, fibers, _fiber_where):
            if entry is None:
                continue
            if not entry["matches"]:
                ctx.fail("sk", f"[{W.label}] affine monodromy differs from period monodromy at {entry['fiber']}")
            rows.append([entry["fiber"], "monodromy", entry["P"].tolist(), entry["b"].tolist(), entry["residual"], 0.0])
            report["affine_monodromy"].append(entry)

    write_csv(ctx.path("transitions.csv"), ["chart", "kind", "P", "b", "residual", "fit_residual"], rows)
    ctx.summary("transitions", report)
    return report


# ---------------------------------------------------------------------------
# semi-flat
# ---------------------------------------------------------------------------

def run_semiflat_check(ctx: JobContext) -> dict:
    cfg = ctx.config.semiflat
    result, rows = [], []
    for chart in _charts(ctx, cfg.charts):
        samples = special_kahler.sample_points(chart, cfg.samples, ctx.config.seed)
        try:
            volume_check = semiflat.hyperkahler_volume_check(chart, samples, tol=ctx.tol.volume_identity)
        except CollapseError as exc:
            ctx.fail("semiflat", exc, chart=chart.label)
            continue
        worst_J, worst_square, worst_triple = 0.0, 0.0, 0.0
        for y, defect in zip(samples, volume_check["defects"]):
            frame = semiflat.frame_at(chart, y)
            J = semiflat.complex_structure(frame)
            triple = semiflat.hyperkahler_triple(frame)
            worst_J = max(worst_J, J["block_defect"])
            worst_square = max(worst_square, J["square_defect"])
            worst_triple = max(worst_triple, *triple["anticommutators"].values())
            rows.append([chart.label, *np.ravel([[c.real, c.imag] for c in y]), J["block_defect"], J["square_defect"], float(defect)])
        if worst_J >= ctx.tol.j_match or worst_square >= 1e-12:
            ctx.fail("semiflat", f"[{chart.label}] complex structure defect {max(worst_J, worst_square):.2e}")
        if not volume_check["passed"]:
            ctx.fail("semiflat", f"[{chart.label}] volume identity defect {volume_check['max_defect']:.2e}")
        if worst_triple >= 1e-8:
            ctx.fail("semiflat", f"[{chart.label}] hyperkahler triple does not anticommute ({worst_triple:.2e})")
        result.append({
            "chart": chart.label,
            "max_block_defect": worst_J,
            "max_square_defect": worst_square,
            "max_anticommutator": worst_triple,
            "max_volume_defect": volume_check["max_defect"],
        })
    write_csv(ctx.path("semiflat_samples.csv"), ["chart", "coordinates", "block_defect", "square_defect", "volume_defect"],
              ([r[0], " ".join(format(x, ".17g") for x in r[1:-3]), *r[-3:]] for r in rows))
    ctx.summary("semiflat", {"charts": result})
    return {"charts": result}


def run_scaling(ctx: JobContext) -> dict:
    cfg = ctx.config.semiflat
    t_values = [4.0 ** -k for k in cfg.t_exponents]
    result = []
    for spec in cfg.charts:
        if spec.kind != "series":
            continue
        chart = special_kahler.chart_from_spec(spec)
        section = cfg.section[: chart.n] + ["0"] * max(0, chart.n - len(cfg.section))
        report = semiflat.scaling_limit(chart, section, t_values, seed=ctx.config.seed)
        if report["slope"] is not None and abs(report["slope"] - config.SCALING_SLOPE) > ctx.tol.scaling_slope:
            ctx.fail("scaling", f"[{chart.label}] scaling slope {report['slope']:.4f}")
        result.append({"chart": chart.label, "section": section, **report})
    ctx.summary("scaling", {"charts": result})
    return {"charts": result}


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def run_report(ctx: JobContext) -> dict:
    summaries = collect_summaries(ctx.config.out)
    if not summaries:
        raise ConfigError(f"no summaries found in {ctx.config.out}", out=ctx.config.out)
    write_json(ctx.path("report.json"), {"seed": ctx.config.seed, "summaries": summaries})
    return summaries


def execute(runner: Callable[[JobContext], dict], job: JobConfig) -> int:
    """Run one command: 0 when every contract passed, 1 with failures.json otherwise."""
    ctx = JobContext(job)
    runner(ctx)
    ctx.cache.flush()
    if ctx.failures:
        write_failures(job.out, ctx.failures)
        logger.error(f"[{runner.__name__}] {len(ctx.failures)} contract failures, see {ctx.path('failures.json')}")
        return 1
    failures_file = ctx.path("failures.json")
    if os.path.exists(failures_file):
        os.remove(failures_file)
    return 0
