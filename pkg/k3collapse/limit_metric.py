import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import networkx as nx
import numpy as np
from scipy.interpolate import LinearNDInterpolator
from scipy.spatial import Delaunay

from k3collapse import config
from k3collapse.errors import MeshError
from k3collapse.fibration import WeierstrassFibration, infinity_chart
from k3collapse.schemas import MeshParams
from k3collapse.volume import volume_density

logger = logging.getLogger(__name__)

# 3-point interior rule on triangles (barycentric weights, equal weights 1/3)
_TRI_RULE = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
_DISTANCE_ANGLES = 8


# ---------------------------------------------------------------------------
# Densities and charts
# ---------------------------------------------------------------------------

class FibrationDensity:
    """φ of a Weierstrass chart as a callable on arrays of base points."""

    def __init__(self, W: WeierstrassFibration):
        self.W = W

    def __call__(self, y) -> np.ndarray:
        return volume_density(self.W, y)


def constant_density(value: float = 1.0) -> Callable:
    return lambda y: np.full(np.shape(y), float(value))


def power_density(alpha: float, center: complex = 0j) -> Callable:
    """|y − c|^α"""
    return lambda y: np.abs(np.asarray(y) - center) ** alpha


def log_density(center: complex = 0j) -> Callable:
    """1 − log|y − c|"""
    return lambda y: 1 - np.log(np.abs(np.asarray(y) - center))


@dataclass(frozen=True)
class DensityChart:
    """A disc |y| <= radius carrying density φ. Glued charts share their boundary circle."""
    name: str
    density: Callable
    punctures: tuple
    radius: float = 1.0
    glued: bool = False

    def puncture_array(self) -> np.ndarray:
        return np.array(self.punctures, dtype=complex)


def disc_chart(density: Callable, punctures: Sequence[complex] = (), radius: float = 1.0, name: str = "disc") -> DensityChart:
    return DensityChart(name=name, density=density, punctures=tuple(complex(p) for p in punctures), radius=radius)


def gluing_radius(roots: np.ndarray) -> float:
    """Radius in [1/4, 4] whose circle keeps the largest log-distance from every root modulus."""
    moduli = np.sort(np.abs(roots[np.abs(roots) > 0])) if roots.size else np.zeros(0)
    edges = np.concatenate([[0.25], moduli[(moduli > 0.25) & (moduli < 4)], [4.0]])
    logs = np.log(edges)
    k = int(np.argmax(np.diff(logs)))
    return float(np.exp((logs[k] + logs[k + 1]) / 2))


def fibration_charts(W: WeierstrassFibration) -> list[DensityChart]:
    """The t-chart |t| <= R and the s-chart |s| <= 1/R, glued along |t| = R."""
    W_inf = infinity_chart(W)
    R = gluing_radius(W.roots)
    t_punct = tuple(complex(p) for p in W.roots if abs(p) < R)
    s_punct = tuple(complex(p) for p in W_inf.roots if abs(p) < 1 / R)
    return [
        DensityChart("t", FibrationDensity(W), t_punct, R, glued=True),
        DensityChart("s", FibrationDensity(W_inf), s_punct, 1 / R, glued=True),
    ]


# ---------------------------------------------------------------------------
# Segment quadrature
# ---------------------------------------------------------------------------

def _closest_approach(z0, z1, punctures):
    """Distance from each segment [z0, z1] to the nearest puncture, and the segment parameter."""
    z0, z1 = np.atleast_1d(z0), np.atleast_1d(z1)
    if len(punctures) == 0:
        return np.full(z0.shape, np.inf), np.zeros(z0.shape)
    seg = z1 - z0
    length2 = np.maximum(np.abs(seg) ** 2, 1e-300)
    s = np.clip(((punctures[None, :] - z0[:, None]) * np.conj(seg)[:, None]).real / length2[:, None], 0, 1)
    dist = np.abs(z0[:, None] + s * seg[:, None] - punctures[None, :])
    k = np.argmin(dist, axis=1)
    rows = np.arange(len(z0))
    return dist[rows, k], s[rows, k]


def _edge_integrals(density, z0, z1, punctures, gl_nodes):
    """∫ √φ |dz| along straight edges, uniform sub-pieces scaled by the closest approach."""
    x, w = np.polynomial.legendre.leggauss(gl_nodes)
    length = np.abs(z1 - z0)
    delta, _ = _closest_approach(z0, z1, punctures)
    pieces = np.clip(np.ceil(4 * length / np.maximum(delta, 1e-300)), 1, 64).astype(int)
    out = np.zeros(len(z0))
    for k in np.unique(pieces):
        idx = np.flatnonzero(pieces == k)
        u = ((np.arange(k)[:, None] + (x[None, :] + 1) / 2) / k).ravel()
        weights = np.tile(w / (2 * k), k)
        pts = z0[idx, None] + u[None, :] * (z1[idx] - z0[idx])[:, None]
        vals = np.sqrt(density(pts))
        out[idx] = length[idx] * (vals * weights).sum(axis=1)
    return out


def _graded_parameters(z0, z1, punctures, r_excluded):
    """Breakpoints on [0, 1] refined geometrically toward every nearby puncture."""
    length = abs(z1 - z0)
    params = {0.0, 1.0}
    if len(punctures):
        seg = z1 - z0
        s_all = np.clip(((punctures - z0) * np.conj(seg)).real / max(length**2, 1e-300), 0, 1)
        d_all = np.abs(z0 + s_all * seg - punctures)
    else:
        s_all = d_all = np.zeros(0)
    for p, delta, s in zip(punctures, d_all, s_all):
        delta, s = float(delta), float(s)
        if delta < r_excluded:
            raise MeshError(
                "segment passes through an excluded zone",
                puncture=[p.real, p.imag], closest_approach=delta, r_excluded=r_excluded,
            )
        if delta >= length:
            continue
        params.add(s)
        tau = delta
        while tau < length:
            params.update(v for v in (s - tau / length, s + tau / length) if 0 < v < 1)
            tau *= 2
    grid = np.array(sorted(params))
    # no piece longer than an eighth of the segment
    fine = [grid[0]]
    for a, b in zip(grid[:-1], grid[1:]):
        n = max(1, int(math.ceil((b - a) * 8)))
        fine.extend(a + (b - a) * np.arange(1, n + 1) / n)
    return np.array(fine)


def segment_integral(density, z0: complex, z1: complex, punctures, r_excluded: float, gl_nodes: int = 8) -> float:
    """∫ √φ |dz| along one segment with geometric grading toward punctures."""
    if z0 == z1:
        return 0.0
    params = _graded_parameters(z0, z1, punctures, r_excluded)
    x, w = np.polynomial.legendre.leggauss(gl_nodes)
    a, b = params[:-1], params[1:]
    u = (b - a)[:, None] * (x[None, :] + 1) / 2 + a[:, None]
    pts = z0 + u * (z1 - z0)
    vals = np.sqrt(density(pts))
    return float(abs(z1 - z0) * np.sum(vals * w[None, :] * (b - a)[:, None] / 2))


# ---------------------------------------------------------------------------
# Mesh
# ---------------------------------------------------------------------------

@dataclass
class ChartMesh:
    chart: DensityChart
    points: np.ndarray                    # complex chart coordinates
    nodes: np.ndarray                     # global node id per point
    triangulation: Delaunay
    phi: np.ndarray                       # density at the points
    rings: dict = field(default_factory=dict)   # puncture index -> [(radius, node ids by angle)]
    interpolator: Optional[LinearNDInterpolator] = None


def _ring_radii(chart: DensityChart, k: int, params: MeshParams) -> np.ndarray:
    """Exact powers of two 2^-j, from below the puncture's clearance down to r_min."""
    p = chart.punctures[k]
    others = [abs(p - q) for j, q in enumerate(chart.punctures) if j != k]
    clearance = min([params.max_ring_radius, 0.5 * (chart.radius - abs(p))] + [0.25 * d for d in others])
    if clearance <= params.r_min:
        raise MeshError(f"[{chart.name}] puncture {p} has no room for rings", clearance=clearance)
    j0 = math.ceil(-math.log2(clearance))
    j1 = math.floor(-math.log2(params.r_min))
    return 2.0 ** -np.arange(j0, j1 + 1)


def _chart_points(chart: DensityChart, params: MeshParams, level: int):
    R = chart.radius
    n = params.grid * 2**level
    h = 2 * R / n
    # i/n is the same float at every level, so refined grids contain the coarse points exactly
    xs = -R + 2 * R * (np.arange(n + 1) / n)
    grid = (xs[:, None] + 1j * xs[None, :]).ravel()
    grid = grid[np.abs(grid) <= R - h / 2]

    punct = chart.puncture_array()
    excluded = 0
    ring_specs = []
    for k in range(len(punct)):
        radii = _ring_radii(chart, k, params)
        near = np.abs(grid - punct[k]) <= radii[0] + h / 4
        excluded += int(near.sum())
        grid = grid[~near]
        ring_specs.append(radii)

    m_boundary = params.boundary_points * 2**level
    boundary = R * np.exp(2j * np.pi * (np.arange(m_boundary) / m_boundary))

    m_ring = params.ring_angles * 2**level
    ring_angle = np.exp(2j * np.pi * (np.arange(m_ring) / m_ring))
    rings = []
    for k, radii in enumerate(ring_specs):
        rings.append([(r, punct[k] + r * ring_angle) for r in radii])
    return grid, boundary, rings, excluded


def _build_chart_meshes(charts: list[DensityChart], params: MeshParams, level: int):
    node_keys: dict = {}
    positions: list = []
    meshes = {}
    excluded_total = 0

    def node_for(key, pos_chart, pos):
        if key not in node_keys:
            node_keys[key] = len(positions)
            positions.append((pos_chart, pos))
        return node_keys[key]

    t_boundary = None
    for chart in charts:
        grid, boundary, rings, excluded = _chart_points(chart, params, level)
        excluded_total += excluded
        if excluded:
            logger.debug(f"[metric] [{chart.name}] {excluded} grid points inside puncture rings excluded")
        points = [grid, boundary] + [z for ring in rings for _, z in ring]
        points = np.concatenate(points)

        nodes = []
        for z in grid:
            nodes.append(node_for((chart.name, complex(z)), chart.name, complex(z)))
        for i, z in enumerate(boundary):
            if chart.glued and t_boundary is not None:
                # boundary of the second glued chart: s = 1/t
                t = t_boundary[i]
                nodes.append(node_for(("t", complex(t)), "t", complex(t)))
            else:
                nodes.append(node_for((chart.name, complex(z)), chart.name, complex(z)))
        ring_nodes = {}
        offset = len(grid) + len(boundary)
        for k, ring in enumerate(rings):
            entries = []
            for r, zs in ring:
                ids = [node_for((chart.name, complex(z)), chart.name, complex(z)) for z in zs]
                nodes.extend(ids)
                entries.append((float(r), np.array(ids), np.arange(offset, offset + len(zs))))
                offset += len(zs)
            ring_nodes[k] = entries
        if chart.glued and t_boundary is None:
            t_boundary = boundary

        # glued second chart sees the shared circle as s = conj(t)/R²
        if chart.glued and chart.name != "t":
            points[len(grid):len(grid) + len(boundary)] = 1 / t_boundary

        tri = Delaunay(np.column_stack([points.real, points.imag]))
        phi = np.asarray(chart.density(points), dtype=float)
        if np.any(~np.isfinite(phi)) or np.any(phi <= 0):
            raise MeshError(f"[{chart.name}] density not positive on the mesh", min=float(np.nanmin(phi)))
        meshes[chart.name] = ChartMesh(chart, points, np.array(nodes), tri, phi, ring_nodes)

    return meshes, node_keys, positions, excluded_total


def _chart_edges(mesh: ChartMesh, params: MeshParams) -> np.ndarray:
    """Local index pairs: Delaunay edges plus explicit ring, radial and second-ring edges."""
    simplices = mesh.triangulation.simplices
    pairs = [simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [0, 2]]]
    for entries in mesh.rings.values():
        for j, (_, _, local) in enumerate(entries):
            pairs.append(np.column_stack([local, np.roll(local, -1)]))
            if params.second_ring_edges:
                pairs.append(np.column_stack([local, np.roll(local, -2)]))
            if j + 1 < len(entries):
                inner = entries[j + 1][2]
                pairs.append(np.column_stack([local, inner]))
                if params.second_ring_edges:
                    pairs.append(np.column_stack([local, np.roll(inner, 1)]))
                    pairs.append(np.column_stack([local, np.roll(inner, -1)]))
    pairs = np.sort(np.concatenate(pairs), axis=1)
    pairs = np.unique(pairs, axis=0)
    return pairs[pairs[:, 0] != pairs[:, 1]]


def _triangle_integral(mesh: ChartMesh) -> float:
    """∫ φ dA over the chart's triangulation (3-point interior rule)."""
    tri = mesh.points[mesh.triangulation.simplices]
    area = 0.5 * np.abs(((tri[:, 1] - tri[:, 0]) * np.conj(tri[:, 2] - tri[:, 0])).imag)
    qp = tri @ _TRI_RULE.T
    punct = mesh.chart.puncture_array()
    vals = np.zeros(qp.shape)
    ok = np.ones(qp.shape, dtype=bool)
    if punct.size:
        ok = np.abs(qp[..., None] - punct).min(axis=-1) > 1e-9
    vals[ok] = mesh.chart.density(qp[ok])
    return float(np.sum(area * vals.mean(axis=1)))


# ---------------------------------------------------------------------------
# Limit metric
# ---------------------------------------------------------------------------

class LimitMetric:
    """
    g = 2cφ|dy|² on the punctured base, area form cφ·i dy∧dȳ, c fixed so total area is 1.
    The graph stores raw edge lengths ∫√φ|dz|; `scale` = √(2c) turns them into g-lengths.
    """

    def __init__(self, label, charts, params, level, meshes, node_keys, positions, graph, integral, excluded):
        self.label = label
        self.charts = charts
        self.params = params
        self.level = level
        self.meshes = meshes
        self.node_keys = node_keys
        self.positions = positions
        self.graph = graph
        self.integral = integral
        self.c = 1 / (2 * integral)
        self.scale = math.sqrt(2 * self.c)
        self.excluded = excluded

    @property
    def vertex_count(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def total_area(self) -> float:
        return 2 * self.c * self.integral

    def chart(self, name: str) -> DensityChart:
        return self.meshes[name].chart

    def punctures(self) -> list[tuple[str, int, complex]]:
        return [(name, k, p) for name, m in self.meshes.items() for k, p in enumerate(m.chart.punctures)]

    def innermost_ring(self, chart: str, k: int) -> np.ndarray:
        return self.meshes[chart].rings[k][-1][1]

    def position_in(self, node: int, chart: str) -> complex:
        home, z = self.positions[node]
        if home == chart:
            return z
        if home == "t" and chart != "t":
            return 1 / z
        raise MeshError(f"node {node} has no position in chart {chart}")

    def interpolator(self, chart: str) -> LinearNDInterpolator:
        mesh = self.meshes[chart]
        if mesh.interpolator is None:
            mesh.interpolator = LinearNDInterpolator(mesh.triangulation, np.log(mesh.phi))
        return mesh.interpolator


def build_metric(source, params: Optional[MeshParams] = None, level: int = 0, label: Optional[str] = None) -> LimitMetric:
    """
    Mesh both charts of the projective line (or the given synthetic charts), weight every
    edge by its integrated density and normalize total area to 1.
    """
    params = params or MeshParams()
    if isinstance(source, WeierstrassFibration):
        charts = fibration_charts(source)
        label = label or source.label
    else:
        charts = list(source)
        label = label or "synthetic"

    meshes, node_keys, positions, excluded = _build_chart_meshes(charts, params, level)
    r_cut = params.r_min / 2

    graph = nx.Graph()
    graph.add_nodes_from(range(len(positions)))
    dropped = 0
    for name, mesh in meshes.items():
        pairs = _chart_edges(mesh, params)
        z0, z1 = mesh.points[pairs[:, 0]], mesh.points[pairs[:, 1]]
        punct = mesh.chart.puncture_array()
        delta, _ = _closest_approach(z0, z1, punct)
        keep = delta >= r_cut
        dropped += int((~keep).sum())
        pairs, z0, z1 = pairs[keep], z0[keep], z1[keep]
        weights = _edge_integrals(mesh.chart.density, z0, z1, punct, params.gl_nodes)
        for (i, j), w in zip(mesh.nodes[pairs], weights):
            if i == j:
                continue
            if not graph.has_edge(i, j) or graph[i][j]["weight"] > w:
                graph.add_edge(int(i), int(j), weight=float(w), chart=name)

    if not nx.is_connected(graph):
        raise MeshError(f"[{label}] mesh graph is disconnected", components=nx.number_connected_components(graph))

    integral = sum(_triangle_integral(mesh) for mesh in meshes.values())
    metric = LimitMetric(label, charts, params, level, meshes, node_keys, positions, graph, integral, excluded)
    logger.info(
        f"[metric] [{label}] level={level} vertices={metric.vertex_count} edges={graph.number_of_edges()} "
        f"dropped={dropped} integral={integral:.6g}"
    )
    return metric


def refine(L: LimitMetric) -> LimitMetric:
    """Next refinement level; every vertex and edge of L survives, so graph distances only shrink."""
    fine = build_metric(L.charts, L.params, L.level + 1, L.label)
    for i, j, data in L.graph.edges(data=True):
        try:
            a = fine.node_keys[_key_of(L, i)]
            b = fine.node_keys[_key_of(L, j)]
        except KeyError as exc:
            raise MeshError(f"[{L.label}] refined mesh lost a vertex", key=str(exc)) from exc
        if not fine.graph.has_edge(a, b) or fine.graph[a][b]["weight"] > data["weight"]:
            fine.graph.add_edge(a, b, weight=data["weight"], chart=data["chart"])
    return fine


def _key_of(L: LimitMetric, node: int):
    home, z = L.positions[node]
    return (home, z)


# ---------------------------------------------------------------------------
# Lengths and distances
# ---------------------------------------------------------------------------

def path_length(L: LimitMetric, polyline, chart: Optional[str] = None) -> float:
    """g-length Σ ∫√(2cφ)|dy| of a polyline given in one chart's coordinates."""
    chart = chart or next(iter(L.meshes))
    ch = L.chart(chart)
    pts = np.asarray(polyline, dtype=complex)
    punct = ch.puncture_array()
    total = 0.0
    for z0, z1 in zip(pts[:-1], pts[1:]):
        total += segment_integral(ch.density, complex(z0), complex(z1), punct, L.params.r_min / 2, L.params.gl_nodes)
    return L.scale * total


def _anchors(L: LimitMetric, q: complex, chart: str) -> list[tuple[int, float]]:
    mesh = L.meshes[chart]
    simplex = int(mesh.triangulation.find_simplex(np.array([[q.real, q.imag]]))[0])
    if simplex < 0:
        raise MeshError(f"point {q} lies outside chart {chart}", point=[q.real, q.imag], chart=chart)
    out = []
    punct = mesh.chart.puncture_array()
    for local in mesh.triangulation.simplices[simplex]:
        z = mesh.points[local]
        raw = segment_integral(mesh.chart.density, complex(q), complex(z), punct, L.params.r_min / 2, L.params.gl_nodes)
        out.append((int(mesh.nodes[local]), raw))
    return out


def distance_map(L: LimitMetric, q: complex, chart: Optional[str] = None) -> dict:
    """Raw graph distance from q to every node (multi-anchor single-source Dijkstra)."""
    chart = chart or next(iter(L.meshes))
    best: dict = {}
    for node, offset in _anchors(L, q, chart):
        lengths = nx.single_source_dijkstra_path_length(L.graph, node)
        for v, d in lengths.items():
            d += offset
            if d < best.get(v, math.inf):
                best[v] = d
    return best


@dataclass
class DistanceResult:
    distance: float              # min of graph and smoothed lengths, g-units
    graph_distance: float
    smoothed_distance: float
    path: list                   # [(chart, polyline)] pieces of the shortest path
    refinement_gap: Optional[float] = None   # coarse minus refined distance, when a refinement was given


def _path_pieces(L: LimitMetric, q1, c1, q2, c2, nodes: list) -> list:
    """Split a node path into polylines, one per maximal run of edges in a single chart."""
    pieces = []
    current_chart, current = c1, [q1, L.position_in(nodes[0], c1)]
    for a, b in zip(nodes[:-1], nodes[1:]):
        edge_chart = L.graph[a][b]["chart"]
        if edge_chart != current_chart:
            if len(current) > 1:
                pieces.append((current_chart, current))
            current_chart, current = edge_chart, [L.position_in(a, edge_chart)]
        current.append(L.position_in(b, current_chart))
    if current_chart != c2:
        pieces.append((current_chart, current))
        current_chart, current = c2, [L.position_in(nodes[-1], c2)]
    current.append(q2)
    pieces.append((current_chart, current))
    return pieces


def _local_cost(interp, za, zb):
    # approximate ∫√φ |dz| with the interpolated log φ at three interior points
    mids = [za + (zb - za) * s for s in (0.1127016653792583, 0.5, 0.8872983346207417)]
    w = (5 / 18, 8 / 18, 5 / 18)
    half = sum(wi * np.exp(0.5 * interp(m.real, m.imag)) for wi, m in zip(w, mids))
    return np.abs(zb - za) * half


def smooth_polyline(L: LimitMetric, chart: str, polyline, sweeps: int = 200) -> np.ndarray:
    """
    Shorten a polyline with fixed endpoints: greedy vertex removal, then midpoint
    subdivision and red-black coordinate descent on interior vertices.
    """
    interp = L.interpolator(chart)
    ch = L.chart(chart)
    punct = ch.puncture_array()
    guard = 2 * L.params.r_min
    pts = np.asarray(polyline, dtype=complex)

    def admissible(z):
        ok = np.abs(z) <= ch.radius
        if punct.size:
            ok &= np.abs(z[..., None] - punct).min(axis=-1) > guard
        return ok & np.isfinite(interp(z.real, z.imag))

    def segment_clear(za, zb):
        if not punct.size:
            return np.ones(np.shape(za), dtype=bool)
        delta, _ = _closest_approach(np.atleast_1d(za), np.atleast_1d(zb), punct)
        return delta > guard

    # greedy shortcuts
    changed = True
    while changed and len(pts) > 2:
        changed = False
        for parity in (1, 2):
            if len(pts) <= 2:
                break
            idx = np.arange(parity, len(pts) - 1, 2)
            if idx.size == 0:
                continue
            old = _local_cost(interp, pts[idx - 1], pts[idx]) + _local_cost(interp, pts[idx], pts[idx + 1])
            new = _local_cost(interp, pts[idx - 1], pts[idx + 1])
            drop = idx[(new < old) & segment_clear(pts[idx - 1], pts[idx + 1])]
            if drop.size:
                pts = np.delete(pts, drop)
                changed = True

    # subdivide, then relax
    mids = (pts[:-1] + pts[1:]) / 2
    fine = np.empty(2 * len(pts) - 1, dtype=complex)
    fine[0::2], fine[1::2] = pts, mids
    pts = fine
    step = np.abs(np.diff(pts)).mean() / 4 if len(pts) > 1 else 0.0
    for _ in range(sweeps):
        if len(pts) <= 2 or step < 1e-12:
            break
        moved = False
        for parity in (1, 2):
            idx = np.arange(parity, len(pts) - 1, 2)
            if idx.size == 0:
                continue
            prev, cur, nxt = pts[idx - 1], pts[idx], pts[idx + 1]
            tangent = nxt - prev
            normal = 1j * tangent / np.maximum(np.abs(tangent), 1e-300)
            candidates = [cur, (prev + nxt) / 2, cur + step * normal, cur - step * normal]
            costs = []
            for z in candidates:
                c = _local_cost(interp, prev, z) + _local_cost(interp, z, nxt)
                c = np.where(admissible(z) & segment_clear(prev, z) & segment_clear(z, nxt), c, np.inf)
                costs.append(np.nan_to_num(c, nan=np.inf))
            costs = np.array(costs)
            choice = np.argmin(costs, axis=0)
            if np.any(choice != 0):
                moved = True
            pts[idx] = np.choose(choice, candidates)
        if not moved:
            step /= 2
    return pts


def distance(L: LimitMetric, q1: complex, q2: complex, chart1: Optional[str] = None,
             chart2: Optional[str] = None, smooth: bool = True,
             refined: Optional[LimitMetric] = None) -> DistanceResult:
    """
    Dijkstra over the 3×3 anchor pairs, then polyline smoothing; both are upper bounds.
    With `refined`, the distance is measured on the refined mesh as well and the
    result carries the refinement gap, which is non-negative up to smoothing noise.
    """
    if refined is not None:
        coarse = distance(L, q1, q2, chart1, chart2, smooth)
        fine = distance(refined, q1, q2, chart1, chart2, smooth)
        fine.refinement_gap = coarse.distance - fine.distance
        return fine
    chart1 = chart1 or next(iter(L.meshes))
    chart2 = chart2 or chart1
    a1, a2 = _anchors(L, complex(q1), chart1), _anchors(L, complex(q2), chart2)
    best, best_nodes = math.inf, None
    for n1, o1 in a1:
        for n2, o2 in a2:
            try:
                d, nodes = nx.bidirectional_dijkstra(L.graph, n1, n2)
            except nx.NetworkXNoPath:
                raise MeshError("no path between the anchor vertices", source=n1, target=n2)
            total = o1 + d + o2
            if total < best:
                best, best_nodes = total, nodes

    graph_distance = L.scale * best
    pieces = _path_pieces(L, complex(q1), chart1, complex(q2), chart2, best_nodes)
    smoothed_total = 0.0
    smoothed_pieces = []
    for chart, poly in pieces:
        poly = np.asarray(poly, dtype=complex)
        length = path_length(L, poly, chart)
        if smooth and len(poly) > 2:
            candidate = smooth_polyline(L, chart, poly)
            try:
                shorter = path_length(L, candidate, chart)
            except MeshError:
                shorter = math.inf
            if shorter < length:
                poly, length = candidate, shorter
        smoothed_pieces.append((chart, poly))
        smoothed_total += length

    return DistanceResult(
        distance=min(graph_distance, smoothed_total),
        graph_distance=graph_distance,
        smoothed_distance=smoothed_total,
        path=smoothed_pieces,
    )


def distance_to_singular(L: LimitMetric, q: complex, puncture: int, chart: Optional[str] = None,
                         q_chart: Optional[str] = None, tol: float = config.CAUCHY_TOL) -> dict:
    """
    d(q, q_s) for q_s on the dyadic rings ρ_s = 2^−s around the puncture, at 8 angles.
    Converged when the last increment is below tol; otherwise a geometric tail is
    extrapolated, or the sequence is flagged as not Cauchy.
    """
    chart = chart or next(iter(L.meshes))
    q_chart = q_chart or chart
    dmap = distance_map(L, complex(q), q_chart)
    rings = L.meshes[chart].rings[puncture]

    radii, sequence, spread = [], [], []
    for r, ids, _ in rings:
        picks = ids[:: max(1, len(ids) // _DISTANCE_ANGLES)][:_DISTANCE_ANGLES]
        values = L.scale * np.array([dmap[int(v)] for v in picks])
        radii.append(r)
        sequence.append(float(values.min()))
        spread.append(float(values.max() - values.min()))

    sequence = np.array(sequence)
    increments = np.diff(sequence)
    p = L.meshes[chart].chart.punctures[puncture]
    r_last = radii[-1]
    ring = p + r_last * np.exp(2j * np.pi * np.arange(65) / 64)
    circle_length = path_length(L, ring, chart)

    converged = bool(abs(increments[-1]) < tol)
    extrapolated = False
    failed = False
    limit = float(sequence[-1])
    if not converged:
        x0, x1, x2 = sequence[-3:]
        ratio = (x2 - x1) / (x1 - x0) if x1 != x0 else math.inf
        if 0 < ratio < 1:
            limit = float(x2 + (x2 - x1) * ratio / (1 - ratio))
            extrapolated = True
        else:
            failed = True
            logger.error(f"[metric] [{L.label}] distance to puncture {chart}:{puncture} is not Cauchy")

    return {
        "limit": limit,
        "radii": radii,
        "sequence": sequence.tolist(),
        "increments": increments.tolist(),
        "spread": spread,
        "circle_length": circle_length,
        "angle_independent": bool(spread[-1] < 2 * circle_length + 1e-12),
        "converged": converged,
        "extrapolated": extrapolated,
        "failed": failed,
    }


def _eccentricity_sweep(L: LimitMetric, source) -> tuple[int, float]:
    lengths = nx.single_source_dijkstra_path_length(L.graph, source)
    far = max(lengths, key=lengths.get)
    return far, lengths[far]


def diameter(L: LimitMetric, puncture_maps: Optional[dict] = None) -> float:
    """Double sweep from vertex 0, plus eccentricities of the punctures' innermost rings."""
    far, _ = _eccentricity_sweep(L, 0)
    _, ecc = _eccentricity_sweep(L, far)
    best = ecc
    for dmap in (puncture_maps or {}).values():
        best = max(best, max(dmap.values()))
    return L.scale * best


def _puncture_maps(L: LimitMetric) -> dict:
    maps = {}
    for chart, k, _ in L.punctures():
        sources = {int(v) for v in L.innermost_ring(chart, k)}
        maps[(chart, k)] = nx.multi_source_dijkstra_path_length(L.graph, sources)
    return maps


def _pairwise(L: LimitMetric, maps: dict) -> tuple[list, np.ndarray]:
    keys = sorted(maps)
    D = np.zeros((len(keys), len(keys)))
    for i, a in enumerate(keys):
        for j, b in enumerate(keys):
            if i < j:
                ring = L.innermost_ring(*b)
                D[i, j] = D[j, i] = L.scale * min(maps[a][int(v)] for v in ring)
    return keys, D


def completion_summary(L: LimitMetric, refined: Optional[LimitMetric] = None) -> dict:
    """
    Pairwise distances between the completion points (innermost rings) and the diameter.
    With a refined metric the refinement gap bounds the error; pairs closer than ten
    gaps are reported as merge candidates.
    """
    maps = _puncture_maps(L)
    keys, D = _pairwise(L, maps)
    diam = diameter(L, maps)
    gap = 0.0
    diam_fine = None
    if refined is not None:
        fine_maps = _puncture_maps(refined)
        _, D_fine = _pairwise(refined, fine_maps)
        gap = float(np.max(np.abs(D - D_fine))) if D.size else 0.0
        diam_fine = diameter(refined, fine_maps)
        D = D_fine

    merge = []
    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            if D[i, j] <= max(10 * gap, 1e-12):
                merge.append((keys[i], keys[j], float(D[i, j])))
    if merge:
        logger.error(f"[metric] [{L.label}] {len(merge)} merge candidates among completion points")

    return {
        "points": [f"{c}:{k}" for c, k in keys],
        "pairwise": D,
        "diameter": diam_fine if diam_fine is not None else diam,
        "diameter_coarse": diam,
        "diameter_change": abs(diam_fine - diam) / diam_fine if diam_fine else None,
        "refinement_gap": gap,
        "min_pairwise": float(D[np.triu_indices(len(keys), 1)].min()) if len(keys) > 1 else None,
        "merge_candidates": merge,
        "distinct": not merge,
    }


def verify_length_bound(L: LimitMetric, puncture: int, alpha: float, d: int,
                        chart: Optional[str] = None, levels: int = config.LENGTH_BOUND_LEVELS + 4) -> dict:
    """
    For dyadic ρ, the longest connecting curve (radial, arc at the larger radius, radial)
    between sampled pairs in the punctured disc, divided by ρ^{1+α/2}(−log ρ)^d. Passes
    when the ratio is finite and does not grow monotonically over the last six levels.
    """
    chart = chart or next(iter(L.meshes))
    ch = L.chart(chart)
    p = ch.punctures[puncture]
    r_top = L.meshes[chart].rings[puncture][0][0] if puncture in L.meshes[chart].rings else 0.25
    radii = r_top * 2.0 ** -np.arange(1, levels + 1)
    radii = radii[radii / 4 >= L.params.r_min]
    thetas = np.pi / 2 * np.arange(4) + 0.1

    ratios = []
    for rho in radii:
        samples = [(rho * f, th) for f in (1.0, 0.5, 0.25) for th in thetas]
        sup = 0.0
        for i in range(len(samples)):
            for j in range(i + 1, len(samples)):
                sup = max(sup, path_length(L, _connecting_curve(p, samples[i], samples[j]), chart))
        ratios.append(sup / (rho ** (1 + alpha / 2) * (-math.log(rho)) ** d))

    ratios = np.array(ratios)
    tail = ratios[-config.LENGTH_BOUND_LEVELS:]
    growing = bool(len(tail) > 1 and np.all(np.diff(tail) > 1e-6 * tail[:-1]))
    passed = bool(np.all(np.isfinite(ratios)) and not growing)
    if not passed:
        logger.error(f"[metric] [{L.label}] length bound fails at {chart}:{puncture} (alpha={alpha}, d={d})")
    return {"radii": radii.tolist(), "ratios": ratios.tolist(), "C_est": float(ratios.max()), "passed": passed}


def _connecting_curve(p: complex, first, second, arc_points: int = 64) -> np.ndarray:
    (r1, t1), (r2, t2) = first, second
    r = max(r1, r2)
    sweep = (t2 - t1 + np.pi) % (2 * np.pi) - np.pi
    n = max(2, int(math.ceil(abs(sweep) / (2 * np.pi) * arc_points)) + 1)
    arc = p + r * np.exp(1j * (t1 + sweep * np.linspace(0, 1, n)))
    return np.concatenate([[p + r1 * np.exp(1j * t1)], arc, [p + r2 * np.exp(1j * t2)]])


def plot_density(L: LimitMetric, path: str, chart: Optional[str] = None) -> None:
    """SVG heat map of log φ over one chart's mesh."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    chart = chart or next(iter(L.meshes))
    mesh = L.meshes[chart]
    fig, ax = plt.subplots(figsize=(5, 5))
    tpc = ax.tripcolor(mesh.points.real, mesh.points.imag, mesh.triangulation.simplices,
                       np.log(mesh.phi), shading="gouraud")
    fig.colorbar(tpc, ax=ax, label="log φ")
    ax.set_aspect("equal")
    ax.set_title(f"{L.label} [{chart}]")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
