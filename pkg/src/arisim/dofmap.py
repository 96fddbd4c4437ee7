"""Degree-of-freedom maps over candidate surface positions and Light-Point choice."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import ArrayGeometry, resolvable_count, resolvable_subset
from .env import Environment, LayeredMedium
from .errors import EmptyMap, InsufficientPaths, NoEigenray, ValidationError
from .raytrace import Eigenray, RayFan, TraceOptions, find_eigenrays


@dataclass(frozen=True)
class GridSpec:
    """Rectangular scan region split into n_r x n_z cells sampled at their centres."""

    r_min: float
    r_max: float
    z_min: float
    z_max: float
    n_r: int
    n_z: int

    def __post_init__(self):
        if not self.r_min < self.r_max:
            raise ValidationError("grid needs r_min < r_max")
        if not self.z_min < self.z_max:
            raise ValidationError("grid needs z_min < z_max")
        if self.n_r < 1 or self.n_z < 1:
            raise ValidationError("grid counts must be >= 1")

    @property
    def ranges(self) -> np.ndarray:
        step = (self.r_max - self.r_min) / self.n_r
        return self.r_min + (np.arange(self.n_r) + 0.5) * step

    @property
    def depths(self) -> np.ndarray:
        step = (self.z_max - self.z_min) / self.n_z
        return self.z_min + (np.arange(self.n_z) + 0.5) * step

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.r_min, self.r_max, self.z_min, self.z_max,
                        self.n_r * factor, self.n_z * factor)


@dataclass(frozen=True)
class DoFCell:
    p: tuple[float, float]
    r1: int
    r2: int
    sup_dof: int
    tl_metric_db: float | None = None


@dataclass(frozen=True, eq=False)
class DoFMapResult:
    grid: GridSpec
    cells: list[list[DoFCell]]  # indexed [iz][ir]
    d_max: int
    light_points: list[tuple[float, float]]
    optimum: tuple[float, float] | None

    def array(self, name: str) -> np.ndarray:
        """Field ``name`` of every cell as an (n_z, n_r) array (NaN for absent TL)."""
        def get(c):
            v = getattr(c, name)
            return np.nan if v is None else v
        return np.array([[get(c) for c in row] for row in self.cells], dtype=float)

    def cell_at(self, p) -> DoFCell:
        for row in self.cells:
            for c in row:
                if c.p == tuple(p):
                    return c
        raise KeyError(p)


@dataclass(frozen=True)
class SidePaths:
    """Angles (directional sines) and losses of the eigenrays on one hop.

    ``near`` is the angle at the surface position, ``far`` the angle at the
    transmitter (hop 1) or receiver (hop 2).
    """

    far: np.ndarray
    near: np.ndarray
    tl: np.ndarray

    @classmethod
    def empty(cls):
        z = np.zeros(0)
        return cls(z, z, z)

    def __len__(self):
        return len(self.tl)

    def witness(self, aperture_near: float) -> np.ndarray:
        """Indices of the resolvable subset chosen at the surface end."""
        return np.array(resolvable_subset(self.near, aperture_near), dtype=int)


def hop1_paths(eigenrays: list[Eigenray]) -> SidePaths:
    """tx -> p eigenrays: departure at the transmitter, arrival at the surface."""
    return SidePaths(np.sin([e.departure_angle for e in eigenrays]),
                     np.sin([e.arrival_angle for e in eigenrays]),
                     np.array([e.tl_db for e in eigenrays]))


def hop2_paths(eigenrays: list[Eigenray]) -> SidePaths:
    """p -> rx eigenrays: departure at the surface, arrival at the receiver."""
    return SidePaths(np.sin([e.arrival_angle for e in eigenrays]),
                     np.sin([e.departure_angle for e in eigenrays]),
                     np.array([e.tl_db for e in eigenrays]))


def tl_metric(side1, side2, d: int) -> float:
    """Smallest summed loss over d paths from each side, by exhaustive enumeration.

    ``side1``/``side2`` are sequences of losses in dB (or eigenrays) that
    are already mutually resolvable.
    """
    l1 = [getattr(x, "tl_db", x) for x in side1]
    l2 = [getattr(x, "tl_db", x) for x in side2]
    if d < 1:
        raise ValidationError("d must be >= 1")
    if len(l1) < d or len(l2) < d:
        raise InsufficientPaths(f"need {d} resolvable paths per side, have {len(l1)} and {len(l2)}")
    best1 = min(sum(c) for c in itertools.combinations(l1, d))
    best2 = min(sum(c) for c in itertools.combinations(l2, d))
    return float(best1 + best2)


def best_subsets(side1_tl, side2_tl, d: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Index subsets attaining ``tl_metric`` (ties go to the lexicographically first)."""
    def pick(tl):
        if len(tl) < d:
            raise InsufficientPaths(f"need {d} paths, have {len(tl)}")
        return min(itertools.combinations(range(len(tl)), d),
                   key=lambda c: (sum(tl[i] for i in c), c))
    return pick(list(side1_tl)), pick(list(side2_tl))


def score_cell(p, hop1: SidePaths, hop2: SidePaths, tx_geom: ArrayGeometry,
               rx_geom: ArrayGeometry, aris_geom: ArrayGeometry) -> DoFCell:
    r1 = min(resolvable_count(hop1.far, tx_geom.aperture),
             resolvable_count(hop1.near, aris_geom.aperture)) if len(hop1) else 0
    r2 = min(resolvable_count(hop2.near, aris_geom.aperture),
             resolvable_count(hop2.far, rx_geom.aperture)) if len(hop2) else 0
    sup = min(r1, r2)
    tl = None
    if sup >= 1:
        w1 = hop1.witness(aris_geom.aperture)
        w2 = hop2.witness(aris_geom.aperture)
        tl = tl_metric(hop1.tl[w1], hop2.tl[w2], sup)
    return DoFCell((float(p[0]), float(p[1])), int(r1), int(r2), int(sup), tl)


def _same_point(a, b) -> bool:
    return abs(a[0] - b[0]) < 1e-9 and abs(a[1] - b[1]) < 1e-9


def evaluate_point(env: Environment, medium: LayeredMedium, tx_pos, rx_pos,
                   tx_geom: ArrayGeometry, rx_geom: ArrayGeometry, aris_geom: ArrayGeometry,
                   p, opts: TraceOptions, f_c: float = 9000.0) -> DoFCell:
    """Score one candidate position by tracing both hops from scratch."""
    H = medium.total_depth
    if not (0 < p[1] < H):
        raise ValidationError("candidate position must lie strictly inside the water column")
    if _same_point(p, tx_pos) or _same_point(p, rx_pos):
        raise ValidationError("candidate position coincides with a terminal")
    try:
        hop1 = hop1_paths(find_eigenrays(medium, env, tx_pos, p, opts, f_c))
    except NoEigenray:
        hop1 = SidePaths.empty()
    try:
        hop2 = hop2_paths(find_eigenrays(medium, env, p, rx_pos, opts, f_c))
    except NoEigenray:
        hop2 = SidePaths.empty()
    return score_cell(p, hop1, hop2, tx_geom, rx_geom, aris_geom)


def _fan_sides(fan: RayFan, col: int, depths, env: Environment, forward: bool):
    """Per-depth SidePaths for one grid column, read off a precomputed fan."""
    out = [SidePaths.empty() for _ in depths]
    if fan.distances[col] <= 0:
        return out
    roots = fan.roots(col, depths)
    if roots["k"].size == 0:
        return out
    s, surf, bot = roots["s"], roots["surf"], roots["bot"]
    tl = (20.0 * np.log10(np.maximum(s, 1.0)) + env.absorption_db_per_km * s / 1000.0
          + surf * env.surface_loss_db + bot * env.bottom_loss_db)
    dep, arr = np.sin(roots["dep"]), np.sin(roots["arr"])
    if forward:
        far, near = dep, arr
    else:
        # fan launched from the receiver: reversing the path flips both angles
        far, near = -dep, -arr
    order = np.argsort(roots["k"], kind="stable")
    k = roots["k"][order]
    bounds = np.searchsorted(k, np.arange(len(depths) + 1))
    for iz in range(len(depths)):
        a, b = bounds[iz], bounds[iz + 1]
        if b > a:
            sel = order[a:b]
            out[iz] = SidePaths(far[sel], near[sel], tl[sel])
    return out


def build_dof_map(scenario, grid: GridSpec | None = None) -> DoFMapResult:
    """Score every grid cell and locate the Light-Points.

    Both hops are read off two ray fans (one launched from each terminal, the
    receiver fan reversed by reciprocity), so each cell costs an interpolation
    rather than a fresh eigenray search.
    """
    grid = grid or scenario.grid
    env = scenario.env
    medium = scenario.medium()
    opts = scenario.trace_options()
    H = medium.total_depth
    ranges, depths = grid.ranges, grid.depths
    if grid.z_min < 0 or grid.z_max > H:
        raise ValidationError("grid must lie within the water column")
    tx, rx = scenario.tx_pos, scenario.rx_pos
    d_tx = np.abs(ranges - tx[0])
    d_rx = np.abs(ranges - rx[0])
    fan_tx = RayFan(medium, env, tx[1], opts.angle_grid, opts, d_tx)
    fan_rx = RayFan(medium, env, rx[1], opts.angle_grid, opts, d_rx)

    cells = [[None] * grid.n_r for _ in range(grid.n_z)]
    for ir, r in enumerate(ranges):
        side1 = _fan_sides(fan_tx, ir, depths, env, forward=True)
        side2 = _fan_sides(fan_rx, ir, depths, env, forward=False)
        for iz, z in enumerate(depths):
            p = (float(r), float(z))
            if _same_point(p, tx) or _same_point(p, rx) or not (0 < z < H):
                cells[iz][ir] = DoFCell(p, 0, 0, 0, None)
                continue
            cells[iz][ir] = score_cell(p, side1[iz], side2[iz], scenario.tx_geom,
                                       scenario.rx_geom, scenario.aris_geom)
    return _finish(grid, cells)


def _finish(grid: GridSpec, cells) -> DoFMapResult:
    d_max = max(c.sup_dof for row in cells for c in row)
    if d_max == 0:
        raise EmptyMap("no grid cell supports any degree of freedom")
    light = [c.p for row in cells for c in row if c.sup_dof == d_max]
    light.sort()
    result = DoFMapResult(grid, cells, d_max, light, None)
    return DoFMapResult(grid, cells, d_max, light, select_light_point(result))


def select_light_point(dof_map: DoFMapResult) -> tuple[float, float]:
    """Light-Point with the lowest loss metric; ties by smaller r, then smaller z."""
    if not dof_map.light_points:
        raise EmptyMap("no light points")
    lookup = {c.p: c for row in dof_map.cells for c in row}
    best = None
    for p in dof_map.light_points:
        cell = lookup.get(tuple(p))
        tl = math.inf if cell is None or cell.tl_metric_db is None else cell.tl_metric_db
        key = (tl, p[0], p[1])
        if best is None or key < best:
            best = key
    return (best[1], best[2])


def map_from_cells(grid: GridSpec, cells) -> DoFMapResult:
    """Assemble a result from precomputed cells (used by tests and tools)."""
    return _finish(grid, cells)
