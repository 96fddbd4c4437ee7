"""End-to-end joint deployment and beamforming run."""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .beamform import BeamSolution, MultiBeamProblem, capture_weights, compose_phi, synthesize_multibeam
from .capacity import CapacityRow, capacity_sweep
from .channel import (ArrayGeometry, ChannelTriple, assemble_aris_rx, assemble_direct,
                      assemble_tx_aris, effective_channel, numerical_rank, paths_from_eigenrays)
from .dofmap import DoFMapResult, GridSpec, best_subsets, build_dof_map, hop1_paths, hop2_paths
from .env import Environment, LayeredMedium, LinearGradient, Munk, discretize
from .errors import ArisimError, InsufficientPaths, ValidationError
from .raytrace import Eigenray, TraceOptions, find_eigenrays
from .tracking import (GaussianBeamField, TrackerConfig, TrackerState, gamma_track, peak_energy,
                       run_tracking)

DEFAULT_RHO_DB = tuple(float(x) for x in range(0, 81, 5))


@dataclass(frozen=True)
class BeamSpec:
    g_req: float = 0.8
    eps_cross: float = 0.01
    g_max: float = 1.0
    targets_deg: tuple[float, ...] | None = None  # standalone synthesis only

    def __post_init__(self):
        if self.targets_deg is not None:
            object.__setattr__(self, "targets_deg", tuple(float(t) for t in self.targets_deg))
        if min(self.g_req, self.eps_cross, self.g_max) <= 0:
            raise ValidationError("beam g_req, eps_cross and g_max must be positive")


@dataclass(frozen=True)
class TrackingSpec:
    """Beam field and tracker settings; ``i0`` defaults to half the eta stability limit."""

    sigma: float = 50.0
    i0: float | None = None
    delta: float = 0.5
    eta: float = 4.0
    max_iters: int = 50
    tol: float = 1e-4
    r_max: float = 100.0
    start_min: float = 60.0
    start_max: float = 70.0
    seed: int = 0
    center: tuple[float, float] | None = None

    def __post_init__(self):
        if self.center is not None:
            object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not 0 <= self.start_min <= self.start_max:
            raise ValidationError("tracking start offsets must satisfy 0 <= min <= max")

    def config(self) -> TrackerConfig:
        return TrackerConfig(self.delta, self.eta, self.max_iters, self.tol, self.r_max)

    def field(self, center, aris_side: ArrayGeometry, lambda_c: float) -> GaussianBeamField:
        i0 = self.i0
        if i0 is None:
            # eta*L = 1: half of the admissible step range
            unit = peak_energy(GaussianBeamField(1.0, self.sigma), aris_side, lambda_c)
            i0 = self.sigma ** 2 / (2.0 * self.eta * unit)
        return GaussianBeamField(i0, self.sigma, tuple(center))


@dataclass(frozen=True)
class Scenario:
    env: Environment
    tx_pos: tuple[float, float]
    rx_pos: tuple[float, float]
    grid: GridSpec
    n_layers: int = 100
    tx_geom: ArrayGeometry = ArrayGeometry(4, 0.73)
    rx_geom: ArrayGeometry = ArrayGeometry(4, 0.73)
    aris_geom: ArrayGeometry = ArrayGeometry(8, 0.5)
    f_c: float = 9000.0
    max_bounces: int = 1
    n_angles: int = 1701
    angle_span_deg: float = 85.0
    hit_tolerance: float = 1.0
    beam: BeamSpec = BeamSpec()
    tracking: TrackingSpec | None = None
    report_snr_db: float = 20.0
    rho_db: tuple[float, ...] = DEFAULT_RHO_DB
    c_ref: float = 1500.0

    def __post_init__(self):
        object.__setattr__(self, "tx_pos", tuple(float(v) for v in self.tx_pos))
        object.__setattr__(self, "rx_pos", tuple(float(v) for v in self.rx_pos))
        object.__setattr__(self, "rho_db", tuple(float(v) for v in self.rho_db))
        H = self.env.depth_H
        for name in ("tx_pos", "rx_pos"):
            z = getattr(self, name)[1]
            if not 0 <= z <= H:
                raise ValidationError(f"{name} depth {z} outside the water column [0, {H}]")
        if self.tx_pos == self.rx_pos:
            raise ValidationError("tx_pos and rx_pos coincide")
        if not self.f_c > 0:
            raise ValidationError("f_c must be positive")
        if self.n_layers < 1:
            raise ValidationError("n_layers must be >= 1")
        if self.n_angles < 2:
            raise ValidationError("n_angles must be >= 2")
        if not 0 < self.angle_span_deg < 90:
            raise ValidationError("angle_span_deg must lie in (0, 90)")
        if self.grid.z_min < 0 or self.grid.z_max > H:
            raise ValidationError("grid must lie within the water column")

    @property
    def lambda_c(self) -> float:
        return self.c_ref / self.f_c

    def medium(self) -> LayeredMedium:
        return discretize(self.env.profile, self.env.depth_H, self.n_layers)

    def trace_options(self) -> TraceOptions:
        s = self.angle_span_deg
        return TraceOptions.uniform(-s, s, self.n_angles, max_bounces=self.max_bounces,
                                    hit_tolerance=self.hit_tolerance)


def shallow_scenario(**kw) -> Scenario:
    """Downward-refracting 100 m channel; a short link inside a 5 km scan region."""
    base = dict(
        env=Environment(100.0, 0.5, 3.0, 0.8, LinearGradient(1500.0, 5e-5)),
        tx_pos=(0.0, 50.0), rx_pos=(500.0, 50.0),
        grid=GridSpec(0.0, 5000.0, 0.0, 100.0, 200, 100),
        n_layers=100, tracking=TrackingSpec())
    base.update(kw)
    return Scenario(**base)


def deep_scenario(**kw) -> Scenario:
    """Munk profile, 4 km deep, 50 km link."""
    base = dict(
        env=Environment(4000.0, 0.5, 3.0, 0.8, Munk(1500.0, 7.37e-3, 1300.0, 1300.0)),
        tx_pos=(0.0, 1000.0), rx_pos=(50000.0, 1000.0),
        grid=GridSpec(0.0, 50000.0, 0.0, 4000.0, 250, 120),
        n_layers=200, tracking=TrackingSpec())
    base.update(kw)
    return Scenario(**base)


@dataclass(frozen=True, eq=False)
class JointResult:
    p_star: tuple[float, float]
    d_max: int
    phi: np.ndarray
    h: np.ndarray
    h_eff: np.ndarray
    capacity_table: list[CapacityRow]
    traces: list[TrackerState] = field(default_factory=list)
    gamma: float = 1.0
    dof_map: DoFMapResult | None = None
    beams: BeamSolution | None = None
    hop1: list[Eigenray] = field(default_factory=list)
    hop2: list[Eigenray] = field(default_factory=list)
    direct: list[Eigenray] = field(default_factory=list)
    capture_aoas: tuple[float, ...] = ()
    target_aods: tuple[float, ...] = ()

    @property
    def rank_h(self) -> int:
        return numerical_rank(self.h)

    @property
    def rank_h_eff(self) -> int:
        return numerical_rank(self.h_eff)

    @property
    def cascade(self) -> np.ndarray:
        """The surface-routed part H2 Phi H1 alone."""
        return self.h_eff - self.h

    def row_at(self, rho_db: float) -> CapacityRow:
        for row in self.capacity_table:
            if abs(row.rho_db - rho_db) < 1e-9:
                return row
        raise KeyError(rho_db)


@contextlib.contextmanager
def stage(name: str):
    """Tag any simulator error raised inside with the stage it came from."""
    try:
        yield
    except ArisimError as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
            exc.args = (f"[{name}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
        raise


def select_paths(hop1: list[Eigenray], hop2: list[Eigenray], aris_geom: ArrayGeometry,
                 d: int) -> tuple[list[int], list[int]]:
    """Lowest-loss resolvable subsets of size d on each hop (indices into the lists)."""
    s1, s2 = hop1_paths(hop1), hop2_paths(hop2)
    w1, w2 = s1.witness(aris_geom.aperture), s2.witness(aris_geom.aperture)
    if len(w1) < d or len(w2) < d:
        raise InsufficientPaths(f"only {len(w1)} and {len(w2)} resolvable paths at the Light-Point")
    b1, b2 = best_subsets(s1.tl[w1], s2.tl[w2], d)
    return sorted(int(w1[i]) for i in b1), sorted(int(w2[i]) for i in b2)


def align_phase(triple: ChannelTriple, t_total: np.ndarray, rho_db, gamma: float = 1.0,
                step_deg: float = 1.0) -> np.ndarray:
    """Rotate all surface coefficients by one common phase.

    Every beam constraint is a magnitude, so the rotation is free; it is picked
    on a 1-degree grid to maximise the worst capacity gain over ``rho_db``.
    """
    na = int(round(math.sqrt(triple.H1.shape[0])))
    best, best_t = -math.inf, t_total
    for deg in np.arange(0.0, 360.0, step_deg):
        t = t_total * np.exp(1j * math.radians(deg))
        h_eff = effective_channel(triple, compose_phi(t, na))
        worst = min(r.c_with - r.c_no for r in capacity_sweep(triple.H, h_eff, rho_db, gamma))
        if worst > best + 1e-12:
            best, best_t = worst, t
    return best_t


def tracking_gamma(spec: TrackingSpec, scenario: Scenario, p_star, rng: np.random.Generator):
    """Run the tracker from a random offset around p_star; returns (trace, gamma)."""
    fld = spec.field(p_star, scenario.aris_geom, scenario.lambda_c)
    cfg = spec.config().check_step(fld, scenario.aris_geom, scenario.lambda_c)
    radius = rng.uniform(spec.start_min, spec.start_max)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    start = (p_star[0] + radius * math.cos(theta), p_star[1] + radius * math.sin(theta))
    trace = run_tracking(fld, cfg, start, scenario.aris_geom, scenario.lambda_c)
    a_max = peak_energy(fld, scenario.aris_geom, scenario.lambda_c)
    return trace, gamma_track(trace[-1].a_received, a_max)


def run_joint(scenario: Scenario, seed: int = 0, dof_map: DoFMapResult | None = None,
              force_zero_phi: bool = False) -> JointResult:
    """Map, Light-Point, path selection, beam synthesis, effective channel, capacity."""
    medium = scenario.medium()
    opts = scenario.trace_options()
    na = scenario.aris_geom.n_elements
    with stage("dofmap"):
        dmap = dof_map if dof_map is not None else build_dof_map(scenario)
    p = dmap.optimum
    with stage("eigenrays"):
        hop1 = find_eigenrays(medium, scenario.env, scenario.tx_pos, p, opts, scenario.f_c)
        hop2 = find_eigenrays(medium, scenario.env, p, scenario.rx_pos, opts, scenario.f_c)
        direct = find_eigenrays(medium, scenario.env, scenario.tx_pos, scenario.rx_pos, opts,
                                scenario.f_c)
    with stage("selection"):
        i1, i2 = select_paths(hop1, hop2, scenario.aris_geom, dmap.d_max)
    aoas = tuple(math.sin(hop1[i].arrival_angle) for i in i1)
    aods = tuple(math.sin(hop2[i].departure_angle) for i in i2)
    with stage("beamform"):
        cap = capture_weights(aoas, scenario.aris_geom)
        problem = MultiBeamProblem(scenario.aris_geom, aods, scenario.beam.g_req,
                                   scenario.beam.eps_cross, scenario.beam.g_max, capture=cap)
        beams = synthesize_multibeam(problem)
    with stage("channel"):
        triple = ChannelTriple(
            assemble_direct(paths_from_eigenrays(direct), scenario.tx_geom, scenario.rx_geom),
            assemble_tx_aris(paths_from_eigenrays(hop1), scenario.tx_geom, scenario.aris_geom),
            assemble_aris_rx(paths_from_eigenrays(hop2), scenario.rx_geom, scenario.aris_geom))
    traces: list[TrackerState] = []
    gamma = 1.0
    if scenario.tracking is not None:
        with stage("tracking"):
            traces, gamma = tracking_gamma(scenario.tracking, scenario, p,
                                           np.random.default_rng(seed))
    rho = sorted(set(scenario.rho_db) | {scenario.report_snr_db})
    with stage("channel"):
        if force_zero_phi:
            t_total = np.zeros(na, dtype=complex)
        else:
            t_total = align_phase(triple, beams.t_total, rho, gamma)
        phi = compose_phi(t_total, na)
        h_eff = effective_channel(triple, phi)
    with stage("capacity"):
        table = capacity_sweep(triple.H, h_eff, rho, gamma)
    return JointResult(p, dmap.d_max, phi, triple.H, h_eff, table, traces, gamma, dmap, beams,
                       hop1, hop2, direct, aoas, aods)


def with_overrides(scenario: Scenario, **kw) -> Scenario:
    return replace(scenario, **kw)
