"""Element coefficient algebra, capture weights and multi-beam synthesis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .channel import ArrayGeometry, steering_vector
from .errors import Infeasible, ValidationError

TOL = 1e-3


@dataclass(frozen=True)
class AstarGains:
    g_t: complex
    g_r: complex


@dataclass(frozen=True)
class AstarCoefficients:
    s: complex  # reflected
    t: complex  # transmitted


def astar_forward(gains: AstarGains) -> AstarCoefficients:
    """Amplifier gains -> (reflected, transmitted) element coefficients."""
    return AstarCoefficients(1j * (gains.g_t - gains.g_r) / 2, 1j * (gains.g_t + gains.g_r) / 2)


def astar_inverse(coeffs: AstarCoefficients) -> AstarGains:
    return AstarGains(-1j * (coeffs.t + coeffs.s), -1j * (coeffs.t - coeffs.s))


def capture_weights(incident_aoas, aris_side: ArrayGeometry) -> np.ndarray:
    """Per-element phase terms that co-phase each incident path, summed over paths."""
    phis = np.atleast_1d(np.asarray(incident_aoas, dtype=float))
    if phis.size == 0:
        raise ValidationError("need at least one incident path")
    t = np.arange(aris_side.n_elements)
    return np.exp(2j * np.pi * aris_side.spacing * np.outer(t, phis)).sum(axis=1)


def steering_matrix(aris_side: ArrayGeometry, angles) -> np.ndarray:
    """Rows are e_a(psi)^H for each psi."""
    return np.array([steering_vector(aris_side, a).conj() for a in np.atleast_1d(angles)])


def beam_pattern(weights, aris_side: ArrayGeometry, angles) -> np.ndarray:
    """|e_a(psi)^H w| at each directional sine."""
    w = np.asarray(weights, dtype=complex)
    return np.abs(steering_matrix(aris_side, angles) @ w)


def compose_phi(t_total, n_a: int) -> np.ndarray:
    """diag(T kron 1_Na): each vertical coefficient repeated across its row."""
    t_total = np.asarray(t_total, dtype=complex)
    if t_total.shape != (n_a,):
        raise ValidationError(f"coefficient vector must have length {n_a}")
    return np.diag(np.kron(t_total, np.ones(n_a)))


def angle_grid_sines(step_deg: float = 1.0) -> np.ndarray:
    deg = np.arange(-90.0, 90.0 + 1e-9, step_deg)
    return np.sin(np.radians(deg))


def default_sidelobe_grid(aris_side: ArrayGeometry, targets, step_deg: float = 1.0,
                          guard_factor: float = 1.0) -> np.ndarray:
    """1-degree grid over [-90, 90] deg minus a main-lobe guard band per target.

    The guard half-width is ``guard_factor / A``; at 1 it is the distance from
    the beam peak to its first null.
    """
    psi = angle_grid_sines(step_deg)
    guard = guard_factor / aris_side.aperture
    keep = np.ones(psi.size, dtype=bool)
    for t in np.atleast_1d(targets):
        keep &= np.abs(psi - t) >= guard
    return psi[keep]


@dataclass(frozen=True, eq=False)
class MultiBeamProblem:
    aris_side: ArrayGeometry
    target_aods: tuple[float, ...]
    g_req: tuple[float, ...]
    eps_cross: float
    g_max: float
    sidelobe_grid: tuple[float, ...] | None = None
    capture: np.ndarray | None = None

    def __post_init__(self):
        targets = tuple(float(x) for x in np.atleast_1d(self.target_aods))
        g_req = np.atleast_1d(np.asarray(self.g_req, dtype=float))
        if g_req.size == 1 and len(targets) > 1:
            g_req = np.repeat(g_req, len(targets))
        object.__setattr__(self, "target_aods", targets)
        object.__setattr__(self, "g_req", tuple(float(g) for g in g_req))
        if not targets:
            raise ValidationError("need at least one beam target")
        if len(self.g_req) != len(targets):
            raise ValidationError("one required gain per target")
        if min(self.g_req) <= 0 or self.eps_cross <= 0 or self.g_max <= 0:
            raise ValidationError("g_req, eps_cross and g_max must be positive")
        sep = 1.0 / self.aris_side.aperture
        srt = sorted(targets)
        if any(b - a < sep - 1e-12 for a, b in zip(srt, srt[1:])):
            raise ValidationError("beam targets must be separated by at least 1/aperture")
        if self.sidelobe_grid is None:
            object.__setattr__(self, "sidelobe_grid",
                               tuple(default_sidelobe_grid(self.aris_side, targets)))
        cap = np.ones(self.aris_side.n_elements, dtype=complex) if self.capture is None \
            else np.asarray(self.capture, dtype=complex)
        if cap.shape != (self.aris_side.n_elements,):
            raise ValidationError("capture weights must have one entry per element")
        object.__setattr__(self, "capture", cap)

    @property
    def n_beams(self) -> int:
        return len(self.target_aods)


@dataclass(frozen=True, eq=False)
class BeamSolution:
    t_g_per_beam: list[np.ndarray]
    t_total: np.ndarray
    beta: float
    feasible: bool
    status: str = ""
    capture: np.ndarray = field(default=None)


def _build(problem: MultiBeamProblem, families=("main", "cross", "side", "cap")):
    n = problem.aris_side.n_elements
    P = problem.n_beams
    T = [cp.Variable(n, complex=True, name=f"beam{p}") for p in range(P)]
    beta = cp.Variable(nonneg=True, name="beta")
    A_t = steering_matrix(problem.aris_side, problem.target_aods)
    A_s = steering_matrix(problem.aris_side, problem.sidelobe_grid)
    cons = []
    for p in range(P):
        if "main" in families:
            # main-lobe phase fixed to zero: Re(eta) >= G implies |eta| >= G
            cons.append(cp.real(A_t[p] @ T[p]) >= problem.g_req[p])
        if "cross" in families:
            for k in range(P):
                if k != p:
                    cons.append(cp.abs(A_t[p] @ T[k]) <= problem.eps_cross)
        if "side" in families and A_s.shape[0]:
            cons.append(cp.abs(A_s @ T[p]) <= beta)
    if "cap" in families:
        total = cp.multiply(problem.capture, sum(T))
        cons.append(cp.abs(total) <= problem.g_max)
    return T, beta, cons


def _solve(T, beta, cons, solver: str | None = None):
    prob = cp.Problem(cp.Minimize(beta), cons)
    if solver == cp.SCS:
        prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200_000)
        return prob
    try:
        prob.solve(solver=solver or cp.CLARABEL)
    except cp.error.SolverError:
        prob.solve(solver=cp.SCS, eps=1e-9, max_iters=200_000)
    return prob


def _diagnose(problem: MultiBeamProblem) -> str:
    for fams, name in ((("main", "cap"), "gain cap vs main-lobe floor"),
                       (("main", "cross", "cap"), "cross-interference ceiling")):
        T, beta, cons = _build(problem, fams)
        prob = _solve(T, beta, cons)
        if prob.status not in ("optimal", "optimal_inaccurate"):
            return name
    return "sidelobe bound"


def synthesize_multibeam(problem: MultiBeamProblem, raise_on_infeasible: bool = True,
                         solver: str | None = None) -> BeamSolution:
    """Minimise the common sidelobe bound subject to the beam constraints (SOCP).

    ``solver`` names a cvxpy backend; the default is an interior-point method.
    """
    T, beta, cons = _build(problem)
    prob = _solve(T, beta, cons, solver)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        family = _diagnose(problem)
        if raise_on_infeasible:
            raise Infeasible(f"beam synthesis status {prob.status}", family)
        n = problem.aris_side.n_elements
        zeros = [np.zeros(n, dtype=complex) for _ in T]
        return BeamSolution(zeros, np.zeros(n, dtype=complex), math.inf, False,
                            f"{prob.status}: {family}", problem.capture)
    weights = [np.asarray(t.value, dtype=complex) for t in T]
    total = problem.capture * sum(weights)
    sol = BeamSolution(weights, total, float(beta.value), True, prob.status, problem.capture)
    worst = min(r[3] for r in constraint_report(problem, sol, grid=problem.sidelobe_grid))
    if worst < -TOL:
        family = _diagnose(problem)
        if raise_on_infeasible:
            raise Infeasible(f"solver result violates constraints by {-worst:.3g}", family)
        return BeamSolution(weights, total, float(beta.value), False,
                            f"violation {-worst:.3g}: {family}", problem.capture)
    return sol


def baseline_weights(problem: MultiBeamProblem) -> list[np.ndarray]:
    """Matched steering per beam, scaled so each main lobe just meets its floor."""
    out = []
    for psi, g in zip(problem.target_aods, problem.g_req):
        e = steering_vector(problem.aris_side, psi)
        out.append(e * (g / np.vdot(e, e).real))
    return out


def max_sidelobe(weights_per_beam, problem: MultiBeamProblem, grid=None) -> float:
    grid = problem.sidelobe_grid if grid is None else grid
    return float(max(beam_pattern(w, problem.aris_side, grid).max() for w in weights_per_beam))


def constraint_report(problem: MultiBeamProblem, sol: BeamSolution, grid=None):
    """Rows of (constraint, bound, achieved, margin); margin >= 0 means satisfied."""
    grid = problem.sidelobe_grid if grid is None else grid
    side = problem.aris_side
    rows = []
    for p, (psi, g) in enumerate(zip(problem.target_aods, problem.g_req)):
        eta = abs(complex(steering_matrix(side, [psi])[0] @ sol.t_g_per_beam[p]))
        rows.append((f"main_lobe[{p}]", g, eta, eta - g))
    for p, psi in enumerate(problem.target_aods):
        for k in range(problem.n_beams):
            if k == p:
                continue
            leak = abs(complex(steering_matrix(side, [psi])[0] @ sol.t_g_per_beam[k]))
            rows.append((f"cross[{k}->{p}]", problem.eps_cross, leak, problem.eps_cross - leak))
    for p in range(problem.n_beams):
        lvl = float(beam_pattern(sol.t_g_per_beam[p], side, grid).max()) if len(grid) else 0.0
        rows.append((f"sidelobe[{p}]", sol.beta, lvl, sol.beta - lvl))
    cap = float(np.abs(sol.t_total).max())
    rows.append(("gain_cap", problem.g_max, cap, problem.g_max - cap))
    return rows
