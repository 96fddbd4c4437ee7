"""Acceptance criteria; each test prints one PASS/FAIL line (also echoed in the summary)."""

import hashlib
import itertools
import math
import time
from pathlib import Path

import numpy as np
import pytest

from arisim.beamform import (AstarGains, MultiBeamProblem, astar_forward, astar_inverse,
                             baseline_weights, constraint_report, max_sidelobe,
                             synthesize_multibeam)
from arisim.capacity import high_snr_slope, normalization
from arisim.channel import ArrayGeometry, numerical_rank
from arisim.cli import main
from arisim.dofmap import tl_metric
from arisim.env import Environment, LinearGradient, Munk, discretize
from arisim.pipeline import TrackingSpec, deep_scenario, run_joint, shallow_scenario
from arisim.raytrace import TraceOptions, find_eigenrays, trace_ray
from arisim.tracking import (analytic_gradient, estimate_gradient, gamma_track, peak_energy,
                             run_tracking)

ROOT = Path(__file__).resolve().parents[1]
RESULTS: list[str] = []


def report(n: int, what: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {what}" + (f" ({detail})" if detail else "")
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def shallow_run():
    t = time.perf_counter()
    res = run_joint(shallow_scenario(), seed=0)
    return res, time.perf_counter() - t


@pytest.fixture(scope="module")
def deep_run():
    t = time.perf_counter()
    res = run_joint(deep_scenario(), seed=0)
    return res, time.perf_counter() - t


def test_criterion_01_snell_invariant():
    munk = Munk(1500.0, 7.37e-3, 1300.0, 1300.0)
    env = Environment(4000.0, 0.5, 3.0, 0.8, munk)
    med = discretize(munk, 4000.0, 200)
    rng = np.random.default_rng(0)
    angles = rng.uniform(-1.3, 1.3, 1000)
    depths = rng.uniform(1.0, 3999.0, 1000)
    worst = 0.0
    t = time.perf_counter()
    for a, z in zip(angles, depths):
        if abs(a) < 1e-6:
            a = 1e-6
        ray = trace_ray(med, env, (0.0, z), a, TraceOptions((a,), max_bounces=2,
                                                             max_range=20_000.0))
        k = ray.snell_constants()
        worst = max(worst, float(np.max(np.abs(k - k[0])) / abs(k[0])))
    dt = time.perf_counter() - t
    report(1, "Snell invariant over 1000 Munk rays", worst <= 1e-9 and dt < 5.0,
           f"max rel deviation {worst:.2e}, {dt:.2f} s")


def test_criterion_02_constant_medium_oracle():
    H = 100.0
    env = Environment(H, 0.5, 3.0, 0.8, LinearGradient(1500.0, 0.0))
    med = discretize(env.profile, H, 50)
    opts = TraceOptions.uniform(n=1701, max_bounces=1)
    rng = np.random.default_rng(1)
    worst_ang = worst_rel = 0.0
    count = 0
    for _ in range(20):
        zs, zr = rng.uniform(5.0, 95.0, 2)
        R = rng.uniform(200.0, 3000.0)
        for e in find_eigenrays(med, env, (0.0, zs), (R, zr), opts):
            s, b = e.bounce_signature
            # image-source geometry for each bounce signature
            dz = {(0, 0): zr - zs, (1, 0): -(zr + zs), (0, 1): 2 * H - zs - zr}[(s, b)]
            L = math.hypot(R, dz)
            flip = (-1) ** (s + b)
            worst_ang = max(worst_ang, abs(e.arrival_angle - flip * e.departure_angle),
                            abs(e.departure_angle - math.atan2(dz, R)))
            worst_rel = max(worst_rel, abs(e.horizontal_range / R - 1),
                            abs(e.travel_time * 1500.0 / L - 1))
            count += 1
    report(2, "constant-medium eigenrays match straight-line geometry",
           count > 0 and worst_ang <= 1e-6 and worst_rel <= 1e-6,
           f"{count} eigenrays, angle err {worst_ang:.1e} rad, range/time err {worst_rel:.1e}")


def test_criterion_03_shallow_three_streams(shallow_run):
    res, dt = shallow_run
    cascade_rank = numerical_rank(res.cascade)
    ok = res.d_max == 3 and cascade_rank == 3 and dt < 120.0
    report(3, "shallow scenario d_max = 3, surface-routed channel rank 3", ok,
           f"d_max {res.d_max}, rank(H2 Phi H1) {cascade_rank}, rank(H_eff incl. direct) "
           f"{res.rank_h_eff}, p* {res.p_star}, {dt:.1f} s")


def test_criterion_04_deep_two_streams(deep_run):
    res, dt = deep_run
    ok = res.d_max == 2 and res.rank_h_eff >= 2 and dt < 300.0
    report(4, "deep scenario d_max = 2, rank(H_eff) >= 2", ok,
           f"d_max {res.d_max}, rank(H_eff) {res.rank_h_eff}, p* {res.p_star}, {dt:.1f} s")


def _brute(l1, l2, d):
    best = math.inf
    for a in itertools.combinations(range(len(l1)), d):
        for b in itertools.combinations(range(len(l2)), d):
            best = min(best, sum(l1[i] for i in a) + sum(l2[j] for j in b))
    return best


def test_criterion_05_tl_metric_oracle():
    rng = np.random.default_rng(5)
    bad = 0
    for _ in range(100):
        d = int(rng.integers(1, 4))
        l1 = rng.uniform(40, 120, int(rng.integers(d, 7))).round(3).tolist()
        l2 = rng.uniform(40, 120, int(rng.integers(d, 7))).round(3).tolist()
        if tl_metric(l1, l2, d) != _brute(l1, l2, d):
            bad += 1
    report(5, "tl_metric equals brute-force enumeration", bad == 0, f"{bad}/100 mismatches")


def test_criterion_06_beam_synthesis():
    na = ArrayGeometry(8, 0.5)
    targets = (math.sin(math.radians(-30)), math.sin(math.radians(30)))
    problem = MultiBeamProblem(na, targets, 0.8, 0.01, 1.0)
    t = time.perf_counter()
    sol = synthesize_multibeam(problem)
    dt = time.perf_counter() - t
    grid = problem.sidelobe_grid
    worst = min(row[3] for row in constraint_report(problem, sol, grid))
    base = max_sidelobe(baseline_weights(problem), problem, grid)
    ok = sol.feasible and worst >= -1e-3 and sol.beta < base and dt < 30.0
    report(6, "two-beam synthesis at +/-30 deg", ok,
           f"beta {sol.beta:.4f} vs baseline {base:.4f}, worst margin {worst:.1e}, {dt:.2f} s")


def test_criterion_07_astar_algebra():
    rng = np.random.default_rng(7)
    g = rng.standard_normal((10_000, 4))
    worst_rt = worst_id = 0.0
    for a, b, c, d in g:
        gains = AstarGains(complex(a, b), complex(c, d))
        co = astar_forward(gains)
        back = astar_inverse(co)
        worst_rt = max(worst_rt, abs(back.g_t - gains.g_t), abs(back.g_r - gains.g_r))
        lhs = abs(co.s) ** 2 + abs(co.t) ** 2
        rhs = (abs(gains.g_t) ** 2 + abs(gains.g_r) ** 2) / 2
        worst_id = max(worst_id, abs(lhs - rhs))
    report(7, "ASTAR round trip and power identity", worst_rt <= 1e-12 and worst_id <= 1e-12,
           f"round trip {worst_rt:.1e}, identity {worst_id:.1e}")


def test_criterion_08_tracking():
    spec = TrackingSpec()
    na = ArrayGeometry(8, 0.5)
    lam = 1500.0 / 9000.0
    fld = spec.field((0.0, 0.0), na, lam)
    cfg = spec.config().check_step(fld, na, lam)
    a_max = peak_energy(fld, na, lam)
    rng = np.random.default_rng(8)
    hits = 0
    monotone = True
    t = time.perf_counter()
    for _ in range(100):
        r = rng.uniform(60.0, 70.0)
        th = rng.uniform(0, 2 * math.pi)
        trace = run_tracking(fld, cfg, (r * math.cos(th), r * math.sin(th)), na, lam)
        running = np.maximum.accumulate([s.a_received for s in trace])
        monotone &= bool(np.all(np.diff(running) >= 0))
        hits += gamma_track(trace[-1].a_received, a_max) >= 0.95
    dt = time.perf_counter() - t
    report(8, "gradient tracking reaches gamma >= 0.95", hits >= 95 and monotone and dt < 10.0,
           f"{hits}/100 runs, running max monotone {monotone}, {dt:.2f} s")


def test_criterion_09_gradient_check():
    spec = TrackingSpec()
    na = ArrayGeometry(8, 0.5)
    lam = 1500.0 / 9000.0
    fld = spec.field((0.0, 0.0), na, lam)
    rng = np.random.default_rng(9)
    r = rng.uniform(5.0, spec.r_max, 10)
    th = rng.uniform(0, 2 * math.pi, 10)
    pts = np.c_[r * np.cos(th), r * np.sin(th)]
    worst = 0.0
    for delta in (1.0, 0.1, 0.01):
        for p in pts:
            fd = estimate_gradient(fld, p, delta, na, lam)
            an = analytic_gradient(fld, p, na, lam)
            err = float(np.linalg.norm(fd - an) / np.linalg.norm(an))
            worst = max(worst, err / (delta / fld.sigma))
    report(9, "finite-difference gradient within 3 delta/sigma", worst <= 3.0,
           f"worst error {worst:.2f} delta/sigma, nearest point {r.min():.1f} m")


def test_criterion_10_capacity_gains(shallow_run, deep_run):
    lines = []
    ok = True
    for name, (res, _), lo, hi in (("shallow", shallow_run, 2.0, 3.3),
                                   ("deep", deep_run, 1.2, 2.2)):
        row = res.row_at(20.0)
        k = normalization(res.h)
        s_no = high_snr_slope(res.h, scale=k)
        s_with = high_snr_slope(res.h_eff, gamma=res.gamma, scale=k)
        ratio = s_with / s_no
        in_bracket = lo <= row.gain_ratio <= hi
        slope_ok = abs(ratio - res.d_max) <= 0.1 * res.d_max
        ok &= in_bracket and slope_ok
        lines.append(f"{name}: gain {row.gain_ratio:.4f} in [{lo}, {hi}]? {in_bracket}; "
                     f"slope ratio {ratio:.2f} vs d_max {res.d_max}")
    report(10, "capacity gain bracket and high-SNR slope ratio", ok, "; ".join(lines))


def _joint_outputs(out: Path) -> dict[str, str]:
    assert main(["joint", "--config", str(ROOT / "configs" / "shallow.yaml"), "--out", str(out),
                 "--seed", "0"]) == 0
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(out.glob("*.csv"))}


def test_criterion_11_determinism(tmp_path):
    a = _joint_outputs(tmp_path / "a")
    b = _joint_outputs(tmp_path / "b")
    report(11, "joint CSVs byte-identical across runs", bool(a) and a == b,
           f"{len(a)} files compared")
