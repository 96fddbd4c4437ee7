"""Command-line front end; every subcommand writes CSV files into --out."""

from __future__ import annotations

import argparse
import csv
import hashlib
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .beamform import (MultiBeamProblem, beam_pattern, constraint_report, synthesize_multibeam)
from .config import parse_config
from .dofmap import build_dof_map
from .errors import ArisimError
from .pipeline import (JointResult, Scenario, TrackingSpec, run_joint, tracking_gamma)
from .raytrace import eigenrays_to_csv_rows, find_eigenrays, trace_ray
from .tracking import gamma_track, peak_energy

SUBCOMMANDS = ("trace", "dofmap", "deploy", "beamform", "track", "capacity", "joint")
PATTERN_STEP_DEG = 1.0


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    config_path: str
    out_dir: str
    seed: int | None  # None: take tracking.seed from the config
    version: str = __version__


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if v == 0.0:
            return "0.0"  # drop the sign of negative zero
        return repr(v)
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    return str(v)


class _Writer:
    def __init__(self, manifest: RunManifest, config_hash: str):
        self.dir = Path(manifest.out_dir)
        self.header = (f"# arisim {manifest.version} subcommand={manifest.subcommand} "
                       f"config_sha256={config_hash} seed={manifest.seed}\n")
        self.written: list[Path] = []

    def write(self, name: str, columns, rows, note: str | None = None):
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        with path.open("w", newline="") as fh:
            fh.write(self.header)
            if note:
                fh.write(f"# {note}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.written.append(path)


def _seed(manifest_seed: int | None, scenario: Scenario) -> int:
    if manifest_seed is not None:
        return manifest_seed
    return scenario.tracking.seed if scenario.tracking is not None else 0


def _dofmap_rows(dmap):
    for row in dmap.cells:
        for c in row:
            yield (c.p[0], c.p[1], c.r1, c.r2, c.sup_dof,
                   math.nan if c.tl_metric_db is None else c.tl_metric_db)


def _write_dofmap(w: _Writer, dmap):
    w.write("dofmap.csv", ["r", "z", "r1", "r2", "sup_dof", "tl_db"], _dofmap_rows(dmap))
    opt = dmap.optimum
    w.write("lightpoint.csv", ["kind", "r", "z", "d_max", "tl_db"],
            [("optimum", opt[0], opt[1], dmap.d_max, dmap.cell_at(opt).tl_metric_db)]
            + [("light", p[0], p[1], dmap.d_max, dmap.cell_at(p).tl_metric_db)
               for p in dmap.light_points])


def _write_beams(w: _Writer, problem: MultiBeamProblem, sol):
    deg = np.arange(-90.0, 90.0 + 1e-9, PATTERN_STEP_DEG)
    psi = np.sin(np.radians(deg))
    cols = [beam_pattern(t, problem.aris_side, psi) for t in sol.t_g_per_beam]
    w.write("beams.csv", ["angle_deg"] + [f"beam_{p}" for p in range(len(cols))],
            ([d] + [c[i] for c in cols] for i, d in enumerate(deg)),
            note=f"targets_sin={list(problem.target_aods)} beta={sol.beta!r}")
    w.write("constraints.csv", ["constraint", "bound", "achieved", "margin"],
            constraint_report(problem, sol))


def _write_capacity(w: _Writer, table):
    w.write("capacity.csv", ["rho_db", "c_no_aris", "c_with_aris", "gain_ratio"],
            [(r.rho_db, r.c_no, r.c_with, r.gain_ratio) for r in table])


def _write_track(w: _Writer, trace, a_max):
    w.write("track.csv", ["iter", "r", "z", "energy", "gamma", "g_r", "g_z"],
            [(s.iter, s.x[0], s.x[1], s.a_received, gamma_track(s.a_received, a_max),
              s.g_hat[0], s.g_hat[1]) for s in trace])


def _write_channel(w: _Writer, res: JointResult):
    rows = []
    for name, hop in (("direct", res.direct), ("tx_aris", res.hop1), ("aris_rx", res.hop2)):
        for e in hop:
            rows.append((name, e.gain.real, e.gain.imag, math.sin(e.departure_angle),
                         math.sin(e.arrival_angle)))
    w.write("paths.csv", ["link", "gain_re", "gain_im", "aod", "aoa"], rows)
    mats = []
    for name, m in (("H", res.h), ("H_eff", res.h_eff)):
        for i, row in enumerate(m):
            mats.append([name, i] + [x for z in row for x in (z.real, z.imag)])
    n = res.h.shape[1]
    w.write("channel.csv", ["matrix", "row"] + [f"{p}{j}" for j in range(n) for p in ("re", "im")],
            mats)


def cmd_trace(s: Scenario, w: _Writer, seed: int):
    medium, opts = s.medium(), s.trace_options()
    eig = find_eigenrays(medium, s.env, s.tx_pos, s.rx_pos, opts, s.f_c)
    w.write("eigenrays.csv", ["departure_deg", "arrival_deg", "range_m", "time_s", "tl_db",
                              "surf_bounces", "bot_bounces"], eigenrays_to_csv_rows(eig))
    rng = abs(s.rx_pos[0] - s.tx_pos[0])
    sign = 1.0 if s.rx_pos[0] >= s.tx_pos[0] else -1.0
    rows = []
    for k, e in enumerate(eig):
        ray = trace_ray(medium, s.env, (0.0, s.tx_pos[1]), e.departure_angle, opts, max_range=rng)
        for r, z in ray.polyline:
            rows.append((k, s.tx_pos[0] + sign * r, z))
    w.write("rays.csv", ["ray", "r", "z"], rows)


def cmd_dofmap(s: Scenario, w: _Writer, seed: int):
    _write_dofmap(w, build_dof_map(s))


def cmd_deploy(s: Scenario, w: _Writer, seed: int):
    dmap = build_dof_map(s)
    opt = dmap.optimum
    w.write("lightpoint.csv", ["kind", "r", "z", "d_max", "tl_db"],
            [("optimum", opt[0], opt[1], dmap.d_max, dmap.cell_at(opt).tl_metric_db)]
            + [("light", p[0], p[1], dmap.d_max, dmap.cell_at(p).tl_metric_db)
               for p in dmap.light_points])


def cmd_beamform(s: Scenario, w: _Writer, seed: int):
    if s.beam.targets_deg:
        targets = tuple(math.sin(math.radians(t)) for t in s.beam.targets_deg)
        problem = MultiBeamProblem(s.aris_geom, targets, s.beam.g_req, s.beam.eps_cross,
                                   s.beam.g_max)
        sol = synthesize_multibeam(problem)
    else:
        res = run_joint(s, seed)
        problem = MultiBeamProblem(s.aris_geom, res.target_aods, s.beam.g_req,
                                   s.beam.eps_cross, s.beam.g_max,
                                   capture=res.beams.capture)
        sol = res.beams
    _write_beams(w, problem, sol)


def cmd_track(s: Scenario, w: _Writer, seed: int):
    spec = s.tracking or TrackingSpec()
    center = spec.center if spec.center is not None else build_dof_map(s).optimum
    trace, _ = tracking_gamma(spec, s, center, np.random.default_rng(seed))
    a_max = peak_energy(spec.field(center, s.aris_geom, s.lambda_c), s.aris_geom, s.lambda_c)
    _write_track(w, trace, a_max)


def cmd_capacity(s: Scenario, w: _Writer, seed: int):
    _write_capacity(w, run_joint(s, seed).capacity_table)


def cmd_joint(s: Scenario, w: _Writer, seed: int):
    res = run_joint(s, seed)
    _write_dofmap(w, res.dof_map)
    problem = MultiBeamProblem(s.aris_geom, res.target_aods, s.beam.g_req, s.beam.eps_cross,
                               s.beam.g_max, capture=res.beams.capture)
    _write_beams(w, problem, res.beams)
    _write_capacity(w, res.capacity_table)
    _write_channel(w, res)
    if res.traces:
        a_max = peak_energy(s.tracking.field(res.p_star, s.aris_geom, s.lambda_c),
                            s.aris_geom, s.lambda_c)
        _write_track(w, res.traces, a_max)
    w.write("summary.csv", ["p_star_r", "p_star_z", "d_max", "rank_h", "rank_h_eff", "gamma",
                            "report_snr_db", "c_no_aris", "c_with_aris", "gain_ratio"],
            [(res.p_star[0], res.p_star[1], res.d_max, res.rank_h, res.rank_h_eff, res.gamma,
              s.report_snr_db, *(lambda r: (r.c_no, r.c_with, r.gain_ratio))(
                  res.row_at(s.report_snr_db)))])


COMMANDS = {"trace": cmd_trace, "dofmap": cmd_dofmap, "deploy": cmd_deploy,
            "beamform": cmd_beamform, "track": cmd_track, "capacity": cmd_capacity,
            "joint": cmd_joint}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="arisim",
                                 description="aRIS-aided underwater acoustic MIMO simulator")
    ap.add_argument("--version", action="version", version=f"arisim {__version__}")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="scenario YAML file")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--seed", type=int, default=None,
                    help="seed for all randomness (default: tracking.seed or 0)")
    return ap


def dispatch(manifest: RunManifest) -> int:
    try:
        raw = Path(manifest.config_path).read_bytes()
    except OSError:
        print(f"error: ParseError: config file not found: {manifest.config_path}", file=sys.stderr)
        return 1
    try:
        scenario = parse_config(manifest.config_path)
        seed = _seed(manifest.seed, scenario)
        manifest = RunManifest(manifest.subcommand, manifest.config_path, manifest.out_dir, seed,
                               manifest.version)
        writer = _Writer(manifest, hashlib.sha256(raw).hexdigest()[:16])
        COMMANDS[manifest.subcommand](scenario, writer, seed)
    except ArisimError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for p in writer.written:
        print(p)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be a non-negative integer", file=sys.stderr)
        return 2
    return dispatch(RunManifest(args.subcommand, args.config, args.out, args.seed))


if __name__ == "__main__":
    sys.exit(main())
