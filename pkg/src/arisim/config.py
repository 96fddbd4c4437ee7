"""Scenario files: YAML in, validated Scenario out, and back again."""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

import yaml

from .channel import ArrayGeometry
from .dofmap import GridSpec
from .env import Environment, LinearGradient, Munk, Tabulated
from .errors import ParseError
from .pipeline import DEFAULT_RHO_DB, BeamSpec, Scenario, TrackingSpec



def _plain(node, lines: dict, path: str):
    """Turn a composed YAML node into plain Python, noting each key's line."""
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = str(yaml.safe_load(yaml.serialize(k)))
            sub = f"{path}.{key}" if path else key
            if key in out:
                raise ParseError("duplicate key", k.start_mark.line + 1, sub)
            lines[sub] = k.start_mark.line + 1
            out[key] = _plain(v, lines, sub)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_plain(v, lines, path) for v in node.value]
    return yaml.safe_load(yaml.serialize(node))


def load_document(text: str) -> tuple[dict, dict]:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                         None if mark is None else mark.line + 1) from None
    if root is None:
        return {}, {}
    lines: dict[str, int] = {}
    data = _plain(root, lines, "")
    if not isinstance(data, dict):
        raise ParseError("top level must be a mapping", root.start_mark.line + 1)
    return data, lines


class _Section:
    """Typed, line-aware access to one mapping of the document."""

    def __init__(self, data, lines, path):
        self.lines = lines
        self.path = path
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ParseError("expected a mapping", lines.get(path), path)
        self.data = data
        self.used: set[str] = set()

    def _fail(self, msg, key):
        full = f"{self.path}.{key}" if self.path else key
        raise ParseError(msg, self.lines.get(full), full)

    def has(self, key):
        return key in self.data

    def sub(self, key) -> "_Section":
        self.used.add(key)
        full = f"{self.path}.{key}" if self.path else key
        return _Section(self.data.get(key), self.lines, full)

    def raw(self, key, default=None):
        self.used.add(key)
        return self.data.get(key, default)

    def num(self, key, default=None, integer=False):
        self.used.add(key)
        if key not in self.data:
            if default is None:
                self._fail("missing required key", key)
            return default
        v = self.data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self._fail(f"expected a number, got {v!r}", key)
        if integer:
            if int(v) != v:
                self._fail(f"expected an integer, got {v!r}", key)
            return int(v)
        return float(v)

    def vec(self, key, n=None, default=None):
        self.used.add(key)
        if key not in self.data:
            if default is None:
                self._fail("missing required key", key)
            return default
        v = self.data[key]
        ok = isinstance(v, list) and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                         for x in v)
        if not ok or (n is not None and len(v) != n):
            self._fail(f"expected a list of {n or 'some'} numbers, got {v!r}", key)
        return tuple(float(x) for x in v)

    def done(self):
        for key in self.data:
            if key not in self.used:
                self._fail("unknown key", key)


def _profile(sec: _Section):
    kind = sec.raw("kind")
    if kind is None:
        sec._fail("missing required key", "kind")
    if kind == "munk":
        prof = Munk(sec.num("c_s", 1500.0), sec.num("epsilon", 7.37e-3),
                    sec.num("z0", 1300.0), sec.num("zl", 1300.0))
    elif kind in ("linear", "linear_gradient"):
        prof = LinearGradient(sec.num("c_s", 1500.0), sec.num("a"))
    elif kind in ("table", "tabulated"):
        rows = sec.raw("table")
        if not isinstance(rows, list) or not all(isinstance(r, list) and len(r) == 2 for r in rows):
            sec._fail("expected a list of [depth, speed] pairs", "table")
        prof = Tabulated(tuple((float(z), float(c)) for z, c in rows))
    else:
        sec._fail(f"unknown profile kind {kind!r}", "kind")
    sec.done()
    return prof


def _geom(sec: _Section, default: ArrayGeometry) -> ArrayGeometry:
    g = ArrayGeometry(sec.num("n_elements", default.n_elements, integer=True),
                      sec.num("spacing", default.spacing))
    sec.done()
    return g


def scenario_from_dict(data: dict, lines: dict | None = None) -> Scenario:
    lines = lines or {}
    root = _Section(data, lines, "")
    env_s = root.sub("env")
    env = Environment(env_s.num("depth_H"), env_s.num("surface_loss_db", 0.5),
                      env_s.num("bottom_loss_db", 3.0), env_s.num("absorption_db_per_km", 0.8),
                      _profile(env_s.sub("profile")))
    trace = dict(n_layers=env_s.num("n_layers", 100, integer=True),
                 max_bounces=env_s.num("max_bounces", 1, integer=True),
                 n_angles=env_s.num("n_angles", 1701, integer=True),
                 angle_span_deg=env_s.num("angle_span_deg", 85.0),
                 hit_tolerance=env_s.num("hit_tolerance", 1.0),
                 c_ref=env_s.num("c_ref", 1500.0))
    env_s.done()

    arr = root.sub("arrays")
    tx_pos = arr.vec("tx_pos", 2)
    rx_pos = arr.vec("rx_pos", 2)
    d4 = ArrayGeometry(4, 0.73)
    tx_geom = _geom(arr.sub("tx"), d4)
    rx_geom = _geom(arr.sub("rx"), d4)
    aris_geom = _geom(arr.sub("aris"), ArrayGeometry(8, 0.5))
    f_c = arr.num("f_c", 9000.0)
    arr.done()

    g = root.sub("grid")
    grid = GridSpec(g.num("r_min", min(tx_pos[0], rx_pos[0])), g.num("r_max", max(tx_pos[0], rx_pos[0])),
                    g.num("z_min", 0.0), g.num("z_max", env.depth_H),
                    g.num("n_r", 200, integer=True), g.num("n_z", 100, integer=True))
    g.done()

    b = root.sub("beam")
    d = BeamSpec()
    targets = b.vec("targets_deg", default=()) if b.has("targets_deg") else None
    beam = BeamSpec(b.num("g_req", d.g_req), b.num("eps_cross", d.eps_cross),
                    b.num("g_max", d.g_max), targets)
    b.done()

    t = root.sub("tracking")
    tracking = None
    enabled = t.raw("enabled", True)
    if not isinstance(enabled, bool):
        t._fail("expected true or false", "enabled")
    if enabled:
        dt = TrackingSpec()
        i0 = t.num("i0") if t.has("i0") else None
        tracking = TrackingSpec(
            t.num("sigma", dt.sigma), i0, t.num("delta", dt.delta),
            t.num("eta", dt.eta), t.num("max_iters", dt.max_iters, integer=True),
            t.num("tol", dt.tol), t.num("r_max", dt.r_max), t.num("start_min", dt.start_min),
            t.num("start_max", dt.start_max), t.num("seed", dt.seed, integer=True),
            t.vec("center", 2) if t.has("center") else None)
    else:
        for key in t.data:
            t.used.add(key)
    t.done()

    c = root.sub("capacity")
    report = c.num("report_snr_db", 20.0)
    rho = c.vec("rho_db", default=DEFAULT_RHO_DB)
    c.done()
    root.done()

    return Scenario(env=env, tx_pos=tx_pos, rx_pos=rx_pos, grid=grid, tx_geom=tx_geom,
                    rx_geom=rx_geom, aris_geom=aris_geom, f_c=f_c, beam=beam, tracking=tracking,
                    report_snr_db=report, rho_db=rho, **trace)


def parse_config(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except FileNotFoundError:
        raise ParseError(f"config file not found: {p}") from None
    except OSError as exc:
        raise ParseError(f"cannot read config {p}: {exc.strerror}") from None
    data, lines = load_document(text)
    return scenario_from_dict(data, lines)


def parse_config_text(text: str) -> Scenario:
    return scenario_from_dict(*load_document(text))


def _profile_dict(prof) -> dict:
    if isinstance(prof, Munk):
        return dict(kind="munk", c_s=prof.c_s, epsilon=prof.epsilon, z0=prof.z0, zl=prof.zl)
    if isinstance(prof, LinearGradient):
        return dict(kind="linear", c_s=prof.c_s, a=prof.a)
    return dict(kind="table", table=[[z, c] for z, c in prof.samples])


def scenario_to_dict(s: Scenario) -> dict:
    geom = lambda g: dict(n_elements=g.n_elements, spacing=g.spacing)  # noqa: E731
    out = {
        "env": dict(depth_H=s.env.depth_H, surface_loss_db=s.env.surface_loss_db,
                    bottom_loss_db=s.env.bottom_loss_db,
                    absorption_db_per_km=s.env.absorption_db_per_km,
                    profile=_profile_dict(s.env.profile), n_layers=s.n_layers,
                    max_bounces=s.max_bounces, n_angles=s.n_angles,
                    angle_span_deg=s.angle_span_deg, hit_tolerance=s.hit_tolerance,
                    c_ref=s.c_ref),
        "arrays": dict(tx_pos=list(s.tx_pos), rx_pos=list(s.rx_pos), tx=geom(s.tx_geom),
                       rx=geom(s.rx_geom), aris=geom(s.aris_geom), f_c=s.f_c),
        "grid": {f.name: getattr(s.grid, f.name) for f in fields(s.grid)},
        "beam": dict(g_req=s.beam.g_req, eps_cross=s.beam.eps_cross, g_max=s.beam.g_max),
        "capacity": dict(report_snr_db=s.report_snr_db, rho_db=list(s.rho_db)),
    }
    if s.beam.targets_deg is not None:
        out["beam"]["targets_deg"] = list(s.beam.targets_deg)
    if s.tracking is None:
        out["tracking"] = dict(enabled=False)
    else:
        t = {f.name: getattr(s.tracking, f.name) for f in fields(s.tracking)}
        if t["i0"] is None:
            del t["i0"]
        if t["center"] is None:
            del t["center"]
        else:
            t["center"] = list(t["center"])
        out["tracking"] = t
    return out


def serialize(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False, default_flow_style=None)

