"""Layered ray tracing, eigenray search and per-path loss/gain.

Rays travel in the (range, depth) plane with depth positive downward.  Grazing
angles are signed: positive means the ray is heading down.  Within a layer the
speed is constant so every segment is straight; Snell's law links layers and
the surface and bottom reflect specularly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import Environment, LayeredMedium
from .errors import DegenerateAngle, NoEigenray, ValidationError

_MAX_LEGS = 100_000


@dataclass(frozen=True)
class Refracted:
    alpha: float


@dataclass(frozen=True)
class Turned:
    pass


SnellOutcome = Refracted | Turned


def step_snell(alpha_m: float, c_m: float, c_next: float) -> SnellOutcome:
    """Carry a grazing angle across an interface from speed c_m into c_next."""
    x = (c_next / c_m) * math.cos(alpha_m)
    if x <= 1.0:
        return Refracted(math.acos(x))
    return Turned()


@dataclass(frozen=True)
class TraceOptions:
    angle_grid: tuple[float, ...]
    max_bounces: int = 1
    hit_tolerance: float = 1.0
    max_range: float = 100_000.0
    bisection_iters: int = 50

    def __post_init__(self):
        grid = tuple(float(a) for a in np.atleast_1d(self.angle_grid))
        object.__setattr__(self, "angle_grid", grid)
        if not grid:
            raise ValidationError("angle grid must be nonempty")
        if not self.hit_tolerance > 0:
            raise ValidationError("hit_tolerance must be positive")
        if self.max_bounces < 0:
            raise ValidationError("max_bounces must be non-negative")
        if not self.max_range > 0:
            raise ValidationError("max_range must be positive")

    @classmethod
    def uniform(cls, lo_deg: float = -85.0, hi_deg: float = 85.0, n: int = 1701, **kw):
        return cls(angle_grid=tuple(np.radians(np.linspace(lo_deg, hi_deg, n))), **kw)


@dataclass(frozen=True, eq=False)
class Ray:
    """A traced ray.

    ``r``, ``z``, ``t`` and ``s`` hold range, depth, elapsed time and arc length
    at each polyline node.  ``seg_angle``/``seg_speed`` describe the straight
    segment leaving each node; ``surf``/``bot`` are bounce counts accumulated
    at each node.
    """

    departure_angle: float
    r: np.ndarray
    z: np.ndarray
    t: np.ndarray
    s: np.ndarray
    seg_angle: np.ndarray
    seg_speed: np.ndarray
    surf: np.ndarray
    bot: np.ndarray
    turning_points: int

    @property
    def polyline(self) -> list[tuple[float, float]]:
        return list(zip(self.r.tolist(), self.z.tolist()))

    @property
    def surface_bounces(self) -> int:
        return int(self.surf[-1])

    @property
    def bottom_bounces(self) -> int:
        return int(self.bot[-1])

    @property
    def travel_time(self) -> float:
        return float(self.t[-1])

    @property
    def arc_length(self) -> float:
        return float(self.s[-1])

    @property
    def final_range(self) -> float:
        return float(self.r[-1])

    def snell_constants(self) -> np.ndarray:
        """cos(alpha)/c for every segment; constant along an exact trace."""
        return np.cos(self.seg_angle) / self.seg_speed


def _seg_geometry(dz, cosv, sinv):
    """Horizontal run and arc length of straight crossings of thickness dz."""
    with np.errstate(divide="ignore", invalid="ignore"):
        run = np.where(dz > 0, dz * cosv / sinv, 0.0)
        arc = np.where(dz > 0, dz / sinv, 0.0)
    return run, arc


def _turn_depth(kappa, medium, m, neighbour, lo, hi):
    """Depth where the ray would turn, interpolated between layer midpoints."""
    mids = medium.midpoints
    c = medium.speeds
    target = 1.0 / kappa
    dc = c[neighbour] - c[m]
    if dc == 0:
        zt = 0.5 * (mids[m] + mids[neighbour])
    else:
        frac = (target - c[m]) / dc
        zt = mids[m] + frac * (mids[neighbour] - mids[m])
    return min(max(zt, lo), hi)


class _Builder:
    def __init__(self, r0, z0):
        self.r = [np.array([r0])]
        self.z = [np.array([z0])]
        self.t = [np.array([0.0])]
        self.s = [np.array([0.0])]
        self.ang = []
        self.spd = []
        self.surf = [np.array([0])]
        self.bot = [np.array([0])]
        self.cur_r = r0
        self.cur_z = z0
        self.cur_t = 0.0
        self.cur_s = 0.0
        self.nsurf = 0
        self.nbot = 0

    def add(self, run, dz_signed, arc, speed, angle):
        """Append straight segments; arrays are per segment."""
        cr = self.cur_r + np.cumsum(run)
        cz = self.cur_z + np.cumsum(dz_signed)
        cs = self.cur_s + np.cumsum(arc)
        ct = self.cur_t + np.cumsum(arc / speed)
        n = len(run)
        self.r.append(cr)
        self.z.append(cz)
        self.s.append(cs)
        self.t.append(ct)
        self.ang.append(np.broadcast_to(angle, (n,)).astype(float))
        self.spd.append(np.broadcast_to(speed, (n,)).astype(float))
        self.surf.append(np.full(n, self.nsurf))
        self.bot.append(np.full(n, self.nbot))
        self.cur_r, self.cur_z, self.cur_s, self.cur_t = cr[-1], cz[-1], cs[-1], ct[-1]

    def mark(self):
        self.surf[-1] = self.surf[-1].copy()
        self.bot[-1] = self.bot[-1].copy()
        self.surf[-1][-1] = self.nsurf
        self.bot[-1][-1] = self.nbot

    def build(self, alpha0, turns, depth_H):
        z = np.clip(np.concatenate(self.z), 0.0, depth_H)
        ang = np.concatenate(self.ang) if self.ang else np.zeros(0)
        spd = np.concatenate(self.spd) if self.spd else np.zeros(0)
        return Ray(
            departure_angle=float(alpha0),
            r=np.concatenate(self.r),
            z=z,
            t=np.concatenate(self.t),
            s=np.concatenate(self.s),
            seg_angle=ang,
            seg_speed=spd,
            surf=np.concatenate(self.surf),
            bot=np.concatenate(self.bot),
            turning_points=int(turns),
        )


def trace_ray(medium: LayeredMedium, env: Environment, src: tuple[float, float],
              alpha0: float, opts: TraceOptions, max_range: float | None = None) -> Ray:
    """Trace one ray from ``src`` at grazing angle ``alpha0`` (radians, + down).

    The trace stops once the horizontal distance travelled reaches
    ``max_range`` (default ``opts.max_range``) or when a further boundary
    reflection would exceed ``opts.max_bounces``.
    """
    limit = float(opts.max_range if max_range is None else max_range)
    H = medium.total_depth
    r0, z0 = float(src[0]), float(src[1])
    if not (-1e-9 <= z0 <= H + 1e-9):
        raise ValidationError(f"source depth {z0} outside [0, {H}]")
    z0 = min(max(z0, 0.0), H)
    if not (abs(alpha0) < math.pi / 2):
        raise ValidationError("departure angle must lie in (-pi/2, pi/2)")
    c = medium.speeds
    b = medium.boundaries
    M = len(c)
    out = _Builder(r0, z0)

    if alpha0 == 0.0:
        if medium.is_constant:
            raise DegenerateAngle("horizontal launch in a constant medium never meets a layer")
        m = medium.layer_index(z0)
        out.add(np.array([limit]), np.array([0.0]), np.array([limit]), c[m], 0.0)
        return out.build(alpha0, 0, H)

    d = 1 if alpha0 > 0 else -1
    m = medium.layer_index(z0, downward=d > 0)
    kappa = math.cos(alpha0) / c[m]
    turns = 0
    travelled = 0.0
    legs = 0
    last_turn_layer = None

    while travelled < limit:
        legs += 1
        if legs > _MAX_LEGS:
            break
        if d > 0:
            idx = np.arange(m, M)
        else:
            idx = np.arange(m, -1, -1)
        cosv = kappa * c[idx]
        cosv[0] = min(cosv[0], 1.0)
        blocked = np.flatnonzero(cosv > 1.0)
        k = int(blocked[0]) if blocked.size else len(idx)
        layers = idx[:k]
        cosp = cosv[:k]
        sinp = np.sqrt((1.0 - cosp) * (1.0 + cosp))
        if d > 0:
            tops = b[layers].copy()
            tops[0] = out.cur_z
            ends = b[layers + 1].copy()
        else:
            tops = b[layers + 1].copy()
            tops[0] = out.cur_z
            ends = b[layers].copy()
        turning = blocked.size > 0
        if turning:
            last = int(layers[-1])
            nb = int(idx[k])
            if d > 0:
                ends[-1] = _turn_depth(kappa, medium, last, nb, tops[-1], b[last + 1])
            else:
                ends[-1] = _turn_depth(kappa, medium, last, nb, b[last], tops[-1])
        dz = np.abs(ends - tops)
        run, arc = _seg_geometry(dz, cosp, sinp)
        cum = travelled + np.cumsum(run)
        angles = d * np.arctan2(sinp, cosp)
        speeds = c[layers]

        if not np.all(np.isfinite(cum)) or cum[-1] >= limit:
            j = int(np.argmax(~np.isfinite(cum) | (cum >= limit)))
            prev = travelled if j == 0 else cum[j - 1]
            hr = limit - prev
            run = run[: j + 1].copy()
            arc = arc[: j + 1].copy()
            dz = dz[: j + 1].copy()
            run[j] = hr
            arc[j] = hr / cosp[j]
            dz[j] = hr * sinp[j] / cosp[j]
            out.add(run, d * dz, arc, speeds[: j + 1], angles[: j + 1])
            travelled = limit
            break

        out.add(run, d * dz, arc, speeds, angles)
        travelled = cum[-1]
        out.cur_z = ends[-1]
        out.z[-1] = out.z[-1].copy()
        out.z[-1][-1] = ends[-1]

        if turning:
            turns += 1
            last = int(layers[-1])
            if last_turn_layer == last and len(layers) == 1 and run[0] > 0:
                # trapped between two turning depths inside one layer: periodic
                travelled, extra = _replicate_trapped(out, limit, travelled)
                turns += extra
                break
            last_turn_layer = last
            d = -d
            m = last
            continue
        last_turn_layer = None
        if out.nsurf + out.nbot + 1 > opts.max_bounces:
            break
        if d > 0:
            out.nbot += 1
            m = M - 1
        else:
            out.nsurf += 1
            m = 0
        out.mark()
        d = -d

    return out.build(alpha0, turns, H)


def _replicate_trapped(out: _Builder, limit: float, travelled: float) -> tuple[float, int]:
    """Repeat the in-layer oscillation between two turning depths out to ``limit``.

    Both traverses share the same layer and angle magnitude, so each covers the
    same horizontal run as the leg just completed.  Returns the distance
    reached and the number of extra turns.
    """
    run = out.r[-1][-1] - out.r[-2][-1]
    arc = out.s[-1][-1] - out.s[-2][-1]
    z_now = out.cur_z
    z_prev = out.z[-2][-1]
    ang = float(out.ang[-1][-1])
    spd = float(out.spd[-1][-1])
    n_legs = int(min(max(0, math.ceil((limit - travelled) / run)), 2 * _MAX_LEGS))
    n_legs = max(n_legs, 1)
    k = np.arange(n_legs)
    back = k % 2 == 0
    runs = np.full(n_legs, run)
    arcs = np.full(n_legs, arc)
    dzs = np.where(back, z_prev - z_now, z_now - z_prev)
    angs = np.where(back, -ang, ang)
    cum = travelled + np.cumsum(runs)
    j = min(int(np.searchsorted(cum, limit, side="left")), n_legs - 1)
    runs, arcs, dzs, angs = runs[: j + 1], arcs[: j + 1], dzs[: j + 1], angs[: j + 1]
    prev = travelled if j == 0 else cum[j - 1]
    frac = min(max((limit - prev) / run, 0.0), 1.0)
    runs[j] *= frac
    arcs[j] *= frac
    dzs[j] *= frac
    out.add(runs, dzs, arcs, np.full(j + 1, spd), angs)
    return limit, j


def ray_state_at(ray: Ray, x: float):
    """Depth, time, arc, segment angle and bounce counts at absolute range x.

    Returns None when the ray stops short of x.
    """
    r = ray.r
    if x > r[-1] + 1e-9 or x < r[0] - 1e-9:
        return None
    i = int(np.searchsorted(r, x, side="right")) - 1
    i = min(max(i, 0), len(r) - 2)
    span = r[i + 1] - r[i]
    f = 0.0 if span <= 0 else (x - r[i]) / span
    f = min(max(f, 0.0), 1.0)
    lerp = lambda a: a[i] + f * (a[i + 1] - a[i])
    return dict(
        z=float(lerp(ray.z)),
        t=float(lerp(ray.t)),
        s=float(lerp(ray.s)),
        angle=float(ray.seg_angle[i]),
        surf=int(ray.surf[i]),
        bot=int(ray.bot[i]),
    )


@dataclass(frozen=True)
class Eigenray:
    departure_angle: float
    arrival_angle: float
    horizontal_range: float
    travel_time: float
    tl_db: float
    gain: complex
    bounce_signature: tuple[int, int]
    arc_length: float = field(default=0.0, compare=False)


def transmission_loss_parts(arc_length: float, surface_bounces: int, bottom_bounces: int,
                            env: Environment) -> float:
    spreading = 20.0 * math.log10(max(arc_length, 1.0))
    absorption = env.absorption_db_per_km * arc_length / 1000.0
    return (spreading + absorption + surface_bounces * env.surface_loss_db
            + bottom_bounces * env.bottom_loss_db)


def transmission_loss(ray: Ray, env: Environment) -> float:
    """Spherical spreading plus absorption plus fixed per-bounce penalties (dB)."""
    return transmission_loss_parts(ray.arc_length, ray.surface_bounces, ray.bottom_bounces, env)


def path_gain(eigenray: Eigenray, f_c: float) -> complex:
    amp = 10.0 ** (-eigenray.tl_db / 20.0)
    return complex(amp * np.exp(-2j * math.pi * f_c * eigenray.travel_time))


def _make_eigenray(dep, arr, rng, time, arc, surf, bot, env, f_c):
    tl = transmission_loss_parts(arc, surf, bot, env)
    e = Eigenray(float(dep), float(arr), float(rng), float(time), float(tl), 0j,
                 (int(surf), int(bot)), float(arc))
    return Eigenray(e.departure_angle, e.arrival_angle, e.horizontal_range, e.travel_time,
                    e.tl_db, path_gain(e, f_c), e.bounce_signature, e.arc_length)


def find_eigenrays(medium: LayeredMedium, env: Environment, src: tuple[float, float],
                   dst: tuple[float, float], opts: TraceOptions,
                   f_c: float = 9000.0) -> list[Eigenray]:
    """All rays from ``src`` landing within ``hit_tolerance`` of ``dst``.

    The angle grid is swept, the depth miss at the destination range is
    recorded, and each sign change between neighbours of the same bounce
    signature is refined by bisection.  Results are sorted by loss.
    """
    zs, zd = float(src[1]), float(dst[1])
    rng = abs(float(dst[0]) - float(src[0]))
    H = medium.total_depth
    if not (0 <= zd <= H):
        raise ValidationError(f"destination depth {zd} outside [0, {H}]")
    if rng == 0.0:
        if zs == zd:
            raise ValidationError("source and destination coincide")
        raise NoEigenray("vertical geometry is outside the range-stepping tracer")
    if rng > opts.max_range:
        raise NoEigenray(f"destination beyond max_range ({rng} > {opts.max_range})")

    constant = medium.is_constant

    def probe(a):
        if a == 0.0 and constant:
            a = 1e-13  # the exactly horizontal ray is degenerate; use its neighbour
        try:
            ray = trace_ray(medium, env, (0.0, zs), a, opts, max_range=rng)
        except DegenerateAngle:
            return None
        if ray.final_range < rng * (1 - 1e-12):
            return None
        return ray.z[-1] - zd, (ray.surface_bounces, ray.bottom_bounces), ray

    grid = sorted(set(opts.angle_grid))
    samples = [probe(a) for a in grid]
    roots: list[tuple[float, Ray]] = []
    for i, s in enumerate(samples):
        if s is not None and s[0] == 0.0:
            roots.append((grid[i], s[2]))
    for i in range(len(grid) - 1):
        a, b_ = samples[i], samples[i + 1]
        if a is None or b_ is None or a[1] != b_[1]:
            continue
        if not (a[0] * b_[0] < 0):
            continue
        lo, hi = grid[i], grid[i + 1]
        flo, best = a[0], (abs(a[0]), grid[i], a[2])
        if abs(b_[0]) < best[0]:
            best = (abs(b_[0]), grid[i + 1], b_[2])
        for _ in range(opts.bisection_iters):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            p = probe(mid)
            if p is None or p[1] != a[1]:
                break
            if abs(p[0]) < best[0]:
                best = (abs(p[0]), mid, p[2])
            if p[0] == 0.0 or best[0] < 1e-9:
                break
            if (p[0] < 0) == (flo < 0):
                lo, flo = mid, p[0]
            else:
                hi = mid
        if best[0] <= opts.hit_tolerance:
            roots.append((best[1], best[2]))

    out = []
    seen = set()
    for _, ray in sorted(roots, key=lambda x: x[0]):
        alpha = ray.departure_angle
        key = (round(alpha, 12), ray.surface_bounces, ray.bottom_bounces)
        if key in seen:
            continue
        seen.add(key)
        out.append(_make_eigenray(alpha, ray.seg_angle[-1], rng, ray.travel_time,
                                  ray.arc_length, ray.surface_bounces, ray.bottom_bounces,
                                  env, f_c))
    if not out:
        raise NoEigenray(f"no eigenray from {tuple(src)} to {tuple(dst)}")
    out.sort(key=lambda e: (e.tl_db, e.departure_angle))
    return out


def reverse_eigenray(e: Eigenray) -> Eigenray:
    """The same path travelled backwards (vertical sense flips at both ends)."""
    return Eigenray(-e.arrival_angle, -e.departure_angle, e.horizontal_range, e.travel_time,
                    e.tl_db, e.gain, e.bounce_signature, e.arc_length)


class RayFan:
    """A fan of rays from one source, sampled on a set of horizontal distances.

    Used to find eigenrays to many receiver points at once: at each distance,
    neighbouring rays of equal bounce signature that straddle a receiver
    depth bracket an eigenray whose parameters are linearly interpolated.
    """

    def __init__(self, medium: LayeredMedium, env: Environment, src_depth: float,
                 angles, opts: TraceOptions, distances):
        self.env = env
        self.src_depth = float(src_depth)
        self.angles = np.array(sorted(set(float(a) for a in angles)))
        self.distances = np.asarray(distances, dtype=float)
        reach = float(self.distances.max())
        na, nx = len(self.angles), len(self.distances)
        self.z = np.full((na, nx), np.nan)
        self.t = np.full((na, nx), np.nan)
        self.s = np.full((na, nx), np.nan)
        self.arr = np.full((na, nx), np.nan)
        self.surf = np.full((na, nx), -1, dtype=int)
        self.bot = np.full((na, nx), -1, dtype=int)
        x = self.distances
        for i, a in enumerate(self.angles):
            try:
                ray = trace_ray(medium, env, (0.0, self.src_depth), a, opts, max_range=reach)
            except DegenerateAngle:
                continue
            r = ray.r
            ok = x <= r[-1] + 1e-9
            if not np.any(ok):
                continue
            j = np.searchsorted(r, x[ok], side="right") - 1
            j = np.clip(j, 0, len(r) - 2)
            span = r[j + 1] - r[j]
            with np.errstate(divide="ignore", invalid="ignore"):
                f = np.where(span > 0, (x[ok] - r[j]) / span, 0.0)
            f = np.clip(f, 0.0, 1.0)
            self.z[i, ok] = ray.z[j] + f * (ray.z[j + 1] - ray.z[j])
            self.t[i, ok] = ray.t[j] + f * (ray.t[j + 1] - ray.t[j])
            self.s[i, ok] = ray.s[j] + f * (ray.s[j + 1] - ray.s[j])
            self.arr[i, ok] = ray.seg_angle[j]
            self.surf[i, ok] = ray.surf[j]
            self.bot[i, ok] = ray.bot[j]

    def roots(self, col: int, depths) -> dict[str, np.ndarray]:
        """Interpolated eigenrays to every depth in ``depths`` at column ``col``.

        Returns flat arrays keyed by field, with ``k`` giving the depth index.
        """
        depths = np.asarray(depths, dtype=float)
        order = np.argsort(depths)
        zs = depths[order]
        z = self.z[:, col]
        sig_s, sig_b = self.surf[:, col], self.bot[:, col]
        z0, z1 = z[:-1], z[1:]
        valid = (np.isfinite(z0) & np.isfinite(z1) & (sig_s[:-1] == sig_s[1:])
                 & (sig_b[:-1] == sig_b[1:]) & (sig_s[:-1] >= 0))
        lo = np.where(z0 <= z1, z0, z1)
        hi = np.where(z0 <= z1, z1, z0)
        up = z0 <= z1
        # half-open on the far end of each pair so shared nodes count once
        k_lo = np.where(up, np.searchsorted(zs, lo, side="left"),
                        np.searchsorted(zs, lo, side="right"))
        k_hi = np.where(up, np.searchsorted(zs, hi, side="left"),
                        np.searchsorted(zs, hi, side="right"))
        counts = np.where(valid, np.maximum(k_hi - k_lo, 0), 0)
        pair = np.repeat(np.arange(len(z0)), counts)
        if pair.size == 0:
            empty = np.zeros(0)
            return dict(k=np.zeros(0, dtype=int), dep=empty, arr=empty, t=empty, s=empty,
                        surf=np.zeros(0, dtype=int), bot=np.zeros(0, dtype=int))
        start = np.repeat(k_lo, counts)
        offs = np.arange(pair.size) - np.repeat(np.cumsum(counts) - counts, counts)
        kk = start + offs
        zt = zs[kk]
        dzp = z1[pair] - z0[pair]
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(dzp != 0, (zt - z0[pair]) / dzp, 0.0)
        w = np.clip(w, 0.0, 1.0)
        lerp = lambda a: a[pair] + w * (a[pair + 1] - a[pair])
        a_arr = self.arr[:, col]
        near = np.where(w < 0.5, pair, pair + 1)
        return dict(
            k=order[kk],
            dep=lerp(self.angles),
            arr=np.where(np.sign(a_arr[pair]) == np.sign(a_arr[pair + 1]),
                         lerp(a_arr), a_arr[near]),
            t=lerp(self.t[:, col]),
            s=lerp(self.s[:, col]),
            surf=sig_s[pair],
            bot=sig_b[pair],
        )


def eigenrays_to_csv_rows(eigenrays: list[Eigenray]) -> list[tuple]:
    return [
        (math.degrees(e.departure_angle), math.degrees(e.arrival_angle), e.horizontal_range,
         e.travel_time, e.tl_db, e.bounce_signature[0], e.bounce_signature[1])
        for e in eigenrays
    ]
