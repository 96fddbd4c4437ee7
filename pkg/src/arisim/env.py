"""Sound-speed profiles, environments and layer discretization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DepthOutOfRange, InvalidLayerCount, NoCriticalAngle, ValidationError


@dataclass(frozen=True)
class Munk:
    """Canonical deep-water profile with its minimum at ``z0``."""

    c_s: float
    epsilon: float
    z0: float
    zl: float

    def __post_init__(self):
        if not self.c_s > 0:
            raise ValidationError("Munk.c_s must be positive")
        if not self.epsilon > 0:
            raise ValidationError("Munk.epsilon must be positive")
        if not self.zl > 0:
            raise ValidationError("Munk.zl must be positive")


@dataclass(frozen=True)
class LinearGradient:
    """c(z) = c_s (1 - a z); positive ``a`` means speed falls with depth."""

    c_s: float
    a: float

    def __post_init__(self):
        if not self.c_s > 0:
            raise ValidationError("LinearGradient.c_s must be positive")


@dataclass(frozen=True)
class Tabulated:
    samples: tuple[tuple[float, float], ...]

    def __post_init__(self):
        samples = tuple((float(z), float(c)) for z, c in self.samples)
        object.__setattr__(self, "samples", samples)
        if len(samples) < 2:
            raise ValidationError("Tabulated profile needs at least 2 samples")
        depths = [z for z, _ in samples]
        if any(b <= a for a, b in zip(depths, depths[1:])):
            raise ValidationError("Tabulated depths must be strictly increasing")
        if any(c <= 0 for _, c in samples):
            raise ValidationError("Tabulated speeds must be positive")


SoundSpeedProfile = Union[Munk, LinearGradient, Tabulated]


@dataclass(frozen=True)
class Environment:
    depth_H: float
    surface_loss_db: float
    bottom_loss_db: float
    absorption_db_per_km: float
    profile: SoundSpeedProfile

    def __post_init__(self):
        if not self.depth_H > 0:
            raise ValidationError("Environment.depth_H must be positive")
        for name in ("surface_loss_db", "bottom_loss_db", "absorption_db_per_km"):
            if getattr(self, name) < 0:
                raise ValidationError(f"Environment.{name} must be non-negative")


@dataclass(frozen=True, eq=False)
class LayeredMedium:
    """Piecewise-constant speed layers stacked from the surface down."""

    speeds: np.ndarray
    thicknesses: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.speeds, dtype=float)
        h = np.asarray(self.thicknesses, dtype=float)
        if c.ndim != 1 or c.shape != h.shape or c.size == 0:
            raise ValidationError("layer speed and thickness arrays must match")
        if np.any(c <= 0):
            raise ValidationError("layer speeds must be positive")
        if np.any(h <= 0):
            raise ValidationError("layer thicknesses must be positive")
        c.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "speeds", c)
        object.__setattr__(self, "thicknesses", h)
        bounds = np.concatenate(([0.0], np.cumsum(h)))
        bounds.setflags(write=False)
        object.__setattr__(self, "boundaries", bounds)

    @property
    def layers(self) -> list[tuple[float, float]]:
        return list(zip(self.speeds.tolist(), self.thicknesses.tolist()))

    @property
    def total_depth(self) -> float:
        return float(self.boundaries[-1])

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.boundaries[:-1] + self.boundaries[1:])

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.speeds == self.speeds[0]))

    def layer_index(self, z: float, downward: bool = True) -> int:
        """Layer containing depth ``z``; on an interface pick the side ahead of travel."""
        b = self.boundaries
        m = len(self.speeds)
        if downward:
            k = int(np.searchsorted(b, z, side="right")) - 1
        else:
            k = int(np.searchsorted(b, z, side="left")) - 1
        return min(max(k, 0), m - 1)


def sound_speed(profile: SoundSpeedProfile, z):
    """Evaluate the profile at depth ``z`` (scalar or array, metres)."""
    zz = np.asarray(z, dtype=float)
    if np.any(zz < 0):
        raise DepthOutOfRange("depth must be non-negative")
    if isinstance(profile, Munk):
        eta = (zz - profile.z0) / profile.zl
        out = profile.c_s * (1.0 + profile.epsilon * (eta + np.exp(-eta) - 1.0))
    elif isinstance(profile, LinearGradient):
        out = profile.c_s * (1.0 - profile.a * zz)
    elif isinstance(profile, Tabulated):
        depths = np.array([s[0] for s in profile.samples])
        speeds = np.array([s[1] for s in profile.samples])
        if np.any(zz < depths[0]) or np.any(zz > depths[-1]):
            raise DepthOutOfRange(
                f"depth outside tabulated range [{depths[0]}, {depths[-1]}]"
            )
        out = np.interp(zz, depths, speeds)
    else:
        raise TypeError(f"unknown profile type {type(profile).__name__}")
    if out.ndim == 0:
        return float(out)
    return out


def discretize(profile: SoundSpeedProfile, depth_H: float, M: int) -> LayeredMedium:
    """Split [0, depth_H] into M equal layers sampled at their midpoints."""
    if M < 1:
        raise InvalidLayerCount(f"layer count must be >= 1, got {M}")
    if not depth_H > 0:
        raise ValidationError("depth_H must be positive")
    h = depth_H / M
    mids = (np.arange(M) + 0.5) * h
    speeds = np.atleast_1d(sound_speed(profile, mids))
    return LayeredMedium(speeds, np.full(M, h))


def critical_grazing_angle(c0: float, c_s: float) -> float:
    """Grazing angle above which a ray from speed c0 reaches speed c_s."""
    if not (c0 > 0 and c_s > 0):
        raise ValidationError("speeds must be positive")
    if c0 > c_s:
        raise NoCriticalAngle(f"c0={c0} exceeds c_s={c_s}")
    return math.acos(c0 / c_s)


def layer_discretization_error(profile: SoundSpeedProfile, depth_H: float, M: int,
                               samples_per_layer: int = 64) -> float:
    """Max |c(z) - c_m| over a dense sampling of each layer."""
    medium = discretize(profile, depth_H, M)
    frac = (np.arange(samples_per_layer) + 0.5) / samples_per_layer
    z = medium.boundaries[:-1, None] + frac[None, :] * medium.thicknesses[:, None]
    return float(np.max(np.abs(sound_speed(profile, z) - medium.speeds[:, None])))
