"""Gaussian beam energy field and finite-difference gradient-ascent tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ArrayGeometry
from .errors import ValidationError


@dataclass(frozen=True)
class GaussianBeamField:
    i0: float
    sigma: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.i0 > 0:
            raise ValidationError("i0 must be positive")
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")


def aperture_factor(aris_side: ArrayGeometry, lambda_c: float) -> float:
    """N_a^2 Delta_a^2 lambda_c^2: collecting area of the surface."""
    return (aris_side.n_elements * aris_side.spacing * lambda_c) ** 2


def intensity(field: GaussianBeamField, point) -> float:
    dx = np.asarray(point, dtype=float) - np.asarray(field.center, dtype=float)
    return float(field.i0 * math.exp(-float(dx @ dx) / field.sigma ** 2))


def received_energy(field: GaussianBeamField, point, aris_side: ArrayGeometry,
                    lambda_c: float) -> float:
    return intensity(field, point) * aperture_factor(aris_side, lambda_c)


def peak_energy(field: GaussianBeamField, aris_side: ArrayGeometry, lambda_c: float) -> float:
    return field.i0 * aperture_factor(aris_side, lambda_c)


def lipschitz_constant(field: GaussianBeamField, aris_side: ArrayGeometry,
                       lambda_c: float) -> float:
    """Gradient Lipschitz bound of the energy surface (energy units)."""
    return 2.0 * peak_energy(field, aris_side, lambda_c) / field.sigma ** 2


@dataclass(frozen=True)
class TrackerConfig:
    delta: float
    eta: float
    max_iters: int
    tol: float
    r_max: float
    window: int = 3

    def __post_init__(self):
        if not self.delta > 0:
            raise ValidationError("delta must be positive")
        if not self.eta > 0:
            raise ValidationError("eta must be positive")
        if self.max_iters < 0:
            raise ValidationError("max_iters must be non-negative")
        if not self.r_max > 0:
            raise ValidationError("r_max must be positive")
        if self.window < 1:
            raise ValidationError("window must be >= 1")

    def check_step(self, field: GaussianBeamField, aris_side: ArrayGeometry,
                   lambda_c: float) -> "TrackerConfig":
        """Reject step sizes at or above 2/L for this field."""
        L = lipschitz_constant(field, aris_side, lambda_c)
        if not self.eta < 2.0 / L:
            raise ValidationError(f"step size eta={self.eta} violates eta < 2/L = {2.0 / L:.6g}")
        return self

    @classmethod
    def for_field(cls, field, aris_side, lambda_c, **kw) -> "TrackerConfig":
        return cls(**kw).check_step(field, aris_side, lambda_c)


@dataclass(frozen=True)
class TrackerState:
    x: tuple[float, float]
    a_received: float
    g_hat: tuple[float, float]
    iter: int


def estimate_gradient(field: GaussianBeamField, point, delta: float,
                      aris_side: ArrayGeometry, lambda_c: float) -> np.ndarray:
    """Forward differences along r and z with probe step delta."""
    if not delta > 0:
        raise ValidationError("delta must be positive")
    x = np.asarray(point, dtype=float)
    a0 = received_energy(field, x, aris_side, lambda_c)
    g = np.empty(2)
    for i in range(2):
        probe = x.copy()
        probe[i] += delta
        g[i] = (received_energy(field, probe, aris_side, lambda_c) - a0) / delta
    return g


def analytic_gradient(field: GaussianBeamField, point, aris_side: ArrayGeometry,
                      lambda_c: float) -> np.ndarray:
    x = np.asarray(point, dtype=float)
    dx = x - np.asarray(field.center, dtype=float)
    return -2.0 / field.sigma ** 2 * dx * received_energy(field, x, aris_side, lambda_c)


def _state(field, x, it, config, aris_side, lambda_c) -> TrackerState:
    a = received_energy(field, x, aris_side, lambda_c)
    g = estimate_gradient(field, x, config.delta, aris_side, lambda_c)
    return TrackerState((float(x[0]), float(x[1])), a, (float(g[0]), float(g[1])), it)


def _clamp(x, anchor, r_max):
    d = x - anchor
    n = float(np.hypot(*d))
    if n > r_max:
        return anchor + d * (r_max / n)
    return x


def track_step(state: TrackerState, field: GaussianBeamField, config: TrackerConfig,
               aris_side: ArrayGeometry, lambda_c: float, anchor=None) -> TrackerState:
    """x <- x + eta * g_hat, projected onto the deployment disk about ``anchor``."""
    if state.iter >= config.max_iters:
        raise ValidationError("iteration budget exhausted")
    anchor = np.asarray(state.x if anchor is None else anchor, dtype=float)
    x = np.asarray(state.x, dtype=float) + config.eta * np.asarray(state.g_hat)
    x = _clamp(x, anchor, config.r_max)
    return _state(field, x, state.iter + 1, config, aris_side, lambda_c)


def run_tracking(field: GaussianBeamField, config: TrackerConfig, start,
                 aris_side: ArrayGeometry, lambda_c: float, anchor=None) -> list[TrackerState]:
    """Iterate until the relative gain over the last ``window`` steps drops below tol."""
    start = np.asarray(start, dtype=float)
    anchor = start if anchor is None else np.asarray(anchor, dtype=float)
    if float(np.hypot(*(start - anchor))) > config.r_max + 1e-9:
        raise ValidationError("start lies outside the deployment radius")
    trace = [_state(field, start, 0, config, aris_side, lambda_c)]
    w = config.window
    while trace[-1].iter < config.max_iters:
        trace.append(track_step(trace[-1], field, config, aris_side, lambda_c, anchor))
        if len(trace) > w:
            old = trace[-1 - w].a_received
            new = trace[-1].a_received
            if old > 0 and (new - old) / old < config.tol:
                break
    return trace


def gamma_track(a_received: float, a_max: float) -> float:
    if not a_max > 0:
        raise ValidationError("a_max must be positive")
    g = a_received / a_max
    return float(min(max(g, np.nextafter(0.0, 1.0)), 1.0))
