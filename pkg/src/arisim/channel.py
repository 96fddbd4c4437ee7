"""Multipath channel matrices, resolvability counts and numerical rank.

Angles are directional sines (sine of the grazing angle), the variable that
appears linearly in the steering-vector phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ValidationError

_SEP_EPS = 1e-12


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform line array; ``spacing`` is in carrier wavelengths."""

    n_elements: int
    spacing: float

    def __post_init__(self):
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise ValidationError("n_elements must be a positive integer")
        if not self.spacing > 0:
            raise ValidationError("spacing must be positive")

    @property
    def aperture(self) -> float:
        return self.n_elements * self.spacing

    @property
    def resolution(self) -> float:
        return 1.0 / self.aperture


@dataclass(frozen=True)
class PathParam:
    gain: complex
    aod: float
    aoa: float

    def __post_init__(self):
        if abs(self.aod) > 1 + 1e-12 or abs(self.aoa) > 1 + 1e-12:
            raise ValidationError("directional sines must lie in [-1, 1]")


@dataclass(frozen=True, eq=False)
class ChannelTriple:
    H: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    paths_direct: tuple[PathParam, ...] = field(default_factory=tuple)
    paths_tx_aris: tuple[PathParam, ...] = field(default_factory=tuple)
    paths_aris_rx: tuple[PathParam, ...] = field(default_factory=tuple)


def steering_vector(geometry: ArrayGeometry, psi: float) -> np.ndarray:
    n = geometry.n_elements
    t = np.arange(n)
    return np.exp(-2j * np.pi * t * geometry.spacing * psi) / math.sqrt(n)


def aris_vector(aris_side: ArrayGeometry, psi: float) -> np.ndarray:
    """e_a(psi) kron 1_Na: the response of the full Na x Na surface."""
    return np.kron(steering_vector(aris_side, psi), np.ones(aris_side.n_elements))


def assemble_direct(paths, tx: ArrayGeometry, rx: ArrayGeometry) -> np.ndarray:
    H = np.zeros((rx.n_elements, tx.n_elements), dtype=complex)
    for p in paths:
        H += p.gain * np.outer(steering_vector(rx, p.aoa), steering_vector(tx, p.aod).conj())
    return H


def assemble_tx_aris(paths, tx: ArrayGeometry, aris_side: ArrayGeometry) -> np.ndarray:
    """H1 (Na^2 x Nt): transmitter to surface."""
    n = aris_side.n_elements ** 2
    H1 = np.zeros((n, tx.n_elements), dtype=complex)
    for p in paths:
        H1 += p.gain * np.outer(aris_vector(aris_side, p.aoa), steering_vector(tx, p.aod).conj())
    return H1


def assemble_aris_rx(paths, rx: ArrayGeometry, aris_side: ArrayGeometry) -> np.ndarray:
    """H2 (Nr x Na^2): surface to receiver."""
    n = aris_side.n_elements ** 2
    H2 = np.zeros((rx.n_elements, n), dtype=complex)
    for p in paths:
        H2 += p.gain * np.outer(steering_vector(rx, p.aoa), aris_vector(aris_side, p.aod).conj())
    return H2


def assemble_aris_side(paths, tx_or_rx: ArrayGeometry, aris_side: ArrayGeometry,
                       side: str) -> np.ndarray:
    """Dispatch on ``side``: 'tx' builds H1, 'rx' builds H2."""
    if side == "tx":
        return assemble_tx_aris(paths, tx_or_rx, aris_side)
    if side == "rx":
        return assemble_aris_rx(paths, tx_or_rx, aris_side)
    raise ValueError(f"side must be 'tx' or 'rx', got {side!r}")


def resolvable_subset(angles, aperture: float) -> list[int]:
    """Indices of a largest subset pairwise separated by at least 1/aperture.

    Greedy left-to-right selection over sorted angles is optimal for this
    interval-separation problem on a line.
    """
    if not aperture > 0:
        raise ValidationError("aperture must be positive")
    a = np.asarray(angles, dtype=float)
    if a.size == 0:
        return []
    sep = 1.0 / aperture
    order = np.argsort(a, kind="stable")
    keep = [int(order[0])]
    last = a[order[0]]
    for i in order[1:]:
        if a[i] - last >= sep - _SEP_EPS:
            keep.append(int(i))
            last = a[i]
    return keep


def resolvable_count(angles, aperture: float) -> int:
    return len(resolvable_subset(angles, aperture))


def channel_dof(paths, tx: ArrayGeometry, rx: ArrayGeometry) -> int:
    if not paths:
        return 0
    return min(resolvable_count([p.aod for p in paths], tx.aperture),
               resolvable_count([p.aoa for p in paths], rx.aperture))


def effective_channel(triple: ChannelTriple, phi: np.ndarray) -> np.ndarray:
    """H + H2 Phi H1."""
    phi = np.asarray(phi)
    n = triple.H1.shape[0]
    if phi.shape != (n, n):
        raise DimensionMismatch(f"phi has shape {phi.shape}, expected {(n, n)}")
    if triple.H2.shape[1] != n or triple.H.shape != (triple.H2.shape[0], triple.H1.shape[1]):
        raise DimensionMismatch("channel matrix shapes are inconsistent")
    # phi is diagonal by construction; exploit it
    d = np.diag(phi)
    if np.count_nonzero(phi - np.diag(d)):
        return triple.H + triple.H2 @ phi @ triple.H1
    return triple.H + (triple.H2 * d[None, :]) @ triple.H1


def numerical_rank(matrix, rel_tol: float = 1e-6) -> int:
    if not 0 < rel_tol < 1:
        raise ValidationError("rel_tol must lie in (0, 1)")
    m = np.asarray(matrix)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def paths_from_eigenrays(eigenrays) -> list[PathParam]:
    """Convert traced paths to channel paths (grazing angle -> directional sine)."""
    return [PathParam(e.gain, math.sin(e.departure_angle), math.sin(e.arrival_angle))
            for e in eigenrays]
