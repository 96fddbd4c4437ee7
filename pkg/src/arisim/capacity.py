"""MIMO capacity of the direct and effective channels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ValidationError


@dataclass(frozen=True, eq=False)
class CapacityQuery:
    h_eff: np.ndarray
    rho: float
    n_t: int
    gamma: float = 1.0

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h_eff, dtype=complex))
        object.__setattr__(self, "h_eff", h)
        if not self.rho >= 0:
            raise ValidationError("rho must be non-negative")
        if not 0 < self.gamma <= 1:
            raise ValidationError("gamma must lie in (0, 1]")
        if self.n_t < 1:
            raise ValidationError("n_t must be positive")
        if h.shape[1] != self.n_t:
            raise DimensionMismatch(f"h_eff has {h.shape[1]} columns, expected n_t={self.n_t}")


def capacity(query: CapacityQuery) -> float:
    """log2 det(I + rho*gamma/N_t H H^H), evaluated through the singular values."""
    s = np.linalg.svd(query.h_eff, compute_uv=False)
    k = query.rho * query.gamma / query.n_t
    return float(np.sum(np.log2(1.0 + k * s ** 2)))


def capacity_det(query: CapacityQuery) -> float:
    """Same quantity via a log-determinant; kept as an independent cross-check."""
    h = query.h_eff
    k = query.rho * query.gamma / query.n_t
    m = np.eye(h.shape[0]) + k * (h @ h.conj().T)
    sign, logdet = np.linalg.slogdet(m)
    return float(logdet / math.log(2.0))


def db_to_linear(db) -> np.ndarray:
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def normalization(h: np.ndarray) -> float:
    """Scalar that brings ||H||_F^2 to N_r*N_t, so rho reads as a per-link SNR."""
    h = np.asarray(h)
    f = float(np.linalg.norm(h))
    if f == 0:
        raise ValidationError("cannot normalise an all-zero direct channel")
    return math.sqrt(h.size) / f


@dataclass(frozen=True)
class CapacityRow:
    rho_db: float
    c_no: float
    c_with: float

    @property
    def gain_ratio(self) -> float:
        return (self.c_with - self.c_no) / self.c_no if self.c_no > 0 else math.inf


def capacity_sweep(h: np.ndarray, h_eff: np.ndarray, rho_db_list, gamma: float = 1.0,
                   normalize: bool = True) -> list[CapacityRow]:
    """Capacity without (gamma = 1) and with the surface at each SNR in dB.

    Both matrices share one scale factor, taken from the direct channel, so
    their relative strength is untouched.
    """
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    h_eff = np.atleast_2d(np.asarray(h_eff, dtype=complex))
    if h.shape != h_eff.shape:
        raise DimensionMismatch(f"H is {h.shape} but H_eff is {h_eff.shape}")
    scale = normalization(h) if normalize else 1.0
    n_t = h.shape[1]
    rows = []
    for db in rho_db_list:
        rho = float(db_to_linear(db))
        c0 = capacity(CapacityQuery(h * scale, rho, n_t, 1.0))
        c1 = capacity(CapacityQuery(h_eff * scale, rho, n_t, gamma))
        rows.append(CapacityRow(float(db), c0, c1))
    return rows


def high_snr_slope(h: np.ndarray, lo_db: float = 60.0, hi_db: float = 80.0,
                   gamma: float = 1.0, scale: float = 1.0) -> float:
    """dC / dlog2(rho) between two SNRs; tends to the number of streams."""
    h = np.atleast_2d(np.asarray(h, dtype=complex)) * scale
    n_t = h.shape[1]
    c = [capacity(CapacityQuery(h, float(db_to_linear(x)), n_t, gamma)) for x in (lo_db, hi_db)]
    return (c[1] - c[0]) / ((hi_db - lo_db) / (10.0 * math.log10(2.0)))
