"""
Coincidence statistics of the time-bin spin-photon state.

For each measurement basis the four joint counts are stored in the order
``(a, a), (a, -a), (-a, a), (-a, -a)`` where the first label is the spin
outcome and the second the photon outcome.

Per-window channel contributions:

* ``s`` -- detected signal photons (conversion, fiber and detector applied)
* ``n`` -- detected down-conversion noise photons
* ``d`` -- dark counts, added as ``d/2`` to every entry

The X-basis noise pattern is asymmetric (noise lands on ``(X, X)`` and
``(-X, X)`` only). It is encoded as tabulated; its visibility contribution is
zero either way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .model import DomainError


class Basis(str, Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


@dataclass(frozen=True)
class ChannelRates:
    s: float
    n: float
    d: float

    def __post_init__(self):
        if min(self.s, self.n, self.d) < 0:
            raise DomainError("channel rates must be >= 0")

    @classmethod
    def from_link(cls, result, window_s: float) -> "ChannelRates":
        """Per-window counts from a :class:`~qfclink.model.LinkBudgetResult`."""
        if not window_s > 0:
            raise DomainError("window must be > 0 s")
        return cls(
            s=result.detected_signal_rate_hz * window_s,
            n=result.detected_noise_rate_hz * window_s,
            d=result.dark_rate_hz * window_s,
        )


@dataclass(frozen=True)
class CoincidenceTable:
    basis: Basis
    n_pp: float
    n_pm: float
    n_mp: float
    n_mm: float

    def __post_init__(self):
        object.__setattr__(self, "basis", Basis(self.basis))
        if min(self.counts) < 0:
            raise DomainError("coincidence counts must be >= 0")

    @property
    def counts(self) -> tuple:
        return (self.n_pp, self.n_pm, self.n_mp, self.n_mm)

    @property
    def total(self):
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm

    def scaled(self, factor: float) -> "CoincidenceTable":
        return CoincidenceTable(self.basis, *(factor * c for c in self.counts))


@dataclass(frozen=True)
class Visibilities:
    v_x: float
    v_y: float
    v_z: float

    def __post_init__(self):
        for v in (self.v_x, self.v_y, self.v_z):
            if not -1.0 - 1e-12 <= v <= 1.0 + 1e-12:
                raise DomainError(f"visibility {v} outside [-1, 1]")


def expected_table(basis, rates: ChannelRates) -> CoincidenceTable:
    basis = Basis(basis)
    s, n, h = rates.s, rates.n, rates.d / 2.0
    if basis is Basis.X:
        entries = (s / 2 + n, 0.0, n, s / 2)
    elif basis is Basis.Y:
        entries = (s / 2 + n / 2, n / 2, n / 2, s / 2 + n / 2)
    else:
        entries = (n / 2, s / 2 + n / 2, s / 2 + n / 2, n / 2)
    return CoincidenceTable(basis, *(e + h for e in entries))


def visibility(table: CoincidenceTable) -> float:
    total = table.total
    if not total > 0:
        raise DomainError(f"{table.basis.value}-basis table is empty; visibility undefined")
    return (table.n_pp - table.n_pm - table.n_mp + table.n_mm) / total


def visibilities(tables: Mapping) -> Visibilities:
    """Visibilities from a mapping ``{Basis: CoincidenceTable}``."""
    by_basis = {Basis(k): t for k, t in tables.items()}
    return Visibilities(*(visibility(by_basis[b]) for b in (Basis.X, Basis.Y, Basis.Z)))


def bell_fidelity(v: Visibilities, sign: str = "+") -> float:
    """``(1 +/- V_X +/- V_Y - V_Z) / 4`` for psi+ or psi-. Not clamped."""
    if sign == "+":
        return (1.0 + v.v_x + v.v_y - v.v_z) / 4.0
    if sign == "-":
        return (1.0 - v.v_x - v.v_y - v.v_z) / 4.0
    raise DomainError(f"sign must be '+' or '-', got {sign!r}")


def fidelity_closed_form(rates: ChannelRates) -> float:
    bg = rates.n + rates.d
    denom = 2.0 * rates.s + 4.0 * bg
    if not denom > 0:
        raise DomainError("closed-form fidelity undefined for s = n = d = 0")
    return (2.0 * rates.s + bg) / denom


def sample_table(expected: CoincidenceTable, rng_seed) -> CoincidenceTable:
    """Poisson draw of every entry, independent, with the expected count as mean.

    ``rng_seed`` is an int seed or a ``numpy.random.Generator``.
    """
    if not all(math.isfinite(c) for c in expected.counts):
        raise DomainError("expected counts must be finite")
    rng = np.random.default_rng(rng_seed)
    draws = rng.poisson(np.asarray(expected.counts, dtype=float))
    return CoincidenceTable(expected.basis, *(int(k) for k in draws))


def _visibility_variance(table: CoincidenceTable) -> float:
    # Delta method with Var[n_ij] = n_ij. V = (A - B) / T, A = n_pp + n_mm.
    total = float(table.total)
    a = float(table.n_pp + table.n_mm)
    b = float(table.n_pm + table.n_mp)
    # dV/dA = 2B/T^2, dV/dB = -2A/T^2
    return (4.0 * b * b * a + 4.0 * a * a * b) / total**4


def estimate_fidelity(tables: Mapping, sign: str = "+") -> tuple[float, float]:
    """Fidelity and its first-order standard error from X, Y, Z tables."""
    by_basis = {Basis(k): t for k, t in tables.items()}
    missing = {Basis.X, Basis.Y, Basis.Z} - by_basis.keys()
    if missing:
        raise DomainError(f"missing tables for bases {sorted(m.value for m in missing)}")
    v = visibilities(by_basis)
    var = sum(_visibility_variance(by_basis[b]) for b in (Basis.X, Basis.Y, Basis.Z))
    # each visibility enters with weight 1/4
    return bell_fidelity(v, sign), math.sqrt(var) / 4.0
