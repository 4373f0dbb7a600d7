"""Primitive-ontology observables: GRW matter density, flashes and region bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRegion
from .grid import GridSpec, WaveFunction, check_masses, marginal_density


@dataclass
class MatterDensityField:
    """Mass per unit length on the physical-space axis at one time."""

    x: np.ndarray
    values: np.ndarray
    time: float = 0.0

    @property
    def spacing(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def total(self) -> float:
        return float(self.values.sum() * self.spacing)


@dataclass(frozen=True)
class FlashEvent:
    time: float
    position: float
    # Bookkeeping only: flashes carry no identity across time.
    particle_index: int = -1


@dataclass(frozen=True)
class RegionPartition:
    """Named disjoint half-open intervals ``[lo, hi)`` tiling the grid extent."""

    names: tuple
    edges: tuple  # len(names) + 1 increasing boundaries

    def __post_init__(self):
        if len(self.edges) != len(self.names) + 1:
            raise ValueError("need one more edge than region names")
        if not all(b > a for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("region edges must be strictly increasing")
        if len(set(self.names)) != len(self.names):
            raise ValueError("region names must be unique")

    @classmethod
    def from_intervals(cls, intervals):
        """Build from ``[(name, lo, hi), ...]``; intervals must be contiguous."""
        intervals = sorted(intervals, key=lambda r: r[1])
        for (_, _, hi), (name, lo, _) in zip(intervals, intervals[1:]):
            if lo != hi:
                raise ValueError(f"region {name!r} does not start where the previous one ends")
        return cls(tuple(r[0] for r in intervals), (intervals[0][1],) + tuple(r[2] for r in intervals))

    @classmethod
    def halves(cls, grid: GridSpec, split: float = 0.0, names=("left", "right")):
        return cls(tuple(names), (grid.extent_min, split, grid.extent_max))

    def check_covers(self, grid: GridSpec):
        if self.edges[0] != grid.extent_min or self.edges[-1] != grid.extent_max:
            raise ValueError("partition does not cover the grid extent")

    def labels(self, x) -> np.ndarray:
        """Region index of each position (-1 outside the partition)."""
        idx = np.searchsorted(np.asarray(self.edges), np.asarray(x, dtype=float), side="right") - 1
        return np.where((idx >= 0) & (idx < len(self.names)), idx, -1)

    def masks(self, x) -> dict:
        lab = self.labels(x)
        return {name: lab == i for i, name in enumerate(self.names)}


def matter_density(psi: WaveFunction, masses) -> MatterDensityField:
    """``m(x) = sum_k m_k rho_k(x)`` on the single-particle axis."""
    g = psi.grid
    m = check_masses(masses, g.n_particles)
    values = sum(m[k] * marginal_density(psi, k) for k in range(g.n_particles))
    return MatterDensityField(g.axis.copy(), values, psi.time)


def flashes_from_events(events) -> list[FlashEvent]:
    return [FlashEvent(e.time, e.center, e.particle_index) for e in events]


def region_masses(m: MatterDensityField, partition: RegionPartition) -> dict:
    dx = m.spacing
    return {name: float(m.values[mask].sum() * dx) for name, mask in partition.masks(m.x).items()}


def _corr(a, b) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt((a * a).sum() * (b * b).sum())
    return float((a * b).sum() / den) if den > 0 else 1.0


def structured_tails_report(m_before: MatterDensityField, m_after: MatterDensityField, partition) -> dict:
    """Per-region weight ratio and shape correlation between two density fields.

    The shape correlation is the Pearson correlation of the fields restricted
    to the region, each normalized by its own regional mass, so it measures
    whether a region keeps its shape irrespective of how much matter it holds.
    The region with the smallest weight ratio is reported as ``suppressed``.
    """
    if m_before.x.shape != m_after.x.shape or not np.array_equal(m_before.x, m_after.x):
        raise ValueError("fields must live on the same grid")
    dx = m_before.spacing
    regions = {}
    for name, mask in partition.masks(m_before.x).items():
        w0 = float(m_before.values[mask].sum() * dx)
        w1 = float(m_after.values[mask].sum() * dx)
        if w0 < 1e-12:
            raise DegenerateRegion(f"region {name!r} holds only {w0:g} before")
        shape0 = m_before.values[mask] / w0
        shape1 = m_after.values[mask] / w1 if w1 > 0 else np.zeros_like(shape0)
        regions[name] = {
            "weight_before": w0,
            "weight_after": w1,
            "weight_ratio": w1 / w0,
            "shape_correlation": _corr(shape1, shape0),
        }
    suppressed = min(regions, key=lambda r: regions[r]["weight_ratio"])
    return {"regions": regions, "suppressed": suppressed}
