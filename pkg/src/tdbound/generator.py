"""Seeded synthetic TDTSP instances.

Instances come in families. The family seed fixes the "city": the spatial
centres customers cluster around, the shared congestion profile and a
regional congestion field. The index draws the customers and the per-arc
noise, so siblings resemble each other the way daily delivery instances
in one city do.

Every arc first gets an IGP travel-time function from the shared profile and
a Euclidean-derived length. With ``perturbation > 0`` each arc is then scaled
by smooth noise, part regional (shared by arcs through the same area) and
part arc-specific, which breaks the shared-profile structure; a forward
clipping pass restores FIFO.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .config import DEFAULT_HORIZON, DEFAULT_STEP, TOL
from .errors import GenerationError
from .tdgraph import (SpeedProfile, TimeDependentGraph, TimeGrid, TravelTimeFunction,
                      igp_kinks, igp_times, validate_fifo)


@dataclass
class GeneratorConfig:
    n: int = 10
    clusters: int = 6
    periods: int = 4
    speed_factors: list = None      # per period, relative to base_speed; random if None
    base_speed: float = 0.25        # km per minute
    side: float = 20.0              # km
    cluster_spread: float = 0.06    # std of customer offsets, fraction of side
    asymmetry: float = 0.25         # lengths scaled by 1 + U(0, asymmetry)
    min_length: float = 0.2
    perturbation: float = 0.0
    regional_share: float = 0.5     # weight of the family-wide part of the noise
    horizon: float = DEFAULT_HORIZON
    step: float = DEFAULT_STEP      # sample spacing; profile breakpoints snap to it
    seed: int = 0
    index: int = 0

    def validate(self):
        if self.n < 1:
            raise GenerationError("n must be at least 1")
        if self.clusters < 1 or self.periods < 1:
            raise GenerationError("clusters and periods must be at least 1")
        if not 0.0 <= self.perturbation <= 1.0:
            raise GenerationError(f"perturbation must lie in [0, 1], got {self.perturbation}")
        if not 0.0 <= self.regional_share <= 1.0:
            raise GenerationError("regional_share must lie in [0, 1]")
        if self.speed_factors is not None and len(self.speed_factors) != self.periods:
            raise GenerationError("speed_factors needs one entry per period")
        if self.step <= 0 or self.horizon <= 0 or self.base_speed <= 0:
            raise GenerationError("step, horizon and base_speed must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise GenerationError(f"unknown generator options {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def instance_name(seed: int, index: int) -> str:
    return f"{seed}_I_{index}"


def make_profile(cfg: GeneratorConfig, rng) -> SpeedProfile:
    raw = np.linspace(0.0, cfg.horizon, cfg.periods + 1)
    bp = np.round(raw / cfg.step) * cfg.step
    bp[-1] = cfg.horizon
    if np.any(np.diff(bp) <= 0):
        raise GenerationError("too many periods for the sample step")
    if cfg.speed_factors is not None:
        factors = np.asarray(cfg.speed_factors, dtype=float)
    elif cfg.periods == 1:
        factors = np.ones(1)
    else:
        factors = rng.uniform(0.35, 1.0, cfg.periods)
    if np.any(factors <= 0):
        raise GenerationError("speed factors must be positive")
    return SpeedProfile(TimeGrid(bp), cfg.base_speed * factors)


def _smooth_noise(rng, times, horizon):
    """Sum of three random low-frequency sines, within [-1, 1]."""
    freq = rng.integers(1, 4, size=3)
    phase = rng.uniform(0, 2 * np.pi, size=3)
    amp = rng.uniform(0.2, 1.0, size=3)
    g = sum(a * np.sin(2 * np.pi * f * times / horizon + p) for a, f, p in zip(amp, freq, phase))
    return g / amp.sum()


class RegionalField:
    """Congestion anomaly in [-1, 1] varying smoothly over space and time.

    Each family centre carries its own temporal wave; a location mixes the
    waves with Gaussian weights by distance.
    """

    def __init__(self, rng, centres, side, horizon):
        self.centres = centres
        self.width = 0.25 * side
        self.horizon = horizon
        self.waves = [(rng.integers(1, 3), rng.uniform(0, 2 * np.pi)) for _ in centres]

    def __call__(self, point, times):
        w = np.exp(-((self.centres - point) ** 2).sum(axis=1) / (2 * self.width ** 2)) + 1e-12
        waves = np.array([np.sin(2 * np.pi * f * times / self.horizon + p) for f, p in self.waves])
        return (w[:, None] * waves).sum(axis=0) / w.sum()


def fifo_repair(times, values) -> np.ndarray:
    """Raise values so that ``t + tau(t)`` never decreases between samples."""
    v = np.array(values, dtype=float)
    for k in range(1, len(v)):
        floor = v[k - 1] - (times[k] - times[k - 1])
        if v[k] < floor:
            v[k] = floor
    return v


def generate_instance(cfg: GeneratorConfig) -> TimeDependentGraph:
    cfg.validate()
    family = np.random.default_rng([cfg.seed])
    rng = np.random.default_rng([cfg.seed, cfg.index])
    profile = make_profile(cfg, family)
    centres = family.uniform(0.15, 0.85, size=(cfg.clusters, 2)) * cfg.side
    field = RegionalField(family, centres, cfg.side, cfg.horizon)

    which = rng.integers(0, cfg.clusters, size=cfg.n)
    customers = centres[which] + rng.normal(0, cfg.cluster_spread * cfg.side, size=(cfg.n, 2))
    customers = np.clip(customers, 0.0, cfg.side)
    coords = np.vstack([[cfg.side / 2, cfg.side / 2], customers])

    n1 = cfg.n + 1
    dist = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=2)
    lengths = np.maximum(dist * (1 + rng.uniform(0, cfg.asymmetry, size=(n1, n1))), cfg.min_length)
    np.fill_diagonal(lengths, 0.0)

    grid_times = np.arange(0.0, cfg.horizon, cfg.step)
    arcs = {}
    for i in range(n1):
        for j in range(n1):
            if i == j:
                continue
            L = float(lengths[i, j])
            times = np.union1d(np.append(grid_times, cfg.horizon), igp_kinks(profile, L))
            times = times[times <= cfg.horizon]
            tau = igp_times(profile, L, times)
            if cfg.perturbation > 0:
                mid = (coords[i] + coords[j]) / 2
                g = (cfg.regional_share * field(mid, times)
                     + (1 - cfg.regional_share) * _smooth_noise(rng, times, cfg.horizon))
                tau = tau * (1 + 0.9 * cfg.perturbation * g)
                tau = fifo_repair(times, tau)
            if np.any(tau <= 0) or not np.all(np.isfinite(tau)):
                raise GenerationError(f"arc ({i}, {j}) lost positivity; perturbation too large")
            f = TravelTimeFunction(times, tau)
            if validate_fifo(f, TOL.fifo):
                raise GenerationError(f"FIFO repair failed on arc ({i}, {j})")
            arcs[i, j] = f

    provenance = {
        "generator": cfg.to_dict(),
        "profile_breakpoints": profile.grid.breakpoints.tolist(),
        "profile_speeds": profile.values.tolist(),
    }
    return TimeDependentGraph(cfg.n, arcs, cfg.horizon, coords,
                              name=instance_name(cfg.seed, cfg.index), provenance=provenance)


def profile_from_provenance(G: TimeDependentGraph) -> SpeedProfile:
    p = G.provenance
    return SpeedProfile(TimeGrid(np.array(p["profile_breakpoints"])), np.array(p["profile_speeds"]))
