"""Initial conditions and the head-on two-body radial oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize

from .errors import InfeasibleSpecError
from .model import ParticleState

KINDS = ("two-body-head-on", "collinear-3", "random-cloud", "regular-polygon")
MAX_ATTEMPTS = 10_000


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = "random-cloud"
    n: int = 5
    seed: int = 0
    position_radius: float = 2.0
    speed_radius: float = 0.5
    min_initial_separation: float = 0.5
    head_on_separation: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; choose from {KINDS}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        for name in ("position_radius", "speed_radius", "min_initial_separation", "head_on_separation"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def particle_count(self) -> int:
        return {"two-body-head-on": 2, "collinear-3": 3}.get(self.kind, self.n)


def _uniform_ball(rng, radius):
    # cube rejection keeps the draw sequence simple to reproduce elsewhere
    while True:
        p = rng.uniform(-1.0, 1.0, size=3)
        if p @ p <= 1.0:
            return radius * p


def _random_cloud(spec):
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    positions = []
    attempts = 0
    while len(positions) < spec.n:
        if attempts >= MAX_ATTEMPTS:
            raise InfeasibleSpecError(
                f"could not place {spec.n} particles with separation "
                f">= {spec.min_initial_separation} in radius {spec.position_radius}"
            )
        attempts += 1
        p = _uniform_ball(rng, spec.position_radius)
        if all(np.linalg.norm(p - q) >= spec.min_initial_separation for q in positions):
            positions.append(p)
    velocities = [_uniform_ball(rng, spec.speed_radius) for _ in range(spec.n)]
    return np.array(positions), np.array(velocities)


def build(spec: ScenarioSpec) -> ParticleState:
    """Initial state at t = 0 for the given scenario."""
    if spec.kind == "two-body-head-on":
        d = spec.head_on_separation
        x = np.array([[-d / 2, 0.0, 0.0], [d / 2, 0.0, 0.0]])
        return ParticleState(0.0, x, np.zeros((2, 3)))
    if spec.kind == "collinear-3":
        x = np.array([[-1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        return ParticleState(0.0, x, np.zeros((3, 3)))
    if spec.kind == "regular-polygon":
        k = np.arange(spec.n)
        phi = 2 * np.pi * k / spec.n
        x = np.stack([np.cos(phi), np.sin(phi), np.zeros(spec.n)], axis=1)
        return ParticleState(0.0, x, np.zeros((spec.n, 3)))
    x, v = _random_cloud(spec)
    return ParticleState(0.0, x, v)


def _time_to_reach(r, d):
    """Time for the head-on pair to separate from d to r.

    With r = d + u^2 the integrand dr / (2 sqrt(1/d - 1/r)) becomes
    sqrt(r d) du, which is smooth at u = 0.
    """
    if r <= d:
        return 0.0
    u_max = math.sqrt(r - d)
    val, _ = sp_integrate.quad(
        lambda u: math.sqrt((d + u * u) * d), 0.0, u_max,
        epsabs=1e-12, epsrel=1e-13, limit=200,
    )
    return val


def two_body_radial_oracle(d: float, t_query: float) -> tuple[float, float]:
    """Separation r(t) and relative speed dr/dt for the pair released at rest at distance d.

    Energy conservation gives (dr/dt)^2 / 4 + 1/r = 1/d.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    if t_query < 0:
        raise ValueError("t_query must be nonnegative")
    if t_query == 0:
        return d, 0.0
    # relative speed never exceeds 2/sqrt(d)
    hi = d + 2.0 * t_query / math.sqrt(d) + 1.0
    r = optimize.brentq(
        lambda r: _time_to_reach(r, d) - t_query, d, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
        maxiter=500,
    )
    return r, 2.0 * math.sqrt(max(1.0 / d - 1.0 / r, 0.0))
