"""Phase-space state, repulsive Coulomb forces and scalar energy functionals.

Masses and charges are all unity. Every function here is pure; the array
level helpers (prefixed ``_``) skip validation so the integrator can call
them on raw buffers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfigurationError, NotApplicableError, UndefinedAtTimeError


@dataclass(frozen=True)
class ParticleState:
    """Snapshot of n unit-mass, unit-charge particles at time ``t``."""

    t: float
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        x = np.array(self.positions, dtype=np.float64).reshape(-1, 3)
        v = np.array(self.velocities, dtype=np.float64).reshape(-1, 3)
        if x.shape != v.shape:
            raise ValueError(f"positions {x.shape} and velocities {v.shape} differ in shape")
        if x.shape[0] < 1:
            raise ValueError("need at least one particle")
        if not (np.isfinite(self.t) and np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("state contains non-finite values")
        x.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def replace(self, t=None, positions=None, velocities=None) -> "ParticleState":
        return ParticleState(
            self.t if t is None else t,
            self.positions if positions is None else positions,
            self.velocities if velocities is None else velocities,
        )

    def __eq__(self, other):
        if not isinstance(other, ParticleState):
            return NotImplemented
        return (
            self.t == other.t
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.velocities, other.velocities)
        )

    __hash__ = None


@dataclass(frozen=True)
class EnergyReport:
    e_kin: float
    e_pot: float
    e_total: float
    e_kin_rel: float | None
    inertia: float
    inertia_rate: float
    t: float = field(default=float("nan"))


def _pair_geometry(x):
    """Return (separation vectors x_i - x_j, squared distances) with +inf on the diagonal."""
    diff = x[:, None, :] - x[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    n = x.shape[0]
    off = ~np.eye(n, dtype=bool)
    if n > 1 and np.any(r2[off] == 0.0):
        i, j = np.argwhere((r2 == 0.0) & off)[0]
        raise DegenerateConfigurationError(f"particles {i} and {j} coincide")
    np.fill_diagonal(r2, np.inf)
    return diff, r2


def _accelerations(x):
    diff, r2 = _pair_geometry(x)
    inv_r3 = 1.0 / (r2 * np.sqrt(r2))
    # axis-1 reduction walks j in ascending order, so results are bit-reproducible
    return np.sum(diff * inv_r3[:, :, None], axis=1)


def _potential_energy(x):
    n = x.shape[0]
    if n < 2:
        return 0.0
    _, r2 = _pair_geometry(x)
    iu = np.triu_indices(n, k=1)
    return float(np.sum(1.0 / np.sqrt(r2[iu])))


def _kinetic_energy(v):
    return 0.5 * float(np.sum(v * v))


def _relative_kinetic_energy(t, x, v):
    if not t > 0:
        raise UndefinedAtTimeError(f"relative kinetic energy is undefined at t={t}")
    w = v - x / t
    return 0.5 * float(np.sum(w * w))


def accelerations(state: ParticleState) -> np.ndarray:
    """Coulomb repulsion: a_i = sum_{j != i} (x_i - x_j) / |x_i - x_j|^3."""
    if state.n == 1:
        return np.zeros((1, 3))
    return _accelerations(state.positions)


def potential_energy(state: ParticleState) -> float:
    return _potential_energy(state.positions)


def kinetic_energy(state: ParticleState) -> float:
    return _kinetic_energy(state.velocities)


def relative_kinetic_energy(state: ParticleState) -> float:
    """Kinetic energy measured against the self-similar flow v_i = x_i / t.

    Raises UndefinedAtTimeError for t <= 0.
    """
    return _relative_kinetic_energy(state.t, state.positions, state.velocities)


def moment_of_inertia(state: ParticleState) -> tuple[float, float]:
    """Return ``(I, dI/dt)`` with I = 1/2 sum |x_i|^2 and dI/dt = sum x_i . v_i."""
    x, v = state.positions, state.velocities
    return 0.5 * float(np.sum(x * x)), float(np.sum(x * v))


def energy_report(state: ParticleState) -> EnergyReport:
    e_kin = kinetic_energy(state)
    e_pot = potential_energy(state)
    e_rel = relative_kinetic_energy(state) if state.t > 0 else None
    inertia, rate = moment_of_inertia(state)
    return EnergyReport(e_kin, e_pot, e_kin + e_pot, e_rel, inertia, rate, state.t)


def pairwise_distances(state: ParticleState) -> np.ndarray:
    diff = state.positions[:, None, :] - state.positions[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def min_pairwise_distance(state: ParticleState) -> float:
    if state.n < 2:
        raise NotApplicableError("minimum pairwise distance needs n >= 2")
    d = pairwise_distances(state)
    return float(d[np.triu_indices(state.n, k=1)].min())


def max_pairwise_distance(state: ParticleState) -> float:
    if state.n < 2:
        raise NotApplicableError("maximum pairwise distance needs n >= 2")
    d = pairwise_distances(state)
    return float(d[np.triu_indices(state.n, k=1)].max())


def total_momentum(state: ParticleState) -> np.ndarray:
    return state.velocities.sum(axis=0)


def total_angular_momentum(state: ParticleState) -> np.ndarray:
    return np.cross(state.positions, state.velocities).sum(axis=0)
