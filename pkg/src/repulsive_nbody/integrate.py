"""Time stepping for the repulsive n-body system.

The phase-space vector is laid out as ``[x.ravel(), v.ravel()]`` (6n entries).
Adaptive runs use the Dormand-Prince 5(4) pair with step landing on every
requested output time, and carry the two running integrals needed by the
t >= 1 diagnostics along the accepted-step grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import model
from .errors import (
    NotInDiagnosticWindowError,
    NumericalBlowupError,
    StepUnderflowError,
)
from .model import EnergyReport, ParticleState

METHODS = ("rk4-fixed", "dormand-prince-54-adaptive", "velocity-verlet")
ADAPTIVE = "dormand-prince-54-adaptive"

# Dormand-Prince 5(4) tableau (FSAL).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# fifth-order minus embedded fourth-order weights
_E = np.array([
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
])
# Hairer's continuous extension, coefficients of theta, theta^2, theta^3, theta^4.
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


@dataclass(frozen=True)
class StepperConfig:
    method: str = ADAPTIVE
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    initial_step: float = 1e-3
    max_step: float = 1.0
    min_step: float = 1e-12

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.min_step <= self.initial_step <= self.max_step):
            raise ValueError("need 0 < min_step <= initial_step <= max_step")


@dataclass(frozen=True)
class QuadratureState:
    """Running integrals from the anchor time (normally t = 1) up to ``t``.

    Accumulation is Neumaier-compensated so that thousands of small panels
    do not lose digits against the running total.
    """

    t: float
    t_anchor: float = 1.0
    int_e_rel: float = 0.0
    int_t_epot: float = 0.0
    _comp_e_rel: float = field(default=0.0, repr=False)
    _comp_t_epot: float = field(default=0.0, repr=False)

    @property
    def int_g_over_s2(self) -> float:
        # g(s)/s^2 with g = s^2 E_kin^rel is E_kin^rel itself
        return self.int_e_rel

    @classmethod
    def start(cls, t: float = 1.0) -> "QuadratureState":
        if t < 1.0:
            raise NotInDiagnosticWindowError(f"quadrature window starts at t >= 1, got {t}")
        return cls(t=t, t_anchor=t)

    def add_panel(self, t1: float, e_rel: Sequence[float], e_pot: Sequence[float]) -> "QuadratureState":
        """Advance by one Simpson panel on [self.t, t1].

        ``e_rel`` and ``e_pot`` hold integrand values at the left end, the
        midpoint and the right end of the panel.
        """
        t0 = self.t
        if not t1 > t0:
            raise ValueError(f"panel end {t1} must exceed {t0}")
        tm = 0.5 * (t0 + t1)
        w = (t1 - t0) / 6.0
        d_rel = w * (e_rel[0] + 4.0 * e_rel[1] + e_rel[2])
        d_tpot = w * (t0 * e_pot[0] + 4.0 * tm * e_pot[1] + t1 * e_pot[2])
        s1, c1 = _neumaier(self.int_e_rel, self._comp_e_rel, d_rel)
        s2, c2 = _neumaier(self.int_t_epot, self._comp_t_epot, d_tpot)
        return QuadratureState(t1, self.t_anchor, s1, s2, c1, c2)

    def total_e_rel(self) -> float:
        return self.int_e_rel + self._comp_e_rel

    def total_t_epot(self) -> float:
        return self.int_t_epot + self._comp_t_epot


def _neumaier(total, comp, x):
    s = total + x
    if abs(total) >= abs(x):
        comp += (total - s) + x
    else:
        comp += (x - s) + total
    return s, comp


@dataclass(frozen=True)
class Sample:
    state: ParticleState
    report: EnergyReport
    quad: QuadratureState | None

    @property
    def t(self) -> float:
        return self.state.t

    @property
    def int_e_rel(self) -> float:
        return math.nan if self.quad is None else self.quad.total_e_rel()

    @property
    def int_t_epot(self) -> float:
        return math.nan if self.quad is None else self.quad.total_t_epot()


@dataclass
class Trajectory:
    samples: list[Sample]
    n_steps: int = 0
    n_rejected: int = 0

    def __post_init__(self):
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("trajectory sample times must be strictly increasing")

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def positions(self) -> np.ndarray:
        return np.stack([s.state.positions for s in self.samples])

    @property
    def velocities(self) -> np.ndarray:
        return np.stack([s.state.velocities for s in self.samples])

    @property
    def states(self) -> list[ParticleState]:
        return [s.state for s in self.samples]

    @property
    def n(self) -> int:
        return self.samples[0].state.n

    def at(self, t: float) -> Sample:
        for s in self.samples:
            if s.t == t:
                return s
        raise KeyError(f"no sample at t={t}")

    def truncated(self, t_max: float) -> "Trajectory":
        return Trajectory([s for s in self.samples if s.t <= t_max])

    @classmethod
    def from_states(cls, states: Iterable[ParticleState]) -> "Trajectory":
        """Rebuild a trajectory from bare states; quadratures are left empty."""
        return cls([Sample(s, model.energy_report(s), None) for s in states])


def _rhs(y, n):
    x = y[: 3 * n].reshape(n, 3)
    dy = np.empty_like(y)
    dy[: 3 * n] = y[3 * n:]
    dy[3 * n:] = model._accelerations(x).ravel() if n > 1 else 0.0
    return dy


def _pack(state):
    return np.concatenate([state.positions.ravel(), state.velocities.ravel()])


def _unpack(t, y, n):
    return ParticleState(t, y[: 3 * n].reshape(n, 3), y[3 * n:].reshape(n, 3))


def _check_finite(y, t):
    if not np.all(np.isfinite(y)):
        raise NumericalBlowupError(f"non-finite state produced near t={t}")


def _rk4_step(y, h, n):
    k1 = _rhs(y, n)
    k2 = _rhs(y + 0.5 * h * k1, n)
    k3 = _rhs(y + 0.5 * h * k2, n)
    k4 = _rhs(y + h * k3, n)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _verlet_step(y, h, n):
    m = 3 * n
    x = y[:m].reshape(n, 3)
    v = y[m:].reshape(n, 3)
    acc = (lambda z: model._accelerations(z)) if n > 1 else (lambda z: np.zeros_like(z))
    v_half = v + 0.5 * h * acc(x)
    x_new = x + h * v_half
    v_new = v_half + 0.5 * h * acc(x_new)
    return np.concatenate([x_new.ravel(), v_new.ravel()])


def _dp_step(y, h, n, k1):
    """One Dormand-Prince attempt. Returns (y_new, error vector, stages)."""
    K = np.empty((7, y.size))
    K[0] = k1
    for s in range(1, 7):
        K[s] = _rhs(y + h * (np.array(_A[s]) @ K[:s]), n)
    y_new = y + h * (_B[:6] @ K[:6])
    # K[6] was evaluated at y + h*sum(A[6]*K) which equals y_new (FSAL)
    err = h * (_E @ K)
    return y_new, err, K


def _dense(y, h, K, theta):
    q = _P @ np.array([theta, theta**2, theta**3, theta**4])
    return y + h * (q @ K)


def step_fixed(state: ParticleState, dt: float, method: str = "rk4-fixed") -> ParticleState:
    """Advance ``state`` by one step of length ``dt``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = state.n
    y = _pack(state)
    if method == "rk4-fixed":
        y1 = _rk4_step(y, dt, n)
    elif method == "velocity-verlet":
        y1 = _verlet_step(y, dt, n)
    elif method == ADAPTIVE:
        y1, _, _ = _dp_step(y, dt, n, _rhs(y, n))
    else:
        raise ValueError(f"unknown method {method!r}")
    _check_finite(y1, state.t + dt)
    return _unpack(state.t + dt, y1, n)


def integrate_fixed(state: ParticleState, t_end: float, dt: float, method: str = "rk4-fixed") -> ParticleState:
    """March with constant ``dt``; the final step is shortened to land on ``t_end``."""
    n = state.n
    y = _pack(state)
    t = state.t
    step = _rk4_step if method == "rk4-fixed" else _verlet_step
    while t < t_end:
        h = min(dt, t_end - t)
        if t + h >= t_end - 1e-12 * max(1.0, abs(t_end)):
            h = t_end - t
        y = step(y, h, n)
        t = t_end if h == t_end - t else t + h
        _check_finite(y, t)
    return _unpack(t_end, y, n)


def _integrands(t, y, n):
    x = y[: 3 * n].reshape(n, 3)
    v = y[3 * n:].reshape(n, 3)
    return model._relative_kinetic_energy(t, x, v), model._potential_energy(x)


def _hermite(p0, d0, p1, d1, h, theta):
    h00 = (1 + 2 * theta) * (1 - theta) ** 2
    h10 = theta * (1 - theta) ** 2
    h01 = theta**2 * (3 - 2 * theta)
    h11 = theta**2 * (theta - 1)
    return h00 * p0 + h10 * h * d0 + h01 * p1 + h11 * h * d1


def hermite_interpolant(before: ParticleState, after: ParticleState):
    """Cubic Hermite interpolant ``theta -> ParticleState`` between two states.

    Positions use the velocities as slopes, velocities use the accelerations.
    """
    h = after.t - before.t
    a0 = model.accelerations(before)
    a1 = model.accelerations(after)
    x0, x1 = before.positions, after.positions
    v0, v1 = before.velocities, after.velocities

    def at(theta):
        return ParticleState(
            before.t + theta * h,
            _hermite(x0, v0, x1, v1, h, theta),
            _hermite(v0, a0, v1, a1, h, theta),
        )

    return at


def hermite_midpoint(before: ParticleState, after: ParticleState) -> ParticleState:
    """Cubic Hermite estimate of the state halfway between two samples."""
    return hermite_interpolant(before, after)(0.5)


# Simpson sub-panels are kept below this fraction of t so that the running
# integrals stay accurate even when the dynamics allow very long steps.
QUAD_PANEL_FRACTION = 0.02


def _quad_panels(quad, t0, t1, values_at):
    """Composite Simpson over [t0, t1]; ``values_at(theta)`` returns (E_rel, E_pot)."""
    m = max(1, math.ceil((t1 - t0) / (QUAD_PANEL_FRACTION * t0)))
    vals = [values_at(k / (2 * m)) for k in range(2 * m + 1)]
    for j in range(m):
        left, mid, right = vals[2 * j], vals[2 * j + 1], vals[2 * j + 2]
        end = t1 if j == m - 1 else t0 + (t1 - t0) * (j + 1) / m
        quad = quad.add_panel(end, [left[0], mid[0], right[0]], [left[1], mid[1], right[1]])
    return quad


def advance_quadrature(
    quad: QuadratureState,
    state_before: ParticleState,
    state_after: ParticleState,
    state_mid: ParticleState | None = None,
) -> QuadratureState:
    """Add the Simpson panel between two consecutive states.

    With ``state_mid`` this is a single Simpson panel. Without it the interval
    is split into sub-panels no wider than ``QUAD_PANEL_FRACTION * t`` and the
    interior states come from cubic Hermite interpolation of the endpoints.
    """
    if state_before.t < 1.0 or state_after.t < 1.0:
        raise NotInDiagnosticWindowError("quadrature is only defined for t >= 1")
    if not state_after.t > state_before.t:
        raise ValueError("state times must increase")
    if quad.t != state_before.t:
        raise ValueError(f"quadrature is at t={quad.t}, panel starts at {state_before.t}")
    values = lambda s: (model.relative_kinetic_energy(s), model.potential_energy(s))
    if state_mid is not None:
        vals = [values(s) for s in (state_before, state_mid, state_after)]
        return quad.add_panel(state_after.t, [v[0] for v in vals], [v[1] for v in vals])
    interp = hermite_interpolant(state_before, state_after)
    return _quad_panels(quad, state_before.t, state_after.t, lambda th: values(interp(th)))


def time_reverse(state: ParticleState) -> ParticleState:
    return ParticleState(state.t, state.positions, -state.velocities)


def geometric_output_times(
    t_end: float,
    factor: float = 10 ** (1 / 16),
    t_first: float = 1.0,
    t_start: float = 0.0,
    extra: Iterable[float] = (),
) -> list[float]:
    """Start time, then t_first * factor**k up to t_end, plus t_end and ``extra``.

    Grid points are computed as powers (not by repeated multiplication) so
    that e.g. 10**(32/16) is exactly 100.
    """
    if not factor > 1:
        raise ValueError("factor must exceed 1")
    log_f = math.log10(factor)
    per_decade = 1.0 / log_f
    times = {float(t_start), float(t_end)}
    k = 0
    while True:
        if abs(per_decade - round(per_decade)) < 1e-9:
            t = t_first * 10 ** (k / round(per_decade))
        else:
            t = t_first * factor**k
        if t >= t_end:
            break
        if t >= t_start:
            times.add(float(t))
        k += 1
    times.update(float(e) for e in extra if t_start <= e <= t_end)
    return sorted(times)


def integrate_adaptive(
    state: ParticleState,
    t_end: float,
    config: StepperConfig | None = None,
    output_times: Sequence[float] | None = None,
) -> Trajectory:
    """Integrate from ``state.t`` to ``t_end`` and sample at ``output_times``.

    Steps are shortened to land exactly on every output time and on t = 1,
    where the running integrals are anchored. For the fixed-step methods
    ``config.initial_step`` is the step length.
    """
    config = config or StepperConfig()
    t0 = state.t
    if not t_end > t0:
        raise ValueError(f"t_end={t_end} must exceed the start time {t0}")
    if output_times is None:
        output_times = [t0, t_end]
    outs = sorted(float(t) for t in output_times)
    if any(b <= a for a, b in zip(outs, outs[1:])):
        raise ValueError("output_times must be strictly increasing")
    if outs and (outs[0] < t0 or outs[-1] > t_end):
        raise ValueError("output_times must lie within [start, t_end]")
    if not outs or outs[0] != t0:
        outs.insert(0, t0)
    out_set = set(outs)

    anchor = max(1.0, t0)
    landings = sorted(out_set | {t_end} | ({anchor} if anchor < t_end else set()))

    n = state.n
    y = _pack(state)
    t = t0
    quad = QuadratureState.start(anchor) if t0 >= 1.0 else None
    samples = [Sample(state, model.energy_report(state), quad)]
    adaptive = config.method == ADAPTIVE
    h = config.initial_step
    k1 = _rhs(y, n) if adaptive else None
    n_steps = n_rej = 0
    land_idx = 1 if landings[0] == t0 else 0

    while land_idx < len(landings):
        target = landings[land_idx]
        h_try = min(h, config.max_step)
        landing = False
        if t + h_try >= target - 1e-12 * max(1.0, target):
            h_try = target - t
            landing = True

        if adaptive:
            y_new, err, K = _dp_step(y, h_try, n, k1)
            scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))
            if not np.isfinite(err_norm):
                err_norm = np.inf
            if err_norm > 1.0:
                n_rej += 1
                h = h_try * max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2)
                if h < config.min_step:
                    raise StepUnderflowError(f"step {h:.3e} below min_step at t={t}")
                continue
            factor = _MAX_FACTOR if err_norm == 0 else min(_MAX_FACTOR, _SAFETY * err_norm ** -0.2)
            h_next = h_try * factor
            if landing:
                # keep the pre-landing proposal; the clipped step says nothing about accuracy
                h_next = max(h_next, h)
        else:
            y_new = (_rk4_step if config.method == "rk4-fixed" else _verlet_step)(y, h_try, n)
            K = None
            h_next = config.initial_step

        t_new = target if landing else t + h_try
        _check_finite(y_new, t_new)

        if quad is not None:
            if K is not None:
                def values_at(theta, t=t, y=y, y_new=y_new, K=K, h=h_try):
                    if theta == 0:
                        return _integrands(t, y, n)
                    if theta == 1:
                        return _integrands(t_new, y_new, n)
                    return _integrands(t + theta * h, _dense(y, h, K, theta), n)

                quad = _quad_panels(quad, t, t_new, values_at)
            else:
                quad = advance_quadrature(quad, _unpack(t, y, n), _unpack(t_new, y_new, n))

        y, t = y_new, t_new
        if adaptive:
            k1 = K[6]
        n_steps += 1
        h = h_next

        if landing:
            if t == anchor and quad is None:
                quad = QuadratureState.start(anchor)
            if t in out_set:
                st = _unpack(t, y, n)
                samples.append(Sample(st, model.energy_report(st), quad))
            land_idx += 1

    return Trajectory(samples, n_steps=n_steps, n_rejected=n_rej)
