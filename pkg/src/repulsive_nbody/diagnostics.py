"""Residuals of the virial-type identities and the a-priori bound monitors.

Every margin is signed: a value >= 0 means the corresponding inequality holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import model
from .errors import NotInDiagnosticWindowError
from .integrate import QuadratureState, Sample, Trajectory
from .model import EnergyReport, ParticleState

NAN = math.nan


@dataclass(frozen=True)
class DiagnosticRecord:
    t: float
    residual_a: float
    residual_b: float
    c_constant: float
    t_epot: float
    e_rel_scaled: float
    velocity_margin: float
    distance_margin: float
    virial_residual: float


def c_constant(report: EnergyReport) -> float:
    """C = t0 (E_kin^rel(t0) + E_pot(t0)) at the anchor time t0 (normally 1)."""
    if not report.t >= 1.0:
        raise NotInDiagnosticWindowError(f"C is defined at t >= 1, got t={report.t}")
    return report.t * (report.e_kin_rel + report.e_pot)


def theorem_b_residual(report: EnergyReport, quad: QuadratureState, c: float) -> float:
    """E_kin^rel(t) + E_pot(t) + (1/t) int E_kin^rel - C/t; zero along exact solutions."""
    t = report.t
    if not t >= 1.0:
        raise NotInDiagnosticWindowError(f"t={t} is before the diagnostic window")
    return report.e_kin_rel + report.e_pot + quad.total_e_rel() / t - c / t


def _check_triple(times):
    t0, t1, t2 = times
    if not (0 < t0 < t1 < t2):
        raise ValueError(f"need three strictly increasing positive times, got {times}")
    return t1 - t0, t2 - t1


def _first_derivative(times, f):
    # three-point Lagrange derivative at the middle node, exact for quadratics
    h1, h2 = _check_triple(times)
    return (-h2 / (h1 * (h1 + h2))) * f[0] + ((h2 - h1) / (h1 * h2)) * f[1] + (h1 / (h2 * (h1 + h2))) * f[2]


def _second_derivative(times, f):
    h1, h2 = _check_triple(times)
    return 2.0 * (h2 * f[0] - (h1 + h2) * f[1] + h1 * f[2]) / (h1 * h2 * (h1 + h2))


def theorem_a_residual(samples: Sequence[tuple[float, EnergyReport]]) -> float:
    """d/dt[t^2 (E_kin^rel + E_pot)] - t E_pot at the middle of three samples."""
    times = [s[0] for s in samples]
    _check_triple(times)
    f = [t * t * (r.e_kin_rel + r.e_pot) for t, r in samples]
    t_mid, r_mid = samples[1]
    return _first_derivative(times, f) - t_mid * r_mid.e_pot


def virial_residual(samples: Sequence[tuple[float, EnergyReport]]) -> float:
    """Second difference of I minus (2E - E_pot) at the middle sample."""
    times = [s[0] for s in samples]
    f = [r.inertia for _, r in samples]
    r_mid = samples[1][1]
    return _second_derivative(times, f) - (2.0 * r_mid.e_total - r_mid.e_pot)


def bound_monitors(state: ParticleState, report: EnergyReport, e0: float):
    """Return (velocity_margin, distance_margin, t_epot, e_rel_scaled).

    ``distance_margin`` is NaN for a single particle and ``e_rel_scaled``
    is NaN before t = e, where ln t < 1.
    """
    speed_cap = math.sqrt(2.0 * e0)
    vmax = float(np.max(np.linalg.norm(state.velocities, axis=1)))
    velocity_margin = speed_cap - vmax
    if state.n >= 2:
        distance_margin = model.min_pairwise_distance(state) - 1.0 / speed_cap
    else:
        distance_margin = NAN
    t = state.t
    t_epot = t * report.e_pot
    if t >= math.e and report.e_kin_rel is not None:
        e_rel_scaled = report.e_kin_rel * t * t / math.log(t) ** 2
    else:
        e_rel_scaled = NAN
    return velocity_margin, distance_margin, t_epot, e_rel_scaled


def integral_convergence_check(quad_half: QuadratureState, quad_full: QuadratureState) -> float:
    """Tail increment int_e_rel(T) - int_e_rel(T/2)."""
    if quad_full.t < 4.0:
        raise ValueError("need T >= 4")
    return quad_full.total_e_rel() - quad_half.total_e_rel()


def anchor_sample(trajectory: Trajectory) -> Sample | None:
    for s in trajectory:
        if s.quad is not None:
            return s
    return None


def diagnose(trajectory: Trajectory, e0: float | None = None) -> list[DiagnosticRecord]:
    """One DiagnosticRecord per sample; undefined entries are NaN."""
    samples = trajectory.samples
    if e0 is None:
        e0 = samples[0].report.e_total
    anchor = anchor_sample(trajectory)
    c = c_constant(anchor.report) if anchor is not None else NAN
    out = []
    for k, s in enumerate(samples):
        vm, dm, tep, ers = bound_monitors(s.state, s.report, e0)
        res_b = theorem_b_residual(s.report, s.quad, c) if s.quad is not None else NAN
        res_a = vir = NAN
        if 0 < k < len(samples) - 1 and samples[k - 1].t > 0:
            triple = [(q.t, q.report) for q in samples[k - 1: k + 2]]
            res_a = theorem_a_residual(triple)
            vir = virial_residual(triple)
        out.append(DiagnosticRecord(s.t, res_a, res_b, c, tep, ers, vm, dm, vir))
    return out
