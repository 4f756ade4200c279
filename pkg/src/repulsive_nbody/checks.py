"""Pass/fail battery shared by ``run`` and ``verify``.

Each check reduces a trajectory (or a small side experiment) to one
normalized number and compares it with a tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import asymptotics, diagnostics, integrate, model
from .errors import InsufficientHorizonError, NotApplicableError
from .integrate import StepperConfig, Trajectory
from .model import ParticleState

PASS, FAIL, NA = "pass", "fail", "n/a"

DEFAULT_TOLERANCES = {
    "energy": 1e-7,
    "momentum": 1e-9,
    "angular-momentum": 1e-9,
    "velocity-bound": 1e-9,
    "distance-floor": 1e-9,
    "theorem-b": 1e-5,
    "theorem-a": 1e-3,
    "theorem-a-integral": 1e-6,
    "virial": 1e-3,
    "corollary-a": 1e-9,
    "corollary-b-rate": 0.2,
    "vstar-distinct": 10.0,
    "linear-growth": 10.0,
    "drift-model": 0.0,
    "remark-b-tail": 1.0,
    "remark-b-decay": 4.0,
    "scaling": 1e-6,
    "reversal": 1e-6,
}
TRAJECTORY_CHECKS = tuple(k for k in DEFAULT_TOLERANCES if k not in ("scaling", "reversal"))
SYMMETRY_CHECKS = ("scaling", "reversal")
ALL_CHECKS = tuple(DEFAULT_TOLERANCES)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    status: str
    relation: str = "<="
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    def to_dict(self) -> dict:
        return {
            "value": None if math.isnan(self.value) else self.value,
            "tolerance": self.tolerance,
            "relation": self.relation,
            "status": self.status,
            "detail": self.detail,
        }


def _judge(name, value, tol, relation="<=", detail=""):
    if math.isnan(value):
        return CheckResult(name, value, tol, FAIL, relation, detail or "non-finite value")
    ok = value <= tol if relation == "<=" else value >= tol
    return CheckResult(name, float(value), tol, PASS if ok else FAIL, relation, detail)


def _na(name, tol, detail, relation="<="):
    return CheckResult(name, math.nan, tol, NA, relation, detail)


def _window_samples(trajectory):
    return [s for s in trajectory if s.quad is not None]


def _term_scale(values):
    return max(float(np.sum(np.linalg.norm(v, axis=-1))) for v in values)


def _energy(tr, tol, ctx):
    e0 = ctx["e0"]
    drift = max(abs(s.report.e_total - e0) for s in tr) / e0
    return _judge("energy", drift, tol, detail="max |E(t)-E(0)|/E(0)")


def _momentum(tr, tol, ctx):
    p = np.array([model.total_momentum(s.state) for s in tr])
    scale = _term_scale([s.state.velocities for s in tr])
    drift = float(np.max(np.linalg.norm(p - p[0], axis=1)))
    return _judge("momentum", drift / scale if scale else drift, tol, detail="max |P(t)-P(0)| / sum |v_i|")


def _angular(tr, tol, ctx):
    L = np.array([model.total_angular_momentum(s.state) for s in tr])
    scale = max(
        float(np.sum(np.linalg.norm(s.state.positions, axis=1) * np.linalg.norm(s.state.velocities, axis=1)))
        for s in tr
    )
    drift = float(np.max(np.linalg.norm(L - L[0], axis=1)))
    return _judge("angular-momentum", drift / scale if scale else drift, tol,
                  detail="max |L(t)-L(0)| / sum |x_i||v_i|")


def _velocity(tr, tol, ctx):
    cap = math.sqrt(2 * ctx["e0"])
    worst = min(r.velocity_margin for r in ctx["records"])
    return _judge("velocity-bound", -worst / cap, tol, detail="-min velocity_margin / sqrt(2E0)")


def _distance(tr, tol, ctx):
    if tr.n < 2:
        return _na("distance-floor", tol, "needs n >= 2")
    floor = 1 / math.sqrt(2 * ctx["e0"])
    worst = min(r.distance_margin for r in ctx["records"])
    return _judge("distance-floor", -worst / floor, tol, detail="-min distance_margin / floor")


def _theorem_b(tr, tol, ctx):
    recs = [r for r in ctx["records"] if not math.isnan(r.residual_b)]
    if len(recs) < 2:
        return _na("theorem-b", tol, "run does not reach past t = 1")
    c = recs[0].c_constant
    worst = max(abs(r.residual_b) / (c / r.t) if c > 0 else abs(r.residual_b) for r in recs)
    return _judge("theorem-b", worst, tol, detail="max |residual_b| / (C/t)")


def _triples(ctx):
    return [r for r in ctx["records"] if r.t >= ctx["anchor_t"] and not math.isnan(r.residual_a)]


def _theorem_a(tr, tol, ctx):
    if tr.n < 2:
        return _na("theorem-a", tol, "t E_pot vanishes for n = 1")
    recs = _triples(ctx)
    if not recs:
        return _na("theorem-a", tol, "no interior samples with t >= 1")
    worst = max(abs(r.residual_a) / r.t_epot for r in recs)
    return _judge("theorem-a", worst, tol, detail="max |residual_a| / (t E_pot), finite differences")


def _theorem_a_integral(tr, tol, ctx):
    win = _window_samples(tr)
    if len(win) < 2:
        return _na("theorem-a-integral", tol, "run does not reach past t = 1")
    F = lambda s: s.t**2 * (s.report.e_kin_rel + s.report.e_pot)
    f0 = F(win[0])
    worst = max(abs(F(s) - f0 - s.int_t_epot) / (f0 + s.int_t_epot) for s in win[1:])
    return _judge("theorem-a-integral", worst, tol,
                  detail="max |F(t) - F(1) - int s E_pot| / (F(1) + int s E_pot)")


def _virial(tr, tol, ctx):
    recs = _triples(ctx)
    if not recs:
        return _na("virial", tol, "no interior samples with t >= 1")
    worst = max(abs(r.virial_residual) for r in recs) / ctx["e0"]
    return _judge("virial", worst, tol, detail="max |virial_residual| / E0")


def _corollary_a(tr, tol, ctx):
    recs = [r for r in ctx["records"] if not math.isnan(r.residual_b)]
    if tr.n < 2 or not recs:
        return _na("corollary-a", tol, "needs n >= 2 and t >= 1")
    c = recs[0].c_constant
    return _judge("corollary-a", max(r.t_epot for r in recs) / c - 1.0, tol, detail="max t E_pot / C - 1")


def _sample_near(tr, t):
    try:
        return tr.at(t)
    except KeyError:
        return None


def _corollary_b_rate(tr, tol, ctx):
    T = tr.times[-1]
    if T < 40:
        return _na("corollary-b-rate", tol, "horizon too short")
    v = tr.velocities
    est = lambda t: np.linalg.norm(
        asymptotics._interp_cubic(tr.times, v, t) - asymptotics._interp_cubic(tr.times, v, t / 2), axis=1
    )
    late, early = est(T), est(T / 2)
    moving = early > 0
    if not np.any(moving):
        return _na("corollary-b-rate", tol, "velocities are already constant")
    # particles pinned by symmetry carry no rate information
    ratio = late[moving] / early[moving]
    worst = float(np.max(np.abs(ratio - 0.5)))
    return _judge("corollary-b-rate", worst, tol, detail="max |e(T)/e(T/2) - 0.5| over particles")


def _vstar_distinct(tr, tol, ctx):
    summ = ctx.get("summary")
    if tr.n < 2:
        return _na("vstar-distinct", tol, "needs n >= 2", ">=")
    if summ is None:
        return _na("vstar-distinct", tol, "horizon too short", ">=")
    err = float(np.max(summ.v_star_error))
    ratio = summ.min_vstar_separation / err if err > 0 else math.inf
    return _judge("vstar-distinct", ratio, tol, ">=", "min |v_i* - v_j*| / max v* error")


def _linear_growth(tr, tol, ctx):
    summ = ctx.get("summary")
    if tr.n < 2:
        return _na("linear-growth", tol, "needs n >= 2", ">=")
    T = tr.times[-1]
    lo = _sample_near(tr, T / 10)
    if summ is None or lo is None or lo.t <= 0:
        return _na("linear-growth", tol, "needs a sample at T/10", ">=")
    if not (summ.c1 > 0 and math.isfinite(summ.c2)):
        return _judge("linear-growth", 0.0, tol, ">=", "c1 <= 0 or c2 infinite")
    ratio = model.min_pairwise_distance(tr[-1].state) / model.min_pairwise_distance(lo.state)
    return _judge("linear-growth", ratio, tol, ">=", "d_min(T) / d_min(T/10), with c1 > 0")


def _drift_model(tr, tol, ctx):
    summ = ctx.get("summary")
    if summ is None:
        return _na("drift-model", tol, "horizon too short")
    const = asymptotics.constant_model_residual(tr, summ.v_star, summ.window)
    excess = float(np.max(summ.drift_fit_residual - const))
    return _judge("drift-model", excess, tol + 1e-12 * float(np.max(const)),
                  detail="max(log-model residual - constant residual)")


def _remark_b_tail(tr, tol, ctx):
    T = tr.times[-1]
    pts = [_sample_near(tr, t) for t in (T / 20, T / 10, T / 2, T)]
    if any(p is None or p.quad is None for p in pts):
        return _na("remark-b-tail", tol, "needs samples at T/20, T/10, T/2 (all >= 1)")
    late = diagnostics.integral_convergence_check(pts[2].quad, pts[3].quad)
    early = pts[1].int_e_rel - pts[0].int_e_rel
    ratio = late / early if early > 0 else (0.0 if late == 0 else math.inf)
    # strict inequality: late increment must stay below the earlier decade's
    res = _judge("remark-b-tail", ratio, tol, detail="tail increment [T/2,T] / increment [T/20,T/10]")
    if res.status == PASS and ratio == tol:
        res = CheckResult(res.name, ratio, tol, FAIL, res.relation, res.detail)
    return res


def _remark_b_decay(tr, tol, ctx):
    T = tr.times[-1]
    recs = [r for r in ctx["records"] if r.t >= T / 10 and not math.isnan(r.e_rel_scaled)]
    if T / 10 < math.e or not recs:
        return _na("remark-b-decay", tol, "window starts before t = e")
    base = recs[0].e_rel_scaled
    ratio = max(r.e_rel_scaled for r in recs) / base if base > 0 else 1.0
    return _judge("remark-b-decay", ratio, tol, detail="max e_rel_scaled on [T/10, T] / value at T/10")


_TRAJECTORY_FUNCS: dict[str, Callable] = {
    "energy": _energy,
    "momentum": _momentum,
    "angular-momentum": _angular,
    "velocity-bound": _velocity,
    "distance-floor": _distance,
    "theorem-b": _theorem_b,
    "theorem-a": _theorem_a,
    "theorem-a-integral": _theorem_a_integral,
    "virial": _virial,
    "corollary-a": _corollary_a,
    "corollary-b-rate": _corollary_b_rate,
    "vstar-distinct": _vstar_distinct,
    "linear-growth": _linear_growth,
    "drift-model": _drift_model,
    "remark-b-tail": _remark_b_tail,
    "remark-b-decay": _remark_b_decay,
}


def safe_summary(trajectory: Trajectory):
    try:
        return asymptotics.summarize(trajectory)
    except (InsufficientHorizonError, NotApplicableError):
        return None


def trajectory_checks(trajectory: Trajectory, enabled=TRAJECTORY_CHECKS, tolerances=None,
                      records=None, summary=None) -> list[CheckResult]:
    tols = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    anchor = diagnostics.anchor_sample(trajectory)
    ctx = {
        "e0": trajectory[0].report.e_total,
        "records": records if records is not None else diagnostics.diagnose(trajectory),
        "summary": summary if summary is not None else safe_summary(trajectory),
        "anchor_t": anchor.t if anchor is not None else math.inf,
    }
    return [_TRAJECTORY_FUNCS[name](trajectory, tols[name], ctx) for name in TRAJECTORY_CHECKS if name in enabled]


def scaling_check(state: ParticleState, config: StepperConfig, horizon: float, lam: float = 4.0,
                  tol: float = 1e-6) -> CheckResult:
    """x -> lam x, v -> lam^-1/2 v, t -> lam^3/2 t maps solutions to solutions."""
    tscale = lam**1.5
    times = integrate.geometric_output_times(horizon, t_start=state.t, t_first=max(state.t, 1.0))
    ref = integrate.integrate_adaptive(state, horizon, config, times)
    scaled0 = ParticleState(state.t * tscale, lam * state.positions, state.velocities / math.sqrt(lam))
    run = integrate.integrate_adaptive(scaled0, horizon * tscale, config, [t * tscale for t in times])
    worst = 0.0
    for a, b in zip(ref, run):
        dx = np.max(np.abs(b.state.positions - lam * a.state.positions)) / np.max(np.abs(lam * a.state.positions))
        vref = a.state.velocities / math.sqrt(lam)
        vmag = max(float(np.max(np.abs(vref))), 1e-300)
        dv = np.max(np.abs(b.state.velocities - vref)) / vmag
        worst = max(worst, float(dx), float(dv))
    return _judge("scaling", worst, tol, detail=f"max relative mismatch, lambda={lam:g}, horizon {horizon:g}")


def reversal_check(state: ParticleState, config: StepperConfig, span: float = 10.0,
                   tol: float = 1e-6) -> CheckResult:
    """Forward, reverse, forward, reverse must return the initial phase-space point."""
    fwd = integrate.integrate_adaptive(state, state.t + span, config)[-1].state
    back = integrate.integrate_adaptive(integrate.time_reverse(fwd), fwd.t + span, config)[-1].state
    final = integrate.time_reverse(back)
    worst = max(
        float(np.max(np.abs(final.positions - state.positions))),
        float(np.max(np.abs(final.velocities - state.velocities))),
    )
    return _judge("reversal", worst, tol, detail=f"max coordinate error after +-{span:g} round trip")


def format_table(results: list[CheckResult]) -> str:
    rows = [("check", "value", "relation", "tolerance", "verdict")]
    for r in results:
        val = "-" if math.isnan(r.value) else f"{r.value:.3e}"
        rows.append((r.name, val, r.relation, f"{r.tolerance:.1e}", r.status.upper()))
    widths = [max(len(row[i]) for row in rows) for i in range(5)]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows)
