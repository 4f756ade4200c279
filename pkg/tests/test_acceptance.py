"""Exit criteria for the package, one test per criterion.

Each test records a one-line verdict that is printed in the pytest terminal
summary under "acceptance criteria".
"""

import math

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from repulsive_nbody import asymptotics as asy
from repulsive_nbody import checks, cli, diagnostics, integrate, model, scenarios
from repulsive_nbody.integrate import StepperConfig


def verdict(label, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail


def window(trajectory, lo=1.0, hi=math.inf):
    return [s for s in trajectory if lo <= s.t <= hi]


def c_of(trajectory):
    return diagnostics.c_constant(trajectory.at(1.0).report)


def test_01_energy_conservation(cloud_run):
    e0 = cloud_run[0].report.e_total
    worst = max(abs(s.report.e_total - e0) / e0 for s in cloud_run)
    verdict("01 energy conservation", worst <= 1e-7, f"max |dE|/E0 = {worst:.3e} (tol 1e-7)")


def test_02_a_priori_bounds(cloud_run):
    e0 = cloud_run[0].report.e_total
    recs = diagnostics.diagnose(cloud_run)
    vm = min(r.velocity_margin for r in recs)
    dm = min(r.distance_margin for r in recs)
    ok = vm >= -1e-9 * math.sqrt(2 * e0) and dm >= -1e-9 / math.sqrt(2 * e0)
    verdict("02 velocity bound and distance floor", ok, f"min velocity_margin {vm:.3e}, min distance_margin {dm:.3e}")


def test_03_theorem_b_identity(cloud_run):
    c = c_of(cloud_run)
    worst = max(
        abs(diagnostics.theorem_b_residual(s.report, s.quad, c)) / (c / s.t) for s in window(cloud_run, 1.0, 1000.0)
    )
    verdict("03 integral identity residual", worst <= 1e-5, f"max |residual_b|/(C/t) = {worst:.3e} (tol 1e-5)")


def _fd_residuals(trajectory, kind):
    samples = window(trajectory)
    e0 = trajectory[0].report.e_total
    out = {}
    for a, b, c in zip(samples, samples[1:], samples[2:]):
        triple = [(s.t, s.report) for s in (a, b, c)]
        if kind == "a":
            out[b.t] = abs(diagnostics.theorem_a_residual(triple)) / (b.t * b.report.e_pot)
        else:
            out[b.t] = abs(diagnostics.virial_residual(triple)) / e0
    return out


def _order_ratio(runs, kind):
    coarse, fine = _fd_residuals(runs[16], kind), _fd_residuals(runs[32], kind)
    common = [t for t in coarse if t in fine]
    return max(coarse[t] for t in common) / max(fine[t] for t in common)


def test_04a_theorem_a_bound(cloud_runs_by_spacing):
    res = _fd_residuals(cloud_runs_by_spacing[16], "a")
    worst_t = max(res, key=res.get)
    verdict("04a differential identity, finite differences at dln t = ln10/16",
            res[worst_t] <= 1e-3, f"max |residual_a|/(t E_pot) = {res[worst_t]:.3e} at t = {worst_t:.3g} (tol 1e-3)")


def test_04b_theorem_a_second_order(cloud_runs_by_spacing):
    r = _order_ratio(cloud_runs_by_spacing, "a")
    verdict("04b differential identity, refinement ratio", 3.5 <= r <= 4.5, f"ratio {r:.3f} (want 3.5-4.5)")


def test_05a_virial_bound(cloud_runs_by_spacing):
    res = _fd_residuals(cloud_runs_by_spacing[16], "v")
    worst_t = max(res, key=res.get)
    verdict("05a virial identity, second differences at dln t = ln10/16",
            res[worst_t] <= 1e-3, f"max |virial_residual|/E0 = {res[worst_t]:.3e} at t = {worst_t:.3g} (tol 1e-3)")


def test_05b_virial_second_order(cloud_runs_by_spacing):
    r = _order_ratio(cloud_runs_by_spacing, "v")
    verdict("05b virial identity, refinement ratio", 3.5 <= r <= 4.5, f"ratio {r:.3f} (want 3.5-4.5)")


def test_06_potential_energy_bound(cloud_run):
    c = c_of(cloud_run)
    worst = max(s.t * s.report.e_pot for s in window(cloud_run))
    verdict("06 t E_pot <= C", worst <= c * (1 + 1e-9), f"max t E_pot = {worst:.6f}, C = {c:.6f}")


def test_07_two_body_oracle(head_on_run):
    worst = 0.0
    for s in head_on_run:
        r = np.linalg.norm(s.state.positions[1] - s.state.positions[0])
        worst = max(worst, abs(r - scenarios.two_body_radial_oracle(1.0, s.t)[0]) / r)
    v, _ = asy.extract_vstar(head_on_run)
    speed_err = float(np.max(np.abs(np.linalg.norm(v, axis=1) - 1.0)))
    verdict("07 head-on vs radial oracle", worst <= 1e-6 and speed_err <= 1e-3,
            f"max |r_sim - r_oracle|/r = {worst:.3e}, max ||v*| - 1| = {speed_err:.3e}")


@pytest.mark.parametrize("which", ["head_on_run", "cloud_run"])
def test_08_velocity_convergence_rate(which, request):
    tr = request.getfixturevalue(which)
    _, e1000 = asy.extract_vstar(tr)
    _, e500 = asy.extract_vstar(tr.truncated(500.0))
    ratio = e1000 / e500
    ok = bool(np.all(np.abs(ratio - 0.5) <= 0.2))
    verdict(f"08 Cauchy estimate halves ({which})", ok, f"ratios {np.round(ratio, 4).tolist()}")


def test_09_linear_growth(cloud_run):
    c1, c2 = asy.fit_growth_constants(cloud_run, (100.0, 1000.0))
    growth = model.min_pairwise_distance(cloud_run.at(1000.0).state) / model.min_pairwise_distance(
        cloud_run.at(100.0).state
    )
    ok = c1 > 0 and math.isfinite(c2) and growth >= 10
    verdict("09 linear growth", ok, f"c1 = {c1:.4f}, c2 = {c2:.4f}, d_min(1000)/d_min(100) = {growth:.3f}")


def test_10_log_drift_model(cloud_run):
    v, _ = asy.extract_vstar(cloud_run)
    fit = asy.extract_xstar(cloud_run, v, (100.0, 1000.0))
    const = asy.constant_model_residual(cloud_run, v, (100.0, 1000.0))
    ok = bool(np.all(fit.fit_residual <= const))
    verdict("10 a + b ln t drift fit beats constant", ok,
            f"log-model rms {np.round(fit.fit_residual, 4).tolist()} vs constant {np.round(const, 4).tolist()}")


def test_11_relative_kinetic_energy_decay(cloud_run):
    q = lambda t: cloud_run.at(t).quad
    late = diagnostics.integral_convergence_check(q(500.0), q(1000.0))
    early = q(100.0).total_e_rel() - q(50.0).total_e_rel()
    recs = [r for r in diagnostics.diagnose(cloud_run) if 100.0 <= r.t <= 1000.0]
    base = next(r.e_rel_scaled for r in recs if r.t == 100.0)
    peak = max(r.e_rel_scaled for r in recs)
    ok = late < early and peak <= 4 * base
    verdict("11 relative kinetic energy integrable, ln^2 t / t^2 scale", ok,
            f"tail [500,1000] {late:.4e} < [50,100] {early:.4e}; max e_rel_scaled/value at 100 = {peak / base:.3f}")


def test_12_distinct_limit_velocities(cloud_run):
    s = asy.summarize(cloud_run)
    err = float(s.v_star_error.max())
    verdict("12 limiting velocities distinct", s.min_vstar_separation >= 10 * err,
            f"min separation {s.min_vstar_separation:.4f}, max v* error {err:.3e}")


def test_13_symmetries(cloud_run):
    cfg = StepperConfig()
    state = cloud_run[0].state
    scaling = checks.scaling_check(state, cfg, 100.0, lam=4.0)
    head_on = scenarios.build(scenarios.ScenarioSpec(kind="two-body-head-on"))
    reversal = checks.reversal_check(head_on, cfg, span=10.0)
    conserved = checks.trajectory_checks(cloud_run, enabled=("momentum", "angular-momentum"))
    parts = [scaling, reversal, *conserved]
    verdict("13 scaling, reversal, momentum, angular momentum", all(p.status == checks.PASS for p in parts),
            ", ".join(f"{p.name} {p.value:.2e}" for p in parts))


def test_14_determinism(tmp_path):
    same = True
    for kind in ("two-body-head-on", "collinear-3", "random-cloud", "regular-polygon"):
        cfg = cli.config_from_dict({"t_end": 100.0, "scenario": {"kind": kind, "seed": 11}})
        for run in ("a", "b"):
            cfg.output.prefix = str(tmp_path / f"{kind}-{run}")
            cli.cmd_run(cfg, quiet=True)
        for ext in ("traj.csv", "diag.csv"):
            same &= (tmp_path / f"{kind}-a.{ext}").read_bytes() == (tmp_path / f"{kind}-b.{ext}").read_bytes()
    verdict("14 byte-identical reruns", same, "traj and diag CSVs for all four scenario kinds")
