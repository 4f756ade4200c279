#!/usr/bin/env python3
"""Finite-difference residuals of the differential and virial identities versus output spacing.

The residuals are pure truncation error of the three-point differences, so
halving the log spacing should cut the worst value by about four.

    python scripts/convergence_study.py --seed 0 --t-end 1000
"""

import argparse

from repulsive_nbody import diagnostics, integrate, scenarios
from repulsive_nbody.integrate import StepperConfig


def residuals(trajectory):
    e0 = trajectory[0].report.e_total
    window = [s for s in trajectory if s.t >= 1.0]
    out = {}
    for a, b, c in zip(window, window[1:], window[2:]):
        trip = [(s.t, s.report) for s in (a, b, c)]
        out[b.t] = (
            abs(diagnostics.theorem_a_residual(trip)) / (b.t * b.report.e_pot),
            abs(diagnostics.virial_residual(trip)) / e0,
        )
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--t-end", type=float, default=1000.0)
    ap.add_argument("--per-decade", type=int, nargs="+", default=[8, 16, 32, 64])
    args = ap.parse_args()

    state = scenarios.build(scenarios.ScenarioSpec(n=args.n, seed=args.seed))
    rows = {}
    for k in args.per_decade:
        times = integrate.geometric_output_times(args.t_end, factor=10 ** (1 / k))
        rows[k] = residuals(integrate.integrate_adaptive(state, args.t_end, StepperConfig(), times))

    print(f"{'per decade':>10}  {'max res_a':>10}  {'max virial':>10}  {'ratio_a':>7}  {'ratio_v':>7}")
    prev = None
    for k, res in rows.items():
        ra = max(v[0] for v in res.values())
        rv = max(v[1] for v in res.values())
        ratios = ("", "")
        if prev is not None:
            common = [t for t in prev if t in res]
            ratios = tuple(
                f"{max(prev[t][i] for t in common) / max(res[t][i] for t in common):7.3f}" for i in (0, 1)
            )
        print(f"{k:>10}  {ra:10.3e}  {rv:10.3e}  {ratios[0]:>7}  {ratios[1]:>7}")
        prev = res


if __name__ == "__main__":
    main()
