#!/usr/bin/env python3
"""Late-time decay of E_pot and E_kin^rel and the asymptotic summary for a few seeds.

    python scripts/decay_rates.py --seeds 0 1 2 3
"""

import argparse
import json

import numpy as np

from repulsive_nbody import asymptotics, diagnostics, integrate, scenarios
from repulsive_nbody.integrate import StepperConfig


def run(seed, n, t_end):
    state = scenarios.build(scenarios.ScenarioSpec(n=n, seed=seed))
    times = integrate.geometric_output_times(t_end, extra=(t_end / 2, t_end / 4, t_end / 10, t_end / 20))
    return integrate.integrate_adaptive(state, t_end, StepperConfig(), times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3])
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--t-end", type=float, default=1000.0)
    ap.add_argument("--json", action="store_true", help="print full summaries as JSON")
    args = ap.parse_args()

    for seed in args.seeds:
        tr = run(seed, args.n, args.t_end)
        tail = [s for s in tr if s.t >= 10.0]
        t = np.array([s.t for s in tail])
        epot = asymptotics.fit_decay_rate(t, [s.report.e_pot for s in tail])
        erel = asymptotics.fit_decay_rate(t, [s.report.e_kin_rel for s in tail], "power-times-log-squared")
        q = lambda x: tr.at(x).quad
        tail_int = diagnostics.integral_convergence_check(q(args.t_end / 2), q(args.t_end))
        summ = asymptotics.summarize(tr)
        print(
            f"seed {seed}: E_pot ~ t^{epot.exponent:.3f} (rms {epot.residual:.2e}), "
            f"E_rel ln^2t/t^2 spread {erel.residual:.2f}, tail integral {tail_int:.3e}, "
            f"v* error {summ.v_star_error.max():.2e}, min v* separation {summ.min_vstar_separation:.3f}"
        )
        if args.json:
            print(json.dumps(summ.to_dict(), indent=2))


if __name__ == "__main__":
    main()
