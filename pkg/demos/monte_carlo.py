"""
A small Monte Carlo study
=========================

Bias and spread of the state coefficients over repeated simulated samples,
for both error laws.  Kept at 30 replications so it runs in about a
minute; the acceptance suite uses 100.
"""

import numpy as np

from exphmm.em import FitConfig
from exphmm.simulation import DESIGN_TAUS, two_state_spec, run_mc_study

cfg = FitConfig(n_starts=5)
reports = {kind: run_mc_study(two_state_spec(kind, 500), DESIGN_TAUS, 30, cfg, seed=5) for kind in ("gaussian", "skewt")}

###############################################################################
# Rows follow the usual table layout: state, coefficient, then bias and
# standard deviation at each tau.

for kind, rep in reports.items():
    print(f"\n{kind} errors, T = {rep.T}, {rep.n_replications} replications, failures {rep.failures.tolist()}")
    print("            " + "".join(f"{t:>16}" for t in rep.taus))
    for k in range(2):
        for p, name in enumerate(("intercept", "slope")):
            cells = "".join(f"{rep.bias[i, k, p]:>+8.3f}{rep.std[i, k, p]:>8.3f}" for i in range(len(rep.taus)))
            print(f"s{k + 1} {name:<9}{cells}")

###############################################################################
# State recovery: median adjusted Rand index per tau.

for kind, rep in reports.items():
    print(f"{kind:>9} median ARI:", np.round(rep.median_ari(), 3))
