"""
Choosing the number of states, then bootstrap standard errors
=============================================================

AIC, BIC and ICL over K = 1..4 on one simulated sample, followed by a
parametric bootstrap of the selected model.
"""

import numpy as np

from exphmm.em import FitConfig
from exphmm.evaluation import best_by, parametric_bootstrap, select_states
from exphmm.simulation import two_state_spec, simulate_dgp

data, _ = simulate_dgp(two_state_spec("gaussian", 500), np.random.default_rng(3))
rows, fits = select_states(data, FitConfig(n_starts=8, seed=2), range(1, 5), [0.5])

print(f"{'K':>2} {'loglik':>10} {'AIC':>10} {'BIC':>10} {'ICL':>10} {'entropy':>8}")
for r in rows:
    print(f"{r.K:>2} {r.loglik:>10.2f} {r.aic:>10.2f} {r.bic:>10.2f} {r.icl:>10.2f} {r.entropy:>8.2f}")

###############################################################################
# ICL charges for fuzzy state assignments, so it tends to stop earlier than
# BIC when the regimes overlap.

K = best_by(rows, "icl", 0.5)
print({c: best_by(rows, c, 0.5) for c in ("aic", "bic", "icl")})

res = fits[(K, 0.5)]
rep = parametric_bootstrap(res, data, R=50, seed=9, config=FitConfig(n_starts=3))
print(f"\nbootstrap: {rep.n_converged}/{rep.R} replicates converged")
sig = rep.significant()
for k in range(K):
    for p, name in enumerate(data.names):
        b, se = res.params.beta[k, p], rep.se_beta[k, p]
        print(f"state {k + 1} {name:<10} {b:+.3f} ({se:.3f}){' *' if sig[k, p] else ''}")
    print(f"state {k + 1} sigma      {res.params.sigma[k]:.3f} ({rep.se_sigma[k]:.3f})")
