"""
Critical values of weighted chi-square mixtures
===============================================

With summable weights the statistic converges to ``sum_j lambda_j chi2_1``.
Quantiles are obtained by inverting the characteristic function; a direct
simulation serves as a check.
"""

import time

import numpy as np

from nivtest import mixture_quantile, mixture_survival
from nivtest.nulldist import mixture_quantile_mc

# %%
# Equal weights give ordinary chi-square laws.
print("chi2(1) 5% point:", mixture_quantile([1.0], 0.05))
print("chi2(3) survival at 7.815:", mixture_survival([1.0, 1.0, 1.0], 7.815))

# %%
# A spectrum decaying like j**-2, as produced by the weighted statistics.
lam = 1.0 / np.arange(1, 101) ** 2
t0 = time.perf_counter()
q = mixture_quantile(lam, 0.05)
elapsed = time.perf_counter() - t0
q_mc = mixture_quantile_mc(lam, 0.05, draws=200_000, seed=0)
print(f"inversion {q:.5f} ({elapsed * 1e3:.0f} ms), simulation {q_mc:.5f}")

# %%
# Quantiles scale with the weights.
print("scaled by 10:", mixture_quantile(10 * lam, 0.05) / q)
