"""
Smoothness of the structural function and dimension reduction
=============================================================

The nonparametric null only asks that phi is well approximated by a short
polynomial sieve. It is estimated by series instrumental variables, and the
test looks for rough components that a few Legendre terms cannot absorb.
"""

import numpy as np

from nivtest import Sample, TestConfig, test_nonparametric
from nivtest.montecarlo import gen_np

smooth = gen_np(500, phi=1, rho=0, seed=5)
rough = gen_np(500, phi=1, rho=2, seed=5)

for label, data in (("smooth", smooth), ("kinked", rough)):
    weighted = test_nonparametric(data, TestConfig(m=100, M=100, tau="pow2"))
    plain = test_nonparametric(data, TestConfig(m=11, M=11, tau="identity"))
    print(f"{label:6s}: p(pow2) = {weighted.p_value:.4f}, p(identity) = {plain.p_value:.4f}")

# %%
# Dimension reduction: could phi be written as a function of a coarser
# variable? Here the restricted regressor is a noisy proxy of Z. The
# restriction is false, but at n = 500 the information lost is small
# relative to the noise and the test has little power against it.
rng = np.random.default_rng(1)
proxy = np.clip(smooth.z + rng.normal(scale=0.2, size=smooth.n), 0, 1)
res = test_nonparametric(Sample(smooth.y, smooth.z, smooth.w), TestConfig(), z_restricted=proxy)
print(f"restricted to a proxy: p = {res.p_value:.4f}")
