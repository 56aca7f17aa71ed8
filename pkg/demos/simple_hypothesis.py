"""
Testing a fully specified structural function
=============================================

The simplest question: is ``phi0`` the structural function? Residuals
``y - phi0(z)`` are projected on a cosine basis of the instrument, and the
squared length of that projection is compared with its null law.
"""

import numpy as np

from nivtest import Sample, TestConfig, test_simple

rng = np.random.default_rng(0)
n = 500

# W is exogenous; Z depends on W and on the error, so regressing Y on Z
# would be biased.
w = rng.uniform(size=n)
v = rng.normal(0.5, 0.3, size=n)
z = np.clip((0.8 * w + 0.2 * v) ** 2, 0, 1)
u = 0.3 * (v - 0.5) + rng.normal(scale=0.2, size=n)
y = np.sin(np.pi * z) + u
data = Sample(y, z, w)

# %%
# Under the truth the statistic is small. Weights ``j**-2`` make the limit
# law a chi-square mixture.
truth = test_simple(data, lambda t: np.sin(np.pi * t), TestConfig(tau="pow2"))
print(f"true phi:  nS_n = {truth.n_s:.4f}, critical value {truth.critical_value:.4f}, "
      f"p = {truth.p_value:.3f}")

# %%
# A wrong hypothesis, here the identity map, leaves a systematic component in
# the residuals and is rejected.
wrong = test_simple(data, lambda t: t, TestConfig(tau="pow2"))
print(f"phi0(z)=z: nS_n = {wrong.n_s:.4f}, critical value {wrong.critical_value:.4f}, "
      f"reject = {wrong.reject}")

# %%
# With unit weights the statistic grows with m and is standardized instead;
# the default m is ceil(1.2 n^(1/3)).
normal = test_simple(data, lambda t: t, TestConfig(m=10, M=10, tau="identity"))
print(f"normal path: p = {normal.p_value:.2e}, warnings {normal.diagnostics['warnings']}")
