"""Sharpen factor estimates with entity covariates.

When loadings are smooth functions of an observed per-series covariate,
projecting the panel onto a B-spline sieve of that covariate removes
idiosyncratic noise before the eigendecomposition.  At short T this
projection visibly improves factor recovery.
"""

import numpy as np

from suffcast import (
    SimConfig,
    build_sieve_basis,
    center_panel,
    estimate_factors,
    generate,
    project_panel,
    projected_factors,
)

data = generate(SimConfig(dgp="semiparametric", p=200, T=60, seed=9))
panel = center_panel(data.panel)
truth = data.truth.rotated_factors

plain = estimate_factors(panel, 3)
basis = build_sieve_basis(data.covariates)
projected = projected_factors(panel, basis, 3)

print(f"sieve design: {basis.design.shape[0]} series x "
      f"{basis.design.shape[1]} spline columns\n")

print("|corr(estimated, rotated true)| per factor:")
print("  factor   plain   projected")
for j in range(3):
    r_plain = abs(np.corrcoef(plain.factors[:, j], truth[:, j])[0, 1])
    r_proj = abs(np.corrcoef(projected.factors[:, j], truth[:, j])[0, 1])
    print(f"  {j + 1}        {r_plain:.3f}   {r_proj:.3f}")

# The projected panel itself is the smoothed version of the data.
smoothed = project_panel(panel, basis)
noise_share = np.linalg.norm(panel.predictors - smoothed.predictors) / np.linalg.norm(
    panel.predictors
)
print(f"\nshare of panel norm removed by the projection: {noise_share:.2f}")
