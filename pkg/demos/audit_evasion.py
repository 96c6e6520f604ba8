"""
Spotting an audit that only visited clean precincts
====================================================

In the ``audit_evasion`` scenario 3,000 of 4,580 precincts are tampered in
a way that raises their YES elasticity with respect to signatures. The
200 audited precincts are drawn only from the clean ones. The
interaction regression asks whether the signature elasticity differs
between audited and unaudited precincts, and its t is compared with
t values from 1,000 random pseudo-audits of the same size.
"""

import time

from forensics.audit import bootstrap_t_distribution, interaction_regression, randomness_verdict
from forensics.simulator import AuditStrategy, preset, simulate, simulate_preset

d = simulate_preset("audit_evasion", 0).dataset
fit = interaction_regression(d)
start = time.perf_counter()
dist = bootstrap_t_distribution(d, replicates=1000, sample_size=200, seed=0)
print(f"interaction {fit.interaction_coefficient:.4f}, robust t {fit.interaction_t:.2f}")
print(f"bootstrap t: mean {dist.mean:.3f}, sd {dist.sd:.3f}, 99th pct {dist.percentiles[99]:.3f} "
      f"({time.perf_counter() - start:.1f}s)")
print("verdict:", randomness_verdict(fit, dist))

# %%
# Same election, but the 200 audited precincts are a simple random sample.
params, _ = preset("audit_evasion", 0)
fair = simulate(params, AuditStrategy("uniform_random", 200, 0)).dataset
fit = interaction_regression(fair)
dist = bootstrap_t_distribution(fair, 1000, 200, 0)
print(f"\nrandom audit: t {fit.interaction_t:.2f}, verdict {randomness_verdict(fit, dist)}")
