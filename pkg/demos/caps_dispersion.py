"""
Vote caps leave a fingerprint in machine-level dispersion
=========================================================

Inside a precinct voters are assigned to machines at random, so machine
YES totals should scatter around the precinct share like binomial draws.
Here the ``caps`` scenario limits every machine to 150 YES votes, and the
standardized deviations are compared with the clean ``null`` scenario.
Repeated identical YES totals within a precinct are also tallied.
"""

import numpy as np

from forensics.diagnostics import binomial_dispersion, repeat_max_randomness_check, repeated_counts
from forensics.simulator import simulate_preset

for name in ("null", "caps"):
    machines = simulate_preset(name, 3).dataset.machines
    disp = binomial_dispersion(machines)
    rep = repeated_counts(machines)
    print(f"--- {name}")
    print(f"machines used {disp.n}, beyond 2 sd {disp.fraction_above_2sd:.3f} "
          f"(normal: {2 * 0.02275:.3f}), KS p {disp.ks_pvalue:.2g}")
    print(f"machines in YES repeats {rep.machines_in_yes_repeats} of {rep.total_machines}")
    for row in rep.per_precinct_size_rows:
        print(f"  k={row.machines_per_precinct}: {row.repeats} repeated values, "
              f"{row.repeats_max} at the precinct max (expected share {row.expected_max_fraction:.2f})")

# %%
# In the clean run the max share falls below 1/(k-1) for large k. That
# rate is exact only when totals are uniform draws. Binomial totals bunch
# in the middle, so ties at the extreme are rarer.
#
# With caps the repeats pile up at the precinct maximum, far above the
# 1/(k-1) share that random ties would give.
checks = repeat_max_randomness_check(repeated_counts(simulate_preset("caps", 3).dataset.machines))
for c in checks:
    print(f"k={c.machines_per_precinct}: observed {c.observed_fraction:.2f}, "
          f"99% CI [{c.ci_low:.2f}, {c.ci_high:.2f}], expected {c.expected_fraction:.2f}")
hist = binomial_dispersion(simulate_preset("caps", 3).dataset.machines)
tail = sum(c for lo, hi, c, _ in hist.histogram_rows() if lo >= 4 or hi <= -4)
print(f"\ncaps: {tail} machines with |z| >= 4, where a normal curve expects "
      f"{hist.n * 2 * 3.17e-5:.2f}")
