"""
Which kinds of vote shaving can the signature/exit-poll test see?
==================================================================

Three synthetic elections of 342 polled precincts are generated: a clean
one, one where every precinct keeps 70% of its true YES votes, and one
where only precincts with a middling YES share lose 30% of their YES
votes. For each, the fraud test is run on 200 seeds and the share of runs
flagged is printed.

A uniform cut leaves every log elasticity untouched apart from the
intercept, so the test has no power there. Tampering that depends on the
share bends the log relation differently for the two regressors and
leaves a covariance between the residuals.
"""

import numpy as np

from forensics import run_fraud_test
from forensics.simulator import simulate_preset

SEEDS = range(200)

for name, label in [("fig3a", "clean"), ("fig3b", "uniform 30% cut"),
                    ("fig3c", "cut only in 30-70% band")]:
    t = np.array([run_fraud_test(simulate_preset(name, s).dataset).iv_cov_test.t_statistic
                  for s in SEEDS])
    print(f"{label:26s} mean t {t.mean():6.2f}   |t|>1.96 {np.mean(np.abs(t) > 1.96):5.1%}"
          f"   t>2.576 {np.mean(t > 2.576):5.1%}")

# %%
# The clean and uniform rows look alike, a few percent at the 1.96 cutoff. The
# band row is flagged in essentially every run.
