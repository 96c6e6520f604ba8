"""
Equal averages do not make a random sample
==========================================

Half of 4,580 precincts are marked as audited. The unaudited half has its
YES counts bent so that their elasticity with respect to signatures is 0.1
higher, then both halves are rescaled and noised so that their mean YES
share and their signature/vote correlation match. Comparing means and
correlations sees nothing. The interaction regression recovers the gap.
"""

from forensics.audit import interaction_regression, naive_checks
from forensics.simulator import elasticity_gap_scenario

d = elasticity_gap_scenario(seed=0).dataset
naive = naive_checks(d)
print(f"mean YES share: audited {naive.mean_audited_yes_share:.5f}, "
      f"unaudited {naive.mean_unaudited_yes_share:.5f} (Welch p {naive.share_pvalue:.2f})")
print(f"corr(signatures, YES): audited {naive.corr_sig_votes_audited:.5f}, "
      f"unaudited {naive.corr_sig_votes_unaudited:.5f} (Fisher-z p {naive.corr_pvalue:.2f})")
print("naive checks indistinguishable:", naive.indistinguishable())

fit = interaction_regression(d)
print(f"\ninteraction coefficient {fit.interaction_coefficient:.4f} "
      f"(robust SE {fit.interaction_se:.4f}, t {fit.interaction_t:.1f})")
# %%
# Dividing the unaudited YES counts by signatures**0.1 lowers their
# elasticity, so the audited precincts come out 0.1 higher.
