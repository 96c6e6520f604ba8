"""
Is the audited sample a random draw from the precinct universe?

The log YES count is regressed on log signatures, log registered voters,
log new voters and log non-voters, each also interacted with an audited
dummy. Under random selection the interactions are zero. The robust t on
``dum * log signatures`` is compared with its distribution over random
pseudo-audits drawn from the un-audited precincts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .domain import Dataset, PrecinctRecord
from .exceptions import DataError
from .regression import DesignMatrix, RegressionFit, ols_fit

BASE_COLUMNS = ("log_signatures", "log_registered", "log_new_voters", "log_non_voters")
INTERACTION = "dum_log_signatures"
COLUMNS = ("const", "log_signatures", "dum_log_signatures", "log_registered", "dum_log_registered",
           "log_new_voters", "dum_log_new_voters", "log_non_voters", "dum_log_non_voters", "dum")
PERCENTILES = (1, 5, 10, 25, 50, 75, 90, 95, 99)

CONSISTENT = "consistent_with_random"
NOT_RANDOM = "not_random"

NAIVE_NOTE = ("Unconditional means and signature/vote correlations cannot reveal a "
              "non-random audit: a correlation is unchanged when votes are rescaled, and "
              "a sample can match the mean while differing once precinct covariates are "
              "conditioned on. Use the interaction regression for the verdict.")


@dataclass(frozen=True)
class AuditFit:
    fit: RegressionFit
    interaction_t: float
    n_audited: int
    exclusions: dict[str, int]

    @property
    def names(self) -> tuple[str, ...]:
        return self.fit.names

    @property
    def interaction_coefficient(self) -> float:
        return self.fit.coef(INTERACTION)

    @property
    def interaction_se(self) -> float:
        return self.fit.se(INTERACTION, robust=True)


@dataclass(frozen=True)
class BootstrapDistribution:
    t_values: np.ndarray
    replicates: int
    sample_size: int
    percentiles: dict[int, float]
    mean: float
    sd: float
    skewness: float
    kurtosis: float
    seed: int
    include_audited: bool = False


@dataclass(frozen=True)
class NaiveReport:
    mean_audited_yes_share: float
    mean_unaudited_yes_share: float
    corr_sig_votes_audited: float
    corr_sig_votes_unaudited: float
    n_audited: int
    n_unaudited: int
    share_pvalue: float = math.nan  # Welch t-test on per-precinct YES shares
    corr_pvalue: float = math.nan  # Fisher z test on the two correlations
    note: str = NAIVE_NOTE

    def indistinguishable(self, level: float = 0.05) -> bool:
        """True when neither naive comparison rejects at ``level``.

        NaN p-values (too few precincts) count as not rejecting.
        """
        return not (self.share_pvalue <= level or self.corr_pvalue <= level)


@dataclass(frozen=True)
class _Universe:
    ids: tuple[str, ...]
    base: np.ndarray  # const + BASE_COLUMNS
    y: np.ndarray
    audited: np.ndarray
    exclusions: dict[str, int]


def _usable(p: PrecinctRecord) -> str | None:
    for field, label in (("yes_votes", "zero yes votes"), ("signatures", "zero signatures"),
                         ("registered_at_reafirmazo", "zero registered"),
                         ("new_voters", "zero new voters"), ("non_voters", "zero non-voters")):
        if getattr(p, field) <= 0:
            return label
    return None


def _universe(d: Dataset) -> _Universe:
    rows = []
    exclusions: dict[str, int] = {}
    for p in d.precincts:
        reason = _usable(p)
        if reason is None:
            rows.append(p)
        else:
            exclusions[reason] = exclusions.get(reason, 0) + 1
    rows.sort(key=lambda p: p.precinct_id)
    cols = [
        np.ones(len(rows)),
        np.log([p.signatures for p in rows]),
        np.log([p.registered_at_reafirmazo for p in rows]),
        np.log([p.new_voters for p in rows]),
        np.log([p.non_voters for p in rows]),
    ]
    base = np.column_stack(cols) if rows else np.empty((0, 5))
    y = np.log([p.yes_votes for p in rows]) if rows else np.empty(0)
    audited = np.array([p.audited for p in rows], dtype=bool)
    return _Universe(tuple(p.precinct_id for p in rows), base, y, audited, exclusions)


def _interaction_design(base: np.ndarray, dum: np.ndarray) -> DesignMatrix:
    d = dum.astype(float)
    const, log_s, log_r, log_n, log_nv = base.T
    cols = [const, log_s, d * log_s, log_r, d * log_r, log_n, d * log_n, log_nv, d * log_nv, d]
    return DesignMatrix(np.column_stack(cols), COLUMNS)


def _fit_interaction(base, y, dum, exclusions) -> AuditFit:
    n_aud = int(dum.sum())
    if n_aud == 0 or n_aud == dum.size:
        raise DataError("no variation in dummy: need audited and un-audited precincts")
    fit = ols_fit(_interaction_design(base, dum), y)
    t = fit.coef(INTERACTION) / fit.se(INTERACTION, robust=True)
    return AuditFit(fit, float(t), n_aud, dict(exclusions))


def interaction_regression(d: Dataset) -> AuditFit:
    """OLS of log YES on the ten-column audited-interaction design.

    ``interaction_t`` is the HC1 robust t statistic of ``dum * log
    signatures``. Precincts with a zero in any logged field are excluded and
    counted.
    """
    u = _universe(d)
    return _fit_interaction(u.base, u.y, u.audited, u.exclusions)


def _group_sandwich(b: np.ndarray, y: np.ndarray):
    q, r = np.linalg.qr(b)
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - b @ beta
    r_inv = np.linalg.solve(r, np.eye(r.shape[0]))
    bread = r_inv @ r_inv.T
    meat = (b * (resid ** 2)[:, None]).T @ b
    return beta, bread @ meat @ bread


def interaction_t_fast(base: np.ndarray, y: np.ndarray, dum: np.ndarray) -> float:
    """Robust t of the signature interaction from two separate group fits.

    The interacted design is saturated in the dummy, so its coefficients
    split into per-group OLS fits and its HC0 covariance into the sum of the
    two group sandwiches. The HC1 factor uses the full n and k = 10. Equal to
    the ``interaction_t`` of :func:`interaction_regression` up to rounding.
    """
    n = y.size
    b1, v1 = _group_sandwich(base[dum], y[dum])
    b0, v0 = _group_sandwich(base[~dum], y[~dum])
    coef = b1[1] - b0[1]
    var = (v1[1, 1] + v0[1, 1]) * n / (n - len(COLUMNS))
    return float(coef / math.sqrt(var))


def _summarize(t: np.ndarray) -> dict:
    n = t.size
    pct = np.percentile(t, PERCENTILES)
    sd = float(t.std(ddof=1)) if n > 1 else 0.0
    if n > 1 and np.ptp(t) > 0:
        skew = float(stats.skew(t))
        kurt = float(stats.kurtosis(t, fisher=False))
    else:
        skew = kurt = math.nan
    return {
        "percentiles": {p: float(v) for p, v in zip(PERCENTILES, pct)},
        "mean": float(t.mean()),
        "sd": sd,
        "skewness": skew,
        "kurtosis": kurt,
    }


def bootstrap_t_distribution(d: Dataset, replicates: int = 1000, sample_size: int = 200,
                             seed: int = 0, include_audited: bool = False) -> BootstrapDistribution:
    """Null distribution of the interaction t under random audit selection.

    Each replicate draws ``sample_size`` un-audited precincts without
    replacement, marks them as pseudo-audited and refits the interaction
    regression. By default the real audited precincts are left out of the
    replicate regressions; with ``include_audited`` they stay in as
    un-audited rows. Replicate ``r`` draws from a generator seeded by
    ``(seed, r)``, so the result does not depend on evaluation order.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    u = _universe(d)
    pool = np.flatnonzero(~u.audited)
    if sample_size >= pool.size:
        raise DataError(f"sample_size {sample_size} must be below the {pool.size} un-audited precincts")
    rows = np.arange(u.y.size) if include_audited else pool
    base, y = u.base[rows], u.y[rows]
    candidates = np.flatnonzero(~u.audited[rows])
    t = np.empty(replicates)
    for r in range(replicates):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        dum = np.zeros(rows.size, dtype=bool)
        dum[rng.choice(candidates, size=sample_size, replace=False)] = True
        t[r] = interaction_t_fast(base, y, dum)
    t.setflags(write=False)
    return BootstrapDistribution(t, replicates, sample_size, seed=seed,
                                 include_audited=include_audited, **_summarize(t))


def randomness_verdict(fit: AuditFit, dist: BootstrapDistribution, level: float = 0.01) -> str:
    """``not_random`` when the observed interaction t exceeds the upper
    ``1 - level`` quantile of the bootstrap distribution (one-sided)."""
    if dist.replicates < 100:
        raise ValueError(f"need at least 100 bootstrap replicates, got {dist.replicates}")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    critical = float(np.percentile(dist.t_values, 100 * (1 - level)))
    return NOT_RANDOM if fit.interaction_t > critical else CONSISTENT


def naive_checks(d: Dataset) -> NaiveReport:
    """Mean YES share and signature/vote correlation in each subset."""
    audited = [p for p in d.precincts if p.audited]
    rest = [p for p in d.precincts if not p.audited]
    if not audited or not rest:
        raise DataError("naive checks need both audited and un-audited precincts")

    def shares(ps):
        return np.array([p.yes_votes / p.votes_cast for p in ps])

    def corr(ps):
        if len(ps) < 2:
            return math.nan
        s = np.array([p.signatures for p in ps], dtype=float)
        v = np.array([p.yes_votes for p in ps], dtype=float)
        if s.std() == 0 or v.std() == 0:
            return math.nan
        return float(np.corrcoef(s, v)[0, 1])

    sa, su = shares(audited), shares(rest)
    share_p = math.nan
    if len(sa) > 1 and len(su) > 1 and (sa.std() > 0 or su.std() > 0):
        share_p = float(stats.ttest_ind(sa, su, equal_var=False).pvalue)
    ca, cu = corr(audited), corr(rest)
    corr_p = math.nan
    if len(sa) > 3 and len(su) > 3 and abs(ca) < 1 and abs(cu) < 1:
        se = math.sqrt(1 / (len(sa) - 3) + 1 / (len(su) - 3))
        corr_p = float(2 * stats.norm.sf(abs(math.atanh(ca) - math.atanh(cu)) / se))
    return NaiveReport(float(sa.mean()), float(su.mean()), ca, cu, len(audited), len(rest), share_p, corr_p)
