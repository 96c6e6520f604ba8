"""
Residual-covariance fraud test.

Log YES votes are regressed on each intent proxy (signatures, exit polls)
plus the log share of new voters and log turnout, first by OLS and then by
2SLS with each proxy instrumenting the other. Proxy errors are independent,
so the two residual vectors share a common component only if the official
count departs from intent in a way the regressors cannot absorb. A positive
covariance of the IV residuals is the fraud signal; the OLS covariance is
reported next to it for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Dataset, PrecinctRecord
from .exceptions import DataError
from .regression import (CovarianceTest, DesignMatrix, RegressionFit, iv_fit, ols_fit,
                         residual_covariance_test)

DEFAULT_THRESHOLD = 2.576

NO_FRAUD = "no_fraud_not_rejected"
FRAUD = "fraud_consistent"


@dataclass(frozen=True)
class LogDesign:
    precinct_ids: tuple[str, ...]
    y: np.ndarray
    signature_design: DesignMatrix
    exitpoll_design: DesignMatrix
    exclusions: dict[str, int]

    @property
    def n(self) -> int:
        return len(self.precinct_ids)


@dataclass(frozen=True)
class FraudTestReport:
    signature_fit: RegressionFit
    exitpoll_fit: RegressionFit
    iv_signature_fit: RegressionFit
    iv_exitpoll_fit: RegressionFit
    ols_cov_test: CovarianceTest
    iv_cov_test: CovarianceTest
    verdict: str
    n_precincts: int
    threshold: float
    exclusions: dict[str, int]
    precinct_ids: tuple[str, ...]


def exit_poll_count(p: PrecinctRecord) -> float:
    """Predicted YES count: the poll's YES share times the votes cast."""
    return p.exit_poll_yes / p.exit_poll_total * p.votes_cast


def _exclusion_reason(p: PrecinctRecord) -> str | None:
    if not p.polled:
        return "no exit poll"
    if p.exit_poll_total <= 0:
        return "empty exit poll"
    if p.yes_votes <= 0:
        return "zero yes votes"
    if p.signatures <= 0:
        return "zero signatures"
    if p.exit_poll_yes <= 0 or p.votes_cast <= 0:
        return "zero exit poll yes"
    if p.new_voters <= 0:
        return "zero new voters"
    if not p.turnout > 0:
        return "zero turnout"
    return None


def build_log_design(d: Dataset) -> LogDesign:
    """Log-log designs for the signature and exit-poll equations.

    Precincts without a poll or with a zero count in a logged variable are
    dropped and tallied by reason in ``exclusions``.
    """
    rows = []
    exclusions: dict[str, int] = {}
    for p in d.precincts:
        reason = _exclusion_reason(p)
        if reason is None:
            rows.append(p)
        else:
            exclusions[reason] = exclusions.get(reason, 0) + 1
    k = 4
    if len(rows) < k + 1:
        raise DataError(f"only {len(rows)} usable precincts; need at least {k + 1} "
                        f"(excluded: {exclusions})")
    rows.sort(key=lambda p: p.precinct_id)
    y = np.log([p.yes_votes for p in rows])
    log_s = np.log([p.signatures for p in rows])
    log_e = np.log([exit_poll_count(p) for p in rows])
    newvote = np.log([p.new_voters / p.electorate for p in rows])
    turnout = np.log([p.turnout for p in rows])
    sig = DesignMatrix.from_columns({"log_signatures": log_s, "log_newvote": newvote,
                                     "log_turnout": turnout})
    exit_ = DesignMatrix.from_columns({"log_exitpoll": log_e, "log_newvote": newvote,
                                       "log_turnout": turnout})
    return LogDesign(tuple(p.precinct_id for p in rows), y, sig, exit_, exclusions)


def run_fraud_test(d: Dataset, threshold: float = DEFAULT_THRESHOLD) -> FraudTestReport:
    """Fit the four regressions and test both residual covariances.

    The verdict is ``fraud_consistent`` when the IV covariance t statistic
    exceeds ``threshold``.
    """
    design = build_log_design(d)
    sig, ex, y = design.signature_design, design.exitpoll_design, design.y
    ols_sig = ols_fit(sig, y)
    ols_ex = ols_fit(ex, y)
    iv_sig = iv_fit(sig, y, ex)  # signatures instrumented by exit polls
    iv_ex = iv_fit(ex, y, sig)  # exit polls instrumented by signatures
    ols_cov = residual_covariance_test(ols_sig.residuals, ols_ex.residuals)
    iv_cov = residual_covariance_test(iv_sig.residuals, iv_ex.residuals)
    t = iv_cov.t_statistic
    verdict = FRAUD if (not math.isnan(t) and t > threshold) else NO_FRAUD
    return FraudTestReport(ols_sig, ols_ex, iv_sig, iv_ex, ols_cov, iv_cov, verdict,
                           design.n, threshold, design.exclusions, design.precinct_ids)
