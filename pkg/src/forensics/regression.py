"""
Least-squares estimators used by the fraud and audit tests.

OLS and just-identified 2SLS are solved through QR factorizations, never by
inverting X'X. Both return a :class:`RegressionFit` carrying classical and
HC1 robust standard errors. :func:`residual_covariance_test` compares the
residuals of two fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .exceptions import RankDeficientError, WeakInstrumentError

RANK_TOL = 1e-10


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError("design matrix must be two-dimensional")
        names = tuple(self.names)
        if len(names) != values.shape[1]:
            raise ValueError(f"{len(names)} names for {values.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ValueError(f"column names not unique: {names}")
        if not np.all(np.isfinite(values)):
            raise ValueError("design matrix has non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_columns(cls, columns: Mapping[str, Sequence[float]], intercept: bool = True) -> "DesignMatrix":
        cols = [np.asarray(c, dtype=float) for c in columns.values()]
        names = list(columns)
        if intercept:
            n = len(cols[0]) if cols else 0
            cols.insert(0, np.ones(n))
            names.insert(0, "const")
        return cls(np.column_stack(cols), tuple(names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def take(self, rows) -> "DesignMatrix":
        return DesignMatrix(self.values[rows], self.names)


@dataclass(frozen=True)
class RegressionFit:
    names: tuple[str, ...]
    coefficients: np.ndarray
    residuals: np.ndarray
    classical_se: np.ndarray
    robust_se: np.ndarray
    r_squared: float
    n: int
    k: int
    estimator: str  # "ols" or "iv2sls"

    @property
    def rss(self) -> float:
        return float(self.residuals @ self.residuals)

    @property
    def t_classical(self) -> np.ndarray:
        return self.coefficients / self.classical_se

    @property
    def t_robust(self) -> np.ndarray:
        return self.coefficients / self.robust_se

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def se(self, name: str, robust: bool = False) -> float:
        se = self.robust_se if robust else self.classical_se
        return float(se[self.names.index(name)])

    def summary(self) -> dict:
        return {
            "estimator": self.estimator,
            "n": self.n,
            "k": self.k,
            "r_squared": self.r_squared,
            "coefficients": dict(zip(self.names, map(float, self.coefficients))),
            "classical_se": dict(zip(self.names, map(float, self.classical_se))),
            "robust_se": dict(zip(self.names, map(float, self.robust_se))),
        }


@dataclass(frozen=True)
class CovarianceTest:
    covariance: float
    correlation: float
    se_covariance: float
    t_statistic: float
    n: int

    @property
    def correlation_defined(self) -> bool:
        return not math.isnan(self.correlation)


def _as_vector(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != n:
        raise ValueError(f"response has shape {y.shape}, expected ({n},)")
    if not np.all(np.isfinite(y)):
        raise ValueError("response has non-finite entries")
    return y


def _checked_qr(X: DesignMatrix, what: str = "X"):
    n, k = X.values.shape
    if n <= k:
        raise RankDeficientError(f"{what} has n={n} <= k={k}")
    q, r = np.linalg.qr(X.values)
    diag = np.abs(np.diag(r))
    norms = np.linalg.norm(X.values, axis=0)
    bad = np.flatnonzero((diag <= RANK_TOL * norms) | (norms == 0))
    if bad.size:
        col = X.names[bad[0]]
        raise RankDeficientError(f"{what} is rank deficient at column {col!r}", column=col)
    return q, r


def _r_squared(y: np.ndarray, resid: np.ndarray, has_const: bool) -> float:
    centre = y.mean() if has_const else 0.0
    tss = float(np.sum((y - centre) ** 2))
    rss = float(resid @ resid)
    if tss == 0.0:
        return 1.0 if rss == 0.0 else -math.inf
    return 1.0 - rss / tss


def _has_constant(X: DesignMatrix) -> bool:
    v = X.values
    return bool(np.any(np.all(v == v[0], axis=0) & (v[0] != 0)))


def _hc1(bread: np.ndarray, X: np.ndarray, resid: np.ndarray) -> np.ndarray:
    n, k = X.shape
    meat = (X * (resid ** 2)[:, None]).T @ X
    cov = bread @ meat @ bread * (n / (n - k))
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def ols_fit(X: DesignMatrix, y) -> RegressionFit:
    """Ordinary least squares of ``y`` on the columns of ``X``.

    Raises :class:`RankDeficientError` naming the first column that is
    linearly dependent on the preceding ones, or when n <= k.
    """
    n, k = X.values.shape
    y = _as_vector(y, n)
    q, r = _checked_qr(X)
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X.values @ beta
    r_inv = np.linalg.solve(r, np.eye(k))
    bread = r_inv @ r_inv.T
    sigma2 = float(resid @ resid) / (n - k)
    classical = np.sqrt(sigma2 * np.diag(bread))
    robust = _hc1(bread, X.values, resid)
    return RegressionFit(X.names, beta, resid, classical, robust,
                         _r_squared(y, resid, _has_constant(X)), n, k, "ols")


def iv_fit(X: DesignMatrix, y, Z: DesignMatrix, cond_limit: float = 1e10) -> RegressionFit:
    """Just-identified two-stage least squares.

    Solves (Z'X) b = Z'y. Residuals are ``y - X b`` (structural, not
    second-stage). Standard errors use the first-stage projection
    ``X_hat = P_Z X``: classical ``s^2 (X_hat'X_hat)^-1`` and HC1 with X_hat
    in place of X.
    """
    n, k = X.values.shape
    if Z.values.shape != (n, k):
        raise ValueError(f"instrument matrix shape {Z.values.shape} != design shape {(n, k)}")
    y = _as_vector(y, n)
    qz, _ = _checked_qr(Z, "Z")
    a = qz.T @ X.values  # Z'X up to the invertible factor R_z'
    sv = np.linalg.svd(a, compute_uv=False)
    cond = math.inf if sv[-1] == 0 else float(sv[0] / sv[-1])
    if cond > cond_limit:
        raise WeakInstrumentError(f"Z'X is near singular (condition number {cond:.3g})", condition=cond)
    beta = np.linalg.solve(a, qz.T @ y)
    resid = y - X.values @ beta
    x_hat = qz @ a
    a_inv = np.linalg.solve(a, np.eye(k))
    bread = a_inv @ a_inv.T  # (X_hat'X_hat)^-1
    sigma2 = float(resid @ resid) / (n - k)
    classical = np.sqrt(sigma2 * np.diag(bread))
    robust = _hc1(bread, x_hat, resid)
    return RegressionFit(X.names, beta, resid, classical, robust,
                         _r_squared(y, resid, _has_constant(X)), n, k, "iv2sls")


def robust_se(X: DesignMatrix, fit: RegressionFit) -> np.ndarray:
    """HC1 standard errors for ``fit`` computed from the regressors ``X``.

    For a 2SLS fit pass the first-stage projection of the regressors.
    """
    n, k = X.values.shape
    if fit.residuals.shape[0] != n or fit.k != k:
        raise ValueError("fit was not produced from this design")
    _, r = _checked_qr(X)
    r_inv = np.linalg.solve(r, np.eye(k))
    return _hc1(r_inv @ r_inv.T, X.values, fit.residuals)


def residual_covariance_test(r1, r2) -> CovarianceTest:
    """Covariance of two residual vectors with a plug-in t statistic.

    cov = mean of w_i = (r1_i - mean r1)(r2_i - mean r2); its standard error is
    sd(w, ddof=1) / sqrt(n). If either vector has zero variance the
    correlation is NaN (undefined) while the covariance is still returned;
    the t statistic is NaN when the standard error is zero.
    """
    a = np.asarray(r1, dtype=float)
    b = np.asarray(r2, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"residual vectors differ in shape: {a.shape} vs {b.shape}")
    n = a.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 observations, got {n}")
    da = a - a.mean()
    db = b - b.mean()
    w = da * db
    cov = float(w.mean())
    se = float(w.std(ddof=1) / math.sqrt(n))
    sd_a = math.sqrt(float(da @ da) / n)
    sd_b = math.sqrt(float(db @ db) / n)
    corr = cov / (sd_a * sd_b) if sd_a > 0 and sd_b > 0 else math.nan
    if not math.isnan(corr):
        corr = min(1.0, max(-1.0, corr))
    t = cov / se if se > 0 else math.nan
    return CovarianceTest(cov, corr, se, t, n)
