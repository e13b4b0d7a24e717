"""Least-squares check that the cumulative variation grows linearly in time.

A linear V_t with positive slope is what makes a variation budget of the
form 1/m <= V_T <= T/m plausible for real cost data.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy import stats

from .adversary import CostMatrix, variation_path


@dataclass(frozen=True)
class AnovaRow:
    df: int
    ss: float
    ms: float | None = None
    f: float | None = None
    significance: float | None = None


@dataclass(frozen=True)
class RegressionReport:
    intercept: float
    slope: float
    se_intercept: float
    se_slope: float
    t_intercept: float
    t_slope: float
    p_intercept: float
    p_slope: float
    regression: AnovaRow
    residual: AnovaRow
    total: AnovaRow
    n: int

    def coefficient_rows(self):
        return [("intercept", self.intercept, self.se_intercept, self.t_intercept, self.p_intercept),
                ("slope", self.slope, self.se_slope, self.t_slope, self.p_slope)]

    def anova_rows(self):
        return [("regression", self.regression), ("residual", self.residual),
                ("total", self.total)]


def _t_stat(coef, se):
    if se > 0:
        return coef / se
    return 0.0 if coef == 0 else math.copysign(math.inf, coef)


def regress_variation(v, t=None) -> RegressionReport:
    """OLS of ``v`` on ``t`` (default 1..n) with intercept, plus ANOVA.

    A noiseless fit reports F = +inf and zero standard errors.
    """
    y = np.asarray(v, dtype=float).ravel()
    x = np.arange(1, y.size + 1, dtype=float) if t is None else np.asarray(t, float).ravel()
    n = y.size
    if x.size != n:
        raise ValueError("time and variation vectors differ in length")
    if n < 3:
        raise ValueError("need at least 3 points")
    xbar, ybar = x.mean(), y.mean()
    sxx = float(((x - xbar) ** 2).sum())
    if sxx <= 0:
        raise ValueError("time values are constant; slope is undefined")
    slope = float(((x - xbar) * (y - ybar)).sum() / sxx)
    intercept = float(ybar - slope * xbar)
    resid = y - (intercept + slope * x)

    ss_tot = float(((y - ybar) ** 2).sum())
    ss_res = float((resid ** 2).sum())
    if ss_res <= 1e-24 * ss_tot:
        ss_res = 0.0                 # round-off on a noiseless line
    ss_reg = slope ** 2 * sxx
    df_res = n - 2
    ms_reg = ss_reg
    ms_res = ss_res / df_res
    if ms_res > 0:
        f = ms_reg / ms_res
        sig = float(stats.f.sf(f, 1, df_res))
    else:
        f, sig = math.inf, 0.0

    se_slope = math.sqrt(ms_res / sxx)
    se_int = math.sqrt(ms_res * (1.0 / n + xbar ** 2 / sxx))
    t_s, t_i = _t_stat(slope, se_slope), _t_stat(intercept, se_int)
    p_s = float(2 * stats.t.sf(abs(t_s), df_res))
    p_i = float(2 * stats.t.sf(abs(t_i), df_res))
    return RegressionReport(
        intercept, slope, se_int, se_slope, t_i, t_s, p_i, p_s,
        AnovaRow(1, ss_reg, ms_reg, f, sig),
        AnovaRow(df_res, ss_res, ms_res),
        AnovaRow(n - 1, ss_tot),
        n,
    )


def regress_costs(cm: CostMatrix) -> RegressionReport:
    """Regression of the cumulative variation path V_2..V_T on t = 2..T.

    V_1 = 0 by definition and is left out.
    """
    v = variation_path(cm.costs)
    t = np.arange(1, v.size + 1)
    return regress_variation(v[1:], t[1:])


def estimate_t0(report: RegressionReport, m) -> int:
    """First integer T at which the fitted line reaches 1/m."""
    if not report.slope > 0:
        raise ValueError("fitted slope is not positive; the line never crosses 1/m")
    target = 1.0 / m
    t0 = max(1, math.ceil((target - report.intercept) / report.slope))
    # guard the ceiling against rounding on either side
    while t0 > 1 and report.intercept + report.slope * (t0 - 1) >= target:
        t0 -= 1
    while report.intercept + report.slope * t0 < target:
        t0 += 1
    return t0
