"""Scenario CVaR, prudential and financing checks, premium helpers.

CVaR here is the lower-tail expectation of *profit*: the mean of the worst
``1 - alpha`` probability mass, with an atom at the quantile included
fractionally.  :func:`cvar` evaluates it in closed form; :func:`add_cvar_rows`
embeds the equivalent LP (value-at-risk ``z`` plus shortfall variables) into a
model being built.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GeneratorTech
from .solver import INF, Model


@dataclass(frozen=True)
class RiskAssessment:
    var: float
    cvar: float
    tail_deviations: np.ndarray
    mean_profit: float
    confidence: float


def _check_inputs(profits, probs, alpha):
    x = np.asarray(profits, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cvar needs at least one scenario")
    p = np.full(x.size, 1.0 / x.size) if probs is None else np.asarray(probs, dtype=float).ravel()
    if p.shape != x.shape:
        raise ValueError("one probability per scenario required")
    if abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
        raise ValueError("probabilities must be non-negative and sum to 1")
    if not 0 < alpha < 1:
        raise ValueError("confidence must lie in (0, 1)")
    return x, p


def cvar(profits, probs=None, alpha: float = 0.95) -> RiskAssessment:
    """Closed-form CVaR at the optimal value-at-risk."""
    x, p = _check_inputs(profits, probs, alpha)
    tail = 1.0 - alpha
    order = np.argsort(x, kind="stable")
    cum = np.cumsum(p[order])
    idx = int(np.searchsorted(cum, tail - 1e-12 * max(1.0, tail)))
    z = float(x[order][min(idx, x.size - 1)])
    rho = np.maximum(z - x, 0.0)
    c = z - float(p @ rho) / tail
    return RiskAssessment(z, c, rho, float(p @ x), alpha)


def add_cvar_rows(model: Model, psi, probs, alpha: float, prefix: str):
    """Add VaR/shortfall variables for profit variables ``psi``.

    Returns ``(z, rho, cols, vals)`` where ``cols``/``vals`` express CVaR as a
    linear combination of model variables.
    """
    psi = np.asarray(psi)
    probs = np.asarray(probs, dtype=float)
    z = model.add_var(f"{prefix}_var", lb=-INF, ub=INF)
    rho = model.add_vars([f"{prefix}_rho[{w}]" for w in range(len(psi))], lb=0.0)
    # z - rho_w - psi_w <= 0
    cols = np.column_stack([np.full(len(psi), z), rho, psi])
    model.add_rows(cols, [1.0, -1.0, -1.0], "<=", 0.0, [f"{prefix}_tail[{w}]" for w in range(len(psi))])
    cvar_cols = np.concatenate([[z], rho])
    cvar_vals = np.concatenate([[1.0], -probs / (1.0 - alpha)])
    return z, rho, cvar_cols, cvar_vals


def cvar_lp(profits, probs=None, alpha: float = 0.95, backend: str | None = None) -> RiskAssessment:
    """CVaR by solving the scenario LP (maximise z - E[shortfall]/(1 - alpha))."""
    x, p = _check_inputs(profits, probs, alpha)
    m = Model("cvar")
    psi = m.add_vars([f"psi[{w}]" for w in range(x.size)], lb=x, ub=x)
    z, rho, cols, vals = add_cvar_rows(m, psi, p, alpha, "c")
    m.set_objective(sense="max", cols=cols, vals=vals)
    sol = m.solve(backend=backend)
    if not sol.status.ok:
        raise RuntimeError(f"CVaR LP not solved: {sol.status}")
    return RiskAssessment(float(sol.value(z)), float(sol.objective_value), sol.value(rho), float(p @ x), alpha)


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    slack: float


def prudential_check(assessment, reserves: float, tol: float = 1e-6) -> CheckResult:
    """Technical reserves must cover the negative CVaR: ``cvar + reserves >= 0``."""
    c = assessment.cvar if isinstance(assessment, RiskAssessment) else float(assessment)
    slack = c + reserves
    return CheckResult(slack >= -tol * max(1.0, abs(reserves)), slack)


@dataclass(frozen=True)
class FinancingCheck:
    equity: CheckResult  # expected profit covers the WACC on capital
    debt: CheckResult  # downside (CVaR) profit covers debt service

    @property
    def passed(self) -> bool:
        return self.equity.passed and self.debt.passed


def financing_check(mean_profit: float, cvar_value: float, tech: GeneratorTech, capacity: float,
                    tol: float = 1e-6) -> FinancingCheck:
    capital = tech.investment_cost * capacity
    eq = mean_profit - tech.wacc * capital
    debt = cvar_value - tech.debt_rate * tech.gearing * capital
    scale = max(1.0, abs(capital))
    return FinancingCheck(CheckResult(eq >= -tol * scale, eq), CheckResult(debt >= -tol * scale, debt))


def expected_value_premium(expected_payout: float, loading: float = 0.0) -> float:
    """Premium per MW-peak under the expected value principle."""
    if expected_payout < 0 or loading < 0:
        raise ValueError("payout and loading must be non-negative")
    return (1.0 + loading) * expected_payout


def expected_payout_per_peak_mw(strip_shed, hours, probs, compensation_value: float, peak: float) -> float:
    """Expected annual compensation per MW of strip peak.

    ``strip_shed`` and ``hours`` are per-scenario arrays of the strip's curtailed
    MW and the hours each interval represents.
    """
    if peak <= 0:
        return 0.0
    energy = np.array([float(np.dot(s, h)) for s, h in zip(strip_shed, hours)])
    return float(np.dot(probs, energy)) * compensation_value / peak
