"""Moment estimation, long-only tangency portfolios and CVaR programs.

CVaR values live in loss space: a portfolio return ``r`` is a loss ``-r``, and a
positive CVaR is an average loss.  Every optimisation is over the long-only
simplex ``w >= 0, sum(w) = 1``.
"""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import kernels
from .errors import InfeasibleTangencyError, InsufficientDataError, OptimizationError, ValidationError
from .market_data import ReturnPanel, RiskFreeRate, format_number

log = logging.getLogger(__name__)

DEFAULT_CONFIDENCE = 0.99
FEASIBLE = "optimal"
INFEASIBLE = "infeasible"

RateLike = Union[RiskFreeRate, float, None]


@dataclass(frozen=True)
class MomentEstimates:
    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class CvarSolution:
    weights: np.ndarray
    zeta: float
    cvar: float
    expected_return: float
    confidence: float
    ratio: Optional[float] = None
    diagnostics: list = field(default_factory=list)

    def to_dict(self, tickers: Sequence[str]) -> dict:
        return {
            "weights": {t: float(w) for t, w in zip(tickers, self.weights)},
            "zeta": self.zeta,
            "cvar": self.cvar,
            "expected_return": self.expected_return,
            "confidence": self.confidence,
            "objective_ratio": self.ratio,
            "diagnostics": list(self.diagnostics),
        }


@dataclass(frozen=True)
class FrontierPoint:
    target_return: float
    risk: float
    weights: Optional[np.ndarray]
    status: str = FEASIBLE
    expected_return: float = math.nan


def _daily(rf: RateLike) -> float:
    if rf is None:
        return 0.0
    if isinstance(rf, RiskFreeRate):
        return rf.daily_rate
    return float(rf)


def _returns(panel) -> np.ndarray:
    r = panel.returns if isinstance(panel, ReturnPanel) else np.asarray(panel, dtype=np.float64)
    return r[:, None] if r.ndim == 1 else r


def check_weights(w, n: int, tol: float = 1e-8) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise ValidationError(f"weights must have shape ({n},), got {w.shape}")
    if np.any(w < -tol) or abs(w.sum() - 1.0) > tol:
        raise ValidationError("weights must be nonnegative and sum to one")
    return w


def _clean(w) -> np.ndarray:
    w = np.clip(np.asarray(w, dtype=np.float64), 0.0, None)
    return w / w.sum()


# --------------------------------------------------------------------------- moments


def estimate_moments(panel: ReturnPanel) -> MomentEstimates:
    r = _returns(panel)
    if r.shape[0] < 2:
        raise InsufficientDataError(f"need at least 2 return rows, got {r.shape[0]}")
    mu = r.mean(axis=0)
    c = r - mu
    s = c.T @ c / (r.shape[0] - 1)
    return MomentEstimates(mu, 0.5 * (s + s.T))


def repair_covariance(sigma: np.ndarray) -> np.ndarray:
    """Add a small ridge when ``sigma`` is singular or nearly so."""
    n = sigma.shape[0]
    scale = np.trace(sigma) / n
    eig = np.linalg.eigvalsh(sigma)
    if scale > 0 and eig[0] > 1e-12 * max(eig[-1], scale):
        return sigma
    lam = 1e-10 * scale if scale > 0 else 1e-18
    log.info("covariance near-singular (min eig %.3g); adding ridge %.3g", eig[0], lam)
    return sigma + lam * np.eye(n)


# --------------------------------------------------------------------------- Sharpe


def sharpe_ratio(m: MomentEstimates, w, rf: RateLike = None) -> float:
    w = np.asarray(w, dtype=np.float64)
    return float((m.mu @ w - _daily(rf)) / math.sqrt(w @ m.sigma @ w))


def _sharpe_grad(a, sigma, w):
    sw = sigma @ w
    s2 = w @ sw
    s = math.sqrt(s2)
    return (a * s2 - (a @ w) * sw) / (s2 * s)


def sharpe_kkt_residual(m: MomentEstimates, w, rf: RateLike = None) -> float:
    """Stationarity residual of the long-only ratio program at ``w``.

    The ratio is scale-free in ``w`` once the budget is absorbed into the excess
    returns, so the simplex multiplier is zero: the gradient must vanish on the
    support and be nonpositive off it.
    """
    w = np.asarray(w, dtype=np.float64)
    a = m.mu - _daily(rf)
    g = _sharpe_grad(a, repair_covariance(m.sigma), w)
    on = w > 1e-10
    res_on = np.max(np.abs(g[on])) if on.any() else 0.0
    res_off = np.max(np.maximum(g[~on], 0.0)) if (~on).any() else 0.0
    return float(max(res_on, res_off))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def _ratio(a, sigma, w):
    return (a @ w) / math.sqrt(w @ sigma @ w)


def _projected_ascent(a, sigma, w0, max_iter=5000):
    w = w0
    f = _ratio(a, sigma, w)
    step = 1.0 / max(np.max(np.diag(sigma)), 1e-300) ** 0.5
    for _ in range(max_iter):
        g = _sharpe_grad(a, sigma, w)
        while True:
            cand = project_simplex(w + step * g)
            fc = _ratio(a, sigma, cand)
            if fc >= f + 1e-4 * (g @ (cand - w)) or step < 1e-300:
                break
            step *= 0.5
        moved = np.max(np.abs(cand - w))
        w, f = cand, fc
        step *= 2.0
        if moved <= 1e-13:
            break
    return w


def _active_set_polish(a, sigma, w, max_iter=None):
    """Exact support solution: on support S the optimum is proportional to
    ``sigma[S,S]^-1 a[S]``.  Indices are dropped when that vector leaves the
    orthant and added when their gradient component is positive."""
    n = a.size
    support = set(np.nonzero(w > 1e-9)[0].tolist()) or {int(np.argmax(a))}
    best_w, best_f = w, _ratio(a, sigma, w)
    for _ in range(max_iter or 4 * n + 4):
        idx = np.array(sorted(support))
        y = np.linalg.solve(sigma[np.ix_(idx, idx)], a[idx])
        if np.any(y <= 0):
            if len(support) == 1:
                break
            support.discard(int(idx[np.argmin(y)]))
            continue
        cand = np.zeros(n)
        cand[idx] = y / y.sum()
        fc = _ratio(a, sigma, cand)
        if fc >= best_f - 1e-15 * abs(best_f):
            best_w, best_f = cand, fc
        g = _sharpe_grad(a, sigma, cand)
        g[idx] = -np.inf
        j = int(np.argmax(g))
        if g[j] <= 1e-14 * max(1.0, abs(fc)):
            break
        support.add(j)
    return best_w


def sharpe_tangency(m: MomentEstimates, rf: RateLike = None) -> np.ndarray:
    """Long-only weights maximising ``(mu.w - rf) / sqrt(w' Sigma w)``.

    ``rf=None`` (zero) reproduces the raw-mean ratio.  Starts from uniform
    weights and from the clipped unconstrained tangency, climbs by projected
    gradient ascent, then snaps onto the exact solution for the identified
    support.  Ties go to the lexicographically smallest weight vector.
    """
    mu = np.asarray(m.mu, dtype=np.float64)
    n = mu.size
    if n == 1:
        return np.ones(1)
    a = mu - _daily(rf)
    if np.all(a <= 0):
        raise InfeasibleTangencyError("no asset has a mean return above the risk-free rate")
    sigma = repair_covariance(np.asarray(m.sigma, dtype=np.float64))
    starts = [np.full(n, 1.0 / n)]
    unc = np.clip(np.linalg.solve(sigma, a), 0.0, None)
    if unc.sum() > 0:
        starts.append(unc / unc.sum())
    starts.append(np.eye(n)[int(np.argmax(a / np.sqrt(np.diag(sigma))))])
    results = []
    for w0 in starts:
        if a @ w0 <= 0:
            continue
        w = _active_set_polish(a, sigma, _projected_ascent(a, sigma, w0))
        results.append((_ratio(a, sigma, w), w))
    top = max(f for f, _ in results)
    tied = [w for f, w in results if f >= top - 1e-12 * abs(top)]
    return min(tied, key=lambda w: tuple(np.round(w, 12)))


# --------------------------------------------------------------------------- CVaR


def portfolio_cvar(panel, w, confidence: float = DEFAULT_CONFIDENCE) -> CvarSolution:
    """Empirical VaR (order statistic ``ceil(confidence*T)`` of losses) and CVaR.

    The CVaR is the Rockafellar-Uryasev objective minimised over the VaR level,
    i.e. the discrete tail average of losses.
    """
    r = _returns(panel)
    w = check_weights(w, r.shape[1])
    zeta, cvar = kernels.batch_cvar(r, w[None, :], confidence)
    return CvarSolution(w, float(zeta[0]), float(cvar[0]), float(r.mean(axis=0) @ w), confidence)


def cvar_many(panel, weights, confidence: float = DEFAULT_CONFIDENCE) -> np.ndarray:
    """CVaR of every row of ``weights`` (no simplex check)."""
    return kernels.batch_cvar(_returns(panel), weights, confidence)[1]


def _solve_lp(r: np.ndarray, confidence: float, target: Optional[float] = None):
    t, n = r.shape
    scale = float(np.std(r)) or 1.0
    rs = r / scale
    # variables: w (n), zeta (1), u (t)
    c = np.concatenate([np.zeros(n), [1.0], np.full(t, 1.0 / ((1.0 - confidence) * t))])
    a_ub = sp.hstack([sp.csr_matrix(-rs), sp.csr_matrix(-np.ones((t, 1))), -sp.identity(t)], format="csr")
    b_ub = np.zeros(t)
    if target is not None:
        mu = rs.mean(axis=0)
        row = sp.csr_matrix(np.concatenate([-mu, np.zeros(t + 1)])[None, :])
        a_ub = sp.vstack([a_ub, row], format="csr")
        b_ub = np.concatenate([b_ub, [-target / scale]])
    a_eq = sp.csr_matrix(np.concatenate([np.ones(n), np.zeros(t + 1)])[None, :])
    bounds = [(0.0, None)] * n + [(None, None)] + [(0.0, None)] * t
    res = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    return res


def _lp_weights(res, n):
    w = np.clip(res.x[:n], 0.0, None)
    return w / w.sum()


def min_cvar(panel, confidence: float = DEFAULT_CONFIDENCE) -> CvarSolution:
    """Global minimum-CVaR long-only portfolio via the Rockafellar-Uryasev LP."""
    r = _returns(panel)
    if r.shape[0] < 2:
        raise InsufficientDataError("min_cvar needs at least 2 return rows")
    if r.shape[1] == 1:
        return portfolio_cvar(r, np.ones(1), confidence)
    res = _solve_lp(r, confidence)
    if res.status != 0:
        raise OptimizationError(f"min-CVaR LP failed: {res.message}", status=res.status)
    return portfolio_cvar(r, _lp_weights(res, r.shape[1]), confidence)


def _frontier_point(r, confidence, target) -> FrontierPoint:
    if r.shape[1] == 1:
        sol = portfolio_cvar(r, np.ones(1), confidence)
        ok = sol.expected_return >= target - 1e-12
        return FrontierPoint(target, sol.cvar if ok else math.nan, sol.weights if ok else None,
                             FEASIBLE if ok else INFEASIBLE, sol.expected_return)
    res = _solve_lp(r, confidence, target)
    if res.status != 0:
        return FrontierPoint(target, math.nan, None, INFEASIBLE)
    sol = portfolio_cvar(r, _lp_weights(res, r.shape[1]), confidence)
    return FrontierPoint(target, sol.cvar, sol.weights, FEASIBLE, sol.expected_return)


def cvar_frontier(panel, confidence: float = DEFAULT_CONFIDENCE, n_points: int = 50) -> list[FrontierPoint]:
    """Minimum CVaR subject to ``mu.w >= target`` for evenly spaced targets.

    Targets run from the min-CVaR portfolio's mean up to the best single-asset
    mean.  Infeasible targets stay in the list with ``status='infeasible'``.
    """
    if n_points < 2:
        raise ValidationError("n_points must be at least 2")
    r = _returns(panel)
    base = min_cvar(r, confidence)
    targets = np.linspace(base.expected_return, float(r.mean(axis=0).max()), n_points)
    return [_frontier_point(r, confidence, float(t)) for t in targets]


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def cvar_tangency(
    panel,
    confidence: float = DEFAULT_CONFIDENCE,
    rf: RateLike = None,
    n_points: int = 64,
    refine_iter: int = 48,
) -> CvarSolution:
    """Long-only portfolio maximising ``(mu.w - rf) / CVaR(w)``.

    Sweeps the CVaR frontier, then golden-section searches the target return
    between the neighbours of the best sweep point; the ratio is quasi-concave
    along the frontier because frontier CVaR is convex in the target.  (A
    Charnes-Cooper transform would give a single LP; the sweep reuses the
    frontier, which is wanted for plotting anyway.)  Points whose CVaR is not
    positive have no meaningful ratio and are skipped with a diagnostic.
    """
    r = _returns(panel)
    rf_d = _daily(rf)
    if r.shape[1] == 1:
        sol = portfolio_cvar(r, np.ones(1), confidence)
        sol.ratio = (sol.expected_return - rf_d) / sol.cvar if sol.cvar > 0 else None
        return sol
    mu = r.mean(axis=0)
    if np.all(mu - rf_d <= 0):
        raise InfeasibleTangencyError("no portfolio has a mean return above the risk-free rate")
    diagnostics = []
    frontier = cvar_frontier(r, confidence, max(n_points, 64))

    def score(pt: FrontierPoint) -> float:
        if pt.status != FEASIBLE:
            return -math.inf
        if pt.risk <= 0:
            diagnostics.append(f"skipped target {pt.target_return:.6g}: CVaR {pt.risk:.3g} <= 0")
            return -math.inf
        return (pt.expected_return - rf_d) / pt.risk

    scores = [score(p) for p in frontier]
    k = int(np.argmax(scores))
    if not math.isfinite(scores[k]):
        raise InfeasibleTangencyError("no frontier point has positive CVaR; ratio undefined")
    candidates = [(scores[k], frontier[k].weights)]

    lo = frontier[max(k - 1, 0)].target_return
    hi = frontier[min(k + 1, len(frontier) - 1)].target_return
    if hi > lo:
        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        p1, p2 = _frontier_point(r, confidence, x1), _frontier_point(r, confidence, x2)
        f1, f2 = score(p1), score(p2)
        candidates += [(f1, p1.weights), (f2, p2.weights)]
        for _ in range(refine_iter):
            if f1 >= f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - _GOLDEN * (hi - lo)
                p1 = _frontier_point(r, confidence, x1)
                f1 = score(p1)
                candidates.append((f1, p1.weights))
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + _GOLDEN * (hi - lo)
                p2 = _frontier_point(r, confidence, x2)
                f2 = score(p2)
                candidates.append((f2, p2.weights))
            if hi - lo <= 1e-12 * max(abs(hi), abs(lo), 1e-12):
                break

    # vertices and the min-CVaR portfolio are cheap to score and bound the answer
    eye = np.eye(r.shape[1])
    vz = cvar_many(r, eye, confidence)
    for i in range(r.shape[1]):
        if vz[i] > 0:
            candidates.append(((mu[i] - rf_d) / vz[i], eye[i]))
    f0 = frontier[0]
    if f0.status == FEASIBLE and f0.risk > 0:
        candidates.append(((f0.expected_return - rf_d) / f0.risk, f0.weights))

    best_ratio, best_w = max((c for c in candidates if c[1] is not None and math.isfinite(c[0])),
                             key=lambda c: c[0])
    sol = portfolio_cvar(r, best_w, confidence)
    sol.ratio = (sol.expected_return - rf_d) / sol.cvar
    sol.diagnostics = diagnostics
    return sol


# --------------------------------------------------------------------------- export


def frontier_to_csv(points: Sequence[FrontierPoint], tickers: Sequence[str]) -> str:
    buf = io.StringIO()
    buf.write("target_return,cvar," + ",".join(f"w_{t}" for t in tickers) + ",status\n")
    for p in points:
        w = p.weights if p.weights is not None else np.full(len(tickers), math.nan)
        cells = [format_number(p.target_return), format_number(p.risk)] + [format_number(v) for v in w]
        buf.write(",".join(cells) + f",{p.status}\n")
    return buf.getvalue()
