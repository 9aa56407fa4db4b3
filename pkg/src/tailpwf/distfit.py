"""Normal and Normal-Inverse-Gaussian return laws: evaluation, sampling, fitting.

NIG parameters are the classical ``(alpha, beta, mu, delta)`` with
``alpha > |beta|``, ``delta > 0`` and ``gamma = sqrt(alpha**2 - beta**2)``, all in
the units of the data (``alpha``, ``beta`` in inverse return units).  The
scale-invariant pair ``(delta*alpha, delta*beta)`` is never used as an input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr, ndtri

from . import kernels
from .errors import DegenerateSampleError, DomainError, FitError

NORMAL = "normal"
NIG = "nig"
N_PARAMS = {NORMAL: 2, NIG: 4}

_QUAD_TOL = 1e-13
_TAIL_REACH = 40.0


def normal_cdf(x, mu=0.0, sigma=1.0):
    return ndtr((np.asarray(x, dtype=np.float64) - mu) / sigma)


def normal_quantile(u, mu=0.0, sigma=1.0):
    u = np.asarray(u, dtype=np.float64)
    _check_open_unit(u)
    return mu + sigma * ndtri(u)


def _check_open_unit(u):
    if np.any(~((u > 0) & (u < 1))):
        raise DomainError("probabilities must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class NormalParams:
    mu: float
    sigma: float

    family = NORMAL

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"invalid Normal parameters mu={self.mu}, sigma={self.sigma}")

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def variance(self) -> float:
        return self.sigma**2

    def logpdf(self, x):
        z = (np.asarray(x, dtype=np.float64) - self.mu) / self.sigma
        return -0.5 * z * z - math.log(self.sigma) - 0.5 * math.log(2 * math.pi)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        return normal_cdf(x, self.mu, self.sigma)

    def quantile(self, u):
        return normal_quantile(u, self.mu, self.sigma)

    def sample(self, n: int, seed: int) -> np.ndarray:
        return np.random.default_rng(seed).normal(self.mu, self.sigma, size=n)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class NigParams:
    alpha: float
    beta: float
    mu: float
    delta: float

    family = NIG

    def __post_init__(self):
        vals = (self.alpha, self.beta, self.mu, self.delta)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError(f"non-finite NIG parameters {vals}")
        if not (self.alpha > abs(self.beta) and self.delta > 0):
            raise DomainError(f"NIG parameters need alpha > |beta| and delta > 0, got {vals}")

    @property
    def gamma(self) -> float:
        return math.sqrt((self.alpha - self.beta) * (self.alpha + self.beta))

    @property
    def mean(self) -> float:
        return self.mu + self.delta * self.beta / self.gamma

    @property
    def variance(self) -> float:
        return self.delta * self.alpha**2 / self.gamma**3

    def logpdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = kernels.nig_logpdf(x.ravel(), self.alpha, self.beta, self.mu, self.delta)
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        return self._table.cdf(x)

    def quantile(self, u):
        return self._table.quantile(u)

    def sample(self, n: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        v = rng.wald(self.delta / self.gamma, self.delta**2, size=n)
        z = rng.standard_normal(n)
        return self.mu + self.beta * v + np.sqrt(v) * z

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "mu": self.mu, "delta": self.delta}

    @cached_property
    def _table(self) -> "_NigCdfTable":
        return _NigCdfTable(self)


Params = Union[NormalParams, NigParams]


class _NigCdfTable:
    """Cumulative NIG probabilities on a geometric breakpoint grid around ``mu``.

    The grid doubles its spacing away from the centre, so every piece is short
    relative to its distance from the peak and the adaptive rule never steps
    over the narrow central spike of small-``delta`` laws.  The outer anchors sit
    40 decay lengths out in each tail, leaving ``exp(-40)``-order truncated mass.
    """

    def __init__(self, p: NigParams):
        self.p = p
        a, b = p.alpha, p.beta
        sd = math.sqrt(p.variance)
        lo_c, hi_c = min(p.mu, p.mean), max(p.mu, p.mean)
        left = lo_c - max(_TAIL_REACH * p.delta, _TAIL_REACH / (a + b), 12.0 * sd)
        right = hi_c + max(_TAIL_REACH * p.delta, _TAIL_REACH / (a - b), 12.0 * sd)
        h = min(p.delta, sd, 1.0 / (a + abs(b))) / 8.0
        self.x_floor = 1e-14 * h
        steps = h * 2.0 ** np.arange(0, 200)
        down = p.mu - steps[p.mu - steps > left]
        up = p.mu + steps[p.mu + steps < right]
        nodes = np.unique(np.concatenate([[left, p.mu, right], down, up, [p.mean]]))
        self.nodes = nodes[(nodes >= left) & (nodes <= right)]
        pieces = self._integrate(self.nodes[:-1], self.nodes[1:])
        self.cum = np.concatenate([[0.0], np.cumsum(pieces)])

    def _integrate(self, a, b):
        p = self.p
        return kernels.nig_integrate(a, b, p.alpha, p.beta, p.mu, p.delta, _QUAD_TOL)

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        flat = x.ravel()
        out = np.empty(flat.shape)
        order = np.argsort(flat, kind="stable")
        xs = flat[order]
        nodes = self.nodes
        res = np.empty(xs.shape)
        below = xs <= nodes[0]
        above = xs >= nodes[-1]
        res[below] = 0.0
        res[above] = 1.0
        inside = ~(below | above | np.isnan(xs))
        if np.any(inside):
            xi = xs[inside]
            j = np.searchsorted(nodes, xi, side="right") - 1
            res[inside] = self.cum[j] + self._integrate(nodes[j], xi)
        res = np.clip(np.maximum.accumulate(res), 0.0, 1.0)
        out[order] = res
        if np.any(np.isnan(flat)):
            out[np.isnan(flat)] = np.nan
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def quantile(self, u):
        u = np.asarray(u, dtype=np.float64)
        _check_open_unit(u)
        flat = u.ravel()
        nodes, cum = self.nodes, self.cum
        j = np.clip(np.searchsorted(cum, flat, side="right") - 1, 0, nodes.size - 2)
        base = nodes[j]
        lo, hi = base.copy(), nodes[j + 1].copy()
        glo = cum[j] - flat
        ghi = cum[j + 1] - flat
        x = np.where(ghi <= 0, hi, lo)
        active = (glo < 0) & (ghi > 0)

        def g(xv, idx):
            return cum[j[idx]] + self._integrate(base[idx], xv) - flat[idx]

        side = np.zeros(flat.shape, dtype=np.int8)
        for it in range(200):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            l, h, gl, gh = lo[idx], hi[idx], glo[idx], ghi[idx]
            if it < 6:
                xm = 0.5 * (l + h)
            else:
                # Illinois false position: superlinear, stays bracketed
                xm = h - gh * (h - l) / (gh - gl)
                xm = np.where((xm > l) & (xm < h), xm, 0.5 * (l + h))
            gm = g(xm, idx)
            x[idx] = xm
            left_move = gm < 0
            lo[idx] = np.where(left_move, xm, l)
            glo[idx] = np.where(left_move, gm, gl)
            hi[idx] = np.where(left_move, h, xm)
            ghi[idx] = np.where(left_move, gh, gm)
            new_side = np.where(left_move, -1, 1).astype(np.int8)
            repeat = new_side == side[idx]
            halve_hi = repeat & left_move
            halve_lo = repeat & ~left_move
            ghi[idx[halve_hi]] *= 0.5
            glo[idx[halve_lo]] *= 0.5
            side[idx] = new_side
            width = hi[idx] - lo[idx]
            floor = 4e-16 * np.maximum(np.abs(lo[idx]), np.abs(hi[idx])) + self.x_floor
            done = (np.abs(gm) <= 2e-15 * np.minimum(flat[idx], 0.5)) | (width <= floor)
            active[idx[done]] = False
        return x.reshape(u.shape) if u.ndim else float(x[0])


def nig_pdf(p: NigParams, x):
    return p.pdf(x)


def nig_cdf(p: NigParams, x):
    return p.cdf(x)


def nig_quantile(p: NigParams, u):
    return p.quantile(u)


def nig_sample(p: NigParams, n: int, seed: int) -> np.ndarray:
    """Draws via the normal variance-mean mixture ``mu + beta*V + sqrt(V)*Z``."""
    return p.sample(n, seed)


@dataclass(frozen=True)
class DistributionFit:
    family: str
    params: Params
    log_likelihood: float
    n: int
    aic: float
    bic: float
    ks: float
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def k(self) -> int:
        return N_PARAMS[self.family]

    def cdf(self, x):
        return self.params.cdf(x)

    def quantile(self, u):
        return self.params.quantile(u)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": self.params.to_dict(),
            "loglik": self.log_likelihood,
            "n": self.n,
            "aic": self.aic,
            "bic": self.bic,
            "ks": self.ks,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DistributionFit":
        ptype = NormalParams if d["family"] == NORMAL else NigParams
        return cls(d["family"], ptype(**d["params"]), d["loglik"], d["n"], d["aic"], d["bic"], d["ks"])


def information_criteria(log_likelihood: float, k: int, n: int) -> tuple[float, float]:
    return 2.0 * k - 2.0 * log_likelihood, k * math.log(n) - 2.0 * log_likelihood


def ks_statistic(samples, cdf) -> float:
    """Two-sided KS distance between the empirical CDF of ``samples`` and ``cdf``."""
    xs = np.sort(np.asarray(samples, dtype=np.float64))
    n = xs.size
    f = np.asarray(cdf(xs), dtype=np.float64)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n), 0.0))


def gof_metrics(fit: DistributionFit, samples) -> tuple[float, float, float]:
    """(AIC, BIC, KS) of ``fit`` evaluated on ``samples``."""
    x = np.asarray(samples, dtype=np.float64)
    ll = float(np.sum(fit.params.logpdf(x)))
    aic, bic = information_criteria(ll, fit.k, x.size)
    return aic, bic, ks_statistic(x, fit.params.cdf)


def qq_points(fit: DistributionFit, samples) -> np.ndarray:
    """(theoretical, empirical) quantile pairs at plotting positions (i - 0.5)/n."""
    xs = np.sort(np.asarray(samples, dtype=np.float64))
    pos = (np.arange(1, xs.size + 1) - 0.5) / xs.size
    return np.column_stack([fit.quantile(pos), xs])


def _finish(family, params, x, extra=None) -> DistributionFit:
    ll = float(np.sum(params.logpdf(x)))
    aic, bic = information_criteria(ll, N_PARAMS[family], x.size)
    ks = ks_statistic(x, params.cdf)
    return DistributionFit(family, params, ll, int(x.size), aic, bic, ks, extra or {})


def _as_samples(samples, n_min) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < n_min:
        raise DegenerateSampleError(f"need at least {n_min} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DegenerateSampleError("samples contain non-finite values")
    if np.ptp(x) == 0:
        raise DegenerateSampleError("samples have zero variance")
    return x


def fit_normal(samples) -> DistributionFit:
    """Gaussian MLE (scale uses divisor n)."""
    x = _as_samples(samples, 2)
    mu = float(np.mean(x))
    sigma = float(np.sqrt(np.mean((x - mu) ** 2)))
    if sigma == 0:
        raise DegenerateSampleError("samples have zero variance")
    return _finish(NORMAL, NormalParams(mu, sigma), x)


def moment_init(skew: float, exkurt: float) -> tuple[float, float, float, float]:
    """NIG parameters matching mean 0, variance 1 and the given shape moments.

    Falls back to a symmetric law matched on kurtosis alone when the moment map
    is infeasible (``3*exkurt <= 5*skew**2``).
    """
    if exkurt > 0 and 3.0 * exkurt > 5.0 * skew**2 * (1 + 1e-9):
        rho2 = skew**2 / (3.0 * exkurt - 4.0 * skew**2)
        dg = 3.0 * (1.0 + 4.0 * rho2) / exkurt  # delta * gamma
        gamma = math.sqrt(dg / (1.0 - rho2))
        delta = dg / gamma
        alpha = gamma / math.sqrt(1.0 - rho2)
        beta = math.copysign(math.sqrt(rho2), skew) * alpha
        mu = -delta * beta / gamma
        return alpha, beta, mu, delta
    return symmetric_init(exkurt)


def symmetric_init(exkurt: float) -> tuple[float, float, float, float]:
    dg = 3.0 / exkurt if exkurt > 3.0 / 1e4 else 1e4
    dg = max(dg, 0.05)
    return math.sqrt(dg), 0.0, 0.0, math.sqrt(dg)


# Search box on standardised data.  Past these limits the law is numerically a
# Gaussian or a one-sided inverse-Gaussian limit whose (alpha, beta) pair no
# longer resolves alpha - |beta| in double precision.
_MU_BOUND = 100.0
_LOG_SCALE_BOUNDS = (math.log(1e-4), math.log(1e5))
_SKEW_BOUND = 4.0  # |beta/alpha| <= tanh(4) ~ 0.99933
_THETA_BOUNDS = [(-_MU_BOUND, _MU_BOUND), _LOG_SCALE_BOUNDS, _LOG_SCALE_BOUNDS, (-_SKEW_BOUND, _SKEW_BOUND)]


def _to_theta(alpha, beta, mu, delta):
    theta = np.array([mu, math.log(delta), math.log(alpha), math.atanh(beta / alpha)])
    lo, hi = np.array(_THETA_BOUNDS).T
    return np.clip(theta, lo, hi)


def _from_theta(theta):
    mu, log_delta, log_alpha, t = (float(v) for v in theta)
    alpha = math.exp(log_alpha)
    return alpha, alpha * math.tanh(t), mu, math.exp(log_delta)


def _objective(theta, z):
    try:
        alpha, beta, mu, delta = _from_theta(theta)
        if not alpha > abs(beta):
            raise FloatingPointError
        ll, g = kernels.nig_loglik_grad(z, alpha, beta, mu, delta)
    except (FloatingPointError, OverflowError, ValueError, ZeroDivisionError):
        return 1e10, np.zeros(4)
    if not (math.isfinite(ll) and np.all(np.isfinite(g))):
        return 1e10, np.zeros(4)
    th = math.tanh(theta[3])
    grad = np.array([
        g[2],
        delta * g[3],
        alpha * (g[0] + g[1] * th),
        g[1] * alpha * (1.0 - th * th),
    ])
    n = z.size
    return -ll / n, -grad / n


def _loglik(z, params4) -> float:
    with np.errstate(all="ignore"):
        ll = float(np.sum(kernels.nig_logpdf(z, *params4)))
    return ll if math.isfinite(ll) else -math.inf


def fit_nig(samples, max_iter: int = 500) -> DistributionFit:
    """NIG maximum likelihood on standardised data.

    The search runs on ``(mu, log delta, log alpha, atanh(beta/alpha))`` so every
    iterate is a valid parameter set, inside a box that keeps the density
    numerically well conditioned; it starts from the moment-matched law and
    from the symmetric kurtosis-matched law, and also scores a near-Gaussian
    member (``delta*gamma = 1e10``) so the result never loses to a Normal fit by
    more than the nesting gap.
    """
    x = _as_samples(samples, 8)
    m = float(np.mean(x))
    s = float(np.std(x))
    if s == 0:
        raise DegenerateSampleError("samples have zero variance")
    z = (x - m) / s
    skew = float(np.mean(z**3))
    exkurt = float(np.mean(z**4) - 3.0)
    init = _from_theta(_to_theta(*moment_init(skew, exkurt)))
    starts = [init]
    sym = _from_theta(_to_theta(*symmetric_init(exkurt)))
    if sym != init:
        starts.append(sym)
    init_ll = _loglik(z, init)

    candidates = [(init_ll, init)]
    last = init
    for start in starts:
        res = minimize(
            _objective, _to_theta(*start), args=(z,), jac=True, method="L-BFGS-B", bounds=_THETA_BOUNDS,
            options={"maxiter": max_iter, "gtol": 1e-10, "ftol": 1e-15, "maxcor": 20},
        )
        last = _from_theta(res.x)
        if all(math.isfinite(v) for v in last) and last[0] > abs(last[1]) and last[3] > 0:
            candidates.append((_loglik(z, last), last))
    gauss = (1e5, 0.0, 0.0, 1e5)
    candidates.append((_loglik(z, gauss), gauss))
    best_ll, best = max(candidates, key=lambda c: c[0])
    if not math.isfinite(best_ll):
        raise FitError("NIG likelihood search produced no finite candidate", initial=init, last=last)
    alpha, beta, mu, delta = best
    try:
        params = NigParams(alpha / s, beta / s, m + s * mu, delta * s)
        init_params = NigParams(init[0] / s, init[1] / s, m + s * init[2], init[3] * s)
    except DomainError as exc:
        raise FitError(str(exc), initial=init, last=last) from exc
    init_ll_x = float(np.sum(init_params.logpdf(x)))
    fit = _finish(NIG, params, x, {"init": init_params.to_dict(), "init_loglik": init_ll_x})
    if fit.log_likelihood < init_ll_x:
        # standardisation round-off only; the init is a valid answer too
        fit = _finish(NIG, init_params, x, {"init": init_params.to_dict(), "init_loglik": init_ll_x})
    return fit


def fit_family(family: str, samples) -> DistributionFit:
    if family == NORMAL:
        return fit_normal(samples)
    if family == NIG:
        return fit_nig(samples)
    raise DomainError(f"unknown family {family!r}")
