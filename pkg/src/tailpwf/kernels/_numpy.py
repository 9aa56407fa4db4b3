"""Vectorised numpy implementations of the hot kernels."""
from __future__ import annotations

import numpy as np
from scipy.special import k0e, k1e

from ._common import GK_GAUSS, GK_KRONROD, GK_NODES, LOG_PI, MAX_DEPTH, MAX_EVALS, REL_FLOOR, var_index


def nig_logpdf(x, alpha, beta, mu, delta):
    x = np.asarray(x, dtype=np.float64)
    gamma = np.sqrt((alpha - beta) * (alpha + beta))
    y = x - mu
    r = np.hypot(delta, y)
    # delta*gamma - alpha*r rearranged to avoid cancellation when alpha*delta is large
    expo = -delta * beta * beta / (alpha + gamma) - alpha * y * y / (delta + r) + beta * y
    return np.log(alpha * delta) - LOG_PI + np.log(k1e(alpha * r)) - np.log(r) + expo


def nig_loglik_grad(x, alpha, beta, mu, delta):
    x = np.asarray(x, dtype=np.float64)
    gamma = np.sqrt((alpha - beta) * (alpha + beta))
    y = x - mu
    r = np.hypot(delta, y)
    z = alpha * r
    k1 = k1e(z)
    ratio = k0e(z) / k1
    expo = -delta * beta * beta / (alpha + gamma) - alpha * y * y / (delta + r) + beta * y
    ll = np.log(alpha * delta) - LOG_PI + np.log(k1) - np.log(r) + expo
    n = x.size
    inv_r2 = 1.0 / (r * r)
    grad = np.empty(4)
    grad[0] = -np.sum(r * ratio) + n * delta * alpha / gamma
    grad[1] = -n * delta * beta / gamma + np.sum(y)
    grad[2] = np.sum(alpha * y * ratio / r + 2.0 * y * inv_r2) - n * beta
    grad[3] = n / delta - np.sum(alpha * delta * ratio / r + 2.0 * delta * inv_r2) + n * gamma
    return float(np.sum(ll)), grad


def _pdf(x, alpha, beta, mu, delta):
    return np.exp(nig_logpdf(x, alpha, beta, mu, delta))


def nig_integrate(a, b, alpha, beta, mu, delta, tol=1e-13):
    """Integrate the NIG density over each ``[a_i, b_i]`` (``a_i <= b_i``).

    All pending subintervals are processed as one batch per refinement level; an
    interval is accepted once the Kronrod/Gauss discrepancy is within its share of
    ``tol`` (halved at every bisection).
    """
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    out = np.zeros(a.shape)
    lo = a.ravel().copy()
    hi = b.ravel().copy()
    owner = np.arange(lo.size)
    budget = np.full(lo.size, tol)
    flat = out.ravel()
    evals = np.zeros(lo.size, dtype=np.int64)
    for depth in range(MAX_DEPTH + 1):
        if lo.size == 0:
            break
        half = 0.5 * (hi - lo)
        centre = 0.5 * (hi + lo)
        fx = _pdf(centre[:, None] + half[:, None] * GK_NODES[None, :], alpha, beta, mu, delta)
        kron = half * (fx @ GK_KRONROD)
        gauss = half * (fx @ GK_GAUSS)
        err = np.abs(kron - gauss)
        evals += np.bincount(owner, minlength=evals.size)
        done = (
            (err <= np.maximum(budget, REL_FLOOR * np.abs(kron)))
            | (half <= 1e-15 * (np.abs(centre) + 1e-300))
            | (evals[owner] >= MAX_EVALS)
            | (depth == MAX_DEPTH)
        )
        np.add.at(flat, owner[done], kron[done])
        keep = ~done
        lo, hi, centre = lo[keep], hi[keep], centre[keep]
        owner = owner[keep]
        budget = budget[keep] * 0.5
        lo, hi = np.concatenate([lo, centre]), np.concatenate([centre, hi])
        owner = np.concatenate([owner, owner])
        budget = np.concatenate([budget, budget])
    return out


def batch_cvar(returns, weights, confidence):
    returns = np.asarray(returns, dtype=np.float64)
    weights = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    n_obs = returns.shape[0]
    k = var_index(n_obs, confidence)
    losses = -(returns @ weights.T)
    zeta = np.partition(losses, k - 1, axis=0)[k - 1]
    excess = np.maximum(losses - zeta, 0.0).sum(axis=0)
    cvar = zeta + excess / ((1.0 - confidence) * n_obs)
    return zeta, cvar
