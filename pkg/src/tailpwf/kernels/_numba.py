"""numba implementations of the hot kernels.

scipy's scaled Bessel functions are bound through their cython C entry points
registered as LLVM symbols, which keeps the compiled functions cacheable.
"""
from __future__ import annotations

import math

import llvmlite.binding as llvm
import numpy as np
from numba import njit, types
from numba.extending import get_cython_function_address

from ._common import GK_GAUSS, GK_KRONROD, GK_NODES, LOG_PI, MAX_DEPTH, MAX_EVALS, REL_FLOOR, var_index

for _name in ("k0e", "k1e"):
    llvm.add_symbol(
        f"tailpwf_{_name}", get_cython_function_address("scipy.special.cython_special", _name)
    )

_k0e = types.ExternalFunction("tailpwf_k0e", types.float64(types.float64))
_k1e = types.ExternalFunction("tailpwf_k1e", types.float64(types.float64))


@njit(cache=True)
def _logpdf_scalar(x, alpha, beta, mu, delta, gamma, log_norm):
    y = x - mu
    r = math.hypot(delta, y)
    expo = -delta * beta * beta / (alpha + gamma) - alpha * y * y / (delta + r) + beta * y
    return log_norm + math.log(_k1e(alpha * r)) - math.log(r) + expo


@njit(cache=True)
def _logpdf_loop(x, alpha, beta, mu, delta):
    gamma = math.sqrt((alpha - beta) * (alpha + beta))
    log_norm = math.log(alpha * delta) - LOG_PI
    out = np.empty(x.size)
    flat = x.ravel()
    for i in range(flat.size):
        out[i] = _logpdf_scalar(flat[i], alpha, beta, mu, delta, gamma, log_norm)
    return out.reshape(x.shape)


def nig_logpdf(x, alpha, beta, mu, delta):
    x = np.asarray(x, dtype=np.float64)
    out = _logpdf_loop(np.ascontiguousarray(x), float(alpha), float(beta), float(mu), float(delta))
    return out if x.ndim else out[()]


@njit(cache=True)
def _loglik_grad(x, alpha, beta, mu, delta):
    gamma = math.sqrt((alpha - beta) * (alpha + beta))
    log_norm = math.log(alpha * delta) - LOG_PI
    ll = 0.0
    s_rr = 0.0
    s_y = 0.0
    s_mu = 0.0
    s_delta = 0.0
    for i in range(x.size):
        y = x[i] - mu
        r = math.hypot(delta, y)
        z = alpha * r
        k1 = _k1e(z)
        ratio = _k0e(z) / k1
        expo = -delta * beta * beta / (alpha + gamma) - alpha * y * y / (delta + r) + beta * y
        ll += log_norm + math.log(k1) - math.log(r) + expo
        inv_r2 = 1.0 / (r * r)
        s_rr += r * ratio
        s_y += y
        s_mu += alpha * y * ratio / r + 2.0 * y * inv_r2
        s_delta += alpha * delta * ratio / r + 2.0 * delta * inv_r2
    n = x.size
    grad = np.empty(4)
    grad[0] = -s_rr + n * delta * alpha / gamma
    grad[1] = -n * delta * beta / gamma + s_y
    grad[2] = s_mu - n * beta
    grad[3] = n / delta - s_delta + n * gamma
    return ll, grad


def nig_loglik_grad(x, alpha, beta, mu, delta):
    x = np.ascontiguousarray(np.asarray(x, dtype=np.float64).ravel())
    ll, grad = _loglik_grad(x, float(alpha), float(beta), float(mu), float(delta))
    return float(ll), grad


@njit(cache=True)
def _gk15(lo, hi, alpha, beta, mu, delta, gamma, log_norm, nodes, wk, wg):
    half = 0.5 * (hi - lo)
    centre = 0.5 * (hi + lo)
    kron = 0.0
    gauss = 0.0
    for j in range(15):
        f = math.exp(_logpdf_scalar(centre + half * nodes[j], alpha, beta, mu, delta, gamma, log_norm))
        kron += wk[j] * f
        gauss += wg[j] * f
    return half * kron, abs(half * (kron - gauss))


@njit(cache=True)
def _integrate(a, b, alpha, beta, mu, delta, tol, nodes, wk, wg):
    gamma = math.sqrt((alpha - beta) * (alpha + beta))
    log_norm = math.log(alpha * delta) - LOG_PI
    out = np.zeros(a.size)
    stack_lo = np.empty(4 * MAX_DEPTH + 8)
    stack_hi = np.empty(4 * MAX_DEPTH + 8)
    stack_budget = np.empty(4 * MAX_DEPTH + 8)
    stack_depth = np.empty(4 * MAX_DEPTH + 8, dtype=np.int64)
    for i in range(a.size):
        top = 0
        stack_lo[0] = a[i]
        stack_hi[0] = b[i]
        stack_budget[0] = tol
        stack_depth[0] = 0
        total = 0.0
        evals = 0
        while top >= 0:
            lo = stack_lo[top]
            hi = stack_hi[top]
            budget = stack_budget[top]
            depth = stack_depth[top]
            top -= 1
            val, err = _gk15(lo, hi, alpha, beta, mu, delta, gamma, log_norm, nodes, wk, wg)
            evals += 1
            centre = 0.5 * (lo + hi)
            if (
                err <= max(budget, REL_FLOOR * abs(val))
                or 0.5 * (hi - lo) <= 1e-15 * (abs(centre) + 1e-300)
                or evals >= MAX_EVALS
                or depth == MAX_DEPTH
            ):
                total += val
            else:
                # depth-first: stack holds at most one pending sibling per level
                top += 1
                stack_lo[top] = centre
                stack_hi[top] = hi
                stack_budget[top] = 0.5 * budget
                stack_depth[top] = depth + 1
                top += 1
                stack_lo[top] = lo
                stack_hi[top] = centre
                stack_budget[top] = 0.5 * budget
                stack_depth[top] = depth + 1
        out[i] = total
    return out


def nig_integrate(a, b, alpha, beta, mu, delta, tol=1e-13):
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    shape = np.broadcast(a, b).shape
    a = np.ascontiguousarray(np.broadcast_to(a, shape).ravel())
    b = np.ascontiguousarray(np.broadcast_to(b, shape).ravel())
    out = _integrate(
        a, b, float(alpha), float(beta), float(mu), float(delta), float(tol),
        GK_NODES, GK_KRONROD, GK_GAUSS,
    )
    return out.reshape(shape)


@njit(cache=True)
def _batch_cvar(losses, k, confidence):
    # losses is (n_port, n_obs); quickselect the k-th smallest, then sum the excess
    n_port, n_obs = losses.shape
    zeta = np.empty(n_port)
    cvar = np.empty(n_port)
    for g in range(n_port):
        row = losses[g]
        z = np.partition(row, k - 1)[k - 1]
        excess = 0.0
        for t in range(n_obs):
            if row[t] > z:
                excess += row[t] - z
        zeta[g] = z
        cvar[g] = z + excess / ((1.0 - confidence) * n_obs)
    return zeta, cvar


def batch_cvar(returns, weights, confidence):
    returns = np.ascontiguousarray(np.asarray(returns, dtype=np.float64))
    weights = np.ascontiguousarray(np.atleast_2d(np.asarray(weights, dtype=np.float64)))
    k = var_index(returns.shape[0], confidence)
    losses = np.ascontiguousarray(-(weights @ returns.T))
    return _batch_cvar(losses, k, float(confidence))
