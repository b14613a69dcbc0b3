"""Ordered-logistic response kernel shared by the simulator and the IRT engine.

All functions are vectorized over arbitrary leading shapes. Category indices
are 1-based (1..K with K = 7). Thresholds are strictly increasing with the
implicit conventions kappa_0 = -inf and kappa_K = +inf, so that

    P(Y = k) = sigmoid(eta - kappa_{k-1}) - sigmoid(eta - kappa_k).
"""

from __future__ import annotations

import numpy as np

from .core import N_CATEGORIES, SdrkitError

_EXP_CAP = 30.0  # beyond this, log(expm1(d)) == d to double precision


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def check_thresholds(kappa: np.ndarray) -> None:
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape[-1] != N_CATEGORIES - 1:
        raise SdrkitError(f"expected {N_CATEGORIES - 1} thresholds, got {kappa.shape[-1]}")
    if not np.all(np.diff(kappa, axis=-1) > 0):
        raise SdrkitError("thresholds must be strictly increasing")


def category_probs(eta: float | np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """Probabilities of the 7 response categories at linear predictor ``eta``.

    ``eta`` may be scalar or shape (...,); ``kappa`` shape (..., 6) broadcasts
    against it. Returns shape (..., 7) summing to 1 along the last axis.
    """
    check_thresholds(kappa)
    eta = np.asarray(eta, dtype=float)
    surv = sigmoid(eta[..., None] - kappa)  # P(Y >= k) for k = 2..7
    ones = np.ones(surv.shape[:-1] + (1,))
    zeros = np.zeros_like(ones)
    upper = np.concatenate([ones, surv], axis=-1)
    lower = np.concatenate([surv, zeros], axis=-1)
    return upper - lower


def survivor(eta: np.ndarray, kappa_km1: np.ndarray) -> np.ndarray:
    """P(Y >= k) in the survivor form sigmoid(eta - kappa_{k-1})."""
    return sigmoid(np.asarray(eta, dtype=float) - np.asarray(kappa_km1, dtype=float))


def survivor_from_cutpoints(eta: np.ndarray, kappa_km1: np.ndarray) -> np.ndarray:
    """P(Y >= k) via the cumulative-cutpoint convention 1 - sigmoid(kappa_{k-1} - eta).

    Algebraically identical to :func:`survivor`; kept as the explicit dual
    route so the equivalence of the two conventions stays testable.
    """
    return 1.0 - sigmoid(np.asarray(kappa_km1, dtype=float) - np.asarray(eta, dtype=float))


def log_prob_and_grads(
    eta: np.ndarray, kappa_lo: np.ndarray, kappa_hi: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Log P(Y = k) with derivatives, for responses with bracketing thresholds.

    ``kappa_lo`` is kappa_{k-1} (-inf when k = 1) and ``kappa_hi`` is kappa_k
    (+inf when k = 7). Returns ``(logp, g_lo, g_hi)`` where ``g_lo`` is
    d logp / d(eta - kappa_lo) and ``g_hi`` is d logp / d(eta - kappa_hi),
    so that d logp / d eta = g_lo + g_hi, d logp / d kappa_lo = -g_lo, and
    d logp / d kappa_hi = -g_hi.
    """
    eta = np.asarray(eta, dtype=float)
    u = eta - kappa_lo  # +inf when k = 1
    v = eta - kappa_hi  # -inf when k = 7

    lo_open = np.isinf(kappa_lo)  # k = 1
    hi_open = np.isinf(kappa_hi)  # k = 7
    interior = ~(lo_open | hi_open)

    logp = np.zeros_like(eta)
    g_lo = np.zeros_like(eta)
    g_hi = np.zeros_like(eta)

    # k = 1: P = 1 - sigmoid(v)
    v1 = v[lo_open]
    logp[lo_open] = -softplus(v1)
    g_hi[lo_open] = -sigmoid(v1)

    # k = 7: P = sigmoid(u)
    u7 = u[hi_open]
    logp[hi_open] = -softplus(-u7)
    g_lo[hi_open] = sigmoid(-u7)

    # interior: P = (e^u - e^v) / ((1 + e^u)(1 + e^v)), with d = u - v > 0.
    # d can underflow to 0 for extreme sampler proposals; the -inf log
    # probability (and unbounded gradients) are legitimate there and the
    # caller treats non-finite values as a rejected state.
    ui, vi = u[interior], v[interior]
    d = ui - vi
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_em1 = np.where(d > _EXP_CAP, d, np.log(np.expm1(np.minimum(d, _EXP_CAP))))
        logp[interior] = vi + log_em1 - softplus(ui) - softplus(vi)
        g_lo[interior] = 1.0 / (-np.expm1(-d)) - sigmoid(ui)
        g_hi[interior] = -1.0 / np.expm1(np.minimum(d, _EXP_CAP)) * (d <= _EXP_CAP) - sigmoid(vi)

    return logp, g_lo, g_hi
