"""Bayesian estimation of the pooled multidimensional graded response model
(Likert) and the ordinal Thurstonian model (GFC).

Both models share the ordered-logistic kernel from :mod:`sdrkit.ordinal` and
the same weakly informative priors: theta ~ N(0, I5) per response unit,
half-normal(0, 0.5) discrimination strengths, and N(0, 1.5) thresholds. The
unconstrained parameterization uses log strengths and (first cutpoint,
log-gaps) thresholds, with the corresponding Jacobian terms included in the
log posterior. Two backends expose the same point-estimate interface:
quasi-Newton MAP (fast) and Hamiltonian Monte Carlo with dual-averaging step
size and diagonal metric adaptation (posterior means).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize, special, stats

from .administer import block_id
from .core import (
    InstructionCondition,
    Inventory,
    ItemPool,
    ResponseFormat,
    ResponseSet,
    SdrkitError,
    TRAIT_LABELS,
)
from .ordinal import log_prob_and_grads

INV_SQRT2 = 1.0 / math.sqrt(2.0)

N_TRAITS = 5
THETA_PRIOR_SD = 1.0
A_PLUS_PRIOR_SD = 0.5
KAPPA_PRIOR_SD = 1.5


class DiagnosticsError(SdrkitError):
    pass


# ---------------------------------------------------------------------------
# Model data
# ---------------------------------------------------------------------------

UnitKey = tuple[str, str, str]  # (respondent_id, persona_id, condition)


@dataclass(frozen=True)
class Design:
    """Item design shared by both models.

    ``item_ids``/``trait_idx``/``keying`` describe the statements. For the GFC
    model, ``left_item``/``right_item`` index statements per block and
    thresholds are per block; for Likert they are empty and thresholds are per
    item.
    """

    model: str  # "grm" or "gfc"
    item_ids: tuple[str, ...]
    trait_idx: np.ndarray  # (J,) int
    keying: np.ndarray  # (J,) +-1
    block_ids: tuple[str, ...] = ()
    left_item: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    right_item: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_threshold_groups(self) -> int:
        return len(self.block_ids) if self.model == "gfc" else self.n_items


@dataclass(frozen=True)
class ModelData:
    design: Design
    y: np.ndarray  # (N, J) or (N, P), values 1..7, complete
    units: tuple[UnitKey, ...]

    def __post_init__(self) -> None:
        if self.y.ndim != 2 or len(self.units) != self.y.shape[0]:
            raise SdrkitError("response matrix and unit metadata disagree")
        if self.y.size and (self.y.min() < 1 or self.y.max() > 7):
            raise SdrkitError("responses must lie in 1..7")

    @property
    def n_units(self) -> int:
        return self.y.shape[0]


def likert_design(inventory: Inventory, pool: ItemPool) -> Design:
    ids = inventory.statements
    return Design(
        model="grm",
        item_ids=ids,
        trait_idx=np.array([pool.get(i).domain.index for i in ids]),
        keying=np.array([pool.get(i).keying for i in ids]),
    )


def gfc_design(inventory: Inventory, pool: ItemPool) -> Design:
    ids = inventory.statements
    pos = {iid: k for k, iid in enumerate(ids)}
    return Design(
        model="gfc",
        item_ids=ids,
        trait_idx=np.array([pool.get(i).domain.index for i in ids]),
        keying=np.array([pool.get(i).keying for i in ids]),
        block_ids=tuple(block_id(b.left, b.right) for b in inventory.blocks),
        left_item=np.array([pos[b.left] for b in inventory.blocks]),
        right_item=np.array([pos[b.right] for b in inventory.blocks]),
    )


def build_model_data(
    response_sets: Sequence[ResponseSet],
    inventory: Inventory,
    pool: ItemPool,
    fmt: ResponseFormat,
) -> ModelData:
    """Pool complete response sets of one format into a response matrix.

    Each (respondent, persona, condition) row is an independent response unit.
    GFC answers are mapped back to the blocks' canonical left/right
    orientation using the recorded side assignment.
    """
    sets = [rs for rs in response_sets if rs.format is fmt]
    if not sets:
        raise SdrkitError(f"no response sets with format {fmt.value}")
    sets.sort(key=lambda rs: (rs.respondent_id, rs.persona_id, rs.condition.value))
    if fmt is ResponseFormat.LIKERT:
        design = likert_design(inventory, pool)
        cols = design.item_ids
        rows = [[rs.answers[iid] for iid in cols] for rs in sets]
    else:
        design = gfc_design(inventory, pool)
        cols = design.block_ids
        rows = []
        for rs in sets:
            row = []
            for bid in cols:
                a = rs.answers[bid]
                row.append(8 - a if rs.side_assignment.get(bid, False) else a)
            rows.append(row)
    units = tuple(
        (rs.respondent_id, rs.persona_id, rs.condition.value) for rs in sets
    )
    return ModelData(design=design, y=np.asarray(rows, dtype=int), units=units)


# ---------------------------------------------------------------------------
# Parameter packing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamVector:
    """Constrained view of one point in the unconstrained parameter space."""

    theta: np.ndarray  # (N, 5)
    a_plus: np.ndarray  # (J,)
    kappa: np.ndarray  # (G, 6), strictly increasing rows
    x: np.ndarray  # the underlying unconstrained vector


def param_dim(data: ModelData) -> int:
    n, j = data.n_units, data.design.n_items
    g = data.design.n_threshold_groups
    return N_TRAITS * n + j + 6 * g


def _split(data: ModelData, x: np.ndarray):
    n, j = data.n_units, data.design.n_items
    g = data.design.n_threshold_groups
    off = N_TRAITS * n
    theta = x[:off].reshape(n, N_TRAITS)
    alpha = x[off : off + j]
    c1 = x[off + j : off + j + g]
    gamma = x[off + j + g :].reshape(g, 5)
    return theta, alpha, c1, gamma


def unpack(data: ModelData, x: np.ndarray) -> ParamVector:
    theta, alpha, c1, gamma = _split(data, np.asarray(x, dtype=float))
    gaps = np.exp(gamma)
    kappa = np.concatenate([c1[:, None], c1[:, None] + np.cumsum(gaps, axis=1)], axis=1)
    return ParamVector(theta=theta.copy(), a_plus=np.exp(alpha), kappa=kappa, x=np.asarray(x))


# ---------------------------------------------------------------------------
# Log posterior and gradient
# ---------------------------------------------------------------------------


def _posterior_core(data: ModelData, x: np.ndarray, need_grad: bool):
    if not np.all(np.isfinite(x)):
        raise SdrkitError("non-finite parameter value")
    design = data.design
    y = data.y
    n = data.n_units
    j = design.n_items
    theta, alpha, c1, gamma = _split(data, x)
    a_plus = np.exp(alpha)
    a_signed = design.keying * a_plus
    gaps = np.exp(gamma)
    kappa = np.concatenate([c1[:, None], c1[:, None] + np.cumsum(gaps, axis=1)], axis=1)
    g_groups = kappa.shape[0]
    kappa_ext = np.concatenate(
        [np.full((g_groups, 1), -np.inf), kappa, np.full((g_groups, 1), np.inf)], axis=1
    )

    zeta = theta[:, design.trait_idx]  # (N, J)
    if design.model == "grm":
        eta = zeta * a_signed
        group_idx = np.arange(j)
    else:
        mu = zeta * a_signed
        eta = (mu[:, design.right_item] - mu[:, design.left_item]) * INV_SQRT2
        group_idx = np.arange(g_groups)

    klo = kappa_ext[group_idx[None, :], y - 1]
    khi = kappa_ext[group_idx[None, :], y]
    logp, g_lo, g_hi = log_prob_and_grads(eta, klo, khi)
    if not np.all(np.isfinite(logp)):
        # zero-probability state (threshold gaps underflowed); signal to the
        # optimizer/sampler as an infinitely bad point with a null gradient
        return -np.inf, (np.zeros_like(x) if need_grad else None)
    lp = float(logp.sum())

    # priors (log densities up to constants) + reparameterization Jacobians
    lp += -0.5 * float((theta**2).sum()) / THETA_PRIOR_SD**2
    lp += float((-(a_plus**2) / (2 * A_PLUS_PRIOR_SD**2) + alpha).sum())
    lp += -float((kappa**2).sum()) / (2 * KAPPA_PRIOR_SD**2)
    lp += float(gamma.sum())

    if not need_grad:
        return lp, None

    geta = g_lo + g_hi
    w = np.zeros((j, N_TRAITS))
    w[np.arange(j), design.trait_idx] = a_signed
    if design.model == "grm":
        gtheta = geta @ w
        galpha = (geta * eta).sum(axis=0)
    else:
        gmu = np.zeros((n, j))
        np.add.at(gmu, (slice(None), design.right_item), geta * INV_SQRT2)
        np.add.at(gmu, (slice(None), design.left_item), -geta * INV_SQRT2)
        gtheta = gmu @ w
        galpha = (gmu * mu).sum(axis=0)

    gkappa = np.zeros((g_groups, 6))
    for m in range(6):
        gkappa[:, m] -= (g_lo * (y == m + 2)).sum(axis=0)
        gkappa[:, m] -= (g_hi * (y == m + 1)).sum(axis=0)

    gtheta += -theta / THETA_PRIOR_SD**2
    galpha += 1.0 - a_plus**2 / A_PLUS_PRIOR_SD**2
    gkappa += -kappa / KAPPA_PRIOR_SD**2

    gc1 = gkappa.sum(axis=1)
    tail = np.cumsum(gkappa[:, ::-1], axis=1)[:, ::-1]  # tail[:, m] = sum_{k>=m}
    ggamma = tail[:, 1:] * gaps + 1.0  # +1 from the log-gap Jacobian

    grad = np.concatenate([gtheta.ravel(), galpha, gc1, ggamma.ravel()])
    return lp, grad


def log_posterior(data: ModelData, x: np.ndarray) -> float:
    lp, _ = _posterior_core(data, x, need_grad=False)
    return lp


def grad_log_posterior(data: ModelData, x: np.ndarray) -> np.ndarray:
    _, grad = _posterior_core(data, x, need_grad=True)
    return grad


def log_posterior_and_grad(data: ModelData, x: np.ndarray) -> tuple[float, np.ndarray]:
    lp, grad = _posterior_core(data, x, need_grad=True)
    return lp, grad


# ---------------------------------------------------------------------------
# MAP estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MapOptions:
    n_starts: int = 4
    seed: int = 0
    max_iter: int = 3000
    gtol: float = 1e-9
    #: Upper bound on discrimination strengths during optimization, at five
    #: prior standard deviations (prior mass above it is ~1e-5). The joint
    #: posterior has degenerate spikes where a single item's strength runs
    #: away while the latent traits overfit that item's responses; the spikes
    #: carry negligible posterior mass but can dominate the mode, so the
    #: ascent is restricted to the credible region.
    strength_cap: float = 2.5


@dataclass(frozen=True)
class MapFit:
    params: ParamVector
    log_posterior: float
    grad_inf_norm: float
    converged: bool
    units: tuple[UnitKey, ...]

    @property
    def theta_hat(self) -> np.ndarray:
        return self.params.theta


def _initial_point(data: ModelData, rng: np.random.Generator) -> np.ndarray:
    n, j = data.n_units, data.design.n_items
    g = data.design.n_threshold_groups
    theta = 0.1 * rng.standard_normal(N_TRAITS * n)
    alpha = 0.1 * rng.standard_normal(j)
    c1 = -1.5 + 0.1 * rng.standard_normal(g)
    gamma = math.log(0.6) + 0.1 * rng.standard_normal(5 * g)
    return np.concatenate([theta, alpha, c1, gamma])


def fit_map(data: ModelData, opts: MapOptions = MapOptions()) -> MapFit:
    """Quasi-Newton posterior-mode fit with multiple random starts.

    The reported ``grad_inf_norm`` is the projected gradient norm: components
    pointing outward at an active strength bound are zeroed, so a clean
    stationary point reports near-zero norm whether or not the cap is active.
    """
    if data.n_units == 0:
        raise SdrkitError("empty model data")
    rng = np.random.default_rng(opts.seed)
    n, j = data.n_units, data.design.n_items
    off = N_TRAITS * n
    bounds = [(None, None)] * param_dim(data)
    alpha_hi = math.log(opts.strength_cap)
    for k in range(off, off + j):
        bounds[k] = (None, alpha_hi)
    best_x = None
    best_lp = -np.inf
    converged = False
    for _ in range(max(1, opts.n_starts)):
        x0 = _initial_point(data, rng)
        res = optimize.minimize(
            lambda x: tuple(map(np.negative, log_posterior_and_grad(data, x))),
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": opts.max_iter, "gtol": opts.gtol, "ftol": 1e-14},
        )
        if -res.fun > best_lp:
            best_lp = -res.fun
            best_x = res.x
            converged = bool(res.success)
    grad = grad_log_posterior(data, best_x)
    projected = grad.copy()
    at_cap = best_x[off : off + j] >= alpha_hi - 1e-12
    projected[off : off + j][at_cap & (projected[off : off + j] > 0)] = 0.0
    return MapFit(
        params=unpack(data, best_x),
        log_posterior=best_lp,
        grad_inf_norm=float(np.abs(projected).max()),
        converged=converged,
        units=data.units,
    )


# ---------------------------------------------------------------------------
# HMC estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HmcOptions:
    chains: int = 4
    warmup: int = 200
    samples: int = 500
    seed: int = 0
    target_accept: float = 0.95
    path_length: float = 3.0
    max_leapfrog: int = 72
    init_step: float = 0.1


@dataclass(frozen=True)
class Posterior:
    draws: np.ndarray  # (chains, samples, dim)
    units: tuple[UnitKey, ...]
    n_units: int
    divergences: int
    accept_rate: float

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0] * self.draws.shape[1]

    @property
    def theta_hat(self) -> np.ndarray:
        """Posterior-mean latent traits, (N, 5)."""
        flat = self.draws.reshape(-1, self.draws.shape[-1])
        return flat[:, : N_TRAITS * self.n_units].mean(axis=0).reshape(
            self.n_units, N_TRAITS
        )

    @property
    def divergence_rate(self) -> float:
        return self.divergences / self.n_draws


def fit_hmc(data: ModelData, opts: HmcOptions = HmcOptions()) -> Posterior:
    """Gradient-based MCMC with step size adapted to the target acceptance and
    a diagonal metric estimated during warmup. Deterministic under the seed."""
    if data.n_units == 0:
        raise SdrkitError("empty model data")
    dim = param_dim(data)
    all_draws = np.empty((opts.chains, opts.samples, dim))
    total_div = 0
    accept_sum = 0.0
    for chain in range(opts.chains):
        rng = np.random.default_rng(np.random.SeedSequence([opts.seed, chain]))
        draws, div, acc = _run_chain(data, dim, opts, rng)
        all_draws[chain] = draws
        total_div += div
        accept_sum += acc
    post = Posterior(
        draws=all_draws,
        units=data.units,
        n_units=data.n_units,
        divergences=total_div,
        accept_rate=accept_sum / opts.chains,
    )
    if post.divergence_rate > 0.10:
        raise DiagnosticsError(
            f"pervasive divergences: {post.divergences} of {post.n_draws} draws"
        )
    return post


def _run_chain(data: ModelData, dim: int, opts: HmcOptions, rng: np.random.Generator):
    x = _initial_point(data, rng)
    lp, grad = log_posterior_and_grad(data, x)
    inv_mass = np.ones(dim)
    step = opts.init_step

    # dual averaging state (reset when the metric changes)
    def fresh_da(eps: float):
        return {"mu": math.log(10 * eps), "log_eps_bar": 0.0, "h_bar": 0.0, "count": 0}

    da = fresh_da(step)
    gamma_da, t0, kappa_da = 0.05, 10.0, 0.75

    warmup = opts.warmup
    metric_at = warmup // 2
    window: list[np.ndarray] = []
    draws = np.empty((opts.samples, dim))
    divergences = 0
    accept_acc = 0.0

    total = warmup + opts.samples
    for it in range(total):
        adapting = it < warmup
        sqrt_mass = 1.0 / np.sqrt(inv_mass)
        p0 = rng.standard_normal(dim) * sqrt_mass
        h0 = -lp + 0.5 * float((p0**2 * inv_mass).sum())

        n_steps = max(1, min(opts.max_leapfrog, int(round(opts.path_length / step))))
        # jitter the trajectory length to break periodic orbits
        lo = max(1, int(0.75 * n_steps))
        n_steps = int(rng.integers(lo, n_steps + 1))

        x_new, p_new = x.copy(), p0.copy()
        lp_new, grad_new = lp, grad
        diverged = False
        for _ in range(n_steps):
            p_new = p_new + 0.5 * step * grad_new
            x_new = x_new + step * inv_mass * p_new
            try:
                lp_new, grad_new = log_posterior_and_grad(data, x_new)
            except (SdrkitError, FloatingPointError):
                diverged = True
                break
            if not np.isfinite(lp_new):
                diverged = True
                break
            p_new = p_new + 0.5 * step * grad_new

        if diverged:
            accept_prob = 0.0
        else:
            h1 = -lp_new + 0.5 * float((p_new**2 * inv_mass).sum())
            delta_h = h0 - h1
            if not np.isfinite(delta_h) or delta_h < -1000.0:
                diverged = True
                accept_prob = 0.0
            else:
                accept_prob = min(1.0, math.exp(min(0.0, delta_h)))
                if rng.random() < accept_prob:
                    x, lp, grad = x_new, lp_new, grad_new

        if adapting:
            da["count"] += 1
            m = da["count"]
            da["h_bar"] += (opts.target_accept - accept_prob - da["h_bar"]) / (m + t0)
            log_eps = da["mu"] - math.sqrt(m) / gamma_da * da["h_bar"]
            eta = m ** (-kappa_da)
            da["log_eps_bar"] = eta * log_eps + (1 - eta) * da["log_eps_bar"]
            step = math.exp(log_eps)
            if it >= metric_at // 2:
                window.append(x.copy())
            if it == metric_at - 1 and len(window) >= 10:
                var = np.var(np.asarray(window), axis=0, ddof=1)
                k = len(window)
                inv_mass = (k / (k + 5.0)) * var + (5.0 / (k + 5.0)) * 1e-3
                window.clear()
                step = math.exp(da["log_eps_bar"])
                da = fresh_da(step)
            if it == warmup - 1:
                step = math.exp(da["log_eps_bar"])
        else:
            if diverged:
                divergences += 1
            accept_acc += accept_prob
            draws[it - warmup] = x

    return draws, divergences, accept_acc / opts.samples


# ---------------------------------------------------------------------------
# Convergence diagnostics
# ---------------------------------------------------------------------------


def _rank_normalize(x: np.ndarray) -> np.ndarray:
    flat = x.ravel()
    ranks = stats.rankdata(flat, method="average")
    z = special.ndtri((ranks - 0.375) / (flat.size + 0.25))
    return z.reshape(x.shape)


def _split_chains(x: np.ndarray) -> np.ndarray:
    chains, n = x.shape
    half = n // 2
    return np.concatenate([x[:, :half], x[:, half : 2 * half]], axis=0)


def split_rhat(x: np.ndarray) -> float:
    """Rank-normalized split R-hat for draws shaped (chains, samples)."""
    if x.shape[0] < 2:
        raise DiagnosticsError("R-hat needs at least 2 chains")
    z = _rank_normalize(_split_chains(x))
    m, n = z.shape
    chain_means = z.mean(axis=1)
    within = z.var(axis=1, ddof=1).mean()
    between = n * chain_means.var(ddof=1)
    if within == 0.0:
        return 1.0 if between == 0.0 else math.inf
    var_plus = (n - 1) / n * within + between / n
    return math.sqrt(var_plus / within)


def ess_bulk(x: np.ndarray) -> float:
    """Rank-normalized bulk effective sample size for (chains, samples) draws."""
    z = _rank_normalize(_split_chains(x))
    m, n = z.shape
    if z.std() == 0.0:
        return float(m * n)
    acov = np.empty((m, n))
    for c in range(m):
        acov[c] = _autocovariance(z[c])
    chain_var = acov[:, 0] * n / (n - 1)
    within = chain_var.mean()
    var_plus = within * (n - 1) / n + z.mean(axis=1).var(ddof=1)
    rho = 1.0 - (within - acov.mean(axis=0)) / var_plus
    # Geyer initial monotone positive sequence over lag pairs
    tau = 1.0
    prev_pair = math.inf
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        pair = min(pair, prev_pair)
        tau += 2.0 * pair
        prev_pair = pair
        t += 2
    return float(m * n / tau)


def _autocovariance(z: np.ndarray) -> np.ndarray:
    n = len(z)
    zc = z - z.mean()
    size = 2 ** math.ceil(math.log2(2 * n))
    f = np.fft.rfft(zc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n].real / n
    return acov


def diagnostics(post: Posterior) -> dict[str, np.ndarray]:
    """Per-parameter split R-hat and bulk ESS."""
    if post.draws.shape[0] < 2:
        raise DiagnosticsError("R-hat needs at least 2 chains")
    dim = post.draws.shape[-1]
    rhat = np.empty(dim)
    ess = np.empty(dim)
    for d in range(dim):
        x = post.draws[:, :, d]
        rhat[d] = split_rhat(x)
        ess[d] = ess_bulk(x)
    return {"rhat": rhat, "ess": ess}


# ---------------------------------------------------------------------------
# Fit artifact
# ---------------------------------------------------------------------------


def theta_table(units: Sequence[UnitKey], theta_hat: np.ndarray) -> list[dict]:
    rows = []
    for (resp, persona, cond), row in zip(units, theta_hat):
        rows.append(
            {
                "respondent_id": resp,
                "persona_id": persona,
                "condition": cond,
                **{t: float(v) for t, v in zip(TRAIT_LABELS, row)},
            }
        )
    return rows


def write_fit_artifact(
    path: str | Path,
    data: ModelData,
    theta_hat: np.ndarray,
    backend: str,
    item_params: dict | None = None,
    diag: dict | None = None,
) -> None:
    payload = {
        "model": data.design.model,
        "backend": backend,
        "theta": theta_table(data.units, theta_hat),
        "item_params": item_params or {},
        "diagnostics": diag or {},
    }
    Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")


def load_fit_artifact(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def fit_theta_frame(fit_artifact: dict) -> dict[tuple[str, str, str], np.ndarray]:
    """Index a fit artifact's theta table by (respondent, persona, condition)."""
    out = {}
    for row in fit_artifact["theta"]:
        key = (row["respondent_id"], row["persona_id"], row["condition"])
        out[key] = np.array([row[t] for t in TRAIT_LABELS])
    return out
