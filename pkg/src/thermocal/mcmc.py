"""Componentwise adaptive random-walk Metropolis with exact noise updates.

Each sweep proposes a symmetric Gaussian move on one physical factor at a
time, accepting with probability min(1, exp(delta log posterior)).  The
noise variance is conjugate under the 1/lambda2 prior, so by default it is
refreshed with an exact Inverse-Gamma Gibbs draw,

    lambda2 | theta, z  ~  InvGamma(T/2, SS(theta)/2),

which mixes as well as a tuned Metropolis step and needs no tuning at all.
A random-walk update on log(lambda2) is available behind a switch for
comparison runs; it folds the log-scale Jacobian into the acceptance
ratio.

Proposal scales adapt during burn-in only: whenever a component's windowed
acceptance rate leaves the target band its scale is multiplied up or down,
and all scales freeze at the adaptation horizon so the retained draws come
from a fixed transition kernel.

Targets are duck-typed; anything with `evaluate`, `in_support`,
`prediction`, `residual_ss` and `n_obs` works (see
`statmodel.PosteriorModel`), which keeps the sampler testable against
analytic densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError
from .rng import DOMAIN_CHAIN, substream

THETA_DIM = 3
_LAMBDA2_SLOT = THETA_DIM  # scale-bookkeeping slot for the RW lambda2 variant


@dataclass
class AdaptationPolicy:
    """Burn-in scale adaptation: band, multipliers, window, horizon."""

    target_low: float = 0.2
    target_high: float = 0.5
    expand: float = 1.1
    shrink: float = 0.9
    window: int = 50
    horizon: int | None = None  # defaults to the burn-in length at run time

    def __post_init__(self):
        if not 0.0 < self.target_low < self.target_high < 1.0:
            raise DomainError(f"need 0 < target_low < target_high < 1, got "
                              f"({self.target_low}, {self.target_high})")
        if self.expand <= 1.0:
            raise DomainError(f"expand multiplier must be > 1, got {self.expand}")
        if not 0.0 < self.shrink < 1.0:
            raise DomainError(f"shrink multiplier must lie in (0, 1), got {self.shrink}")
        if self.window < 1:
            raise DomainError(f"window must be >= 1, got {self.window}")
        if self.horizon is not None and self.horizon < 0:
            raise DomainError(f"horizon must be >= 0, got {self.horizon}")


@dataclass
class ChainState:
    """Current position of the sampler."""

    theta: np.ndarray
    lambda2: float
    log_post: float
    prediction: np.ndarray | None = None


@dataclass
class Chain:
    """Retained draws plus the bookkeeping needed to audit the run."""

    thetas: np.ndarray                    # (M, 3)
    lambda2s: np.ndarray                  # (M,)
    predictions: np.ndarray | None        # (M, T) block-averaged, if available
    acceptance: dict[str, float]          # post-burn-in rates per component
    scale_iterations: np.ndarray          # iterations at which scales changed
    scale_values: np.ndarray              # scales after each change
    final_scales: np.ndarray
    seed: int
    chain_index: int
    n_iter: int
    burn_in: int
    thin: int
    lambda2_update: str

    @property
    def m(self) -> int:
        return int(self.thetas.shape[0])

    def draws(self) -> np.ndarray:
        """(M, 4) matrix of (theta1, theta2, theta3, lambda2)."""
        return np.column_stack([self.thetas, self.lambda2s])


def rw_component_step(target, state: ChainState, i: int, scale: float, rng):
    """One symmetric random-walk proposal on component i.

    Returns (new state, accepted flag).  Proposals outside the support are
    rejected without evaluating the model.
    """
    if not 0 <= i < THETA_DIM:
        raise DomainError(f"component index must lie in [0, {THETA_DIM - 1}], got {i}")
    if not np.isfinite(scale) or scale <= 0.0:
        raise DomainError(f"proposal scale must be finite and > 0, got {scale}")
    proposal = state.theta.copy()
    proposal[i] += rng.normal(0.0, scale)
    if not target.in_support(proposal):
        return state, False
    log_post, prediction = target.evaluate(proposal, state.lambda2)
    delta = log_post - state.log_post
    if delta >= 0.0 or rng.random() < math.exp(delta):
        return ChainState(proposal, state.lambda2, log_post, prediction), True
    return state, False


def lambda2_gibbs_update(target, state: ChainState, rng) -> ChainState:
    """Exact conjugate refresh of the noise variance.

    Draws lambda2 from InvGamma(T/2, SS/2) given the current residuals.
    """
    prediction = state.prediction
    if prediction is None:
        prediction = target.prediction(state.theta)
    ss = target.residual_ss(prediction)
    if not np.isfinite(ss) or ss <= 0.0:
        raise DomainError(f"residual sum of squares must be finite and > 0 for the "
                          f"conjugate update, got {ss}")
    gam = rng.gamma(0.5 * target.n_obs)
    lambda2 = (0.5 * ss) / gam
    log_post, _ = target.evaluate(state.theta, lambda2)
    return ChainState(state.theta, lambda2, log_post, prediction)


def lambda2_rw_step(target, state: ChainState, scale: float, rng):
    """Random walk on log(lambda2); Jacobian +log(lambda2) included."""
    if not np.isfinite(scale) or scale <= 0.0:
        raise DomainError(f"proposal scale must be finite and > 0, got {scale}")
    log_l2 = math.log(state.lambda2)
    proposal = math.exp(log_l2 + rng.normal(0.0, scale))
    log_post, prediction = target.evaluate(state.theta, proposal)
    delta = (log_post + math.log(proposal)) - (state.log_post + log_l2)
    if delta >= 0.0 or rng.random() < math.exp(delta):
        return ChainState(state.theta, proposal, log_post, prediction), True
    return state, False


def run_chain(target, *, n_iter: int = 60000, burn_in: int = 10000, thin: int = 10,
              policy: AdaptationPolicy | None = None, seed: int = 0,
              chain_index: int = 0, init_theta=None, init_lambda2: float | None = None,
              init_scales=None, lambda2_update: str = "gibbs") -> Chain:
    """Run one chain and return the retained draws.

    Parameters
    ----------
    target
        Posterior object (see module docstring for the required surface).
    n_iter, burn_in, thin
        Sweep counts; M = (n_iter - burn_in) // thin draws are retained.
    policy : AdaptationPolicy
        Scale adaptation settings; the horizon defaults to `burn_in` and
        may not exceed it.
    seed, chain_index
        The chain consumes the dedicated substream (seed, chain_index).
    init_theta, init_lambda2
        Defaults: prior box midpoint, and SS(init_theta)/T.
    init_scales
        Initial proposal scales; defaults to target.default_scales() when
        available, else unit scales.
    lambda2_update
        "gibbs" (default) or "rw".
    """
    if n_iter < 1:
        raise DomainError(f"n_iter must be >= 1, got {n_iter}")
    if not 0 <= burn_in < n_iter:
        raise DomainError(f"burn_in must lie in [0, n_iter), got {burn_in}")
    if thin < 1:
        raise DomainError(f"thin must be >= 1, got {thin}")
    n_keep = (n_iter - burn_in) // thin
    if n_keep < 1:
        raise DomainError("no draws would be retained; reduce thin or burn_in")
    if lambda2_update not in ("gibbs", "rw"):
        raise DomainError(f"lambda2_update must be 'gibbs' or 'rw', got {lambda2_update!r}")
    policy = policy if policy is not None else AdaptationPolicy()
    horizon = burn_in if policy.horizon is None else policy.horizon
    if horizon > burn_in:
        raise DomainError(f"adaptation horizon {horizon} exceeds burn_in {burn_in}")

    rng = substream(seed, DOMAIN_CHAIN, chain_index)

    theta0 = np.asarray(init_theta, dtype=float) if init_theta is not None else target.init_theta()
    if theta0.shape != (THETA_DIM,):
        raise DomainError(f"init_theta must have {THETA_DIM} components, got shape {theta0.shape}")
    if not target.in_support(theta0):
        raise DomainError("init_theta lies outside the posterior support")
    if init_lambda2 is None:
        pred0 = target.prediction(theta0)
        ss0 = target.residual_ss(pred0)
        if ss0 <= 0.0:
            raise DomainError("initial residual sum of squares is zero; supply init_lambda2")
        lambda2_0 = ss0 / target.n_obs
    else:
        lambda2_0 = float(init_lambda2)
        if not np.isfinite(lambda2_0) or lambda2_0 <= 0.0:
            raise DomainError(f"init_lambda2 must be finite and > 0, got {lambda2_0}")
    log_post0, pred0 = target.evaluate(theta0, lambda2_0)
    if log_post0 == -math.inf:
        raise DomainError("initial state has zero posterior density")
    state = ChainState(theta0.copy(), lambda2_0, log_post0, pred0)

    n_scales = THETA_DIM + (1 if lambda2_update == "rw" else 0)
    if init_scales is not None:
        scales = np.asarray(init_scales, dtype=float).copy()
        if scales.shape != (n_scales,):
            raise DomainError(f"init_scales must have {n_scales} entries, got shape {scales.shape}")
    else:
        base = getattr(target, "default_scales", None)
        scales = np.asarray(base(), dtype=float).copy() if base is not None else np.ones(THETA_DIM)
        if lambda2_update == "rw":
            scales = np.append(scales, 0.5)
    if np.any(~np.isfinite(scales)) or np.any(scales <= 0.0):
        raise DomainError("proposal scales must be finite and > 0")

    window_proposals = np.zeros(n_scales, dtype=np.int64)
    window_accepts = np.zeros(n_scales, dtype=np.int64)
    tail_proposals = np.zeros(n_scales, dtype=np.int64)
    tail_accepts = np.zeros(n_scales, dtype=np.int64)
    scale_iterations: list[int] = []
    scale_values: list[np.ndarray] = []

    store_predictions = state.prediction is not None
    thetas = np.empty((n_keep, THETA_DIM))
    lambda2s = np.empty(n_keep)
    predictions = np.empty((n_keep, len(state.prediction))) if store_predictions else None
    kept = 0

    def bookkeep(slot: int, accepted: bool, iteration: int):
        nonlocal scales
        if iteration > burn_in:
            tail_proposals[slot] += 1
            tail_accepts[slot] += accepted
        if iteration <= horizon:
            window_proposals[slot] += 1
            window_accepts[slot] += accepted
            if window_proposals[slot] == policy.window:
                rate = window_accepts[slot] / policy.window
                if rate < policy.target_low:
                    scales[slot] *= policy.shrink
                elif rate > policy.target_high:
                    scales[slot] *= policy.expand
                if rate < policy.target_low or rate > policy.target_high:
                    scale_iterations.append(iteration)
                    scale_values.append(scales.copy())
                window_proposals[slot] = 0
                window_accepts[slot] = 0

    for iteration in range(1, n_iter + 1):
        for i in range(THETA_DIM):
            state, accepted = rw_component_step(target, state, i, float(scales[i]), rng)
            bookkeep(i, accepted, iteration)
        if lambda2_update == "gibbs":
            state = lambda2_gibbs_update(target, state, rng)
        else:
            state, accepted = lambda2_rw_step(target, state, float(scales[_LAMBDA2_SLOT]), rng)
            bookkeep(_LAMBDA2_SLOT, accepted, iteration)
        if iteration > burn_in and (iteration - burn_in) % thin == 0:
            thetas[kept] = state.theta
            lambda2s[kept] = state.lambda2
            if store_predictions:
                predictions[kept] = state.prediction
            kept += 1

    names = ["theta1", "theta2", "theta3"]
    if lambda2_update == "rw":
        names.append("lambda2")
    acceptance = {name: (tail_accepts[i] / tail_proposals[i] if tail_proposals[i] else math.nan)
                  for i, name in enumerate(names)}

    return Chain(
        thetas=thetas[:kept],
        lambda2s=lambda2s[:kept],
        predictions=predictions[:kept] if store_predictions else None,
        acceptance=acceptance,
        scale_iterations=np.asarray(scale_iterations, dtype=np.int64),
        scale_values=(np.asarray(scale_values) if scale_values
                      else np.empty((0, n_scales))),
        final_scales=scales.copy(),
        seed=int(seed),
        chain_index=int(chain_index),
        n_iter=int(n_iter),
        burn_in=int(burn_in),
        thin=int(thin),
        lambda2_update=lambda2_update,
    )


def merge_chains(chains: list[Chain]) -> Chain:
    """Concatenate retained draws from several completed chains."""
    if not chains:
        raise DomainError("need at least one chain to merge")
    if len(chains) == 1:
        return chains[0]
    first = chains[0]
    preds = None
    if all(c.predictions is not None for c in chains):
        preds = np.concatenate([c.predictions for c in chains], axis=0)
    total = sum(c.m for c in chains)
    acceptance = {
        name: float(sum(c.acceptance[name] * c.m for c in chains) / total)
        for name in first.acceptance
    }
    return replace(
        first,
        thetas=np.concatenate([c.thetas for c in chains], axis=0),
        lambda2s=np.concatenate([c.lambda2s for c in chains]),
        predictions=preds,
        acceptance=acceptance,
        chain_index=-1,
    )


def effective_sample_size(x) -> float:
    """ESS from the initial positive sequence of autocorrelation pairs.

    Sums lag pairs (rho_2m + rho_2m+1) while they stay positive, the usual
    truncation for reversible chains.  Constant series return the chain
    length by convention.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"expected a 1-d chain, got shape {arr.shape}")
    n = arr.size
    if n < 10:
        raise DomainError(f"need at least 10 draws for an ESS estimate, got {n}")
    centered = arr - arr.mean()
    c0 = float(np.dot(centered, centered)) / n
    if c0 == 0.0:
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(centered, nfft)
    acov = np.fft.irfft(spectrum * np.conj(spectrum), nfft)[:n].real / n
    rho = acov / c0
    tau = -1.0
    for m in range(n // 2):
        pair = rho[2 * m] + (rho[2 * m + 1] if 2 * m + 1 < n else 0.0)
        if pair <= 0.0:
            break
        tau += 2.0 * pair
    tau = max(tau, 1.0 / n)
    return float(n / tau)


def diagnostics(chain: Chain) -> dict:
    """Posterior summaries per parameter plus sampler health numbers.

    Credible intervals are equal-tailed empirical quantiles.  A constant
    column yields a zero s.d., a degenerate interval and (by convention)
    ESS equal to the chain length.
    """
    if chain.m < 10:
        raise DomainError(f"need at least 10 retained draws, got {chain.m}")
    out: dict = {"draws": chain.m, "acceptance": dict(chain.acceptance)}
    columns = {
        "theta1": chain.thetas[:, 0],
        "theta2": chain.thetas[:, 1],
        "theta3": chain.thetas[:, 2],
        "lambda2": chain.lambda2s,
    }
    for name, col in columns.items():
        q025, q50, q975 = np.quantile(col, [0.025, 0.5, 0.975])
        out[name] = {
            "mean": float(np.mean(col)),
            "sd": float(np.std(col, ddof=1)),
            "median": float(q50),
            "ci95": [float(q025), float(q975)],
            "ess": effective_sample_size(col),
        }
    return out
