"""Stochastic policies over the feasible action set.

Powers follow a Gaussian truncated to [0, P_s]; discrete choices follow a
categorical distribution. Both keep every draw inside the action set, so
peak-power and one-selection-per-hop constraints hold by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# logits are squashed into [-LOGIT_BOUND, LOGIT_BOUND] so no choice is ever
# sampled with vanishing probability; otherwise a saturated head stops
# receiving score-function signal and cannot recover when multipliers move
LOGIT_BOUND = 4.0


@dataclass(frozen=True)
class TruncNormalParams:
    mu: np.ndarray
    sigma: np.ndarray
    lo: float = 0.0
    hi: float = math.inf

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.sigma) <= 0):
            raise ValueError("sigma must be > 0")
        if not self.lo < self.hi:
            raise ValueError("support must be nonempty")


@dataclass(frozen=True)
class CategoricalParams:
    logits: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.logits)):
            raise ValueError("logits must be finite")


# truncated normal -----------------------------------------------------------


def _std_bounds(p: TruncNormalParams):
    mu = np.asarray(p.mu, dtype=float)
    sigma = np.asarray(p.sigma, dtype=float)
    return (p.lo - mu) / sigma, (p.hi - mu) / sigma


def _log_mass(alpha, beta):
    """log(Phi(beta) - Phi(alpha)), accurate in either tail."""
    flip = alpha > 0
    a = np.where(flip, -beta, alpha)
    b = np.where(flip, -alpha, beta)
    lb = special.log_ndtr(b)
    la = special.log_ndtr(a)
    return lb + np.log1p(-np.exp(la - lb))


def _log_phi(z):
    return -0.5 * np.square(z) - LOG_SQRT_2PI


def truncnorm_logpdf(p: TruncNormalParams, x) -> np.ndarray:
    """Log-density; -inf outside the support."""
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(p.sigma, dtype=float)
    alpha, beta = _std_bounds(p)
    z = (x - p.mu) / sigma
    out = _log_phi(z) - np.log(sigma) - _log_mass(alpha, beta)
    inside = (x >= p.lo) & (x <= p.hi)
    return np.where(inside, out, -np.inf)


def truncnorm_sample(p: TruncNormalParams, rng: np.random.Generator, size=None) -> np.ndarray:
    """Inverse-CDF draw restricted to [lo, hi]."""
    mu = np.asarray(p.mu, dtype=float)
    sigma = np.asarray(p.sigma, dtype=float)
    shape = np.broadcast(mu, sigma).shape if size is None else size
    u = rng.random(shape)
    alpha, beta = _std_bounds(p)
    # sample the mirrored problem when the whole support lies above the mean
    flip = alpha > 0
    a = np.where(flip, -beta, alpha)
    b = np.where(flip, -alpha, beta)
    pa = special.ndtr(a)
    pb = special.ndtr(b)
    z = special.ndtri(pa + u * (pb - pa))
    z = np.where(flip, -z, z)
    return np.clip(mu + sigma * z, p.lo, p.hi)


def _bound_ratios(p: TruncNormalParams, log_z):
    """phi(alpha)/Z and phi(beta)/Z, zero at infinite bounds."""
    alpha, beta = _std_bounds(p)
    ra = np.where(np.isfinite(alpha), np.exp(_log_phi(np.where(np.isfinite(alpha), alpha, 0.0)) - log_z), 0.0)
    rb = np.where(np.isfinite(beta), np.exp(_log_phi(np.where(np.isfinite(beta), beta, 0.0)) - log_z), 0.0)
    return ra, rb


def truncnorm_mean(p: TruncNormalParams) -> np.ndarray:
    alpha, beta = _std_bounds(p)
    ra, rb = _bound_ratios(p, _log_mass(alpha, beta))
    return np.clip(p.mu + np.asarray(p.sigma, dtype=float) * (ra - rb), p.lo, p.hi)


def truncnorm_score(p: TruncNormalParams, x) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the log-density with respect to (mu, sigma)."""
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(p.sigma, dtype=float)
    alpha, beta = _std_bounds(p)
    z = (x - p.mu) / sigma
    ra, rb = _bound_ratios(p, _log_mass(alpha, beta))
    a_fin = np.where(np.isfinite(alpha), alpha, 0.0)
    b_fin = np.where(np.isfinite(beta), beta, 0.0)
    d_mu = z / sigma + (rb - ra) / sigma
    d_sigma = (z**2 - 1.0) / sigma + (b_fin * rb - a_fin * ra) / sigma
    return d_mu, d_sigma


# categorical ----------------------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def categorical_sample(p: CategoricalParams, rng: np.random.Generator) -> np.ndarray:
    probs = softmax(np.asarray(p.logits, dtype=float))
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])
    k = (u[..., None] >= cdf[..., :-1]).sum(axis=-1)
    return k.astype(np.int64)


def categorical_logpmf(p: CategoricalParams, k: np.ndarray) -> np.ndarray:
    logits = np.asarray(p.logits, dtype=float)
    lse = special.logsumexp(logits, axis=-1)
    return np.take_along_axis(logits, np.asarray(k)[..., None], axis=-1)[..., 0] - lse


def categorical_score(p: CategoricalParams, k: np.ndarray) -> np.ndarray:
    """d log p(k) / d logits = onehot(k) - softmax(logits)."""
    logits = np.asarray(p.logits, dtype=float)
    g = -softmax(logits)
    np.put_along_axis(g, np.asarray(k)[..., None], np.take_along_axis(g, np.asarray(k)[..., None], -1) + 1.0, -1)
    return g


# network heads ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolicyLayout:
    """Where each distribution parameter sits in the flattened network output.

    The network may be an ensemble of ``n_groups`` identical MLPs; their
    outputs are concatenated group-major before indexing.
    """

    n_groups: int
    n_inputs: int
    n_outputs: int
    n_cat: int
    n_classes: int
    n_power: int
    p_s: float
    logit_index: np.ndarray
    mean_index: np.ndarray
    spread_index: np.ndarray

    @classmethod
    def single_net(cls, n_inputs: int, n_cat: int, n_classes: int, n_power: int, p_s: float):
        n_logit = n_cat * n_classes
        return cls(
            n_groups=1,
            n_inputs=n_inputs,
            n_outputs=n_logit + 2 * n_power,
            n_cat=n_cat,
            n_classes=n_classes,
            n_power=n_power,
            p_s=p_s,
            logit_index=np.arange(n_logit).reshape(n_cat, n_classes),
            mean_index=n_logit + np.arange(n_power),
            spread_index=n_logit + n_power + np.arange(n_power),
        )

    @classmethod
    def per_coordinate(cls, n_power: int, p_s: float):
        """One small net per power coordinate, each emitting (mean, spread)."""
        return cls(
            n_groups=n_power,
            n_inputs=1,
            n_outputs=2,
            n_cat=0,
            n_classes=0,
            n_power=n_power,
            p_s=p_s,
            logit_index=np.zeros((0, 0), dtype=int),
            mean_index=2 * np.arange(n_power),
            spread_index=2 * np.arange(n_power) + 1,
        )

    @property
    def total_outputs(self) -> int:
        return self.n_groups * self.n_outputs


@dataclass
class HeadParams:
    logits: np.ndarray  # (B, n_cat, n_classes)
    mu: np.ndarray  # (B, n_power)
    sigma: np.ndarray  # (B, n_power)
    mean_gate: np.ndarray  # logistic of the mean head, kept for the chain rule
    spread_gate: np.ndarray  # logistic of the spread head = softplus'
    logit_gate: np.ndarray  # derivative of the logit squashing

    def power_dist(self, p_s: float) -> TruncNormalParams:
        return TruncNormalParams(self.mu, self.sigma, 0.0, p_s)

    def cat_dist(self) -> CategoricalParams:
        return CategoricalParams(self.logits)


def _sigmoid(x):
    return special.expit(x)


def heads_to_params(
    out: np.ndarray, layout: PolicyLayout, sigma_min: float | None = None, logit_bound: float = LOGIT_BOUND
) -> HeadParams:
    """Mean head -> P_s * logistic, spread head -> softplus + sigma_min, logits -> bound * tanh(x / bound)."""
    if sigma_min is None:
        sigma_min = 1e-3 * layout.p_s
    flat = np.asarray(out, dtype=float).reshape(len(out), -1)
    mean_gate = _sigmoid(flat[:, layout.mean_index])
    spread_raw = flat[:, layout.spread_index]
    squashed = np.tanh(flat[:, layout.logit_index] / logit_bound)
    return HeadParams(
        logits=logit_bound * squashed,
        mu=layout.p_s * mean_gate,
        sigma=np.logaddexp(0.0, spread_raw) + sigma_min,
        mean_gate=mean_gate,
        spread_gate=_sigmoid(spread_raw),
        logit_gate=1.0 - np.square(squashed),
    )


def sample_heads(params: HeadParams, layout: PolicyLayout, rng: np.random.Generator):
    """Draw (categories, powers) for every head; scenarios decide which powers apply."""
    cats = (
        categorical_sample(params.cat_dist(), rng)
        if layout.n_cat
        else np.zeros((len(params.mu), 0), dtype=np.int64)
    )
    powers = truncnorm_sample(params.power_dist(layout.p_s), rng) if layout.n_power else params.mu
    return cats, powers


def mode_heads(params: HeadParams, layout: PolicyLayout):
    """Most likely category and mean power; the mean keeps the average power
    of the stochastic policy, and by concavity of the utilities it loses nothing."""
    cats = (
        np.argmax(params.logits, axis=-1)
        if layout.n_cat
        else np.zeros((len(params.mu), 0), dtype=np.int64)
    )
    powers = truncnorm_mean(params.power_dist(layout.p_s)) if layout.n_power else params.mu.copy()
    return cats, powers


def log_prob(params: HeadParams, layout: PolicyLayout, cats, powers, active) -> np.ndarray:
    total = np.zeros(len(params.mu))
    if layout.n_cat:
        total += categorical_logpmf(params.cat_dist(), cats).sum(axis=-1)
    if layout.n_power:
        lp = truncnorm_logpdf(params.power_dist(layout.p_s), powers)
        total += np.where(active, lp, 0.0).sum(axis=-1)
    return total


def score_outputs(params: HeadParams, layout: PolicyLayout, cats, powers, active) -> np.ndarray:
    """d log pi(r) / d(raw network outputs), shaped (B, G * n_outputs)."""
    grad = np.zeros((len(params.mu), layout.total_outputs))
    if layout.n_cat:
        grad[:, layout.logit_index] = categorical_score(params.cat_dist(), cats) * params.logit_gate
    if layout.n_power:
        d_mu, d_sigma = truncnorm_score(params.power_dist(layout.p_s), powers)
        mask = np.asarray(active, dtype=float)
        gate = params.mean_gate
        grad[:, layout.mean_index] = mask * d_mu * layout.p_s * gate * (1.0 - gate)
        grad[:, layout.spread_index] = mask * d_sigma * params.spread_gate
    return grad
