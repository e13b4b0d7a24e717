"""Truncated-Poisson attack counts and Gamma beliefs over attack rates."""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np


@dataclass(frozen=True)
class TruncatedPoissonModel:
    """Poisson(lam) attack counts with all mass at k >= m collapsed onto m."""

    lam: float
    m: int

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"attack rate must be finite and >= 0, got {self.lam}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"truncation level must be a positive integer, got {self.m}")


@dataclass(frozen=True)
class GammaBelief:
    """Gamma(alpha, beta) belief on an attack rate, beta being the *rate*."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"Gamma parameters must be positive, got ({self.alpha}, {self.beta})")

    @property
    def mean(self):
        return self.alpha / self.beta


@dataclass(frozen=True)
class NodeSet:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"need at least 2 nodes, got {self.n}")

    @property
    def indices(self):
        return range(1, self.n + 1)


def _head_terms(lam, m):
    """Untruncated Poisson probabilities for k = 0..m-1, stacked on the last axis."""
    lam = np.asarray(lam, dtype=float)
    terms = np.empty(lam.shape + (m,))
    term = np.exp(-lam)
    terms[..., 0] = term
    for k in range(1, m):
        term = term * lam / k
        terms[..., k] = term
    return terms


def pmf(model: TruncatedPoissonModel, k: int) -> float:
    if k < 0:
        raise ValueError("count must be nonnegative")
    if k > model.m:
        return 0.0
    head = _head_terms(model.lam, model.m)
    if k < model.m:
        return float(head[k])
    return float(min(1.0, max(0.0, 1.0 - head.sum())))


def pmf_vector(model: TruncatedPoissonModel) -> np.ndarray:
    """Probabilities of k = 0..m as one array."""
    head = _head_terms(model.lam, model.m)
    tail = min(1.0, max(0.0, 1.0 - head.sum()))
    return np.append(head, tail)


def truncated_mean(lam, m):
    """Mean of the truncated count, vectorized over ``lam``.

    Uses E[min(K, m)] = m - sum_{k<m} (m - k) P(K = k), which avoids forming
    the tail mass explicitly.
    """
    head = _head_terms(lam, m)
    weights = m - np.arange(m)
    mu = m - head @ weights
    return np.clip(mu, 0.0, m)


def mean_attacks(model: TruncatedPoissonModel) -> float:
    return float(truncated_mean(model.lam, model.m))


def draw_counts(lam, m, rng, size=None):
    """Truncated Poisson draws by CDF inversion, vectorized over ``lam``.

    Inverting the untruncated Poisson CDF and clamping at m only needs the
    first m CDF values, so the search stops there.
    """
    lam = np.asarray(lam, dtype=float)
    shape = lam.shape if size is None else tuple(np.atleast_1d(size))
    u = rng.random(shape)
    cdf = np.cumsum(_head_terms(lam, m), axis=-1)
    cdf = np.broadcast_to(cdf, shape + (m,))
    return (u[..., None] >= cdf).sum(axis=-1)


def sample_attacks(model: TruncatedPoissonModel, rng) -> int:
    return int(draw_counts(model.lam, model.m, rng))


def update_belief(belief: GammaBelief, k: int, m: int | None = None) -> GammaBelief:
    if k < 0 or (m is not None and k > m):
        raise ValueError(f"observed count {k} outside [0, {m}]")
    return GammaBelief(belief.alpha + k, belief.beta + 1)


def sample_rate(belief: GammaBelief, rng) -> float:
    return float(rng.gamma(belief.alpha, 1.0 / belief.beta))
