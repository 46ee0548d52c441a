"""Monte Carlo risk engine: per-contingency accumulators, standard-error
bounds with variance/coverage decomposition, stopping criteria, and the
sampling scheduler.

For a contingency with occurrence frequency ``f`` (1/yr) and consequence
samples c_1..c_N bounded by M_C, the risk estimate is f·mean(c) and its
standard error is bounded by

    SE <= f * sqrt(sigma^2/N + 3*beta^2/N^2),    beta^2 = (M_C - mean)^2

where the first term is the classical variance term and the second covers
the possibility of a near-M_C outcome not yet observed: with confidence
alpha, the probability of any unseen outcome is below
p_bound(N, alpha) = 1 - (1-alpha)^(1/N), roughly 3/N at alpha = 0.95.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


ALPHA_DEFAULT = 0.95
EPSILON_DEFAULT = 0.01
WARMUP_DEFAULT = 5
BATCH_SIZE_DEFAULT = 32
SAMPLE_CAP_DEFAULT = 100_000


def p_bound(n: int, alpha: float = ALPHA_DEFAULT) -> float:
    """Confidence bound on the probability of an outcome unseen after
    ``n`` i.i.d. samples: p < 1 - (1-alpha)^(1/n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    return -math.expm1(math.log1p(-alpha) / n)


@dataclass
class RiskAccumulator:
    """Streaming per-contingency consequence statistics (Welford)."""

    contingency_id: str
    frequency: float            # f_i, 1/yr
    m_c: float                  # maximum credible consequence, EUR
    n: int = 0
    mean: float = 0.0
    _m2: float = 0.0            # sum of squared deviations

    def update(self, cost: float) -> None:
        if not -1e-9 <= cost <= self.m_c * (1 + 1e-9):
            raise ValueError(
                f"cost {cost} outside [0, M_C={self.m_c}] for "
                f"{self.contingency_id}")
        cost = min(max(cost, 0.0), self.m_c)
        self.n += 1
        delta = cost - self.mean
        self.mean += delta / self.n
        self._m2 += delta * (cost - self.mean)

    @property
    def variance(self) -> float:
        """Unbiased sample variance (n-1 normalization)."""
        if self.n < 2:
            return 0.0
        return self._m2 / (self.n - 1)

    @property
    def beta_sq(self) -> float:
        return (self.m_c - self.mean) ** 2

    @property
    def risk(self) -> float:
        return self.frequency * self.mean

    def se_terms(self) -> tuple[float, float]:
        """(variance term, coverage term) of the SE bound, EUR/yr."""
        if self.n < 1:
            return math.inf, math.inf
        var_term = self.frequency * math.sqrt(self.variance / self.n)
        cov_term = self.frequency * math.sqrt(
            3.0 * self.beta_sq / self.n ** 2)
        return var_term, cov_term

    def se_bound(self) -> float:
        if self.n < 1:
            return math.inf
        return self.frequency * math.sqrt(
            self.variance / self.n + 3.0 * self.beta_sq / self.n ** 2)

    def stopping_met(self, epsilon: float, total_risk: float) -> bool:
        """SE_i <= epsilon * R; never satisfied against a zero estimate
        while the bound is still positive."""
        se = self.se_bound()
        if total_risk <= 0.0:
            return se <= 0.0
        return se <= epsilon * total_risk

    def viable_for_variance_reduction(self) -> bool:
        """Variance-reduction techniques can only help while the variance
        term exceeds the coverage term."""
        if self.n < 1:
            return False
        return self.variance / self.n > 3.0 * self.beta_sq / self.n ** 2


def total_risk(accs) -> float:
    """Per-contingency aggregation: R = sum_i f_i * mean_i."""
    return sum(a.risk for a in accs)


def total_se_bound(accs) -> float:
    """Root-sum-square of independent per-contingency SE bounds."""
    return math.sqrt(sum(a.se_bound() ** 2 for a in accs
                         if a.n >= 1))


@dataclass
class PooledRisk:
    """Crude-MC pooled total-risk estimator: every contingency draw
    contributes its cost to one pooled stream, R = (sum_i f_i)·mean(c)."""

    total_frequency: float
    m_c: float
    n: int = 0
    mean: float = 0.0
    _m2: float = 0.0

    def update(self, cost: float) -> None:
        self.n += 1
        delta = cost - self.mean
        self.mean += delta / self.n
        self._m2 += delta * (cost - self.mean)

    @property
    def variance(self) -> float:
        if self.n < 2:
            return 0.0
        return self._m2 / (self.n - 1)

    @property
    def risk(self) -> float:
        return self.total_frequency * self.mean

    def se_terms(self) -> tuple[float, float]:
        if self.n < 1:
            return math.inf, math.inf
        beta_sq = (self.m_c - self.mean) ** 2
        var_term = self.total_frequency * math.sqrt(self.variance / self.n)
        cov_term = self.total_frequency * math.sqrt(
            3.0 * beta_sq / self.n ** 2)
        return var_term, cov_term

    def se_bound(self) -> float:
        var_term, cov_term = self.se_terms()
        return math.sqrt(var_term ** 2 + cov_term ** 2)

    def crossover_n(self) -> float:
        """N at which the coverage term falls below the variance term
        for the current empirical moments: N* = 3*beta^2/sigma^2."""
        if self.variance <= 0.0:
            return math.inf
        return 3.0 * (self.m_c - self.mean) ** 2 / self.variance


class Scheduler:
    """Chooses the next contingency to sample.

    Round-robin until every contingency has ``warmup`` samples, then the
    contingency with the largest SE_i/(epsilon*R) among those that have
    neither met the stopping criterion nor hit the sample cap. Ties break
    by contingency id.
    """

    def __init__(self, accs, epsilon: float = EPSILON_DEFAULT,
                 warmup: int = WARMUP_DEFAULT,
                 sample_cap: int = SAMPLE_CAP_DEFAULT):
        if warmup < 1:
            raise ValueError("warmup must be >= 1")
        self.accs = sorted(accs, key=lambda a: a.contingency_id)
        self.epsilon = epsilon
        self.warmup = warmup
        self.sample_cap = sample_cap
        self.scheduled = {a.contingency_id: 0 for a in self.accs}

    def _pending(self, total: float):
        out = []
        for a in self.accs:
            sched = self.scheduled[a.contingency_id]
            if sched >= self.sample_cap:
                continue
            if a.n >= self.warmup and (
                    a.stopping_met(self.epsilon, total)
                    or (total > 0.0
                        and self._priority(a) <= self.epsilon * total)):
                continue
            out.append(a)
        return out

    def next_contingency(self, total: float) -> str | None:
        """Id of the next contingency to sample, or None when done.
        Increments the scheduled count for the returned contingency."""
        pending = self._pending(total)
        if not pending:
            return None
        under_warmup = [a for a in pending
                        if self.scheduled[a.contingency_id] < self.warmup]
        if under_warmup:
            pick = min(under_warmup,
                       key=lambda a: (self.scheduled[a.contingency_id],
                                      a.contingency_id))
        else:
            pick = max(pending,
                       key=lambda a: (self._priority(a), _rev(
                           a.contingency_id)))
        self.scheduled[pick.contingency_id] += 1
        return pick.contingency_id

    def _priority(self, acc: RiskAccumulator) -> float:
        """Projected SE bound using the scheduled (in-flight inclusive)
        sample count with the current empirical moments, so consecutive
        picks within one batch spread across contingencies sensibly."""
        n_eff = max(acc.n, self.scheduled[acc.contingency_id], 1)
        return acc.frequency * math.sqrt(
            acc.variance / n_eff + 3.0 * acc.beta_sq / n_eff ** 2)

    def cap_hits(self):
        return sorted(a.contingency_id for a in self.accs
                      if a.n >= self.sample_cap)


class _rev(str):
    """Reverse string ordering so max() tie-breaks to the smallest id."""

    def __lt__(self, other):
        return str.__gt__(self, other)
