"""Statistical core: JSD, normalized total variance, composite scores.

All divergences use base-2 logarithms so that JSD lies in [0, 1]; the
normalized trace statistic tau divides the population covariance trace by
its sharp upper bound 1 - ||mu||^2.  Composite scores combine structural
and cost-weighted components through a convex weight alpha.  Metrics that
are not defined for the given inputs (fewer than two solutions, no test
with two usable traces) are reported as None, never as 0 or NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .pmf import AlignedPmfSet, DynamicTensor, PmfVector

CLIP_TOLERANCE = 1e-12
DENOMINATOR_FLOOR = 1e-12

DEFAULT_ALPHA = 0.5
DEFAULT_EPSILON = 1e-9


class DivergenceError(ValueError):
    """Metric arithmetic left its mathematically guaranteed range."""


@dataclass(frozen=True)
class DivergenceConfig:
    alpha: float = DEFAULT_ALPHA
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise DivergenceError(f"alpha {self.alpha} outside [0, 1]")
        if not self.epsilon > 0.0:
            raise DivergenceError(f"epsilon {self.epsilon} must be positive")


@dataclass
class StabilityScores:
    """Per-problem metric bundle; None means the metric is undefined."""

    sctd_jsd: Optional[float]
    sctd_tau: Optional[float]
    dctd_jsd: Optional[float]
    dctd_tau: Optional[float]
    bef_jsd: Optional[float]
    bef_tau: Optional[float]
    m_used: int
    r_used: int

    def __post_init__(self) -> None:
        for name in ("sctd_jsd", "sctd_tau", "dctd_jsd", "dctd_tau"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise DivergenceError(f"{name}={v} outside [0, 1]")
        for name in ("bef_jsd", "bef_tau"):
            v = getattr(self, name)
            if v is not None and v < 0.0:
                raise DivergenceError(f"{name}={v} negative")


def _clip01(value: float, what: str) -> float:
    # Rounding may leave a value a hair outside [0,1]; anything further out
    # is a real defect and must surface, not be papered over.
    if value < 0.0:
        if value >= -CLIP_TOLERANCE:
            return 0.0
        raise DivergenceError(f"{what}={value} below 0 beyond tolerance")
    if value > 1.0:
        if value <= 1.0 + CLIP_TOLERANCE:
            return 1.0
        raise DivergenceError(f"{what}={value} above 1 beyond tolerance")
    return value


def _kl_terms(x: np.ndarray, mid: np.ndarray) -> np.ndarray:
    # Convention 0*log(0/m) = 0; where x > 0, mid >= x/2 > 0 so the ratio
    # is always positive where it is consumed.
    ratio = np.divide(x, mid, out=np.ones_like(x), where=x > 0.0)
    return np.where(x > 0.0, x * np.log2(ratio), 0.0)


def _pairwise_jsd_values(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    mid = 0.5 * (x + y)
    values = 0.5 * _kl_terms(x, mid).sum(axis=-1) + 0.5 * _kl_terms(y, mid).sum(axis=-1)
    return values


def jsd(x: PmfVector, y: PmfVector) -> float:
    """Jensen-Shannon divergence in bits, bounded in [0, 1]."""
    if x.vocabulary != y.vocabulary:
        raise DivergenceError("JSD operands must share a vocabulary")
    value = float(_pairwise_jsd_values(x.probs[None, :], y.probs[None, :])[0])
    return _clip01(value, "jsd")


_PAIR_INDEX_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _pair_indices(m: int) -> tuple[np.ndarray, np.ndarray]:
    cached = _PAIR_INDEX_CACHE.get(m)
    if cached is None:
        cached = np.triu_indices(m, k=1)
        _PAIR_INDEX_CACHE[m] = cached
    return cached


def mean_pairwise_jsd(rows: AlignedPmfSet) -> Optional[float]:
    """(2 / m(m-1)) * sum of JSD over unordered row pairs; None if m < 2."""
    m = rows.m
    if m < 2:
        return None
    left, right = _pair_indices(m)
    values = _pairwise_jsd_values(rows.matrix[left], rows.matrix[right])
    value = float(values.sum()) * 2.0 / (m * (m - 1))
    return _clip01(value, "mean_pairwise_jsd")


def tau(rows: AlignedPmfSet) -> Optional[float]:
    """Covariance trace of the uniform row distribution over its sharp bound.

    Identical rows short-circuit to exactly 0: the mean of m float-equal
    rows need not reproduce the row bitwise, and the guaranteed-zero trace
    must not pick up that rounding.
    """
    m = rows.m
    if m < 2:
        return None
    matrix = rows.matrix
    if np.all(matrix == matrix[0]):
        return 0.0
    mu = matrix.mean(axis=0)
    trace = float(np.mean(np.sum((matrix - mu) ** 2, axis=1)))
    denominator = 1.0 - float(mu @ mu)
    if denominator <= DENOMINATOR_FLOOR:
        return 0.0
    return _clip01(trace / denominator, "tau")


def _combine(structural: Optional[float], weighted: Optional[float], cfg: DivergenceConfig, what: str) -> Optional[float]:
    if structural is None or weighted is None:
        return None
    return _clip01(cfg.alpha * structural + (1.0 - cfg.alpha) * weighted, what)


def sctd_jsd(p: AlignedPmfSet, q: AlignedPmfSet, cfg: DivergenceConfig) -> Optional[float]:
    """alpha * mean pairwise JSD of P + (1 - alpha) * that of Q."""
    _check_static_pair(p, q)
    return _combine(mean_pairwise_jsd(p), mean_pairwise_jsd(q), cfg, "sctd_jsd")


def sctd_tau(p: AlignedPmfSet, q: AlignedPmfSet, cfg: DivergenceConfig) -> Optional[float]:
    """alpha * tau(P) + (1 - alpha) * tau(Q)."""
    _check_static_pair(p, q)
    return _combine(tau(p), tau(q), cfg, "sctd_tau")


def _check_static_pair(p: AlignedPmfSet, q: AlignedPmfSet) -> None:
    if p.m != q.m:
        raise DivergenceError("structural and weighted sets must have equal m")


def qualifying_tests(tensor: DynamicTensor) -> list[int]:
    """Indices of tests with at least two available traces, in test order."""
    return [j for j in range(tensor.r) if int(tensor.availability[j].sum()) >= 2]


def _per_test_average(tensor: DynamicTensor, stat, indices: list[int]) -> Optional[float]:
    values = []
    for j in indices:
        v = stat(tensor.slices[j])
        if v is None:
            raise DivergenceError("qualifying test produced an undefined statistic")
        values.append(v)
    if not values:
        return None
    return float(np.mean(values))


def _check_dynamic_pair(d: DynamicTensor, c: DynamicTensor) -> None:
    if d.test_ids != c.test_ids or not np.array_equal(d.availability, c.availability):
        raise DivergenceError("structural and weighted tensors disagree on coverage")


def dctd_jsd(d: DynamicTensor, c: DynamicTensor, cfg: DivergenceConfig) -> Optional[float]:
    """Per-test mean pairwise JSD averaged over qualifying tests, combined by alpha.

    Tests with fewer than two usable traces contribute nothing; with no
    qualifying test the metric is undefined.
    """
    _check_dynamic_pair(d, c)
    indices = qualifying_tests(d)
    structural = _per_test_average(d, mean_pairwise_jsd, indices)
    weighted = _per_test_average(c, mean_pairwise_jsd, indices)
    return _combine(structural, weighted, cfg, "dctd_jsd")


def dctd_tau(d: DynamicTensor, c: DynamicTensor, cfg: DivergenceConfig) -> Optional[float]:
    """Per-test tau averaged over qualifying tests, combined by alpha."""
    _check_dynamic_pair(d, c)
    indices = qualifying_tests(d)
    structural = _per_test_average(d, tau, indices)
    weighted = _per_test_average(c, tau, indices)
    return _combine(structural, weighted, cfg, "dctd_tau")


def bef(sctd: Optional[float], dctd: Optional[float], cfg: DivergenceConfig) -> Optional[float]:
    """Static-over-dynamic ratio with an epsilon-guarded denominator."""
    if sctd is None or dctd is None:
        return None
    if sctd < 0.0 or dctd < 0.0:
        raise DivergenceError("BEF inputs must be nonnegative")
    return sctd / (dctd + cfg.epsilon)


def compute_scores(
    static_pair: Optional[tuple[AlignedPmfSet, AlignedPmfSet]],
    dynamic_pair: Optional[tuple[DynamicTensor, DynamicTensor]],
    cfg: DivergenceConfig,
) -> StabilityScores:
    """Assemble the full score bundle, leaving unavailable metrics None."""
    m_used = 0
    s_jsd = s_tau = None
    if static_pair is not None:
        p, q = static_pair
        m_used = p.m
        s_jsd = sctd_jsd(p, q, cfg)
        s_tau = sctd_tau(p, q, cfg)

    r_used = 0
    d_jsd = d_tau = None
    if dynamic_pair is not None:
        d, c = dynamic_pair
        r_used = len(qualifying_tests(d))
        d_jsd = dctd_jsd(d, c, cfg)
        d_tau = dctd_tau(d, c, cfg)

    return StabilityScores(
        sctd_jsd=s_jsd,
        sctd_tau=s_tau,
        dctd_jsd=d_jsd,
        dctd_tau=d_tau,
        bef_jsd=bef(s_jsd, d_jsd, cfg),
        bef_tau=bef(s_tau, d_tau, cfg),
        m_used=m_used,
        r_used=r_used,
    )
