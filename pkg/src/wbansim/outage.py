"""Outage-probability analysis of the probabilistic contention policy.

Quantities here live on a linear interference scale, normalized so that a
contribution divided by the threshold is a probability. The literal outage
convention is used throughout: an outage occurs when the summed interference
at a tagged node EXCEEDS the threshold. A `conventional` flag flips the
direction for readers who want the textbook definition.

The policy under study: a contributor whose level is delta doubles its
contention window with probability delta/threshold, and conditional on that,
abandons the channel with probability (delta/threshold)^2. Either reaction
removes its contribution from the tagged instant's sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z_99 = 2.5758293035489004      # two-sided 99% normal quantile


@dataclass(frozen=True)
class InterferenceVector:
    """Nonnegative linear contributions seen at a tagged node, one per
    other sensor (length N-1)."""

    deltas: tuple[float, ...]

    def __post_init__(self):
        if any(d < 0 for d in self.deltas):
            raise ValueError("interference contributions must be nonnegative")

    @property
    def total(self) -> float:
        return math.fsum(self.deltas)


@dataclass(frozen=True)
class PolicyOutcome:
    actions: tuple[str, ...]             # per sensor: no_change|doubled_cw|switched
    effective: tuple[float, ...]         # contribution left at the tagged instant

    def __post_init__(self):
        for a in self.actions:
            if a not in ("no_change", "doubled_cw", "switched"):
                raise ValueError(f"unknown policy action {a!r}")


def outage_empirical(samples: list[InterferenceVector], threshold: float,
                     conventional: bool = False) -> float:
    """Fraction of sample vectors whose summed interference exceeds the
    threshold (or falls below it, under the conventional direction)."""
    if not samples:
        raise ValueError("need at least one sample vector")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if conventional:
        hits = sum(1 for v in samples if v.total <= threshold)
    else:
        hits = sum(1 for v in samples if v.total > threshold)
    return hits / len(samples)


def mean_interference_probabilistic(v: InterferenceVector,
                                    threshold: float) -> float:
    """Expected residual interference once each contributor backs off with
    probability delta/threshold: sum of delta * (1 - delta/threshold).

    Contributions above the threshold have their back-off probability
    clamped to one and so contribute nothing.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    total = 0.0
    for d in v.deltas:
        ratio = min(d / threshold, 1.0)
        total += d * (1.0 - ratio)
    return total


def policy_sample(v: InterferenceVector, threshold: float, rng) -> PolicyOutcome:
    """One random realization of the policy across all contributors."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    actions = []
    effective = []
    for d in v.deltas:
        ratio = min(d / threshold, 1.0)
        if rng.random() < ratio:
            if rng.random() < ratio * ratio:
                actions.append("switched")
            else:
                actions.append("doubled_cw")
            effective.append(0.0)      # off this instant either way
        else:
            actions.append("no_change")
            effective.append(d)
    return PolicyOutcome(tuple(actions), tuple(effective))


def doubling_probability(delta, threshold: float):
    """Probability that a contributor reacts: one above the threshold, the
    linear ratio below it. Arrays of samples return the empirical mean."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    arr = np.asarray(delta, dtype=float)
    if np.any(arr < 0):
        raise ValueError("delta must be nonnegative")
    probs = np.where(arr > threshold, 1.0, arr / threshold)
    if arr.ndim == 0:
        return float(probs)
    return float(probs.mean())


# ---------------------------------------------------------------------------
# Distributions and the lemma check


def make_sampler(spec: str, threshold: float, n: int):
    """Parse a distribution spec into a vectorized sampler of per-sensor
    contributions.

    Specs:
      uniform[:scale]    U(0, scale * threshold / (N-1)), default scale 2
      texp[:mean_frac[:cap_frac]]   exponential with mean mean_frac * threshold
                                    / (N-1), truncated at cap_frac * threshold
      twopoint[:lo_frac:hi_frac:p_hi]  two-point on {lo, hi} * threshold/(N-1)
    """
    parts = spec.split(":")
    name = parts[0]
    k = n - 1
    if k < 1:
        raise ValueError("need at least one interfering sensor (N >= 2)")
    if name == "uniform":
        scale = float(parts[1]) if len(parts) > 1 else 2.0
        hi = scale * threshold / k

        def sample(rng: np.random.Generator, trials: int) -> np.ndarray:
            return rng.uniform(0.0, hi, size=(trials, k))
    elif name == "texp":
        mean_frac = float(parts[1]) if len(parts) > 1 else 1.0
        cap_frac = float(parts[2]) if len(parts) > 2 else 1.0
        mean = mean_frac * threshold / k
        cap = cap_frac * threshold

        def sample(rng: np.random.Generator, trials: int) -> np.ndarray:
            return np.minimum(rng.exponential(mean, size=(trials, k)), cap)
    elif name == "twopoint":
        lo_frac = float(parts[1]) if len(parts) > 1 else 0.5
        hi_frac = float(parts[2]) if len(parts) > 2 else 2.0
        p_hi = float(parts[3]) if len(parts) > 3 else 0.5
        lo, hi = lo_frac * threshold / k, hi_frac * threshold / k

        def sample(rng: np.random.Generator, trials: int) -> np.ndarray:
            picks = rng.random(size=(trials, k)) < p_hi
            return np.where(picks, hi, lo)
    else:
        raise ValueError(f"unknown distribution spec {spec!r}")
    return sample


@dataclass(frozen=True)
class LemmaCheck:
    p_pr: float
    p_out: float
    ci_pr: tuple[float, float]
    ci_out: tuple[float, float]
    holds: bool                 # p_pr <= p_out
    strict: bool                # 99% confidence intervals do not overlap
    degenerate: bool            # both estimates exactly zero
    n_trials: int


def _binom_ci(p_hat: float, n: int) -> tuple[float, float]:
    half = Z_99 * math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)
    return (max(0.0, p_hat - half), min(1.0, p_hat + half))


def verify_lemma1(dist_spec: str, n: int, threshold: float, n_trials: int,
                  rng: np.random.Generator) -> LemmaCheck:
    """Estimate, on common random draws, the outage probability of the raw
    interference sum and of the policy-weighted sum

        sum_j delta_j * (1 - (delta_j/thr + (delta_j/thr)^2))

    and report whether the weighted one is no worse, with 99% binomial
    confidence intervals around both estimates.
    """
    if n_trials < 10_000:
        raise ValueError("need at least 10^4 trials for a meaningful interval")
    sampler = make_sampler(dist_spec, threshold, n)
    deltas = sampler(rng, n_trials)
    raw_sums = deltas.sum(axis=1)
    ratio = deltas / threshold
    weighted = deltas * (1.0 - (ratio + ratio * ratio))
    pr_sums = weighted.sum(axis=1)

    p_out = float(np.mean(raw_sums > threshold))
    p_pr = float(np.mean(pr_sums > threshold))
    ci_out = _binom_ci(p_out, n_trials)
    ci_pr = _binom_ci(p_pr, n_trials)
    return LemmaCheck(
        p_pr=p_pr, p_out=p_out, ci_pr=ci_pr, ci_out=ci_out,
        holds=p_pr <= p_out,
        strict=ci_pr[1] < ci_out[0],
        degenerate=(p_pr == 0.0 and p_out == 0.0),
        n_trials=n_trials)
