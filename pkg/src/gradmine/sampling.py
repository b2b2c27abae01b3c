"""Weighted discrete sampling via Vose alias tables.

Construction is O(N); each draw is O(1). Training sequences are
materialized up front as arrays of sample indices drawn i.i.d. with
replacement from the distribution.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DistributionError

ALIAS_SUM_TOL = 1e-9


@dataclass
class SamplingDistribution:
    """Normalized probabilities plus the alias tables that realize them."""

    probs: np.ndarray  # (N,) normalized
    alias_prob: np.ndarray  # (N,) acceptance threshold per cell
    alias_idx: np.ndarray  # (N,) fallback index per cell

    @property
    def n(self):
        return int(self.probs.size)

    def reconstructed(self):
        """Per-index probability mass implied by the tables.

        Cell i contributes alias_prob[i]/N to i and the remainder to
        alias_idx[i]; the result must reproduce ``probs`` exactly.
        """
        n = self.n
        mass = self.alias_prob / n
        np.add.at(mass, self.alias_idx, (1.0 - self.alias_prob) / n)
        return mass


def build_alias(probs):
    """Vose alias tables for a probability vector.

    The input must be non-negative and sum to 1 within 1e-9; it is
    renormalized exactly before table construction. Worklists are
    processed in ascending index order so construction is deterministic.
    """
    p = np.ascontiguousarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DistributionError("probabilities must be a non-empty 1-D vector")
    if not np.all(np.isfinite(p)):
        raise DistributionError("probabilities contain non-finite entries")
    if np.any(p < 0.0):
        raise DistributionError("probabilities contain negative entries")
    total = float(p.sum())
    if total <= 0.0:
        raise DistributionError("probabilities sum to zero")
    if abs(total - 1.0) > ALIAS_SUM_TOL:
        raise DistributionError(f"probabilities sum to {total}, not 1")
    p = p / total

    n = p.size
    scaled = p * n
    alias_prob = np.ones(n)
    alias_idx = np.arange(n)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    si = li = 0
    while si < len(small) and li < len(large):
        s, l = small[si], large[li]
        si += 1
        alias_prob[s] = scaled[s]
        alias_idx[s] = l
        scaled[l] = (scaled[l] + scaled[s]) - 1.0
        if scaled[l] < 1.0:
            small.append(l)
            li += 1
    # Leftover cells (including float residue) become full cells.
    return SamplingDistribution(probs=p, alias_prob=alias_prob, alias_idx=alias_idx)


def draw(dist, rng):
    """One index distributed per the tables: pick a cell, then accept or
    fall through to its alias. Consumes exactly two uniforms."""
    i = int(rng.integers(dist.n))
    if rng.random() < dist.alias_prob[i]:
        return i
    return int(dist.alias_idx[i])


def generate_sequence(dist, length, rng):
    """``length`` i.i.d. draws, materialized up front.

    Vectorized: one batch of cell picks, one batch of acceptance draws.
    """
    if length < 0:
        raise DistributionError("length must be >= 0")
    idx = rng.integers(dist.n, size=length)
    accept = rng.random(length) < dist.alias_prob[idx]
    return np.where(accept, idx, dist.alias_idx[idx]).astype(np.int64)
