"""Normalized empirical distribution functions, mid-ranks and relative effects.

All quantities use the normalized count kernel ``c(u) = 1{u > 0} + 1/2 1{u = 0}``,
so ties are split evenly and everything reduces to mid-rank arithmetic.

The pairwise Mann-Whitney effect of group ``l`` against group ``i`` in
component ``j`` is ``w[l, i, j] = int F_lj dF_ij``; the unweighted relative
effect of group ``i`` is ``p[i, j] = mean_l w[l, i, j]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import rankdata

from .data import Dataset
from .exceptions import EmptySample


def count_kernel(u):
    """Normalized indicator: 1 for ``u > 0``, 1/2 for ``u == 0``, else 0."""
    u = np.asarray(u, dtype=float)
    out = (u > 0).astype(float) + 0.5 * (u == 0)
    return out if out.ndim else float(out)


def _sorted_sample(sample) -> np.ndarray:
    s = np.sort(np.asarray(sample, dtype=float).ravel())
    if s.size == 0:
        raise EmptySample("empirical distribution of an empty sample")
    return s


def ecdf_sorted(sorted_sample: np.ndarray, x) -> np.ndarray:
    """Normalized ECDF of an already sorted sample, evaluated at ``x``."""
    lo = np.searchsorted(sorted_sample, x, side="left")
    hi = np.searchsorted(sorted_sample, x, side="right")
    return (lo + hi) / (2.0 * sorted_sample.size)


def ecdf(sample, x):
    """Normalized empirical distribution function ``(1/n) sum_k c(x - X_k)``.

    >>> ecdf([1, 2, 3], 2)
    0.5
    """
    out = ecdf_sorted(_sorted_sample(sample), x)
    return out if np.ndim(out) else float(out)


def midranks(first, second) -> np.ndarray:
    """Mid-ranks of the pooled sample ``first`` followed by ``second``."""
    first = np.asarray(first, dtype=float).ravel()
    second = np.asarray(second, dtype=float).ravel()
    if first.size == 0 or second.size == 0:
        raise EmptySample("mid-ranks need two nonempty samples")
    return rankdata(np.concatenate([first, second]), method="average")


def _doubled_wins(sample_l: np.ndarray, sample_i: np.ndarray) -> int:
    # 2 * sum_{k,r} c(X_ik - X_lr), recovered from the mid-rank sum of sample i
    n_i = sample_i.size
    r = midranks(sample_l, sample_i)[sample_l.size:]
    return int(round(2.0 * r.sum())) - n_i * (n_i + 1)


def pairwise_effect(sample_l, sample_i) -> float:
    """Mann-Whitney effect ``int F_l dF_i`` from pooled mid-ranks.

    Equals ``(mean rank of sample_i in the pooled sample - (n_i + 1)/2) / n_l``.
    """
    sample_l = np.asarray(sample_l, dtype=float).ravel()
    sample_i = np.asarray(sample_i, dtype=float).ravel()
    if sample_l.size == 0 or sample_i.size == 0:
        raise EmptySample("pairwise effect of an empty sample")
    return _doubled_wins(sample_l, sample_i) / (2.0 * sample_l.size * sample_i.size)


@dataclass(frozen=True, eq=False)
class PairwiseEffects:
    """Pairwise effects ``w[l, i, j]`` with their exact rational numerators.

    ``wins[l, i, j]`` is the integer ``2 * sum_{k,r} c(X_ijk - X_ljr)`` so that
    ``w = wins / (2 n_l n_i)`` exactly.
    """

    w: np.ndarray
    wins: np.ndarray
    n: tuple[int, ...]

    def exact(self, l: int, i: int, j: int) -> Fraction:
        return Fraction(int(self.wins[l, i, j]), 2 * self.n[l] * self.n[i])


@dataclass(frozen=True, eq=False)
class EffectVector:
    """Unweighted relative effects, flattened groups-outer/components-inner."""

    p: np.ndarray
    a: int
    d: int
    n: tuple[int, ...]

    @property
    def matrix(self) -> np.ndarray:
        """Effects as an ``(a, d)`` table."""
        return self.p.reshape(self.a, self.d)

    @property
    def N(self) -> int:
        return sum(self.n)


def pairwise_effects(dataset: Dataset) -> PairwiseEffects:
    """All pairwise effects ``w[l, i, j]`` of a dataset."""
    a, d, n = dataset.a, dataset.d, dataset.n
    wins = np.zeros((a, a, d), dtype=np.int64)
    w = np.empty((a, a, d))
    for j in range(d):
        cols = dataset.component(j)
        for i in range(a):
            wins[i, i, j] = n[i] * n[i]
            w[i, i, j] = 0.5
            for l in range(i + 1, a):
                u = _doubled_wins(cols[l], cols[i])
                total = 2 * n[l] * n[i]
                wins[l, i, j] = u
                wins[i, l, j] = total - u
                # derive the smaller effect as 1 - larger so both sum to 1 in floats
                if 2 * u >= total:
                    w[l, i, j] = u / total
                    w[i, l, j] = 1.0 - w[l, i, j]
                else:
                    w[i, l, j] = (total - u) / total
                    w[l, i, j] = 1.0 - w[i, l, j]
    w.setflags(write=False)
    wins.setflags(write=False)
    return PairwiseEffects(w, wins, n)


def effects(dataset: Dataset) -> tuple[EffectVector, PairwiseEffects]:
    """Estimate the relative effect vector ``p_hat`` and the pairwise effects."""
    pw = pairwise_effects(dataset)
    p = pw.w.mean(axis=0).ravel()
    p.setflags(write=False)
    return EffectVector(p, dataset.a, dataset.d, dataset.n), pw


def exact_effects(pw: PairwiseEffects) -> list[list[Fraction]]:
    """Relative effects as exact fractions, indexed ``[i][j]``."""
    a, _, d = pw.wins.shape
    return [
        [sum((pw.exact(l, i, j) for l in range(a)), Fraction(0)) / a for j in range(d)]
        for i in range(a)
    ]


def placements(dataset: Dataset) -> np.ndarray:
    """Normalized ECDF of every group evaluated at every pooled observation.

    Returns an array ``F`` of shape ``(d, a, N)`` with
    ``F[j, i, k] = F_hat_ij(X_jk)`` where ``k`` runs over the pooled sample.
    """
    pooled = dataset.pooled
    out = np.empty((dataset.d, dataset.a, dataset.N))
    for j in range(dataset.d):
        for i, g in enumerate(dataset.groups):
            out[j, i] = ecdf_sorted(np.sort(g[:, j]), pooled[:, j])
    return out
