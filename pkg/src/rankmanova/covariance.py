"""Plug-in estimate of the asymptotic covariance of ``sqrt(N) (p_hat - p)``.

The pairwise-effect covariance follows the four-term expansion

    sigma[(l,i,j), (l',i',j')] =
          d(l,l')  N/n_l  C_l[(i,j), (i',j')]
        - d(l,i')  N/n_l  C_l[(i,j), (l',j')]
        + d(i,i')  N/n_i  C_i[(l,j), (l',j')]
        - d(i,l')  N/n_i  C_i[(l,j), (i',j')]

where ``C_g[(m,j), (m',j')] = cov(F_mj(X_gj), F_m'j'(X_gj'))`` is estimated by
``tau_hat - w w`` (same component) or ``rho_hat - w w`` (different components).
Averaging over the first index of both pairs gives the covariance of ``p_hat``.

This is a diagnostic; bootstrap quantiles, not this matrix, drive inference.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .exceptions import DegenerateGroup, NotPSD, OutOfRange, SameComponent
from .ranks import effects, placements


def _check(dataset: Dataset, *indices):
    for idx, bound in indices:
        if not 1 <= idx <= bound:
            raise OutOfRange(f"index {idx} outside 1..{bound}")


def _group_placements(dataset: Dataset, place: np.ndarray, g: int) -> np.ndarray:
    off = dataset.offsets
    return place[:, :, off[g]:off[g + 1]]


def tau_hat(i: int, i2: int, l: int, j: int, dataset: Dataset, place=None) -> float:
    """``(1/n_l) sum_k F_ij(X_ljk) F_i'j(X_ljk)``; indices are one-based."""
    a, d = dataset.a, dataset.d
    _check(dataset, (i, a), (i2, a), (l, a), (j, d))
    P = _group_placements(dataset, placements(dataset) if place is None else place, l - 1)
    return float(np.mean(P[j - 1, i - 1] * P[j - 1, i2 - 1]))


def rho_hat(i: int, i2: int, l: int, j: int, j2: int, dataset: Dataset, place=None) -> float:
    """``(1/n_l) sum_k F_ij(X_ljk) F_i'j'(X_lj'k)`` for ``j != j'``; one-based."""
    a, d = dataset.a, dataset.d
    _check(dataset, (i, a), (i2, a), (l, a), (j, d), (j2, d))
    if j == j2:
        raise SameComponent("rho_hat needs two different components")
    P = _group_placements(dataset, placements(dataset) if place is None else place, l - 1)
    return float(np.mean(P[j - 1, i - 1] * P[j2 - 1, i2 - 1]))


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    """Plug-in covariance and its ingredients (zero-based array indices).

    ``tau[i, i', l, j]``, ``rho[i, i', l, j, j']`` (zero where ``j == j'``),
    ``w[l, i, j]``; ``sigma_w`` is the pairwise-effect covariance over pairs
    ``l < i`` listed in ``pairs``, with rows ordered pair-outer, component-inner.
    """

    sigma: np.ndarray
    sigma_w: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    tau: np.ndarray
    rho: np.ndarray
    w: np.ndarray
    n: tuple[int, ...]
    N: int

    def sigma_pairwise(self, l: int, i: int, j: int, l2: int, i2: int, j2: int) -> float:
        """Covariance entry of ``w_hat[l,i,j]`` and ``w_hat[l2,i2,j2]`` (zero-based).

        Pairs with ``l > i`` are recovered from ``w_hat[l,i] = 1 - w_hat[i,l]``.
        """
        if l == i or l2 == i2:
            return 0.0
        d = self.w.shape[2]
        index = {p: k for k, p in enumerate(self.pairs)}
        s1, p1 = (1.0, (l, i)) if l < i else (-1.0, (i, l))
        s2, p2 = (1.0, (l2, i2)) if l2 < i2 else (-1.0, (i2, l2))
        return s1 * s2 * float(self.sigma_w[index[p1] * d + j, index[p2] * d + j2])


def group_covariances(dataset: Dataset, place: np.ndarray) -> list[np.ndarray]:
    """Per-group plug-in ``C_g`` as ``(a*d, a*d)`` arrays indexed ``(m, j)``."""
    a, d = dataset.a, dataset.d
    out = []
    for g in range(a):
        P = _group_placements(dataset, place, g)  # (d, a, n_g)
        V = P.transpose(1, 0, 2).reshape(a * d, -1)
        V = V - V.mean(axis=1, keepdims=True)
        out.append(V @ V.T / V.shape[1])
    return out


def sigma_hat(dataset: Dataset) -> CovarianceEstimate:
    """Plug-in covariance of ``sqrt(N) (p_hat - p)``.

    Raises
    ------
    DegenerateGroup
        If some group has fewer than two subjects.
    """
    a, d, n, N = dataset.a, dataset.d, dataset.n, dataset.N
    if min(n) < 2:
        raise DegenerateGroup("every group needs at least two subjects")
    place = placements(dataset)
    _, pw = effects(dataset)
    C = group_covariances(dataset, place)

    def c(g, m, j, m2, j2):
        return C[g][m * d + j, m2 * d + j2]

    pairs = tuple((l, i) for i in range(a) for l in range(i))
    size = len(pairs) * d
    sw = np.zeros((size, size))
    for r, (l, i) in enumerate(pairs):
        for s, (l2, i2) in enumerate(pairs):
            if not ({l, i} & {l2, i2}):
                continue
            block = np.zeros((d, d))
            for j in range(d):
                for j2 in range(d):
                    v = 0.0
                    if l == l2:
                        v += N / n[l] * c(l, i, j, i2, j2)
                    if l == i2:
                        v -= N / n[l] * c(l, i, j, l2, j2)
                    if i == i2:
                        v += N / n[i] * c(i, l, j, l2, j2)
                    if i == l2:
                        v -= N / n[i] * c(i, l, j, i2, j2)
                    block[j, j2] = v
            sw[r * d:(r + 1) * d, s * d:(s + 1) * d] = block

    # p_hat = const + A w_pairs, with w[i, l] = 1 - w[l, i] for l < i
    A = np.zeros((a * d, size))
    for r, (l, i) in enumerate(pairs):
        for j in range(d):
            A[i * d + j, r * d + j] += 1.0 / a
            A[l * d + j, r * d + j] -= 1.0 / a
    sigma = A @ sw @ A.T
    sigma = 0.5 * (sigma + sigma.T)

    tau = np.zeros((a, a, a, d))
    rho = np.zeros((a, a, a, d, d))
    for g in range(a):
        P = _group_placements(dataset, place, g)
        tau[:, :, g, :] = np.einsum("jik,jmk->imj", P, P) / n[g]
        r = np.einsum("jik,hmk->imjh", P, P) / n[g]
        r[..., np.arange(d), np.arange(d)] = 0.0
        rho[:, :, g] = r
    return CovarianceEstimate(sigma, sw, pairs, tau, rho, np.array(pw.w), n, N)


def psd_sqrt(V: np.ndarray) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clipped to zero."""
    V = 0.5 * (V + V.T)
    vals, vecs = np.linalg.eigh(V)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def eigen_diagnostic(sigma: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Eigenvalues of ``Sigma^{1/2} T Sigma^{1/2}``, descending and nonnegative."""
    sigma = np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(sigma)):
        raise NotPSD("covariance has non-finite entries")
    S = psd_sqrt(sigma)
    vals = np.linalg.eigvalsh(S @ T @ S)
    return np.clip(vals, 0.0, None)[::-1]
