"""ANOVA-type statistic with wild and classical (group-wise) bootstrap inference.

The wild bootstrap replicate of ``sqrt(N) (p_hat - p)`` is

    p*_ij = int G*_j dF_hat_ij - int F*_ij dG_hat_j,
    F*_lj(x) = (1/n_l) sum_k D_lk [c(x - X_ljk) - F_hat_lj(x)],

with one multiplier ``D_lk`` per subject shared by all components. Both
integrals are finite sums over the sample, and the replicate is linear in the
multipliers, so a dataset is reduced once to an ``(a*d, N)`` matrix ``M`` and
every replicate is ``sqrt(N) * M @ D``.

The classical bootstrap resamples whole observation vectors within each group
and recomputes the effects; its replicates are ``sqrt(N) (p* - p_hat)``.

Replicate ``r`` of a run seeded with ``seed`` draws its randomness from block
``r // BLOCK`` of a stream keyed by ``(seed, block)``, so results do not depend
on the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .design import HypothesisDesign
from .exceptions import ConfigError, DimensionMismatch, InvalidAlpha
from .ranks import count_kernel, ecdf_sorted, effects, placements

BLOCK = 128
# n_i * n_l above which classical replicates are computed by re-ranking
KERNEL_LIMIT = 250_000

MULTIPLIERS = ("rademacher", "normal")


@dataclass(frozen=True)
class MultiplierScheme:
    """Distribution of the wild bootstrap multipliers (mean 0, variance 1)."""

    distribution: str = "rademacher"

    def __post_init__(self):
        if self.distribution not in MULTIPLIERS:
            raise ConfigError(f"unknown multiplier distribution {self.distribution!r}")

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.distribution == "rademacher":
            return 2.0 * rng.integers(0, 2, size=shape) - 1.0
        return rng.standard_normal(shape)


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    statistic: float
    replicates: np.ndarray
    critical_value: float
    pvalue: float
    B: int
    seed: object
    method: str
    alpha: float

    @property
    def reject(self) -> bool:
        return bool(self.statistic > self.critical_value)

    def __eq__(self, other):
        if not isinstance(other, BootstrapResult):
            return NotImplemented
        return (
            self.statistic == other.statistic
            and np.array_equal(self.replicates, other.replicates)
            and self.critical_value == other.critical_value
            and self.pvalue == other.pvalue
            and (self.B, self.method, self.alpha) == (other.B, other.method, other.alpha)
        )


def ats(p, T, N: int) -> float:
    """ANOVA-type statistic ``N p' T p``."""
    p = np.asarray(getattr(p, "p", p), dtype=float)
    T = np.asarray(T, dtype=float)
    if T.shape != (p.size, p.size):
        raise DimensionMismatch(f"T has shape {T.shape}, effect vector has {p.size} entries")
    q = float(N * p @ T @ p)
    # rounding noise of a form that is exactly zero in exact arithmetic
    if q <= 64 * np.finfo(float).eps * N * float(p @ p) * max(np.abs(T).sum(axis=1).max(), 1.0):
        return 0.0
    return q


def quadratic_forms(vectors: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Row-wise ``v' T v`` for a stack of vectors, clipped at 0."""
    return np.maximum(np.einsum("bi,ij,bj->b", vectors, T, vectors), 0.0)


def critical_value(replicates, alpha: float) -> float:
    """The ``ceil((1 - alpha) B)``-th order statistic of the replicates."""
    _check_alpha(alpha)
    reps = np.sort(np.asarray(replicates, dtype=float))
    k = math.ceil((1.0 - alpha) * reps.size - 1e-9)
    return float(reps[min(max(k, 1), reps.size) - 1])


def bootstrap_pvalue(statistic: float, replicates) -> float:
    """``(1 + #{replicates >= statistic}) / (B + 1)``."""
    reps = np.asarray(replicates)
    return (1.0 + np.count_nonzero(reps >= statistic)) / (reps.size + 1.0)


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def block_rng(seed, block: int) -> np.random.Generator:
    """Generator for replicate block ``block`` of a bootstrap seeded by ``seed``."""
    ss = _seed_sequence(seed)
    return np.random.default_rng(
        np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (block,))
    )


def _run_blocks(fn, B: int, workers: int) -> np.ndarray:
    sizes = [min(BLOCK, B - s) for s in range(0, B, BLOCK)]
    jobs = list(enumerate(sizes))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    else:
        parts = [fn(b, size) for b, size in jobs]
    return np.concatenate(parts, axis=0)


# ---------------------------------------------------------------------------
# wild bootstrap
# ---------------------------------------------------------------------------

def wild_residual_process(sample, multipliers, x):
    """``F*(x) = (1/n) sum_k D_k [c(x - X_k) - F_hat(x)]`` for one group/component."""
    sample = np.asarray(sample, dtype=float).ravel()
    D = np.asarray(multipliers, dtype=float).ravel()
    x = np.asarray(x, dtype=float)
    F = ecdf_sorted(np.sort(sample), x)
    resid = count_kernel(np.subtract.outer(x, sample)) - np.asarray(F)[..., None]
    out = (resid * D).mean(axis=-1)
    return out if out.ndim else float(out)


def wild_matrix(dataset: Dataset, place: np.ndarray | None = None) -> np.ndarray:
    """Matrix ``M`` with ``p* = sqrt(N) M D`` for multipliers ``D`` (length N).

    Rows follow the effect-vector layout, columns the pooled subjects.
    """
    a, d, N = dataset.a, dataset.d, dataset.N
    n = np.asarray(dataset.n)
    off = dataset.offsets
    F = placements(dataset) if place is None else place
    group = np.repeat(np.arange(a), n)
    # center each group's placements: h[j, i, k] = F_ij(X_k) - w_hat_{i, g(k), j}
    sums = np.add.reduceat(F, off[:-1], axis=2)
    h = F - np.repeat(sums / n, n, axis=2)
    total = h.sum(axis=1)
    M = np.empty((a, d, N))
    for i in range(a):
        own = group == i
        M[i] = -h[:, i, :]
        M[i][:, own] += total[:, own]
    M /= a * n[group]
    return M.reshape(a * d, N)


def wild_replicate(dataset: Dataset, multipliers, M: np.ndarray | None = None) -> np.ndarray:
    """One wild bootstrap vector ``sqrt(N) (p*_11, ..., p*_ad)``."""
    if M is None:
        M = wild_matrix(dataset)
    D = np.asarray(multipliers, dtype=float)
    if D.shape != (dataset.N,):
        raise DimensionMismatch(f"need {dataset.N} multipliers, got {D.shape}")
    return math.sqrt(dataset.N) * (M @ D)


def wild_vectors(dataset: Dataset, B: int, seed=None, scheme: MultiplierScheme | str = "rademacher",
                 workers: int = 1, M: np.ndarray | None = None) -> np.ndarray:
    """``B`` wild bootstrap vectors as a ``(B, a*d)`` array."""
    if B < 1:
        raise ConfigError("B must be at least 1")
    if isinstance(scheme, str):
        scheme = MultiplierScheme(scheme)
    if M is None:
        M = wild_matrix(dataset)
    scale = math.sqrt(dataset.N)
    MT = M.T * scale

    def block(b, size):
        D = scheme.draw(block_rng(seed, b), (size, dataset.N))
        return D @ MT

    return _run_blocks(block, B, workers)


# ---------------------------------------------------------------------------
# classical group-wise bootstrap
# ---------------------------------------------------------------------------

def classical_replicate(dataset: Dataset, indices) -> np.ndarray:
    """Effect vector of the dataset resampled at ``indices`` (one array per group)."""
    groups = [g[np.asarray(ix, dtype=int)] for g, ix in zip(dataset.groups, indices)]
    resampled = Dataset(tuple(groups), dataset.labels, dataset.group_names)
    return np.array(effects(resampled)[0].p)


def _draw_indices(rng: np.random.Generator, n, size: int) -> list[np.ndarray]:
    return [rng.integers(0, ni, size=(size, ni)) for ni in n]


def _counts(ix: np.ndarray, ni: int) -> np.ndarray:
    size = ix.shape[0]
    flat = (ix + ni * np.arange(size)[:, None]).ravel()
    return np.bincount(flat, minlength=size * ni).reshape(size, ni).astype(float)


class _KernelCache:
    """Pairwise count-kernel matrices ``c(X_ijk - X_ljr)`` for ``l < i``."""

    def __init__(self, dataset: Dataset):
        self.a, self.d, self.n = dataset.a, dataset.d, dataset.n
        self.K = {}
        for j in range(self.d):
            cols = dataset.component(j)
            for i in range(self.a):
                for l in range(i):
                    self.K[l, i, j] = count_kernel(np.subtract.outer(cols[i], cols[l]))

    def effects(self, counts: list[np.ndarray]) -> np.ndarray:
        a, d, n = self.a, self.d, self.n
        size = counts[0].shape[0]
        w = np.full((size, a, a, d), 0.5)
        for (l, i, j), K in self.K.items():
            v = np.einsum("bk,bk->b", counts[i] @ K, counts[l]) / (n[i] * n[l])
            w[:, l, i, j] = v
            w[:, i, l, j] = 1.0 - v
        return w.mean(axis=1).reshape(size, a * d)


def classical_vectors(dataset: Dataset, B: int, seed=None, workers: int = 1,
                      p_hat: np.ndarray | None = None) -> np.ndarray:
    """``B`` classical bootstrap vectors ``sqrt(N) (p* - p_hat)``, shape ``(B, a*d)``."""
    if B < 1:
        raise ConfigError("B must be at least 1")
    if p_hat is None:
        p_hat = effects(dataset)[0].p
    n = dataset.n
    scale = math.sqrt(dataset.N)
    use_kernel = max(n[i] * n[l] for i in range(len(n)) for l in range(len(n))) <= KERNEL_LIMIT
    cache = _KernelCache(dataset) if use_kernel else None

    def block(b, size):
        ix = _draw_indices(block_rng(seed, b), n, size)
        if cache is not None:
            p_star = cache.effects([_counts(x, ni) for x, ni in zip(ix, n)])
        else:
            p_star = np.array([
                classical_replicate(dataset, [x[r] for x in ix]) for r in range(size)
            ])
        return scale * (p_star - p_hat)

    return _run_blocks(block, B, workers)


# ---------------------------------------------------------------------------
# tests
# ---------------------------------------------------------------------------

def result_from_vectors(statistic: float, vectors: np.ndarray, T: np.ndarray, alpha: float,
                        seed=None, method: str = "wild") -> BootstrapResult:
    """Bootstrap test of ``T p = 0`` from precomputed replicate vectors."""
    _check_alpha(alpha)
    reps = quadratic_forms(vectors, T)
    reps.setflags(write=False)
    return BootstrapResult(
        statistic=statistic,
        replicates=reps,
        critical_value=critical_value(reps, alpha),
        pvalue=bootstrap_pvalue(statistic, reps),
        B=reps.size,
        seed=seed,
        method=method,
        alpha=alpha,
    )


def wild_test(dataset: Dataset, design: HypothesisDesign, B: int = 1000, alpha: float = 0.05,
              scheme: MultiplierScheme | str = "rademacher", seed=None,
              workers: int = 1) -> BootstrapResult:
    """Wild bootstrap ATS test; rejects when ``T_N`` exceeds the critical value."""
    _check_alpha(alpha)
    design.check(dataset)
    p_hat, _ = effects(dataset)
    stat = ats(p_hat, design.T, dataset.N)
    vec = wild_vectors(dataset, B, seed, scheme, workers)
    return result_from_vectors(stat, vec, design.T, alpha, seed, "wild")


def classical_test(dataset: Dataset, design: HypothesisDesign, B: int = 1000, alpha: float = 0.05,
                   seed=None, workers: int = 1) -> BootstrapResult:
    """Group-wise bootstrap ATS test, replicates centered at ``p_hat``."""
    _check_alpha(alpha)
    design.check(dataset)
    p_hat, _ = effects(dataset)
    stat = ats(p_hat, design.T, dataset.N)
    vec = classical_vectors(dataset, B, seed, workers, p_hat.p)
    return result_from_vectors(stat, vec, design.T, alpha, seed, "classical")


def bootstrap_vectors(dataset: Dataset, B: int, method: str = "wild", seed=None,
                      scheme: MultiplierScheme | str = "rademacher", workers: int = 1) -> np.ndarray:
    if method == "wild":
        return wild_vectors(dataset, B, seed, scheme, workers)
    if method == "classical":
        return classical_vectors(dataset, B, seed, workers)
    raise ConfigError(f"unknown bootstrap method {method!r}")


def run_test(dataset: Dataset, design: HypothesisDesign, method: str = "wild", **kwargs) -> BootstrapResult:
    if method == "wild":
        return wild_test(dataset, design, **kwargs)
    if method == "classical":
        kwargs.pop("scheme", None)
        return classical_test(dataset, design, **kwargs)
    raise ConfigError(f"unknown bootstrap method {method!r}")
