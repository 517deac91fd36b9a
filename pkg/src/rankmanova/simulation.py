"""Data generators and a Monte-Carlo harness for level and power studies.

Continuous data are generated as ``mu_i + V_i^{1/2} eps`` with standardized
normal or lognormal errors. Ordinal data discretize a latent Gaussian vector
so that component ``j`` (one-based) is uniform on ``{1, ..., j + 1}``.

Every Monte-Carlo run draws from its own stream keyed by ``(seed, cell, run)``,
so tables are reproducible and independent of the number of workers.
"""
from __future__ import annotations

import itertools
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm

from .data import Dataset, validate
from .design import one_way
from .exceptions import ConfigError, InvalidCorrelation, NotPSD
from .inference import ats, bootstrap_pvalue, bootstrap_vectors, quadratic_forms
from .ranks import effects

DISTRIBUTIONS = ("normal", "lognormal", "heteroscedastic", "ordinal")
ENGINES = ("wild", "classical")
M_GRID = (0, 10, 30, 50)
DELTA_GRID = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0)
BASE_SIZES = ((10, 10), (10, 20), (20, 10))


def cs_cov(d: int, rho: float = 0.5) -> np.ndarray:
    """Compound symmetry: unit diagonal, ``rho`` everywhere else."""
    if d < 1:
        raise ConfigError("d must be at least 1")
    lower = -1.0 / (d - 1) if d > 1 else -1.0
    if not lower < rho < 1.0:
        raise InvalidCorrelation(f"rho={rho} outside ({lower}, 1) for d={d}")
    return np.eye(d) + rho * (np.ones((d, d)) - np.eye(d))


def ar_cov(d: int, rho: float = 0.6) -> np.ndarray:
    """Autoregressive correlation ``rho**|r - s|``."""
    if d < 1:
        raise ConfigError("d must be at least 1")
    if not -1.0 < rho < 1.0:
        raise InvalidCorrelation(f"rho={rho} outside (-1, 1)")
    k = np.arange(d)
    return rho ** np.abs(np.subtract.outer(k, k)).astype(float)


def matrix_sqrt(V, tol: float = 1e-10) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Raises
    ------
    NotPSD
        If ``V`` is not symmetric or has an eigenvalue below ``-tol * max|eig|``.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[0] != V.shape[1] or not np.allclose(V, V.T, atol=1e-12):
        raise NotPSD("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(V)
    scale = max(np.abs(vals).max(), 1.0)
    if vals.min() < -tol * scale:
        raise NotPSD(f"smallest eigenvalue {vals.min():.3g} is negative")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def gen_errors(distribution: str, count: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``(count, d)`` i.i.d. errors with mean 0 and variance 1."""
    if distribution == "normal":
        return rng.standard_normal((count, d))
    if distribution == "lognormal":
        y = np.exp(rng.standard_normal((count, d)))
        return (y - math.exp(0.5)) / math.sqrt((math.e - 1.0) * math.e)
    raise ConfigError(f"unknown error distribution {distribution!r}")


def gen_ordinal(d: int, corr, count: int, rng: np.random.Generator) -> np.ndarray:
    """Ordinal vectors with component ``j`` uniform on ``{1, ..., j + 1}``.

    A latent normal vector with correlation ``corr`` is cut at equiprobable
    standard normal quantiles. The latent correlation is used as is, so the
    correlation of the discrete levels is attenuated.
    """
    if d < 1:
        raise ConfigError("d must be at least 1")
    root = matrix_sqrt(corr)
    z = rng.standard_normal((count, d)) @ root
    out = np.empty((count, d))
    for j in range(d):
        k = j + 2
        cuts = norm.ppf(np.arange(1, k) / k)
        out[:, j] = np.searchsorted(cuts, z[:, j]) + 1
    return out


def covariance_setting(name: str, d: int) -> np.ndarray:
    if name == "S1":
        return cs_cov(d, 0.5)
    if name == "S2":
        return ar_cov(d, 0.6)
    if name == "identity":
        return np.eye(d)
    raise ConfigError(f"unknown covariance setting {name!r}")


@dataclass(frozen=True)
class SimScenario:
    """One cell of a simulation study (two or more groups).

    ``sigma2`` holds per-group scale parameters for the heteroscedastic
    setting, read as variances unless ``sigma_is_variance`` is false, in which
    case they are standard deviations. ``delta`` shifts the last group.
    """

    distribution: str = "normal"
    d: int = 4
    covariance: str = "S1"
    n: tuple[int, ...] = (10, 10)
    m: int = 0
    delta: float | tuple = 0.0
    R: int = 1000
    B: int = 500
    alpha: float = 0.05
    seed: int = 2024
    sigma2: tuple[float, ...] = (1.0, 1.0)
    sigma_is_variance: bool = True

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ConfigError(f"unknown distribution {self.distribution!r}")
        if self.d < 1 or self.R < 1 or self.B < 1 or self.m < 0:
            raise ConfigError("d, R and B must be positive and m nonnegative")
        if len(self.n) < 2 or min(self.n) < 1:
            raise ConfigError("need at least two groups with positive sizes")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if np.ndim(self.delta) and len(self.delta) != self.d:
            raise ConfigError(f"delta has length {len(self.delta)}, expected {self.d}")
        if self.distribution == "heteroscedastic" and len(self.sigma2) != len(self.n):
            raise ConfigError("one sigma2 value per group is required")

    @property
    def sizes(self) -> tuple[int, ...]:
        """Group sizes with the increment ``m`` added to each."""
        return tuple(k + self.m for k in self.n)

    def shift(self, i: int) -> np.ndarray:
        if i != len(self.n) - 1:
            return np.zeros(self.d)
        return np.broadcast_to(np.asarray(self.delta, dtype=float), (self.d,)).copy()

    def group_cov(self, i: int) -> np.ndarray:
        if self.distribution == "heteroscedastic":
            s = self.sigma2[i]
            return (s if self.sigma_is_variance else s * s) * np.eye(self.d)
        return covariance_setting(self.covariance, self.d)


def gen_continuous(scenario: SimScenario, i: int, rng: np.random.Generator) -> np.ndarray:
    """Sample of group ``i`` (zero-based): ``mu_i + V_i^{1/2} eps``."""
    size = scenario.sizes[i]
    root = matrix_sqrt(scenario.group_cov(i))
    errors = "lognormal" if scenario.distribution == "lognormal" else "normal"
    eps = gen_errors(errors, size, scenario.d, rng)
    return scenario.shift(i) + eps @ root


def generate(scenario: SimScenario, rng: np.random.Generator) -> Dataset:
    groups = []
    for i, size in enumerate(scenario.sizes):
        if scenario.distribution == "ordinal":
            corr = covariance_setting(scenario.covariance, scenario.d)
            groups.append(scenario.shift(i) + gen_ordinal(scenario.d, corr, size, rng))
        else:
            groups.append(gen_continuous(scenario, i, rng))
    return validate(groups)


def run_streams(seed: int, cell: int, run: int):
    """Data generator and bootstrap seed of one Monte-Carlo run."""
    base = np.random.SeedSequence(seed, spawn_key=(cell, run))
    data_ss, boot_ss = base.spawn(2)
    return np.random.default_rng(data_ss), boot_ss


def simulate_run(scenario: SimScenario, cell: int, run: int,
                 engines: Sequence[str] = ENGINES) -> dict[str, float]:
    """Bootstrap p-values of the global hypothesis for one simulated dataset."""
    rng, boot = run_streams(scenario.seed, cell, run)
    ds = generate(scenario, rng)
    T = one_way(ds.a, ds.d).T
    stat = ats(effects(ds)[0].p, T, ds.N)
    out = {}
    for engine in engines:
        vec = bootstrap_vectors(ds, scenario.B, engine, boot)
        out[engine] = bootstrap_pvalue(stat, quadratic_forms(vec, T))
    return out


@dataclass(frozen=True)
class CellResult:
    scenario: SimScenario
    engine: str
    rejections: int

    @property
    def rate(self) -> float:
        return self.rejections / self.scenario.R

    @property
    def se(self) -> float:
        r = self.rate
        return math.sqrt(r * (1.0 - r) / self.scenario.R)


def _map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_cell(scenario: SimScenario, cell: int = 0, engines: Sequence[str] = ENGINES,
             workers: int = 1) -> list[CellResult]:
    """Rejection counts (``p <= alpha``) over ``R`` runs of one scenario."""
    for e in engines:
        if e not in ENGINES:
            raise ConfigError(f"unknown engine {e!r}")
    pvals = _map(lambda r: simulate_run(scenario, cell, r, engines), range(scenario.R), workers)
    return [
        CellResult(scenario, e, sum(p[e] <= scenario.alpha for p in pvals)) for e in engines
    ]


@dataclass(frozen=True)
class StudyTable:
    """Rejection rates keyed by distribution, covariance, d, n, m (or delta) and engine."""

    title: str
    cells: tuple[CellResult, ...]
    column: str = "m"
    meta: dict = field(default_factory=dict)

    def rate(self, engine: str, **keys) -> float:
        for c in self.cells:
            if c.engine == engine and all(getattr(c.scenario, k) == v for k, v in keys.items()):
                return c.rate
        raise KeyError(keys)

    def rows(self):
        """Table rows: one per (setting, engine), one column per ``m`` or ``delta``."""
        grouped: dict = {}
        cols = []
        for c in self.cells:
            s = c.scenario
            col = getattr(s, self.column)
            if col not in cols:
                cols.append(col)
            key = (s.distribution, setting_label(s), s.d, s.n, c.engine)
            grouped.setdefault(key, {})[col] = c.rate
        return cols, grouped

    def to_text(self, sep: str = ",") -> str:
        cols, grouped = self.rows()
        lines = [f"# {self.title}"]
        lines += [f"# {k}={v}" for k, v in self.meta.items()]
        head = ["distribution", "setting", "d", "n", "engine"] + [f"{self.column}={c}" for c in cols]
        lines.append(sep.join(head))
        for (dist, setting, d, n, engine), vals in grouped.items():
            row = [dist, setting, str(d), "(" + " ".join(map(str, n)) + ")", engine]
            row += [f"{vals[c]:.4f}" if c in vals else "" for c in cols]
            lines.append(sep.join(row))
        return "\n".join(lines) + "\n"


def setting_label(s: SimScenario) -> str:
    if s.distribution == "heteroscedastic":
        return "sigma2=" + "/".join(f"{v:g}" for v in s.sigma2)
    return s.covariance


def type1_study(grid: Iterable[SimScenario], engines: Sequence[str] = ENGINES, workers: int = 1,
                title: str = "type-I error") -> StudyTable:
    """Type-I error rates for every scenario in ``grid``; cell ``k`` uses stream key ``k``."""
    grid = list(grid)
    cells = []
    for k, scn in enumerate(grid):
        cells.extend(run_cell(scn, k, engines, workers))
    return StudyTable(title, tuple(cells), "m")


def power_study(scenario: SimScenario, deltas: Sequence[float] = DELTA_GRID,
                engines: Sequence[str] = ENGINES, workers: int = 1) -> StudyTable:
    """Rejection rate per shift ``delta`` applied to every component of the last group."""
    cells = []
    for k, delta in enumerate(deltas):
        cells.extend(run_cell(replace(scenario, delta=float(delta)), k, engines, workers))
    return StudyTable("power", tuple(cells), "delta")


def grid(base: SimScenario, sizes: Sequence[tuple] = BASE_SIZES,
         m_grid: Sequence[int] = M_GRID) -> list[SimScenario]:
    """Scenarios over base sample sizes (outer) and increments (inner)."""
    return [replace(base, n=tuple(n), m=int(m)) for n, m in itertools.product(sizes, m_grid)]


_NAME = re.compile(
    r"^(?:(table1)-(normal|lognormal)-(S1|S2)"
    r"|(table2)-([0-9.]+),([0-9.]+)"
    r"|(table3)-(S1|S2)"
    r"|(power)-(normal|lognormal|ordinal|heteroscedastic))"
    r"(?:-d(\d+))?$"
)


def scenario_names() -> list[str]:
    names = [f"table1-{e}-{s}" for e in ("normal", "lognormal") for s in ("S1", "S2")]
    names += ["table2-1,1", "table2-1,2", "table2-1.2,1", "table2-2,1"]
    names += ["table3-S1", "table3-S2"]
    names += [f"power-{e}" for e in ("normal", "lognormal", "ordinal", "heteroscedastic")]
    return names


def named_study(name: str, R: int = 1000, B: int = 500, seed: int = 2024,
                m_grid: Sequence[int] = M_GRID, alpha: float = 0.05) -> tuple[str, list[SimScenario]]:
    """Resolve a study name such as ``table1-normal-S1`` or ``power-ordinal-d8``.

    Returns the study kind (``"type1"`` or ``"power"``) and its scenarios.
    Table names expand to a grid of base sizes times ``m_grid``; power names
    give one scenario with ``n = (20, 10)`` whose shift is varied by the caller.
    """
    match = _NAME.match(name)
    if match is None:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(scenario_names())}")
    g = match.groups()
    d = int(g[-1]) if g[-1] else 4
    common = dict(d=d, R=R, B=B, seed=seed, alpha=alpha)
    if g[0]:
        base = SimScenario(distribution=g[1], covariance=g[2], **common)
    elif g[3]:
        base = SimScenario(distribution="heteroscedastic", covariance="identity",
                           sigma2=(float(g[4]), float(g[5])), **common)
    elif g[6]:
        base = SimScenario(distribution="ordinal", covariance=g[7], **common)
    else:
        dist = g[9]
        extra = {"sigma2": (1.0, 2.0), "covariance": "identity"} if dist == "heteroscedastic" else {}
        return "power", [SimScenario(distribution=dist, n=(20, 10), **extra, **common)]
    return "type1", grid(base, BASE_SIZES, m_grid)
