"""Multiple comparisons after a global one-way test.

Two families of elementary hypotheses are supported: per-component
hypotheses ``p_1j = ... = p_aj`` and pairwise group hypotheses ``p_i = p_l``.
Each intersection of elementary hypotheses is again a linear hypothesis in
``p``, so the closed testing principle can be applied directly: every
intersection is tested with the same bootstrap replicates, and the adjusted
p-value of an elementary hypothesis is the largest raw p-value over all
intersections containing it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset
from .design import HypothesisDesign, component_design, one_way, pair_design
from .exceptions import ConfigError, FamilyTooLarge, InvalidAlpha
from .inference import ats, bootstrap_pvalue, bootstrap_vectors, quadratic_forms
from .ranks import effects

MAX_INTERSECTIONS = 4096


def holm(pvalues: Sequence[float]) -> np.ndarray:
    """Holm step-down adjusted p-values (monotone, capped at 1)."""
    p = np.asarray(pvalues, dtype=float)
    m = p.size
    order = np.argsort(p, kind="stable")
    adj = np.minimum(1.0, np.maximum.accumulate((m - np.arange(m)) * p[order]))
    out = np.empty(m)
    out[order] = adj
    return out


def bonferroni(pvalues: Sequence[float]) -> np.ndarray:
    p = np.asarray(pvalues, dtype=float)
    return np.minimum(1.0, p.size * p)


def closure_adjust(raw: Mapping[frozenset, float], m: int) -> np.ndarray:
    """Closed-testing adjusted p-values from raw intersection p-values.

    ``raw`` maps every nonempty subset of ``range(m)`` to the p-value of the
    corresponding intersection hypothesis.
    """
    adj = np.zeros(m)
    for subset, p in raw.items():
        for e in subset:
            adj[e] = max(adj[e], p)
    return adj


@dataclass(frozen=True)
class HypothesisFamily:
    """A family of elementary hypotheses in a one-way layout with ``a`` groups.

    ``kind`` is ``"components"`` (members are one-based component indices) or
    ``"pairs"`` (members are one-based group pairs). ``restrict`` limits a
    component family to one group pair, or a pair family to some components.
    """

    kind: str
    a: int
    d: int
    members: tuple
    restrict: tuple | None = None
    adjustment: str = "closed"

    def __post_init__(self):
        if self.kind not in ("components", "pairs"):
            raise ConfigError(f"unknown family kind {self.kind!r}")
        if not self.members:
            raise ConfigError("empty hypothesis family")
        if self.adjustment not in ("closed", "holm", "bonferroni", "auto"):
            raise ConfigError(f"unknown adjustment {self.adjustment!r}")

    @classmethod
    def components(cls, a: int, d: int, pair: tuple[int, int] | None = None, adjustment="closed"):
        return cls("components", a, d, tuple(range(1, d + 1)), pair, adjustment)

    @classmethod
    def pairs(cls, a: int, d: int, components: Sequence[int] | None = None, adjustment="closed"):
        members = tuple(itertools.combinations(range(1, a + 1), 2))
        restrict = None if components is None else tuple(components)
        return cls("pairs", a, d, members, restrict, adjustment)

    @property
    def m(self) -> int:
        return len(self.members)

    def member_label(self, k: int) -> str:
        x = self.members[k]
        return f"component {x}" if self.kind == "components" else f"{x[0]} vs {x[1]}"

    def design(self, subset: Sequence[int]) -> HypothesisDesign:
        """Intersection of the members at positions ``subset``."""
        chosen = [self.members[k] for k in sorted(subset)]
        if self.kind == "components":
            if self.restrict is None:
                return component_design(self.a, self.d, chosen)
            return pair_design(self.a, self.d, [self.restrict], chosen)
        return pair_design(self.a, self.d, chosen, self.restrict)

    def intersection_design(self) -> HypothesisDesign:
        return self.design(range(self.m))


@dataclass(frozen=True)
class FamilyResult:
    family: HypothesisFamily
    method: str
    raw: np.ndarray
    adjusted: np.ndarray
    alpha: float
    intersections: dict = field(default_factory=dict, compare=False)

    @property
    def reject(self) -> np.ndarray:
        return self.adjusted <= self.alpha

    def rows(self):
        for k in range(self.family.m):
            yield self.family.member_label(k), float(self.raw[k]), float(self.adjusted[k]), bool(self.reject[k])


class _Tester:
    """Raw bootstrap p-values of arbitrary hypotheses from one replicate set."""

    def __init__(self, dataset: Dataset, B: int, method: str, seed, scheme, workers):
        self.p_hat = effects(dataset)[0].p
        self.N = dataset.N
        self.vectors = bootstrap_vectors(dataset, B, method, seed, scheme, workers)
        self.method = method

    def pvalue(self, design: HypothesisDesign) -> float:
        stat = ats(self.p_hat, design.T, self.N)
        return bootstrap_pvalue(stat, quadratic_forms(self.vectors, design.T))


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")


def _family_result(tester: _Tester, family: HypothesisFamily, alpha: float,
                   cap: int = MAX_INTERSECTIONS) -> FamilyResult:
    m = family.m
    raw = np.array([tester.pvalue(family.design([k])) for k in range(m)])
    adjustment = family.adjustment
    if adjustment == "auto":
        adjustment = "closed" if 2 ** m - 1 <= cap else "holm"
    if adjustment == "closed":
        if 2 ** m - 1 > cap:
            raise FamilyTooLarge(f"{2 ** m - 1} intersections exceed the cap of {cap}; use Holm")
        inter = {}
        for r in range(1, m + 1):
            for subset in itertools.combinations(range(m), r):
                key = frozenset(subset)
                inter[key] = raw[subset[0]] if r == 1 else tester.pvalue(family.design(subset))
        adjusted = closure_adjust(inter, m)
        return FamilyResult(family, "closed", raw, adjusted, alpha, inter)
    adjusted = holm(raw) if adjustment == "holm" else bonferroni(raw)
    return FamilyResult(family, adjustment, raw, adjusted, alpha)


def closed_test(dataset: Dataset, family: HypothesisFamily, B: int = 1000, alpha: float = 0.05,
                method: str = "wild", seed=None, scheme="rademacher", workers: int = 1,
                cap: int = MAX_INTERSECTIONS) -> FamilyResult:
    """Test a family with FWER control; closed testing unless the family says otherwise.

    Raises
    ------
    FamilyTooLarge
        If closed testing is requested and ``2**m - 1`` exceeds ``cap``.
    """
    _check_alpha(alpha)
    if family.adjustment == "closed" and 2 ** family.m - 1 > cap:
        raise FamilyTooLarge(f"{2 ** family.m - 1} intersections exceed the cap of {cap}; use Holm")
    tester = _Tester(dataset, B, method, seed, scheme, workers)
    return _family_result(tester, family, alpha, cap)


@dataclass(frozen=True)
class HierarchicalReport:
    """Staged post-hoc results.

    Stage-2 families are only formed for stage-1 rejections and are
    conditional on stage 1; they are reported as exploratory.
    """

    order: str
    global_pvalue: float
    stage1: FamilyResult
    stage2: dict
    alpha: float


def hierarchical_plan(dataset: Dataset, order: str = "components-first", B: int = 1000,
                      alpha: float = 0.05, seed=None, method: str = "wild",
                      scheme="rademacher", workers: int = 1) -> HierarchicalReport:
    """Closed testing on one family, then the other family within each rejection.

    ``components-first`` tests the per-component family, then all group pairs
    on every significant component. ``pairs-first`` tests all group pairs,
    then each component within every significant pair.
    """
    _check_alpha(alpha)
    a, d = dataset.a, dataset.d
    if a < 2:
        raise ConfigError("post-hoc comparisons need at least two groups")
    tester = _Tester(dataset, B, method, seed, scheme, workers)
    global_p = tester.pvalue(one_way(a, d))
    stage2 = {}
    if order == "components-first":
        stage1 = _family_result(tester, HypothesisFamily.components(a, d, adjustment="auto"), alpha)
        for k, rejected in enumerate(stage1.reject):
            if rejected:
                j = stage1.family.members[k]
                fam = HypothesisFamily.pairs(a, d, components=[j], adjustment="auto")
                stage2[f"component {j}"] = _family_result(tester, fam, alpha)
    elif order == "pairs-first":
        stage1 = _family_result(tester, HypothesisFamily.pairs(a, d, adjustment="auto"), alpha)
        for k, rejected in enumerate(stage1.reject):
            if rejected:
                pair = stage1.family.members[k]
                fam = HypothesisFamily.components(a, d, pair=pair, adjustment="auto")
                stage2[f"{pair[0]} vs {pair[1]}"] = _family_result(tester, fam, alpha)
    else:
        raise ConfigError(f"unknown order {order!r}")
    return HierarchicalReport(order, global_p, stage1, stage2, alpha)
