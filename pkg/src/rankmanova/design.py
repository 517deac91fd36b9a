"""Hypothesis matrices and their projections for crossed factorial designs.

A null hypothesis ``H p = 0`` is carried around as the projection
``T = H' (H H')^+ H``; ``T`` is symmetric, idempotent and has the same null
space as ``H``, and it does not depend on how the rows of ``H`` are scaled.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset, FactorialLayout
from .exceptions import DimensionMismatch, LayoutMismatch, OutOfRange

PINV_RTOL = 1e-10


def centering_matrix(d: int) -> np.ndarray:
    """``I_d - J_d / d``."""
    return np.eye(d) - np.full((d, d), 1.0 / d)


def averaging_matrix(d: int) -> np.ndarray:
    """``J_d / d``."""
    return np.full((d, d), 1.0 / d)


def projection(H, tolerance: float = PINV_RTOL, ncols: int | None = None) -> np.ndarray:
    """Orthogonal projection onto the row space of ``H``.

    The pseudoinverse of ``H H'`` is taken through its eigendecomposition,
    discarding eigenvalues below ``tolerance * max eigenvalue``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if ncols is not None and H.shape[1] != ncols:
        raise DimensionMismatch(f"H has {H.shape[1]} columns, expected {ncols}")
    k = H.shape[1]
    if H.size == 0 or not np.any(H):
        return np.zeros((k, k))
    vals, vecs = np.linalg.eigh(H @ H.T)
    keep = vals > tolerance * vals.max()
    # (HH')^+ = V diag(1/lambda) V' on the kept eigenpairs
    B = (vecs[:, keep] / np.sqrt(vals[keep])).T @ H
    T = B.T @ B
    return 0.5 * (T + T.T)


@dataclass(frozen=True, eq=False)
class HypothesisDesign:
    H: np.ndarray
    T: np.ndarray
    label: str
    layout: FactorialLayout | None = field(default=None)
    d: int = 1

    @classmethod
    def from_matrix(cls, H, label: str = "custom", layout=None, d: int = 1):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        return cls(H, projection(H), label, layout, d)

    @property
    def ncols(self) -> int:
        return self.T.shape[0]

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.T)))

    def check(self, dataset: Dataset) -> None:
        """Raise if the design does not fit the dataset's ``a * d`` layout."""
        if self.ncols != dataset.a * dataset.d:
            raise DimensionMismatch(
                f"design has {self.ncols} columns, dataset needs {dataset.a * dataset.d}"
            )
        if self.layout is not None and self.layout.n_cells != dataset.a:
            raise LayoutMismatch(
                f"layout has {self.layout.n_cells} cells, dataset has {dataset.a} groups"
            )

    def same_hypothesis(self, other: "HypothesisDesign", atol: float = 1e-10) -> bool:
        return self.T.shape == other.T.shape and np.allclose(self.T, other.T, atol=atol)


def _kron(*mats) -> np.ndarray:
    return reduce(np.kron, mats)


def factorial_design(layout: FactorialLayout, factors: Iterable[str], d: int) -> HypothesisDesign:
    """Main effect or interaction of the named factors in a crossed layout.

    Factors in the effect get a centering matrix, the others an averaging
    matrix; the component block is ``I_d``.
    """
    factors = list(factors)
    unknown = set(factors) - set(layout.names)
    if unknown:
        raise OutOfRange(f"unknown factor(s) {sorted(unknown)}")
    blocks = [
        centering_matrix(k) if name in factors else averaging_matrix(k)
        for name, k in zip(layout.names, layout.levels)
    ]
    T = _kron(*blocks, np.eye(d))
    label = ":".join(n for n in layout.names if n in factors)
    return HypothesisDesign(T.copy(), projection(T), label, layout, d)


def one_way(a: int, d: int) -> HypothesisDesign:
    """Global hypothesis ``p_1 = ... = p_a`` with ``T = P_a (x) I_d``."""
    layout = FactorialLayout.one_way(a)
    T = np.kron(centering_matrix(a), np.eye(d))
    return HypothesisDesign(T.copy(), T, "p_1 = ... = p_a", layout, d)


def two_way(a: int, b: int, d: int, dataset: Dataset | None = None,
            names: Sequence[str] = ("A", "B")) -> dict[str, HypothesisDesign]:
    """Main effects and interaction of a crossed ``a x b`` layout.

    Groups must be ordered with the second factor varying fastest.
    """
    if dataset is not None and dataset.a != a * b:
        raise LayoutMismatch(f"{a}x{b} layout needs {a * b} groups, dataset has {dataset.a}")
    layout = FactorialLayout(tuple(names), (a, b))
    A, B = names
    out = {
        "A": factorial_design(layout, [A], d),
        "B": factorial_design(layout, [B], d),
        "AB": factorial_design(layout, [A, B], d),
    }
    return out


def all_effects(layout: FactorialLayout, d: int) -> dict[str, HypothesisDesign]:
    """Every main effect and interaction of a crossed layout, by label."""
    out = {}
    for r in range(1, len(layout.names) + 1):
        for combo in itertools.combinations(layout.names, r):
            des = factorial_design(layout, combo, d)
            out[des.label] = des
    return out


def _selector(d: int, components: Sequence[int]) -> np.ndarray:
    comps = sorted(set(int(j) for j in components))
    if not comps:
        raise OutOfRange("empty component subset")
    if comps[0] < 1 or comps[-1] > d:
        raise OutOfRange(f"components {comps} outside 1..{d}")
    return np.eye(d)[[j - 1 for j in comps]]


def component_design(a: int, d: int, components: Sequence[int]) -> HypothesisDesign:
    """``p_1j = ... = p_aj`` jointly for every ``j`` in ``components`` (one-based)."""
    contrast = np.hstack([np.eye(a - 1), -np.ones((a - 1, 1))])
    H = np.kron(contrast, _selector(d, components))
    label = "components " + ",".join(str(j) for j in sorted(set(components)))
    return HypothesisDesign(H, projection(H), label, FactorialLayout.one_way(a), d)


def pair_design(a: int, d: int, pairs: Sequence[tuple[int, int]],
                components: Sequence[int] | None = None) -> HypothesisDesign:
    """``p_i = p_l`` for every pair in ``pairs`` (one-based group indices).

    With ``components`` the comparison is restricted to those components.
    """
    if not pairs:
        raise OutOfRange("empty pair set")
    sel = _selector(d, components if components is not None else range(1, d + 1))
    rows = []
    for i, l in pairs:
        if not (1 <= i <= a and 1 <= l <= a) or i == l:
            raise OutOfRange(f"invalid group pair ({i}, {l}) for a={a}")
        e = np.zeros(a)
        e[i - 1], e[l - 1] = 1.0, -1.0
        rows.append(np.kron(e[None, :], sel))
    H = np.vstack(rows)
    label = "pairs " + ",".join(f"{i}-{l}" for i, l in pairs)
    if components is not None:
        label += " on components " + ",".join(str(j) for j in sorted(set(components)))
    return HypothesisDesign(H, projection(H), label, FactorialLayout.one_way(a), d)


def subset_design(a: int, d: int, components: Sequence[int] | None = None,
                  pair: tuple[int, int] | None = None) -> HypothesisDesign:
    """Elementary post-hoc hypothesis: a component subset or a group pair."""
    if pair is not None:
        return pair_design(a, d, [pair], components)
    if components is None:
        raise OutOfRange("need a component subset or a group pair")
    return component_design(a, d, components)
