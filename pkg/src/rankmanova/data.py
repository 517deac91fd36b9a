"""Core value types: grouped multivariate datasets and factorial layouts.

Observations are stored per group as ``(n_i, d)`` float arrays. Effect
vectors use a groups-outer / components-inner layout, so position
``(i - 1) * d + (j - 1)`` holds the effect of component ``j`` in group ``i``.
Ordinal outcomes are stored as their numeric level codes; only the order
and the tie structure are ever used.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import (
    EmptyGroup,
    InputError,
    MismatchedDimension,
    NonFiniteValue,
    OutOfRange,
)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable container for ``a`` groups of ``d``-variate observations.

    Use :func:`validate` to build one from raw nested sequences.
    """

    groups: tuple[np.ndarray, ...]
    labels: tuple[str, ...] | None = None
    group_names: tuple[str, ...] | None = None

    @property
    def a(self) -> int:
        return len(self.groups)

    @property
    def d(self) -> int:
        return self.groups[0].shape[1]

    @property
    def n(self) -> tuple[int, ...]:
        return tuple(g.shape[0] for g in self.groups)

    @property
    def N(self) -> int:
        return sum(self.n)

    @property
    def pooled(self) -> np.ndarray:
        """All observations stacked group by group, shape ``(N, d)``."""
        return np.vstack(self.groups)

    @property
    def offsets(self) -> np.ndarray:
        """Start row of every group inside :attr:`pooled` (length ``a + 1``)."""
        return np.concatenate([[0], np.cumsum(self.n)])

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.n == other.n
            and self.d == other.d
            and self.labels == other.labels
            and self.group_names == other.group_names
            and all(np.array_equal(x, y) for x, y in zip(self.groups, other.groups))
        )

    def __hash__(self):
        return hash((self.n, self.d, self.labels, self.group_names))

    def __repr__(self):
        return f"Dataset(a={self.a}, d={self.d}, n={self.n}, N={self.N})"

    def component(self, j: int) -> list[np.ndarray]:
        """Samples of component ``j`` (zero-based) for every group."""
        return [g[:, j] for g in self.groups]

    def subset_groups(self, indices: Sequence[int]) -> "Dataset":
        names = None if self.group_names is None else tuple(self.group_names[i] for i in indices)
        return Dataset(tuple(self.groups[i] for i in indices), self.labels, names)

    def map_components(self, funcs) -> "Dataset":
        """Apply ``funcs[j]`` elementwise to component ``j`` of every group."""
        out = []
        for g in self.groups:
            cols = [np.asarray(funcs[j](g[:, j]), dtype=float) for j in range(self.d)]
            out.append(np.column_stack(cols))
        return validate(out, labels=self.labels, group_names=self.group_names)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def validate(raw, labels=None, group_names=None) -> Dataset:
    """Check raw grouped observations and wrap them in a :class:`Dataset`.

    Parameters
    ----------
    raw : sequence of groups or Dataset
        Each group is a sequence of ``d``-vectors (a 1-d sequence of scalars
        is read as ``d = 1``).
    labels : sequence of str, optional
        Component names, length ``d``.
    group_names : sequence of str, optional
        Group names, length ``a``.

    Raises
    ------
    InputError
        If no groups are given.
    MismatchedDimension
        If groups disagree on ``d``.
    EmptyGroup
        If a group has no subjects.
    NonFiniteValue
        On NaN or infinite entries.
    """
    if isinstance(raw, Dataset):
        labels = raw.labels if labels is None else labels
        group_names = raw.group_names if group_names is None else group_names
        raw = raw.groups
    if raw is None or len(raw) == 0:
        raise InputError("at least one group is required")

    groups = []
    d = None
    for i, g in enumerate(raw):
        arr = np.asarray(g, dtype=float)
        if arr.size == 0:
            raise EmptyGroup(f"group {i + 1} has no observations")
        if arr.ndim == 1:
            arr = arr[:, None]
        elif arr.ndim != 2:
            raise MismatchedDimension(f"group {i + 1} is not a list of vectors")
        if d is None:
            d = arr.shape[1]
        elif arr.shape[1] != d:
            raise MismatchedDimension(
                f"group {i + 1} has dimension {arr.shape[1]}, expected {d}"
            )
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"group {i + 1} contains non-finite values")
        groups.append(_freeze(arr))

    if labels is not None:
        labels = tuple(str(s) for s in labels)
        if len(labels) != d:
            raise MismatchedDimension(f"{len(labels)} labels for d={d}")
    if group_names is not None:
        group_names = tuple(str(s) for s in group_names)
        if len(group_names) != len(groups):
            raise MismatchedDimension(f"{len(group_names)} names for a={len(groups)}")
    return Dataset(tuple(groups), labels, group_names)


def flat_index(i: int, j: int, a: int, d: int) -> int:
    """Zero-based position of group ``i``, component ``j`` (both one-based)."""
    if not (1 <= i <= a and 1 <= j <= d):
        raise OutOfRange(f"(i={i}, j={j}) outside 1..{a} x 1..{d}")
    return (i - 1) * d + (j - 1)


@dataclass(frozen=True)
class FactorialLayout:
    """Crossed factorial layout; the last factor varies fastest.

    Flat group ``i`` (zero-based) corresponds to the ``i``-th tuple of
    ``itertools.product(*map(range, levels))``.
    """

    names: tuple[str, ...]
    levels: tuple[int, ...]
    level_labels: tuple[tuple[str, ...], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.names) != len(self.levels):
            raise InputError("one level count per factor is required")
        if any(k < 1 for k in self.levels):
            raise InputError("every factor needs at least one level")
        if self.level_labels is not None:
            if [len(x) for x in self.level_labels] != list(self.levels):
                raise InputError("level labels do not match level counts")

    @classmethod
    def one_way(cls, a: int, name: str = "group") -> "FactorialLayout":
        return cls((name,), (a,))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.levels))

    def cell(self, i: int) -> tuple[int, ...]:
        """Factor-level tuple (zero-based) of flat group ``i``."""
        if not 0 <= i < self.n_cells:
            raise OutOfRange(f"group {i} outside 0..{self.n_cells - 1}")
        return tuple(int(x) for x in np.unravel_index(i, self.levels))

    def index(self, cell: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(cell), self.levels))

    def cells(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(k) for k in self.levels)))

    def cell_name(self, i: int) -> str:
        c = self.cell(i)
        if self.level_labels is None:
            return ":".join(f"{n}{k + 1}" for n, k in zip(self.names, c))
        return ":".join(lab[k] for lab, k in zip(self.level_labels, c))
