"""Candidate outlier sets and their canonical enumeration.

Sequence indices are 1-based throughout, matching ``[M] = {1, ..., M}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

DEFAULT_MAX_M = 16


class HypothesisError(ValueError):
    pass


class MTooSmall(HypothesisError):
    pass


class IndexNotInSet(HypothesisError):
    pass


class SetNotInSpace(HypothesisError):
    pass


def max_outliers(M: int) -> int:
    """``T = ceil(M/2 - 1)``, the largest outlier count for which nominals stay a strict majority."""
    return math.ceil(M / 2 - 1)


@dataclass(frozen=True, order=True)
class OutlierSet:
    """A set ``B`` of outlier indices within ``[M]``."""

    # sort key: size first, then members lexicographically
    size: int = field(init=False, repr=False)
    members: tuple
    M: int

    def __init__(self, members: Iterable[int], M: int):
        members = tuple(sorted(int(i) for i in members))
        if len(set(members)) != len(members):
            raise HypothesisError(f"duplicate indices in {members}")
        if any(i < 1 or i > M for i in members):
            raise HypothesisError(f"indices {members} outside [1, {M}]")
        T = max_outliers(M)
        if not 1 <= len(members) <= T:
            raise HypothesisError(f"outlier set size must be in [1, {T}] for M={M}, got {len(members)}")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "M", int(M))
        object.__setattr__(self, "size", len(members))

    def __len__(self):
        return self.size

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, i):
        return i in self.members

    def __repr__(self):
        return "{" + ",".join(map(str, self.members)) + "}"

    def to_json(self) -> str:
        return json.dumps(list(self.members))

    @classmethod
    def from_json(cls, text: str, M: int) -> "OutlierSet":
        return cls(json.loads(text), M)


def complement(B: OutlierSet) -> tuple:
    """Indices of ``[M]`` not in ``B``, ascending."""
    return tuple(i for i in range(1, B.M + 1) if i not in B.members)


def ordered_rank(B: OutlierSet, i: int) -> int:
    """Position (1-based) of ``i`` among the members of ``B``.

    The i-th outlier is drawn from the anomalous law with this index.
    """
    try:
        return B.members.index(i) + 1
    except ValueError:
        raise IndexNotInSet(f"{i} is not in {B!r}") from None


@dataclass(frozen=True)
class HypothesisSpace:
    """All candidate outlier sets for ``M`` sequences, in canonical order."""

    M: int
    T: int
    sets: tuple

    def __post_init__(self):
        object.__setattr__(self, "_index", {B: k for k, B in enumerate(self.sets)})

    def __len__(self):
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    def __contains__(self, B):
        return B in self._index

    def index(self, B: OutlierSet) -> int:
        try:
            return self._index[B]
        except KeyError:
            raise SetNotInSpace(f"{B!r} is not a hypothesis for M={self.M}") from None

    def set(self, members: Iterable[int]) -> OutlierSet:
        return OutlierSet(members, self.M)


def enumerate_space(M: int, max_M: int = DEFAULT_MAX_M) -> HypothesisSpace:
    """Enumerate every subset of ``[M]`` of size 1..T, ordered by size then lexicographically."""
    M = int(M)
    if M < 3:
        raise MTooSmall(f"need M >= 3 for at least one possible outlier, got M={M}")
    if M > max_M:
        raise HypothesisError(f"M={M} exceeds the enumeration guard max_M={max_M}")
    T = max_outliers(M)
    sets = tuple(
        OutlierSet(c, M) for t in range(1, T + 1) for c in combinations(range(1, M + 1), t)
    )
    return HypothesisSpace(M, T, sets)


def rivals(B: OutlierSet, space: HypothesisSpace) -> tuple:
    """``S \\ {B}`` in the canonical order of ``space``."""
    space.index(B)
    return tuple(C for C in space.sets if C != B)
