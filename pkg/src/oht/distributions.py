"""Finite-alphabet distributions, empirical types, KL divergence and mixtures.

All logarithms are natural, so every divergence is reported in nats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NORMALIZATION_TOL = 1e-12


class DistributionError(ValueError):
    """Base class for invalid distribution inputs."""


class AlphabetMismatch(DistributionError):
    pass


class SupportViolation(DistributionError):
    pass


class UnknownSymbol(DistributionError):
    pass


class WeightSumViolation(DistributionError):
    pass


class EmptySequence(DistributionError):
    pass


@dataclass(frozen=True)
class Alphabet:
    """A finite alphabet with ``size`` symbols labelled ``symbols[0..size-1]``."""

    size: int
    symbols: tuple = ()

    def __post_init__(self):
        if int(self.size) < 2:
            raise DistributionError(f"alphabet size must be >= 2, got {self.size}")
        object.__setattr__(self, "size", int(self.size))
        if not self.symbols:
            object.__setattr__(self, "symbols", tuple(range(self.size)))
        else:
            symbols = tuple(self.symbols)
            if len(symbols) != self.size or len(set(symbols)) != self.size:
                raise DistributionError("symbols must be distinct and match the alphabet size")
            object.__setattr__(self, "symbols", symbols)

    @classmethod
    def from_symbols(cls, symbols: Iterable) -> "Alphabet":
        symbols = tuple(symbols)
        return cls(len(symbols), symbols)

    def index(self, symbol) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise UnknownSymbol(f"symbol {symbol!r} not in alphabet {self.symbols!r}") from None


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector over an :class:`Alphabet`.

    Masses within ``NORMALIZATION_TOL`` of summing to one are renormalized;
    anything further off, negative or non-finite is rejected.
    """

    mass: np.ndarray
    alphabet: Alphabet = None

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if mass.ndim != 1:
            raise DistributionError("mass must be a 1-D vector")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise DistributionError(f"masses must be finite and non-negative, got {mass.tolist()}")
        total = mass.sum()
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise DistributionError(f"masses sum to {total!r}, not 1")
        alphabet = self.alphabet if self.alphabet is not None else Alphabet(mass.size)
        if alphabet.size != mass.size:
            raise AlphabetMismatch(f"{mass.size} masses for an alphabet of size {alphabet.size}")
        object.__setattr__(self, "mass", _frozen(mass / total))
        object.__setattr__(self, "alphabet", alphabet)

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.mass > 0))

    @property
    def support(self) -> np.ndarray:
        return self.mass > 0

    def __len__(self):
        return self.mass.size

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.mass, other.mass)

    def __hash__(self):
        return hash((self.alphabet, self.mass.tobytes()))

    def __repr__(self):
        return f"Distribution({self.mass.tolist()})"

    def to_json(self) -> str:
        return json.dumps(self.mass.tolist())

    @classmethod
    def from_json(cls, text: str, alphabet: Alphabet | None = None) -> "Distribution":
        return cls(json.loads(text), alphabet)


def bernoulli(p: float) -> Distribution:
    """Distribution over {0, 1} with ``P(1) = p``."""
    return Distribution([1.0 - p, p])


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Symbol counts of one sequence (its type)."""

    counts: np.ndarray
    alphabet: Alphabet = None
    n: int = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or not np.issubdtype(counts.dtype, np.integer) or np.any(counts < 0):
            raise DistributionError("counts must be a 1-D vector of non-negative integers")
        n = int(counts.sum())
        if n < 1:
            raise EmptySequence("empirical distribution of an empty sequence")
        alphabet = self.alphabet if self.alphabet is not None else Alphabet(counts.size)
        if alphabet.size != counts.size:
            raise AlphabetMismatch(f"{counts.size} counts for an alphabet of size {alphabet.size}")
        frozen = counts.astype(np.int64)
        frozen.setflags(write=False)
        object.__setattr__(self, "counts", frozen)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "n", n)

    @property
    def mass(self) -> np.ndarray:
        return self.counts / self.n

    def to_distribution(self) -> Distribution:
        return Distribution(self.mass, self.alphabet)

    def __eq__(self, other):
        if not isinstance(other, EmpiricalDistribution):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.counts, other.counts)

    def __hash__(self):
        return hash((self.alphabet, self.counts.tobytes()))

    def __repr__(self):
        return f"EmpiricalDistribution(counts={self.counts.tolist()}, n={self.n})"


def empirical(x: Sequence, alphabet: Alphabet) -> EmpiricalDistribution:
    """Count symbol occurrences in ``x``.

    ``x`` may be a string (each character a symbol), a list of symbol labels,
    or an integer array of symbol indices when the alphabet uses the default
    integer labels.
    """
    if len(x) == 0:
        raise EmptySequence("cannot form the type of an empty sequence")
    if isinstance(x, np.ndarray) and np.issubdtype(x.dtype, np.integer) and alphabet.symbols == tuple(
        range(alphabet.size)
    ):
        if x.min() < 0 or x.max() >= alphabet.size:
            raise UnknownSymbol("integer symbol outside alphabet range")
        return EmpiricalDistribution(np.bincount(x, minlength=alphabet.size), alphabet)
    lookup = {s: i for i, s in enumerate(alphabet.symbols)}
    counts = np.zeros(alphabet.size, dtype=np.int64)
    for symbol in x:
        try:
            counts[lookup[symbol]] += 1
        except KeyError:
            raise UnknownSymbol(f"symbol {symbol!r} not in alphabet {alphabet.symbols!r}") from None
    return EmpiricalDistribution(counts, alphabet)


def kl_divergence(p: Distribution, q: Distribution) -> float:
    """KL divergence ``D(p || q)`` in nats.

    Raises :class:`SupportViolation` when ``p`` puts mass where ``q`` has none,
    instead of returning infinity.
    """
    if p.alphabet != q.alphabet:
        raise AlphabetMismatch("distributions live on different alphabets")
    return kl_array(p.mass, q.mass)


def kl_array(p: np.ndarray, q: np.ndarray) -> float:
    """``kl_divergence`` on raw probability vectors."""
    pos = p > 0
    if np.any(q[pos] <= 0):
        raise SupportViolation("p(x) > 0 where q(x) = 0")
    value = float(np.sum(p[pos] * np.log(p[pos] / q[pos])))
    return max(value, 0.0)


def mixture(weights: Sequence[float], components: Sequence[Distribution]) -> Distribution:
    """Pointwise weighted average of ``components``."""
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.size != len(components) or weights.size == 0:
        raise WeightSumViolation("need one weight per component")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > NORMALIZATION_TOL:
        raise WeightSumViolation(f"weights must be non-negative and sum to 1, got {weights.tolist()}")
    alphabet = components[0].alphabet
    if any(c.alphabet != alphabet for c in components):
        raise AlphabetMismatch("mixture components live on different alphabets")
    stacked = np.stack([c.mass for c in components])
    mass = weights @ stacked
    return Distribution(mass / mass.sum(), alphabet)


def as_mass_matrix(Q: Sequence) -> np.ndarray:
    """Stack Distributions, EmpiricalDistributions or raw vectors into an (M, k) array."""
    rows = []
    alphabet = None
    for q in Q:
        if isinstance(q, (Distribution, EmpiricalDistribution)):
            if alphabet is None:
                alphabet = q.alphabet
            elif q.alphabet != alphabet:
                raise AlphabetMismatch("panel entries live on different alphabets")
            rows.append(np.asarray(q.mass, dtype=float))
        else:
            rows.append(np.asarray(q, dtype=float))
    sizes = {r.size for r in rows}
    if len(sizes) != 1:
        raise AlphabetMismatch("panel entries have different alphabet sizes")
    return np.stack(rows)
