"""Divergence scores for every candidate outlier set and the threshold test."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import (
    Alphabet,
    AlphabetMismatch,
    EmpiricalDistribution,
    as_mass_matrix,
    empirical,
)
from .hypotheses import HypothesisSpace, OutlierSet, complement, enumerate_space


class LengthMismatch(ValueError):
    pass


def dispersion(rows: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Sum of KL divergences of each row to the rows' average.

    ``rows`` has shape ``(..., K, k)``; every row must have the same sum
    ``total`` (1 for probability vectors, ``n`` for symbol counts). Working on
    raw counts keeps the ratio ``K * c / sum(c)`` exactly 1 when all rows are
    equal, so such panels score exactly zero, and makes the value invariant
    to the order of the rows.
    """
    rows = np.asarray(rows, dtype=float)
    K = rows.shape[-2]
    col = rows.sum(axis=-2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rows > 0, rows * K / col, 1.0)
    per_row = np.sum(rows * np.log(ratio), axis=-1)
    # summing in sorted order makes the result independent of row order, so
    # relabeling the sequences permutes the scores exactly (ties stay ties)
    value = np.sum(np.sort(per_row, axis=-1), axis=-1) / total
    return np.maximum(value, 0.0)


def g_score(B: OutlierSet, Q: Sequence) -> float:
    """Divergence of the sequences outside ``B`` from their common average.

    ``Q`` holds ``M`` distributions (``Distribution``, ``EmpiricalDistribution``
    or raw probability vectors) on one alphabet. Zero iff every ``Q_t`` with
    ``t`` outside ``B`` is the same.
    """
    masses = as_mass_matrix(Q)
    if masses.shape[0] != B.M:
        raise ValueError(f"expected {B.M} distributions, got {masses.shape[0]}")
    keep = np.asarray(complement(B)) - 1
    return float(dispersion(masses[keep]))


def scores_from_counts(counts: np.ndarray, space: HypothesisSpace) -> np.ndarray:
    """Score every set of ``space`` for a batch of count panels.

    ``counts`` has shape ``(..., M, k)`` with all rows summing to the same
    ``n``. Returns an array of shape ``(..., |S|)`` in canonical set order.
    """
    counts = np.asarray(counts)
    n = counts[..., 0, :].sum(axis=-1)
    out = np.empty(counts.shape[:-2] + (len(space),))
    for k, C in enumerate(space.sets):
        keep = np.asarray(complement(C)) - 1
        out[..., k] = dispersion(counts[..., keep, :], 1.0) / n
    return out


@dataclass(frozen=True, eq=False)
class ScoreTable:
    """Scores of every candidate set, aligned with ``space.sets``."""

    space: HypothesisSpace
    scores: np.ndarray

    def __getitem__(self, B: OutlierSet) -> float:
        return float(self.scores[self.space.index(B)])

    def as_dict(self) -> dict:
        return {B: float(s) for B, s in zip(self.space.sets, self.scores)}


@dataclass(frozen=True)
class Verdict:
    """Either ``outliers`` with the detected set, or ``reject`` (no outliers)."""

    kind: str
    set: OutlierSet | None = None

    @classmethod
    def reject(cls) -> "Verdict":
        return cls("reject")

    @classmethod
    def outliers(cls, B: OutlierSet) -> "Verdict":
        return cls("outliers", B)

    @property
    def is_reject(self) -> bool:
        return self.kind == "reject"

    def to_dict(self) -> dict:
        if self.is_reject:
            return {"verdict": "reject"}
        return {"verdict": "outliers", "set": list(self.set.members)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def score_all(panel: Sequence[EmpiricalDistribution], space: HypothesisSpace) -> ScoreTable:
    if len(panel) != space.M:
        raise ValueError(f"panel has {len(panel)} sequences, space expects M={space.M}")
    alphabet = panel[0].alphabet
    if any(e.alphabet != alphabet for e in panel):
        raise AlphabetMismatch("panel entries live on different alphabets")
    lengths = {e.n for e in panel}
    if len(lengths) != 1:
        raise LengthMismatch(f"sequences have different lengths {sorted(lengths)}")
    counts = np.stack([e.counts for e in panel])
    scores = scores_from_counts(counts, space)
    scores.setflags(write=False)
    return ScoreTable(space, scores)


def decide_index(scores: np.ndarray, lam) -> np.ndarray:
    """Vectorized decision over the last axis.

    Returns the canonical index of the detected set, or -1 for reject. The
    winner must be the unique strict minimum and every rival must exceed
    ``lam`` strictly; ties reject.
    """
    scores = np.asarray(scores, dtype=float)
    two = np.partition(scores, 1, axis=-1)
    smallest, runner_up = two[..., 0], two[..., 1]
    accept = (smallest < runner_up) & (runner_up > lam)
    return np.where(accept, np.argmin(scores, axis=-1), -1)


def decide(table: ScoreTable, lam: float) -> Verdict:
    if not lam > 0:
        raise ValueError(f"threshold must be positive, got {lam}")
    k = int(decide_index(table.scores, lam))
    return Verdict.reject() if k < 0 else Verdict.outliers(table.space.sets[k])


def _infer_alphabet(sequences) -> Alphabet:
    symbols = sorted({s for seq in sequences for s in seq}, key=repr)
    if len(symbols) < 2:
        # unseen symbols never change a score
        symbols.append(None)
    return Alphabet.from_symbols(symbols)


def run_test(sequences: Sequence, lam: float, alphabet: Alphabet | None = None) -> Verdict:
    """Run the threshold test end-to-end on ``M`` raw symbol sequences."""
    if alphabet is None:
        alphabet = _infer_alphabet(sequences)
    lengths = {len(s) for s in sequences}
    if len(lengths) != 1:
        raise LengthMismatch(f"sequences have different lengths {sorted(lengths)}")
    space = enumerate_space(len(sequences))
    panel = [empirical(s, alphabet) for s in sequences]
    return decide(score_all(panel, space), lam)
