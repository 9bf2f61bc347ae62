"""
Solution containers of the two QD optimizers.

``GridArchive`` is the MAP-Elites grid: one elite per cell, lower fitness wins.
``NoveltyArchive`` is the unstructured Novelty Search archive of behaviour
descriptors with threshold-gated insertion.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from mdp import BehaviorSpace, SolutionInput

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]


class InsertionStatus(str, Enum):
    INSERTED_NEW = "inserted-new"
    REPLACED_ELITE = "replaced-elite"
    REJECTED = "rejected"


@dataclass
class Elite:
    input: SolutionInput
    behavior: np.ndarray
    fitness: float
    oracle: bool
    index: int


class GridArchive:
    """Regular grid over a 2D behaviour space, holding at most one elite per cell."""

    def __init__(self, bspace: BehaviorSpace, resolution: Sequence[int] = (50, 50)):
        if isinstance(resolution, int):
            resolution = (resolution, resolution)
        self.bspace = bspace
        self.resolution = tuple(int(r) for r in resolution)
        self.lower = np.asarray(bspace.lower, dtype=float)
        self.upper = np.asarray(bspace.upper, dtype=float)
        # insertion-ordered, so elite order does not depend on hashing
        self.cells: Dict[Cell, Elite] = {}

    def bin_index(self, behavior: Sequence[float]) -> Cell:
        return bin_index(self, behavior)

    def add(self, candidate: Any) -> InsertionStatus:
        return grid_attempt_to_add(self, candidate)

    def sample_elite(self, rng: np.random.Generator) -> Elite:
        if not self.cells:
            raise ValueError("Cannot sample from an empty archive")
        elites = self.elites()
        return elites[int(rng.integers(len(elites)))]

    def elites(self) -> List[Elite]:
        return list(self.cells.values())

    def coverage(self) -> float:
        """Fraction of occupied cells."""
        return len(self.cells) / float(np.prod(self.resolution))

    def qd_score(self) -> float:
        return float(sum(elite.fitness for elite in self.cells.values()))

    def __len__(self) -> int:
        return len(self.cells)


def bin_index(archive: GridArchive, behavior: Sequence[float]) -> Cell:
    """
    Cell of a behaviour: floor((b - lo) / (hi - lo) * res) per dimension,
    clamped to [0, res - 1] so the upper bound and out-of-range values fall
    into the boundary cells.
    """
    b = np.asarray(behavior, dtype=float)
    res = np.asarray(archive.resolution)
    scaled = np.floor((b - archive.lower) / (archive.upper - archive.lower) * res)
    clamped = np.clip(scaled, 0, res - 1).astype(int)
    return int(clamped[0]), int(clamped[1])


def grid_attempt_to_add(archive: GridArchive, candidate: Any) -> InsertionStatus:
    """
    Local competition in the candidate's cell.

    Args:
        archive: Target grid
        candidate: Evaluated record with ``input``, ``behavior``, ``fitness``,
            ``oracle`` and optionally ``index``

    Returns:
        inserted-new for an empty cell, replaced-elite for a strictly lower
        fitness, rejected otherwise (ties keep the incumbent)
    """
    cell = bin_index(archive, candidate.behavior)
    incumbent = archive.cells.get(cell)
    if incumbent is not None and not candidate.fitness < incumbent.fitness:
        return InsertionStatus.REJECTED

    archive.cells[cell] = Elite(
        input=candidate.input,
        behavior=np.asarray(candidate.behavior, dtype=float),
        fitness=float(candidate.fitness),
        oracle=bool(candidate.oracle),
        index=int(getattr(candidate, "index", 0)),
    )
    return InsertionStatus.INSERTED_NEW if incumbent is None else InsertionStatus.REPLACED_ELITE


def novelty_score(behavior: Sequence[float], references: Sequence[Sequence[float]], k: int = 3,
                  exclude_index: Optional[int] = None) -> float:
    """
    Mean Euclidean distance to the k nearest references.

    The candidate is excluded from the references when it is present by
    identity or at ``exclude_index``. Fewer than k references average over all
    of them; no references at all give +inf.
    """
    b = np.asarray(behavior, dtype=float)
    kept = [
        np.asarray(ref, dtype=float)
        for i, ref in enumerate(references)
        if i != exclude_index and ref is not behavior
    ]
    if not kept:
        return float("inf")
    distances = np.sort(np.linalg.norm(np.vstack(kept) - b, axis=1))
    return float(np.mean(distances[:k]))


def batch_novelty_scores(batch: np.ndarray, archive: np.ndarray, k: int = 3) -> np.ndarray:
    """
    Novelty of every batch member against the archive plus the other members.

    Args:
        batch: (n, d) behaviours of the current batch
        archive: (m, d) archived behaviours

    Returns:
        (n,) scores; +inf where no reference exists
    """
    if len(batch) == 0:
        return np.empty(0)
    batch = np.asarray(batch, dtype=float).reshape(len(batch), -1)
    archive = np.asarray(archive, dtype=float).reshape(len(archive), batch.shape[1])
    n, m = len(batch), len(archive)
    scores = np.full(n, np.inf)
    n_refs = n + m - 1
    if n == 0 or n_refs <= 0:
        return scores

    points = np.vstack([archive, batch])
    tree = cKDTree(points)
    n_query = min(k + 1, n + m)
    distances, indices = tree.query(batch, k=n_query)
    distances = distances.reshape(n, n_query)
    indices = indices.reshape(n, n_query)

    for i in range(n):
        self_index = m + i
        row = [d for d, j in zip(distances[i], indices[i]) if j != self_index]
        # a tie at distance zero may have pushed the candidate itself out of the query
        row = row[:min(k, n_refs)]
        scores[i] = float(np.mean(row))
    return scores


class NoveltyArchive:
    """Growing list of behaviour descriptors; entries are appended only when their novelty exceeds ``threshold``."""

    def __init__(self, threshold: float, k: int = 3):
        self.threshold = float(threshold)
        self.k = int(k)
        self.behaviors: List[np.ndarray] = []

    def as_array(self, dim: int = 2) -> np.ndarray:
        if not self.behaviors:
            return np.empty((0, dim))
        return np.vstack(self.behaviors)

    def score_batch(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=float)
        return batch_novelty_scores(batch, self.as_array(batch.shape[1]), self.k)

    def update(self, batch: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Score a batch against the archive as it is now plus the batch, then
        append the members whose score exceeds the threshold, in batch order.

        Returns:
            (scores, inserted mask)
        """
        batch = np.asarray(batch, dtype=float)
        if len(batch) == 0:
            return np.empty(0), np.zeros(0, dtype=bool)
        scores = self.score_batch(batch)
        inserted = scores > self.threshold
        for behavior, keep in zip(batch, inserted):
            if keep:
                self.behaviors.append(np.array(behavior, dtype=float))
        logger.debug(f"Novelty archive: {int(inserted.sum())} of {len(batch)} inserted, size {self.size()}")
        return scores, inserted

    def size(self) -> int:
        return len(self.behaviors)

    def __len__(self) -> int:
        return len(self.behaviors)
