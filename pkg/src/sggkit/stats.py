"""Dataset statistics: triplet frequencies, shot subsets, predicate
frequencies and marginal category distributions.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .ingest import Dataset
from .model import SceneGraph, Triplet, categorical_triplets

FEW10_MAX = 10
FEW100_MAX = 100


@dataclass(frozen=True, eq=False)
class TripletFrequencyTable:
    """Training-set occurrence count per categorical triplet."""

    counts: dict[Triplet, int]

    def __post_init__(self):
        for t, c in self.counts.items():
            if c < 1:
                raise ValueError(f"non-positive count {c} for {t}")

    def count(self, triplet: Triplet) -> int:
        return self.counts.get(triplet, 0)

    def __contains__(self, triplet: Triplet) -> bool:
        return triplet in self.counts

    @property
    def total_triplets(self) -> int:
        return sum(self.counts.values())

    @property
    def distinct_triplets(self) -> int:
        return len(self.counts)

    @cached_property
    def by_predicate_object(self) -> dict[tuple[int, int], list[tuple[int, int]]]:
        """(predicate, object category) -> [(subject category, count)]."""
        index: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for t, c in self.counts.items():
            index.setdefault((t.predicate, t.object_category), []).append((t.subject_category, c))
        return index

    @cached_property
    def by_subject_predicate(self) -> dict[tuple[int, int], list[tuple[int, int]]]:
        """(subject category, predicate) -> [(object category, count)]."""
        index: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for t, c in self.counts.items():
            index.setdefault((t.subject_category, t.predicate), []).append((t.object_category, c))
        return index

    def to_json_obj(self) -> list[dict]:
        """Sorted, diff-stable listing of the table."""
        return [
            {"s": t.subject_category, "p": t.predicate, "o": t.object_category, "count": c}
            for t, c in sorted(self.counts.items())
        ]

    @classmethod
    def from_json_obj(cls, rows: list[dict]) -> "TripletFrequencyTable":
        counts = {}
        for row in rows:
            t = Triplet(int(row["s"]), int(row["p"]), int(row["o"]))
            if t in counts:
                raise ValueError(f"duplicate triplet {t} in frequency table")
            counts[t] = int(row["count"])
        return cls(counts)


def build_frequency_table(train: Dataset) -> TripletFrequencyTable:
    counter: Counter[Triplet] = Counter()
    for graph in train.graphs:
        counter.update(categorical_triplets(graph))
    return TripletFrequencyTable(dict(counter))


@dataclass(frozen=True)
class SubsetBucket:
    """Filtered dataset for one occurrence bucket plus its triplet set."""

    dataset: Dataset
    triplets: frozenset[Triplet]


@dataclass(frozen=True)
class ShotSubsets:
    zero: SubsetBucket
    few10: SubsetBucket
    few100: SubsetBucket
    all_shot: SubsetBucket


def _bucket(test: Dataset, keep) -> SubsetBucket:
    graphs = []
    triplets: set[Triplet] = set()
    for graph in test.graphs:
        kept = [
            e
            for e, t in zip(graph.edges, categorical_triplets(graph))
            if keep(t)
        ]
        if not kept:
            continue
        graphs.append(
            SceneGraph(graph.image_id, graph.width, graph.height, graph.nodes, tuple(kept))
        )
        triplets.update(categorical_triplets(graphs[-1]))
    return SubsetBucket(Dataset(test.vocabulary, tuple(graphs)), frozenset(triplets))


def shot_subsets(test: Dataset, table: TripletFrequencyTable) -> ShotSubsets:
    """Partition test triplets by training occurrence count.

    Buckets: zero (count 0), few10 (1-10), few100 (11-100); the all-shot
    bucket is the unfiltered test set. Graphs keep their full node list but
    only the edges of the bucket; graphs left without edges are dropped. A
    graph may appear in several buckets when its triplets qualify.
    """
    zero = _bucket(test, lambda t: table.count(t) == 0)
    few10 = _bucket(test, lambda t: 1 <= table.count(t) <= FEW10_MAX)
    few100 = _bucket(test, lambda t: FEW10_MAX < table.count(t) <= FEW100_MAX)
    all_triplets = frozenset(
        t for graph in test.graphs for t in categorical_triplets(graph)
    )
    return ShotSubsets(
        zero=zero,
        few10=few10,
        few100=few100,
        all_shot=SubsetBucket(test, all_triplets),
    )


def predicate_frequencies(train: Dataset) -> np.ndarray:
    """Per-predicate fraction of training edges; entries sum to 1."""
    counts = np.zeros(train.vocabulary.num_predicates, dtype=np.int64)
    for graph in train.graphs:
        for edge in graph.edges:
            counts[edge.predicate] += 1
    total = counts.sum()
    if total == 0:
        raise ValueError("dataset has no edges; predicate frequencies undefined")
    return counts / total


@dataclass(frozen=True, eq=False)
class Histogram:
    """Category occurrence counts, sortable into top-k tables."""

    counts: np.ndarray
    names: tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            return np.zeros_like(self.counts, dtype=np.float64)
        return self.counts / total

    def top_k(self, k: int) -> list[tuple[str, int, float]]:
        """(name, count, fraction) rows, sorted by count descending then id."""
        freq = self.normalized()
        order = sorted(range(len(self.counts)), key=lambda i: (-self.counts[i], i))
        return [(self.names[i], int(self.counts[i]), float(freq[i])) for i in order[:k]]


def marginal_distributions(dataset: Dataset) -> tuple[Histogram, Histogram]:
    """Object histogram over node occurrences and predicate histogram over edges."""
    vocab = dataset.vocabulary
    obj = np.zeros(vocab.num_objects, dtype=np.int64)
    pred = np.zeros(vocab.num_predicates, dtype=np.int64)
    for graph in dataset.graphs:
        for node in graph.nodes:
            obj[node.category] += 1
        for edge in graph.edges:
            pred[edge.predicate] += 1
    return Histogram(obj, vocab.object_names), Histogram(pred, vocab.predicate_names)


def triplet_set_to_json_obj(triplets) -> list[dict]:
    return [
        {"s": t.subject_category, "p": t.predicate, "o": t.object_category}
        for t in sorted(triplets)
    ]


def triplet_set_from_json_obj(rows: list[dict]) -> frozenset[Triplet]:
    return frozenset(Triplet(int(r["s"]), int(r["p"]), int(r["o"])) for r in rows)
