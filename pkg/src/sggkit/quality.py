"""Perturbation quality metrics: hit rate against reference triplet sets and
masked-LM semantic plausibility via an external scoring service.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np
import requests

from .ingest import Dataset
from .model import SceneGraph, Triplet, Vocabulary, categorical_triplets
from .perturb import PerturbationRecord
from .stats import TripletFrequencyTable

DEFAULT_MASK_TOKEN = "[MASK]"
PHRASE_SEPARATOR = " . "


@dataclass(frozen=True)
class HitRateResult:
    """Percentage of perturbed composition instances found in a reference set."""

    value: float
    hits: int
    total: int

    @property
    def empty(self) -> bool:
        """True when nothing was perturbed; the 0.0 value is then a convention."""
        return self.total == 0


def hit_rate(
    records: Sequence[PerturbationRecord],
    perturbed: Dataset,
    reference: Iterable[Triplet],
) -> HitRateResult:
    """Fraction (as a percentage) of perturbed-edge compositions that match
    the reference set; instances are counted with multiplicity."""
    reference = frozenset(reference)
    by_id = {g.image_id: g for g in perturbed.graphs}
    hits = 0
    total = 0
    for record in records:
        graph = by_id.get(record.image_id)
        if graph is None:
            raise ValueError(f"record image {record.image_id!r} missing from perturbed dataset")
        triplets = categorical_triplets(graph)
        for edge_index in record.affected_edges:
            if edge_index >= len(triplets):
                raise ValueError(
                    f"record image {record.image_id!r}: affected edge {edge_index} out of range"
                )
            total += 1
            if triplets[edge_index] in reference:
                hits += 1
    value = 100.0 * hits / total if total else 0.0
    return HitRateResult(value, hits, total)


@dataclass(frozen=True)
class PlausibilityQuery:
    """Space-joined triplet phrases with exactly one masked category mention."""

    text: str
    target: str

    def __post_init__(self):
        if not self.target:
            raise ValueError("empty query target")


def build_query(
    graph: SceneGraph,
    masked_node: int,
    vocab: Vocabulary,
    rng: np.random.Generator,
    mask_token: str = DEFAULT_MASK_TOKEN,
) -> PlausibilityQuery:
    """Textual query for a scene graph with one node mention masked out.

    Every edge becomes a "subject predicate object" phrase; one incident
    edge of the masked node is chosen at random and the node's mention in
    that phrase is replaced by the mask token, then all phrases are
    shuffled and joined.
    """
    incident = graph.incident_edges(masked_node)
    if not incident:
        raise ValueError(f"node {masked_node} is isolated; no context to query")
    masked_edge = incident[int(rng.integers(len(incident)))]

    phrases = []
    for k, edge in enumerate(graph.edges):
        subject = vocab.object_names[graph.nodes[edge.subject].category]
        pred = vocab.predicate_names[edge.predicate]
        obj = vocab.object_names[graph.nodes[edge.object].category]
        if k == masked_edge:
            if edge.subject == masked_node:
                subject = mask_token
            else:
                obj = mask_token
        phrases.append(f"{subject} {pred} {obj}")
    order = rng.permutation(len(phrases))
    text = PHRASE_SEPARATOR.join(phrases[i] for i in order)
    if text.count(mask_token) != 1:
        raise ValueError("query must contain exactly one mask token")
    return PlausibilityQuery(text, vocab.object_names[graph.nodes[masked_node].category])


class PlausibilityScorer(Protocol):
    def score(self, text: str, target: str) -> float: ...


class ScorerError(RuntimeError):
    """The scoring backend could not produce a score."""


class HttpScorer:
    """Client for the plausibility wire protocol.

    POST <endpoint>/score with {"text": ..., "target": ...}; the response
    must be {"score": <float>}. Transport failures are retried with a short
    backoff before raising.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0, retries: int = 3,
                 backoff: float = 0.5):
        if not endpoint:
            raise ValueError("empty scorer endpoint")
        self.url = endpoint.rstrip("/") + "/score"
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def score(self, text: str, target: str) -> float:
        last_error = None
        for attempt in range(self.retries):
            try:
                resp = requests.post(
                    self.url, json={"text": text, "target": target}, timeout=self.timeout
                )
                resp.raise_for_status()
                payload = resp.json()
                return float(payload["score"])
            except (requests.RequestException, json.JSONDecodeError, KeyError,
                    TypeError, ValueError) as e:
                last_error = e
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * (attempt + 1))
        raise ScorerError(f"scoring failed after {self.retries} attempts: {last_error}")


class FrequencyStubScorer:
    """Offline stand-in for a language model: log(1 + training count) of the
    masked composition. Useful for deterministic tests; a frequent
    composition outranks an unseen one by construction."""

    def __init__(self, table: TripletFrequencyTable, vocab: Vocabulary,
                 mask_token: str = DEFAULT_MASK_TOKEN):
        self.table = table
        self.vocab = vocab
        self.mask_token = mask_token

    def _parse_phrase(self, phrase: str) -> Triplet:
        tokens = phrase.split()
        object_names = set(self.vocab.object_names)
        predicate_names = set(self.vocab.predicate_names)
        for i in range(1, len(tokens)):
            subject = " ".join(tokens[:i])
            if subject not in object_names:
                continue
            for j in range(i + 1, len(tokens)):
                pred = " ".join(tokens[i:j])
                obj = " ".join(tokens[j:])
                if pred in predicate_names and obj in object_names:
                    return Triplet(
                        self.vocab.object_id(subject),
                        self.vocab.predicate_id(pred),
                        self.vocab.object_id(obj),
                    )
        raise ValueError(f"cannot parse phrase {phrase!r} against the vocabulary")

    def score(self, text: str, target: str) -> float:
        masked = [p for p in text.split(PHRASE_SEPARATOR) if self.mask_token in p]
        if len(masked) != 1:
            raise ValueError("query must contain exactly one masked phrase")
        phrase = masked[0].replace(self.mask_token, target)
        return math.log1p(self.table.count(self._parse_phrase(phrase)))


@dataclass(frozen=True)
class PlausibilityReport:
    mean: float
    per_graph: dict[str, float]
    skipped: int

    @property
    def scored(self) -> int:
        return len(self.per_graph)


def score_graphs(
    scorer: PlausibilityScorer,
    dataset: Dataset,
    rng: np.random.Generator,
    records: Sequence[PerturbationRecord] | None = None,
    mask_token: str = DEFAULT_MASK_TOKEN,
    max_workers: int = 1,
) -> PlausibilityReport:
    """Score one masked node per graph and average.

    With records, the masked node is a uniformly chosen perturbed node (one
    with graph context); without, a uniformly chosen non-isolated node.
    Graphs offering no such node are skipped and counted. Queries are built
    sequentially for determinism; requests may run concurrently.
    """
    by_id = {}
    if records is not None:
        by_id = {r.image_id: r for r in records}

    queries: list[tuple[str, PlausibilityQuery]] = []
    skipped = 0
    for graph in dataset.graphs:
        if records is not None:
            record = by_id.get(graph.image_id)
            if record is None:
                raise ValueError(f"no perturbation record for image {graph.image_id!r}")
            candidates = [
                n for n, _, _ in record.replacements if graph.incident_edges(n)
            ]
        else:
            candidates = [n for n in range(graph.num_nodes) if graph.incident_edges(n)]
        if not candidates:
            skipped += 1
            continue
        node = candidates[int(rng.integers(len(candidates)))]
        queries.append((graph.image_id, build_query(graph, node, dataset.vocabulary, rng, mask_token)))

    def run(item):
        image_id, query = item
        try:
            return image_id, scorer.score(query.text, query.target)
        except ScorerError as e:
            raise ScorerError(f"image {image_id!r}: {e}") from e

    if max_workers > 1 and len(queries) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run, queries))
    else:
        results = [run(q) for q in queries]

    per_graph = dict(results)
    mean = float(np.mean(list(per_graph.values()))) if per_graph else float("nan")
    return PlausibilityReport(mean, per_graph, skipped)
