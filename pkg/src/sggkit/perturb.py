"""Scene-graph node perturbation strategies.

Four strategies share the same frame: pick nodes with degree-weighted
sampling, then replace each picked node's category. Boxes, edges and node
count never change; only categories do.

  rand       uniform replacement over all other categories
  neigh      uniform replacement among the top-k cosine neighbors of the
             current category in a word-embedding space
  graphn     sequential replacement driven by dataset statistics: candidate
             categories must form known compositions with the node's current
             neighborhood, are weighted by inverse occurrence count (with an
             alpha cutoff on rare counts), then diversified through semantic
             neighbors
  oracle_zs  upper-bound strategy that only produces compositions from a
             supplied reference triplet set
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .ingest import Dataset, EmbeddingTable
from .model import SceneGraph, Triplet, Vocabulary, degree
from .stats import TripletFrequencyTable

METHODS = ("rand", "neigh", "graphn", "oracle_zs")

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


class CannotPerturbError(ValueError):
    """The vocabulary or configuration admits no replacement."""


def fnv1a64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV64_PRIME) & _U64
    return h


def graph_seed(image_id: str, master_seed: int) -> int:
    """Stable per-image seed, independent of processing order."""
    return fnv1a64(image_id.encode("utf-8")) ^ (master_seed & _U64)


@dataclass(frozen=True)
class PerturbationConfig:
    method: str
    intensity: float = 0.2
    top_k: int = 5
    alpha: float = 2.0
    master_seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError(f"intensity must lie in [0, 1], got {self.intensity}")
        if self.top_k < 0:
            raise ValueError(f"top_k must be >= 0, got {self.top_k}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class PerturbationRecord:
    """Per-graph ledger of replacements: which nodes changed and which edges
    (by index into the perturbed graph) now carry perturbed compositions."""

    image_id: str
    replacements: tuple[tuple[int, int, int], ...]  # (node, old category, new category)
    affected_edges: tuple[int, ...]

    def __post_init__(self):
        nodes = [n for n, _, _ in self.replacements]
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate node index in perturbation record")
        for n, old, new in self.replacements:
            if old == new:
                raise ValueError(f"no-op replacement recorded for node {n}")

    def to_json_obj(self) -> dict:
        return {
            "image_id": self.image_id,
            "replacements": [
                {"node": n, "old": old, "new": new} for n, old, new in self.replacements
            ],
            "affected_edges": list(self.affected_edges),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PerturbationRecord":
        return cls(
            obj["image_id"],
            tuple((int(r["node"]), int(r["old"]), int(r["new"])) for r in obj["replacements"]),
            tuple(int(e) for e in obj["affected_edges"]),
        )


def _num_to_sample(intensity: float, n: int) -> int:
    if intensity == 0.0:
        return 0
    return max(1, math.floor(intensity * n + 0.5))


def sample_nodes(graph: SceneGraph, intensity: float, rng: np.random.Generator) -> list[int]:
    """Draw max(1, round(intensity * n)) distinct nodes, weighted by degree.

    Sampling is without replacement via successive draws; once every
    remaining node has degree 0 the draws fall back to uniform, so edgeless
    graphs remain perturbable.
    """
    n = graph.num_nodes
    count = min(_num_to_sample(intensity, n), n)
    if count == 0:
        return []
    remaining = list(range(n))
    weights = np.zeros(n, dtype=np.float64)
    for e in graph.edges:
        weights[e.subject] += 1
        weights[e.object] += 1
    picked = []
    for _ in range(count):
        total = weights.sum()
        if total > 0:
            idx = rng.choice(len(remaining), p=weights / total)
        else:
            idx = rng.integers(len(remaining))
        picked.append(remaining.pop(idx))
        weights = np.delete(weights, idx)
    return picked


def _affected_edges(graph: SceneGraph, changed: Iterable[int]) -> tuple[int, ...]:
    changed = set(changed)
    return tuple(
        k
        for k, e in enumerate(graph.edges)
        if e.subject in changed or e.object in changed
    )


def _uniform_other_category(current: int, num_categories: int, rng: np.random.Generator) -> int:
    draw = int(rng.integers(num_categories - 1))
    return draw if draw < current else draw + 1


def perturb_rand(
    graph: SceneGraph,
    cfg: PerturbationConfig,
    vocab: Vocabulary,
    rng: np.random.Generator,
) -> tuple[SceneGraph, PerturbationRecord]:
    """Replace each sampled node by a uniform draw over the other categories."""
    if vocab.num_objects < 2:
        raise CannotPerturbError("need at least 2 object categories")
    categories = [n.category for n in graph.nodes]
    replacements = []
    for node in sample_nodes(graph, cfg.intensity, rng):
        old = categories[node]
        new = _uniform_other_category(old, vocab.num_objects, rng)
        categories[node] = new
        replacements.append((node, old, new))
    perturbed = graph.with_categories(categories)
    record = PerturbationRecord(
        graph.image_id, tuple(replacements), _affected_edges(graph, (r[0] for r in replacements))
    )
    return perturbed, record


def semantic_neighbors(emb: EmbeddingTable, category: int, k: int) -> list[int]:
    """Top-k categories by cosine similarity to `category`, query excluded.

    Ties break toward the lower category id.
    """
    if k >= emb.num_categories:
        raise ValueError(f"k={k} must be < number of categories {emb.num_categories}")
    if k == 0:
        return []
    v = emb.vectors
    query = v[category]
    sims = (v @ query) / (np.linalg.norm(v, axis=1) * np.linalg.norm(query))
    order = sorted(
        (i for i in range(emb.num_categories) if i != category),
        key=lambda i: (-sims[i], i),
    )
    return order[:k]


def perturb_neigh(
    graph: SceneGraph,
    cfg: PerturbationConfig,
    vocab: Vocabulary,
    emb: EmbeddingTable,
    rng: np.random.Generator,
) -> tuple[SceneGraph, PerturbationRecord]:
    """Replace each sampled node by a uniform draw over its top-k neighbors."""
    if vocab.num_objects < 2:
        raise CannotPerturbError("need at least 2 object categories")
    if cfg.top_k < 1:
        raise CannotPerturbError("neigh requires top_k >= 1")
    categories = [n.category for n in graph.nodes]
    replacements = []
    for node in sample_nodes(graph, cfg.intensity, rng):
        old = categories[node]
        neighbors = semantic_neighbors(emb, old, cfg.top_k)
        new = neighbors[int(rng.integers(len(neighbors)))]
        categories[node] = new
        replacements.append((node, old, new))
    perturbed = graph.with_categories(categories)
    record = PerturbationRecord(
        graph.image_id, tuple(replacements), _affected_edges(graph, (r[0] for r in replacements))
    )
    return perturbed, record


@dataclass(frozen=True)
class GraphNCandidate:
    category: int
    mean_count: float
    probability: float


def _graphn_candidates(
    categories: Sequence[int],
    graph: SceneGraph,
    node: int,
    table: TripletFrequencyTable,
    alpha: float,
) -> list[GraphNCandidate]:
    support: dict[int, list[int]] = {}
    for edge in graph.edges:
        if edge.subject == node:
            for cat, count in table.by_predicate_object.get(
                (edge.predicate, categories[edge.object]), ()
            ):
                support.setdefault(cat, []).append(count)
        elif edge.object == node:
            for cat, count in table.by_subject_predicate.get(
                (categories[edge.subject], edge.predicate), ()
            ):
                support.setdefault(cat, []).append(count)
    support.pop(categories[node], None)

    kept = []
    for cat in sorted(support):
        mean_count = sum(support[cat]) / len(support[cat])
        if mean_count < alpha:
            continue
        kept.append((cat, mean_count))
    if not kept:
        return []
    inv = [1.0 / c for _, c in kept]
    norm = sum(inv)
    return [
        GraphNCandidate(cat, mean_count, w / norm)
        for (cat, mean_count), w in zip(kept, inv)
    ]


def graphn_candidates(
    graph: SceneGraph,
    node: int,
    table: TripletFrequencyTable,
    alpha: float,
) -> list[GraphNCandidate]:
    """Replacement candidates for `node` under the graphn scheme.

    A category qualifies when substituting it for the node (keeping the
    node's role on each incident edge) yields a composition present in the
    table. Multiple supporting compositions average their counts; candidates
    with mean count < alpha are dropped, the node's current category is
    excluded, and the rest get probability proportional to the inverse mean
    count.
    """
    if node < 0 or node >= graph.num_nodes:
        raise IndexError(f"node {node} out of range (n={graph.num_nodes})")
    return _graphn_candidates([n.category for n in graph.nodes], graph, node, table, alpha)


def perturb_graphn(
    graph: SceneGraph,
    cfg: PerturbationConfig,
    vocab: Vocabulary,
    emb: EmbeddingTable,
    table: TripletFrequencyTable,
    rng: np.random.Generator,
) -> tuple[SceneGraph, PerturbationRecord]:
    """Sequential statistics-aware perturbation.

    Nodes are processed in sample order; each step scores candidates against
    the current, partially perturbed categories, draws an intermediate
    category by inverse-frequency probability, then draws the final category
    uniformly from that category plus its top-k semantic neighbors. Nodes
    with no surviving candidate are skipped, as are draws that land back on
    the node's current category, so intensity is an upper bound here.
    """
    categories = [n.category for n in graph.nodes]
    replacements = []
    for node in sample_nodes(graph, cfg.intensity, rng):
        candidates = _graphn_candidates(categories, graph, node, table, cfg.alpha)
        if not candidates:
            continue
        probs = np.array([c.probability for c in candidates])
        intermediate = candidates[int(rng.choice(len(candidates), p=probs))].category
        pool = [intermediate] + (
            semantic_neighbors(emb, intermediate, cfg.top_k) if cfg.top_k > 0 else []
        )
        new = pool[int(rng.integers(len(pool)))]
        old = categories[node]
        if new == old:
            continue
        categories[node] = new
        replacements.append((node, old, new))
    perturbed = graph.with_categories(categories)
    record = PerturbationRecord(
        graph.image_id, tuple(replacements), _affected_edges(graph, (r[0] for r in replacements))
    )
    return perturbed, record


def perturb_oracle_zs(
    graph: SceneGraph,
    cfg: PerturbationConfig,
    zs_triplets: frozenset[Triplet] | set[Triplet],
    rng: np.random.Generator,
    num_categories: int | None = None,
) -> tuple[SceneGraph, PerturbationRecord]:
    """Replace sampled nodes only when every incident composition lands in
    the reference triplet set; every touched composition is then a reference
    one by construction.

    Sequential like graphn: later candidates are validated against already
    perturbed neighbors. Nodes with no incident edges carry no composition
    evidence and are skipped.
    """
    if not zs_triplets:
        raise ValueError("reference triplet set is empty")
    if num_categories is None:
        num_categories = 1 + max(
            max(t.subject_category for t in zs_triplets),
            max(t.object_category for t in zs_triplets),
            max(n.category for n in graph.nodes),
        )
    categories = [n.category for n in graph.nodes]
    incident: dict[int, list] = {}
    for edge in graph.edges:
        incident.setdefault(edge.subject, []).append(edge)
        incident.setdefault(edge.object, []).append(edge)

    replacements = []
    for node in sample_nodes(graph, cfg.intensity, rng):
        edges = incident.get(node)
        if not edges:
            continue
        old = categories[node]
        candidates = []
        for cat in range(num_categories):
            if cat == old:
                continue
            ok = True
            for edge in edges:
                if edge.subject == node:
                    t = Triplet(cat, edge.predicate, categories[edge.object])
                else:
                    t = Triplet(categories[edge.subject], edge.predicate, cat)
                if t not in zs_triplets:
                    ok = False
                    break
            if ok:
                candidates.append(cat)
        if not candidates:
            continue
        new = candidates[int(rng.integers(len(candidates)))]
        categories[node] = new
        replacements.append((node, old, new))
    perturbed = graph.with_categories(categories)
    record = PerturbationRecord(
        graph.image_id, tuple(replacements), _affected_edges(graph, (r[0] for r in replacements))
    )
    return perturbed, record


@dataclass(frozen=True)
class PerturbationResources:
    """Method-specific inputs for a dataset-level run."""

    embeddings: EmbeddingTable | None = None
    table: TripletFrequencyTable | None = None
    zs_triplets: frozenset[Triplet] | None = None


def perturb_graph(
    graph: SceneGraph,
    cfg: PerturbationConfig,
    vocab: Vocabulary,
    resources: PerturbationResources,
    rng: np.random.Generator,
) -> tuple[SceneGraph, PerturbationRecord]:
    if cfg.method == "rand":
        return perturb_rand(graph, cfg, vocab, rng)
    if cfg.method == "neigh":
        return perturb_neigh(graph, cfg, vocab, resources.embeddings, rng)
    if cfg.method == "graphn":
        return perturb_graphn(graph, cfg, vocab, resources.embeddings, resources.table, rng)
    return perturb_oracle_zs(
        graph, cfg, resources.zs_triplets, rng, num_categories=vocab.num_objects
    )


def _check_resources(cfg: PerturbationConfig, resources: PerturbationResources) -> None:
    if cfg.method in ("neigh", "graphn") and resources.embeddings is None:
        raise ValueError(f"method {cfg.method!r} requires an embedding table")
    if cfg.method == "graphn" and resources.table is None:
        raise ValueError("method 'graphn' requires a triplet frequency table")
    if cfg.method == "oracle_zs" and not resources.zs_triplets:
        raise ValueError("method 'oracle_zs' requires a non-empty reference triplet set")


def perturb_dataset(
    dataset: Dataset,
    cfg: PerturbationConfig,
    resources: PerturbationResources | None = None,
) -> tuple[Dataset, list[PerturbationRecord]]:
    """Perturb every graph with an order-independent per-image seed.

    Each graph gets its own generator seeded from a stable 64-bit hash of
    its image id XORed with the master seed, so results do not depend on
    processing order or parallelism. One record is emitted per graph, empty
    when nothing changed.
    """
    resources = resources or PerturbationResources()
    _check_resources(cfg, resources)
    perturbed = []
    records = []
    for graph in dataset.graphs:
        rng = np.random.default_rng(graph_seed(graph.image_id, cfg.master_seed))
        try:
            new_graph, record = perturb_graph(graph, cfg, dataset.vocabulary, resources, rng)
        except CannotPerturbError as e:
            raise CannotPerturbError(f"image {graph.image_id!r}: {e}") from e
        perturbed.append(new_graph)
        records.append(record)
    return Dataset(dataset.vocabulary, tuple(perturbed)), records
