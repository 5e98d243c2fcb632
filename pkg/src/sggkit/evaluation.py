"""Recall evaluation protocol: triplet ranking with and without the graph
constraint, recall@K over shot subsets, mean recall over predicate classes,
IoU-based matching for detection-style predictions, and post-hoc predicate
reweighting.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .ingest import Dataset
from .model import BoundingBox, SceneGraph, Triplet

SGGEN_IOU_THRESHOLD = 0.5
MODES = ("sgcls", "predcls", "sggen")
AGGREGATES = ("image", "triplet")


class PairScores(NamedTuple):
    subject: int
    object: int
    scores: np.ndarray  # one score per predicate class


@dataclass(frozen=True, eq=False)
class PredictedGraph:
    """Model output for one image: per-node object score rows and per-pair
    predicate score vectors; boxes only for detection-style evaluation."""

    image_id: str
    object_scores: np.ndarray  # (n, |C|), row-stochastic (one-hot for GT labels)
    pairs: tuple[PairScores, ...]
    boxes: tuple[BoundingBox, ...] | None = None

    def __post_init__(self):
        scores = np.asarray(self.object_scores, dtype=np.float64)
        if scores.ndim != 2:
            raise ValueError(f"image {self.image_id!r}: object_scores must be 2-d")
        if not np.isfinite(scores).all():
            raise ValueError(f"image {self.image_id!r}: non-finite object scores")
        if scores.shape[0] and np.abs(scores.sum(axis=1) - 1.0).max() > 1e-6:
            raise ValueError(f"image {self.image_id!r}: object score rows must sum to 1")
        object.__setattr__(self, "object_scores", scores)
        n = scores.shape[0]
        seen = set()
        for p in self.pairs:
            if p.subject == p.object:
                raise ValueError(f"image {self.image_id!r}: pair with subject == object")
            if not (0 <= p.subject < n and 0 <= p.object < n):
                raise ValueError(f"image {self.image_id!r}: pair node index out of range")
            if (p.subject, p.object) in seen:
                raise ValueError(
                    f"image {self.image_id!r}: duplicate pair ({p.subject}, {p.object})"
                )
            seen.add((p.subject, p.object))
        if self.boxes is not None and len(self.boxes) != n:
            raise ValueError(f"image {self.image_id!r}: box count != node count")

    @property
    def num_nodes(self) -> int:
        return self.object_scores.shape[0]


class RankedTriplet(NamedTuple):
    subject: int
    object: int
    subject_label: int
    predicate: int
    object_label: int
    score: float


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def reweight_scores(
    pairs: Sequence[PairScores], f_r: np.ndarray, x: float
) -> tuple[PairScores, ...]:
    """Scale predicate scores by (1 / f_r)^x; x = 0 returns the input as is.

    The result is not renormalized: it is only used for ranking.
    """
    if x < 0:
        raise ValueError(f"reweighting exponent must be >= 0, got {x}")
    if x == 0:
        return tuple(pairs)
    f_r = np.asarray(f_r, dtype=np.float64)
    zero = f_r <= 0
    weights = np.empty_like(f_r)
    weights[~zero] = (1.0 / f_r[~zero]) ** x
    weights[zero] = 0.0
    out = []
    for p in pairs:
        if (zero & (p.scores > 0)).any():
            raise ValueError("nonzero score for a predicate with zero training frequency")
        out.append(PairScores(p.subject, p.object, p.scores * weights))
    return tuple(out)


def rank_triplets(
    pred: PredictedGraph, graph_constraint: bool, k: int
) -> list[RankedTriplet]:
    """Top-k candidate triplets by the product of subject, object and
    predicate scores.

    With the graph constraint only the best predicate of each ordered pair
    competes; without it every predicate does. Ties break by (subject index,
    object index, predicate id) ascending so ranking is reproducible.
    """
    labels = pred.object_scores.argmax(axis=1)
    label_scores = pred.object_scores.max(axis=1)
    candidates = []
    for p in pred.pairs:
        base = label_scores[p.subject] * label_scores[p.object]
        if graph_constraint:
            predicate_ids: Iterable[int] = (int(p.scores.argmax()),)
        else:
            predicate_ids = range(p.scores.shape[0])
        for predicate in predicate_ids:
            candidates.append(
                RankedTriplet(
                    p.subject,
                    p.object,
                    int(labels[p.subject]),
                    predicate,
                    int(labels[p.object]),
                    float(base * p.scores[predicate]),
                )
            )
    candidates.sort(key=lambda t: (-t.score, t.subject, t.object, t.predicate))
    return candidates[:k]


def _matches(
    ranked: RankedTriplet,
    gt: SceneGraph,
    edge_index: int,
    mode: str,
    pred_boxes: tuple[BoundingBox, ...] | None,
) -> bool:
    edge = gt.edges[edge_index]
    if ranked.predicate != edge.predicate:
        return False
    if ranked.subject_label != gt.nodes[edge.subject].category:
        return False
    if ranked.object_label != gt.nodes[edge.object].category:
        return False
    if mode == "sggen":
        return (
            iou(pred_boxes[ranked.subject], gt.nodes[edge.subject].box) >= SGGEN_IOU_THRESHOLD
            and iou(pred_boxes[ranked.object], gt.nodes[edge.object].box) >= SGGEN_IOU_THRESHOLD
        )
    return ranked.subject == edge.subject and ranked.object == edge.object


def match_count(
    ranked: Sequence[RankedTriplet],
    gt: SceneGraph,
    edge_indices: Sequence[int],
    mode: str,
    pred_boxes: tuple[BoundingBox, ...] | None = None,
) -> int:
    """Greedy matching: each ranked triplet and each GT instance used once."""
    used = [False] * len(edge_indices)
    matched = 0
    for r in ranked:
        for slot, edge_index in enumerate(edge_indices):
            if used[slot]:
                continue
            if _matches(r, gt, edge_index, mode, pred_boxes):
                used[slot] = True
                matched += 1
                break
    return matched


@dataclass(frozen=True)
class RecallResult:
    value: float  # percentage
    per_image: dict[str, float]  # fraction per scored image
    matched: int
    total: int


def _validated_inputs(predictions, gt, k, mode, aggregate):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if aggregate not in AGGREGATES:
        raise ValueError(f"unknown aggregate {aggregate!r}; expected one of {AGGREGATES}")
    if k < 1:
        raise ValueError(f"K must be >= 1, got {k}")
    by_id: dict[str, PredictedGraph] = {}
    for p in predictions:
        if p.image_id in by_id:
            raise ValueError(f"duplicate prediction for image {p.image_id!r}")
        by_id[p.image_id] = p
    gt_ids = {g.image_id for g in gt.graphs}
    unknown = sorted(set(by_id) - gt_ids)
    if unknown:
        raise ValueError(f"predictions for images absent from ground truth: {unknown}")
    return by_id


def _evaluate(
    predictions: Sequence[PredictedGraph],
    gt: Dataset,
    k: int,
    mode: str,
    subset_filter: Iterable[Triplet] | None,
    graph_constraint: bool,
    reweight_x: float,
    f_r: np.ndarray | None,
    aggregate: str,
    predicate_filter: int | None = None,
) -> RecallResult:
    by_id = _validated_inputs(predictions, gt, k, mode, aggregate)
    subset = frozenset(subset_filter) if subset_filter is not None else None
    if reweight_x != 0 and f_r is None:
        raise ValueError("predicate frequencies f_r required when reweighting")

    per_image: dict[str, float] = {}
    missing = []
    matched_sum = 0
    total_sum = 0
    for graph in gt.graphs:
        edge_indices = []
        for idx, edge in enumerate(graph.edges):
            t = Triplet(
                graph.nodes[edge.subject].category, edge.predicate, graph.nodes[edge.object].category
            )
            if subset is not None and t not in subset:
                continue
            if predicate_filter is not None and edge.predicate != predicate_filter:
                continue
            edge_indices.append(idx)
        if not edge_indices:
            continue
        pred = by_id.get(graph.image_id)
        if pred is None:
            missing.append(graph.image_id)
            continue
        if mode in ("sgcls", "predcls") and pred.num_nodes != graph.num_nodes:
            raise ValueError(
                f"image {graph.image_id!r}: prediction has {pred.num_nodes} nodes, "
                f"ground truth has {graph.num_nodes}"
            )
        if mode == "sggen" and pred.boxes is None:
            raise ValueError(f"image {graph.image_id!r}: sggen evaluation requires predicted boxes")
        pairs = reweight_scores(pred.pairs, f_r, reweight_x) if reweight_x != 0 else pred.pairs
        ranked = rank_triplets(
            PredictedGraph(pred.image_id, pred.object_scores, tuple(pairs), pred.boxes),
            graph_constraint,
            k,
        )
        matched = match_count(ranked, graph, edge_indices, mode, pred.boxes)
        per_image[graph.image_id] = matched / len(edge_indices)
        matched_sum += matched
        total_sum += len(edge_indices)
    if missing:
        raise ValueError(f"missing predictions for images: {sorted(missing)}")
    if not per_image:
        raise ValueError("no ground-truth triplets left after filtering")
    if aggregate == "image":
        value = 100.0 * sum(per_image.values()) / len(per_image)
    else:
        value = 100.0 * matched_sum / total_sum
    return RecallResult(value, per_image, matched_sum, total_sum)


def recall_details(
    predictions: Sequence[PredictedGraph],
    gt: Dataset,
    k: int,
    mode: str = "sgcls",
    subset_filter: Iterable[Triplet] | None = None,
    graph_constraint: bool = False,
    reweight_x: float = 0.0,
    f_r: np.ndarray | None = None,
    aggregate: str = "image",
) -> RecallResult:
    """Recall@K with per-image values.

    Per image, ground-truth instances (optionally restricted to a triplet
    subset by categorical composition) are greedily matched against the
    top-K ranked triplets; images with no eligible instance are excluded
    from the mean.
    """
    return _evaluate(
        predictions, gt, k, mode, subset_filter, graph_constraint, reweight_x, f_r, aggregate
    )


def recall_at_k(
    predictions: Sequence[PredictedGraph],
    gt: Dataset,
    k: int,
    mode: str = "sgcls",
    subset_filter: Iterable[Triplet] | None = None,
    graph_constraint: bool = False,
    reweight_x: float = 0.0,
    f_r: np.ndarray | None = None,
    aggregate: str = "image",
) -> float:
    return recall_details(
        predictions, gt, k, mode, subset_filter, graph_constraint, reweight_x, f_r, aggregate
    ).value


@dataclass(frozen=True)
class MeanRecallResult:
    value: float  # percentage
    per_class: dict[int, float]  # percentage per predicate id with >= 1 GT instance


def mean_recall_details(
    predictions: Sequence[PredictedGraph],
    gt: Dataset,
    k: int,
    mode: str = "sgcls",
    subset_filter: Iterable[Triplet] | None = None,
    graph_constraint: bool = False,
    reweight_x: float = 0.0,
    f_r: np.ndarray | None = None,
    aggregate: str = "image",
) -> MeanRecallResult:
    """Recall averaged uniformly over predicate classes present in the GT."""
    subset = frozenset(subset_filter) if subset_filter is not None else None
    present = set()
    for graph in gt.graphs:
        for edge in graph.edges:
            t = Triplet(
                graph.nodes[edge.subject].category, edge.predicate, graph.nodes[edge.object].category
            )
            if subset is not None and t not in subset:
                continue
            present.add(edge.predicate)
    if not present:
        raise ValueError("no ground-truth triplets left after filtering")
    per_class = {}
    for predicate in sorted(present):
        per_class[predicate] = _evaluate(
            predictions, gt, k, mode, subset, graph_constraint, reweight_x, f_r, aggregate,
            predicate_filter=predicate,
        ).value
    return MeanRecallResult(sum(per_class.values()) / len(per_class), per_class)


def mean_recall(
    predictions: Sequence[PredictedGraph],
    gt: Dataset,
    k: int,
    mode: str = "sgcls",
    subset_filter: Iterable[Triplet] | None = None,
    graph_constraint: bool = False,
    reweight_x: float = 0.0,
    f_r: np.ndarray | None = None,
    aggregate: str = "image",
) -> float:
    return mean_recall_details(
        predictions, gt, k, mode, subset_filter, graph_constraint, reweight_x, f_r, aggregate
    ).value
