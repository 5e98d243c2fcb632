"""Forward-value calculators for the training objectives: node and edge
cross-entropies, cycle-consistency reconstruction, conditional adversarial
terms, their weighted total, and the margin-L1 box loss.

These compute values only; there are no parameters or gradients. Inputs are
probabilities, and clamping values away from 0/1 (e.g. to [1e-12, 1 - 1e-12])
is the caller's responsibility where a log would otherwise diverge.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import BoundingBox

EDGE_LOSS_MODES = ("mean_annotated", "density_normalized")


@dataclass(frozen=True, eq=False)
class ProbTable:
    """Rows of class probabilities with one integer target per row."""

    probs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.int64)
        if probs.ndim != 2 or targets.ndim != 1 or probs.shape[0] != targets.shape[0]:
            raise ValueError("probs must be (rows, classes) with one target per row")
        if not np.isfinite(probs).all():
            raise ValueError("non-finite probabilities")
        if ((probs < 0) | (probs > 1)).any():
            raise ValueError("probabilities must lie in [0, 1]")
        if probs.shape[0] and np.abs(probs.sum(axis=1) - 1.0).max() > 1e-6:
            raise ValueError("probability rows must sum to 1")
        if probs.shape[0] and (targets.min() < 0 or targets.max() >= probs.shape[1]):
            raise ValueError("target out of class range")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "targets", targets)

    @property
    def num_rows(self) -> int:
        return self.probs.shape[0]

    def target_probs(self) -> np.ndarray:
        return self.probs[np.arange(self.num_rows), self.targets]


def _neg_log_targets(table: ProbTable) -> np.ndarray:
    p = table.target_probs()
    if (p == 0).any():
        raise ValueError("zero probability at a target; clamp inputs before scoring")
    return -np.log(p)


def node_loss(nodes: ProbTable) -> float:
    """Mean node cross-entropy."""
    if nodes.num_rows == 0:
        raise ValueError("empty node table")
    return float(_neg_log_targets(nodes).mean())


def edge_loss(
    per_graph: Sequence[tuple[ProbTable, int]], mode: str = "density_normalized"
) -> float:
    """Edge cross-entropy in one of two conventions.

    mean_annotated: plain mean of -log p[target] over all annotated edges,
    pooled across graphs.

    density_normalized: per graph, the sum of -log p[target] over ALL
    n_g (n_g - 1) ordered node pairs (background target 0 on unannotated
    pairs) divided by the pair count; the batch value is the mean over
    graphs. Each graph's table must cover exactly all ordered pairs.
    """
    if mode not in EDGE_LOSS_MODES:
        raise ValueError(f"unknown edge loss mode {mode!r}; expected one of {EDGE_LOSS_MODES}")
    if not per_graph:
        raise ValueError("no graphs supplied")
    if mode == "mean_annotated":
        values = np.concatenate([_neg_log_targets(t) for t, _ in per_graph])
        if values.size == 0:
            raise ValueError("no annotated edges supplied")
        return float(values.mean())
    terms = []
    for table, n_g in per_graph:
        pair_count = n_g * (n_g - 1)
        if pair_count <= 0:
            raise ValueError(f"graph with {n_g} nodes has no ordered pairs to normalize over")
        if table.num_rows != pair_count:
            raise ValueError(
                f"density-normalized mode needs all {pair_count} ordered pairs, "
                f"got {table.num_rows} rows"
            )
        terms.append(_neg_log_targets(table).sum() / pair_count)
    return float(np.mean(terms))


def cls_loss(
    nodes: ProbTable,
    edges_per_graph: Sequence[tuple[ProbTable, int]],
    mode: str = "density_normalized",
) -> float:
    """Scene-graph classification loss: node plus edge cross-entropy."""
    return node_loss(nodes) + edge_loss(edges_per_graph, mode)


def rec_loss(
    nodes_perturbed_targets: ProbTable,
    edges_per_graph: Sequence[tuple[ProbTable, int]],
    mode: str = "density_normalized",
) -> float:
    """Reconstruction (cycle-consistency) loss: identical arithmetic to
    `cls_loss`, evaluated against the perturbed node targets.

    In the training regime this value only drives the classifier update,
    never the generator; that is a contract note, not runtime behavior here.
    """
    return cls_loss(nodes_perturbed_targets, edges_per_graph, mode)


def _validated_unit(values, name: str) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector")
    if not np.isfinite(v).all() or (v <= 0).any() or (v >= 1).any():
        raise ValueError(f"{name} values must lie strictly inside (0, 1)")
    return v


def adv_d_loss(real_outputs, fake_outputs) -> float:
    """Discriminator objective value: E[log D(real)] + E[log(1 - D(fake))]."""
    real = _validated_unit(real_outputs, "real outputs")
    fake = _validated_unit(fake_outputs, "fake outputs")
    return float(np.log(real).mean() + np.log1p(-fake).mean())


def adv_g_loss(fake_outputs) -> float:
    """Generator objective value: E[log D(fake)]."""
    fake = _validated_unit(fake_outputs, "fake outputs")
    return float(np.log(fake).mean())


def adv_totals(
    node_real, node_fake, edge_real, edge_fake, global_real, global_fake
) -> tuple[float, float]:
    """Total discriminator and generator adversarial values over the node,
    edge and (unconditional) global terms."""
    d_total = (
        adv_d_loss(node_real, node_fake)
        + adv_d_loss(edge_real, edge_fake)
        + adv_d_loss(global_real, global_fake)
    )
    g_total = adv_g_loss(node_fake) + adv_g_loss(edge_fake) + adv_g_loss(global_fake)
    return d_total, g_total


def total_loss(cls: float, rec: float, adv_d: float, adv_g: float, gamma: float = 5.0) -> float:
    """Combined objective: cls + rec - gamma * (adv_d + adv_g)."""
    return cls + rec - gamma * (adv_d + adv_g)


def box_margin_l1(pred: BoundingBox, gt: BoundingBox, max_coordinate: float) -> float:
    """L1 box loss clamped into [0.05 S, 0.5 S] for S = max coordinate."""
    if max_coordinate <= 0:
        raise ValueError(f"max coordinate must be positive, got {max_coordinate}")
    l1 = (
        abs(pred.x1 - gt.x1)
        + abs(pred.y1 - gt.y1)
        + abs(pred.x2 - gt.x2)
        + abs(pred.y2 - gt.y2)
    )
    return min(0.5 * max_coordinate, max(0.05 * max_coordinate, l1))
