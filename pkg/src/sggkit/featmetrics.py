"""Distribution metrics over feature sets: k-NN manifold precision, recall,
density and coverage, plus the Gaussian-fit Fréchet distance.

All computations are exact (no approximate neighbor index) and operate on
raw Euclidean distances; normalize features beforehand if that matters for
your data.
"""
from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

DEFAULT_K = 5


def _as_features(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-d array with at least one column")
    if not np.isfinite(x).all():
        raise ValueError(f"{name} contains non-finite values")
    return x


def _pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Direct differences, not the Gram-matrix expansion: keeps distances
    # bitwise reproducible against a naive per-pair computation.
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def knn_radii(x: np.ndarray, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest other point."""
    x = _as_features(x, "feature set")
    n = x.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n <= k:
        raise ValueError(f"need at least k+1 = {k + 1} points, got {n}")
    d = _pairwise_distances(x, x)
    np.fill_diagonal(d, np.inf)
    return np.partition(d, k - 1, axis=1)[:, k - 1]


@dataclass(frozen=True)
class PRDCResult:
    precision: float
    recall: float
    density: float
    coverage: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.precision, self.recall, self.density, self.coverage)

    @property
    def average(self) -> float:
        return sum(self.as_tuple()) / 4.0


def precision_recall_density_coverage(
    real: np.ndarray, fake: np.ndarray, k: int = DEFAULT_K
) -> PRDCResult:
    """k-NN manifold metrics of a generated set against a reference set.

    Membership tests use closed balls (distance <= radius), so comparing a
    set against itself yields precision = recall = coverage = 1.
    """
    real = _as_features(real, "real features")
    fake = _as_features(fake, "fake features")
    if real.shape[1] != fake.shape[1]:
        raise ValueError("real and fake features must share dimensionality")
    real_radii = knn_radii(real, k)
    fake_radii = knn_radii(fake, k)
    d = _pairwise_distances(real, fake)  # (n_real, n_fake)

    in_real_balls = d <= real_radii[:, None]
    precision = float(in_real_balls.any(axis=0).mean())
    recall = float((d <= fake_radii[None, :]).any(axis=1).mean())
    density = float(in_real_balls.sum(axis=0).mean() / k)
    coverage = float(in_real_balls.any(axis=1).mean())
    return PRDCResult(precision, recall, density, coverage)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def frechet_distance(real: np.ndarray, fake: np.ndarray) -> float:
    """Fréchet distance between Gaussians fit to the two sets.

    |mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}) with unbiased covariances;
    the cross term is computed through a symmetric eigendecomposition with
    negative eigenvalues clamped to zero.
    """
    real = _as_features(real, "real features")
    fake = _as_features(fake, "fake features")
    if real.shape[0] < 2 or fake.shape[0] < 2:
        raise ValueError("need at least 2 points per set to fit a Gaussian")
    if real.shape[1] != fake.shape[1]:
        raise ValueError("real and fake features must share dimensionality")
    mu1, mu2 = real.mean(axis=0), fake.mean(axis=0)
    s1 = np.atleast_2d(np.cov(real, rowvar=False))
    s2 = np.atleast_2d(np.cov(fake, rowvar=False))
    root1 = _psd_sqrt(s1)
    cross = root1 @ s2 @ root1
    cross = (cross + cross.T) / 2.0
    eigs = np.clip(np.linalg.eigvalsh(cross), 0.0, None)
    diff = mu1 - mu2
    fd = float(diff @ diff + np.trace(s1) + np.trace(s2) - 2.0 * np.sqrt(eigs).sum())
    return max(fd, 0.0)


def _display_average(metrics) -> Decimal:
    total = sum(Decimal(repr(float(m))) for m in metrics)
    return (total / 4).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def summarize_feature_report(
    rows: dict[str, dict[str, tuple[float, float, float, float]]],
    conditions: tuple[str, str],
) -> dict:
    """Tabular report over metric quadruples with per-row averages and the
    relative drop of the average between the two conditions.

    `rows` maps a group name (e.g. "nodes") to per-condition quadruples
    (precision, recall, density, coverage). Averages are shown at two
    decimals and the drop, in percent of the first condition's average, is
    computed from those displayed values, both rounded half up.
    """
    ref, other = conditions
    out_rows = []
    drops = []
    for group, per_condition in rows.items():
        for condition in conditions:
            if condition not in per_condition:
                raise ValueError(f"group {group!r} lacks condition {condition!r}")
        averages = {}
        for condition, metrics in per_condition.items():
            if len(metrics) != 4:
                raise ValueError(f"group {group!r}: expected 4 metrics, got {len(metrics)}")
            display = _display_average(metrics)
            averages[condition] = display
            p, r, d, c = (float(m) for m in metrics)
            out_rows.append(
                {
                    "group": group,
                    "condition": condition,
                    "precision": p,
                    "recall": r,
                    "density": d,
                    "coverage": c,
                    "average": (p + r + d + c) / 4.0,
                    "average_display": float(display),
                }
            )
        drop = (
            100 * (averages[ref] - averages[other]) / averages[ref]
        ).quantize(Decimal("1"), rounding=ROUND_HALF_UP)
        drops.append(
            {"group": group, "from": ref, "to": other, "drop_percent": int(drop)}
        )
    return {"conditions": list(conditions), "rows": out_rows, "drops": drops}
