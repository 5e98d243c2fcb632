"""File formats and loaders: vocabularies, JSONL datasets, GloVe-style
embeddings, prediction files and feature matrices.

All formats are UTF-8 text with decimal floats. Unknown JSON keys are
ignored for forward compatibility.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .model import BoundingBox, ObjectNode, Relationship, SceneGraph, Vocabulary


class ParseError(ValueError):
    """Malformed or contract-violating input file."""


@dataclass(frozen=True)
class Dataset:
    vocabulary: Vocabulary
    graphs: tuple[SceneGraph, ...]

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        for g in self.graphs:
            g.validate(self.vocabulary)

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """One row per object category, indexed by category id."""

    vectors: np.ndarray  # (num categories, dimension)

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("embedding table must be a non-empty 2-d array")
        if not np.isfinite(v).all():
            raise ValueError("embedding table contains non-finite values")
        norms = np.linalg.norm(v, axis=1)
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise ValueError(f"all-zero embedding vector for category ids {zero.tolist()}")
        object.__setattr__(self, "vectors", v)

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    @property
    def num_categories(self) -> int:
        return self.vectors.shape[0]

    def vector(self, category: int) -> np.ndarray:
        return self.vectors[category]


def load_vocabulary(path: str | Path) -> Vocabulary:
    """Read a JSON object with "objects" and "predicates" string arrays."""
    with open(path, encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: expected a JSON object")
    for key in ("objects", "predicates"):
        if key not in raw:
            raise ParseError(f"{path}: missing key {key!r}")
        names = raw[key]
        if not isinstance(names, list) or not names:
            raise ParseError(f"{path}: {key!r} must be a non-empty array")
        for name in names:
            if not isinstance(name, str) or not name:
                raise ParseError(f"{path}: empty or non-string name in {key!r}")
        if len(set(names)) != len(names):
            raise ParseError(f"{path}: duplicate name in {key!r}")
    return Vocabulary(tuple(raw["objects"]), tuple(raw["predicates"]))


def _graph_from_obj(obj: dict, vocab: Vocabulary, where: str) -> SceneGraph:
    image_id = obj.get("image_id")
    if not isinstance(image_id, str) or not image_id:
        raise ParseError(f"{where}: missing or empty 'image_id'")
    ctx = f"{where} (image_id={image_id!r})"
    try:
        width = int(obj["width"])
        height = int(obj["height"])
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"{ctx}: bad 'width'/'height'") from e

    nodes = []
    for i, o in enumerate(obj.get("objects", [])):
        try:
            category = int(o["category"])
            x1, y1, x2, y2 = (float(c) for c in o["box"])
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"{ctx}: malformed object {i}") from e
        try:
            nodes.append(ObjectNode(category, BoundingBox(x1, y1, x2, y2)))
        except ValueError as e:
            raise ParseError(f"{ctx}: object {i}: {e}") from e

    edges = []
    for k, r in enumerate(obj.get("relationships", [])):
        try:
            s, p, o_ = int(r["subject"]), int(r["predicate"]), int(r["object"])
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"{ctx}: malformed relationship {k}") from e
        try:
            edges.append(Relationship(s, p, o_))
        except ValueError as e:
            raise ParseError(f"{ctx}: relationship {k}: {e}") from e

    try:
        graph = SceneGraph(image_id, width, height, tuple(nodes), tuple(edges))
        graph.validate(vocab)
    except ValueError as e:
        raise ParseError(f"{where}: {e}") from e
    return graph


def load_dataset(path: str | Path, vocab: Vocabulary) -> Dataset:
    """Read a JSON-Lines dataset; one scene graph per line, file order kept."""
    graphs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {e}") from e
            graphs.append(_graph_from_obj(obj, vocab, f"{path}:{lineno}"))
    return Dataset(vocab, tuple(graphs))


def graph_to_obj(graph: SceneGraph) -> dict:
    return {
        "image_id": graph.image_id,
        "width": graph.width,
        "height": graph.height,
        "objects": [
            {"category": n.category, "box": [n.box.x1, n.box.y1, n.box.x2, n.box.y2]}
            for n in graph.nodes
        ],
        "relationships": [
            {"subject": e.subject, "predicate": e.predicate, "object": e.object}
            for e in graph.edges
        ],
    }


def save_dataset(dataset: Dataset | Iterable[SceneGraph], path: str | Path) -> None:
    """Write graphs as JSON-Lines in the same schema `load_dataset` reads."""
    graphs = dataset.graphs if isinstance(dataset, Dataset) else dataset
    with open(path, "w", encoding="utf-8") as f:
        for g in graphs:
            f.write(json.dumps(graph_to_obj(g), separators=(",", ":")) + "\n")


def load_embeddings(path: str | Path, vocab: Vocabulary) -> EmbeddingTable:
    """Read a word-embedding text file (token followed by D floats per line).

    A multi-word category name maps to the mean of its constituent-word
    vectors; words missing from the file are dropped from the mean, and a
    category resolving no word at all is an error.
    """
    needed: set[str] = set()
    for name in vocab.object_names:
        needed.update(name.split())

    word_vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if not values:
                raise ParseError(f"{path}:{lineno}: no vector components")
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise ParseError(
                    f"{path}:{lineno}: dimension {len(values)} != {dim} of earlier lines"
                )
            if token in needed and token not in word_vectors:
                try:
                    word_vectors[token] = np.array([float(v) for v in values], dtype=np.float64)
                except ValueError as e:
                    raise ParseError(f"{path}:{lineno}: bad float") from e
    if dim is None:
        raise ParseError(f"{path}: empty embedding file")

    rows = []
    unresolved = []
    for name in vocab.object_names:
        found = [word_vectors[w] for w in name.split() if w in word_vectors]
        if not found:
            unresolved.append(name)
            continue
        rows.append(np.mean(found, axis=0))
    if unresolved:
        raise ParseError(f"{path}: no embedding for categories: {', '.join(unresolved)}")
    return EmbeddingTable(np.stack(rows))


def load_feature_matrix(path: str | Path) -> np.ndarray:
    """Read a TSV feature matrix: header line "N D", then N rows of D floats."""
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise ParseError(f"{path}:1: header must be 'N D'")
        try:
            n, d = int(header[0]), int(header[1])
        except ValueError as e:
            raise ParseError(f"{path}:1: header must be two integers") from e
        if n < 0 or d < 1:
            raise ParseError(f"{path}:1: invalid shape {n}x{d}")
        out = np.empty((n, d), dtype=np.float64)
        row = 0
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            if row >= n:
                raise ParseError(f"{path}:{lineno}: more than {n} rows")
            values = line.split()
            if len(values) != d:
                raise ParseError(f"{path}:{lineno}: row {row} has {len(values)} values, expected {d}")
            try:
                out[row] = [float(v) for v in values]
            except ValueError as e:
                raise ParseError(f"{path}:{lineno}: row {row}: bad float") from e
            if not np.isfinite(out[row]).all():
                raise ParseError(f"{path}:{lineno}: row {row}: non-finite value")
            row += 1
    if row != n:
        raise ParseError(f"{path}: expected {n} rows, found {row}")
    return out


def load_predictions(path: str | Path, vocab: Vocabulary):
    """Read predicted graphs from JSON-Lines (schema in the evaluation module)."""
    from .evaluation import PairScores, PredictedGraph

    preds = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"{where}: invalid JSON: {e}") from e
            image_id = obj.get("image_id")
            if not isinstance(image_id, str) or not image_id:
                raise ParseError(f"{where}: missing or empty 'image_id'")
            ctx = f"{where} (image_id={image_id!r})"

            if "object_scores" in obj:
                scores = np.asarray(obj["object_scores"], dtype=np.float64)
                if scores.ndim != 2 or scores.shape[1] != vocab.num_objects:
                    raise ParseError(
                        f"{ctx}: 'object_scores' must be n x {vocab.num_objects}"
                    )
            elif "object_labels" in obj:
                labels = obj["object_labels"]
                scores = np.zeros((len(labels), vocab.num_objects), dtype=np.float64)
                for i, lab in enumerate(labels):
                    lab = int(lab)
                    if not 0 <= lab < vocab.num_objects:
                        raise ParseError(f"{ctx}: object label {lab} out of range")
                    scores[i, lab] = 1.0
            else:
                raise ParseError(f"{ctx}: need 'object_scores' or 'object_labels'")
            n = scores.shape[0]

            pairs = []
            for k, p in enumerate(obj.get("pairs", [])):
                try:
                    s, o = int(p["subject"]), int(p["object"])
                    ps = np.asarray(p["predicate_scores"], dtype=np.float64)
                except (KeyError, TypeError, ValueError) as e:
                    raise ParseError(f"{ctx}: malformed pair {k}") from e
                if ps.shape != (vocab.num_predicates,):
                    raise ParseError(
                        f"{ctx}: pair {k}: predicate_scores length {ps.size}, "
                        f"expected {vocab.num_predicates}"
                    )
                if not (0 <= s < n and 0 <= o < n):
                    raise ParseError(f"{ctx}: pair {k}: node index out of range")
                if ((ps < 0) | (ps > 1)).any() or not np.isfinite(ps).all():
                    raise ParseError(f"{ctx}: pair {k}: scores must lie in [0, 1]")
                pairs.append(PairScores(s, o, ps))

            boxes = None
            if obj.get("boxes") is not None:
                try:
                    boxes = tuple(
                        BoundingBox(*(float(c) for c in b)) for b in obj["boxes"]
                    )
                except (TypeError, ValueError) as e:
                    raise ParseError(f"{ctx}: malformed 'boxes': {e}") from e
                if len(boxes) != n:
                    raise ParseError(f"{ctx}: {len(boxes)} boxes for {n} nodes")

            try:
                preds.append(PredictedGraph(image_id, scores, tuple(pairs), boxes))
            except ValueError as e:
                raise ParseError(f"{ctx}: {e}") from e
    return preds
