from __future__ import annotations

import json

import numpy as np
import pytest

from sggkit.ingest import Dataset
from sggkit.model import BoundingBox, ObjectNode, Relationship, SceneGraph, Vocabulary

_CRITERION_RESULTS: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    label = getattr(item.function, "_criterion", None)
    if label is None:
        return
    if report.when == "setup" and report.skipped:
        _CRITERION_RESULTS[label] = "SKIP"
    elif report.when == "call":
        if report.skipped:
            _CRITERION_RESULTS[label] = "SKIP"
        else:
            _CRITERION_RESULTS[label] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for label in sorted(_CRITERION_RESULTS):
        terminalreporter.write_line(f"  {label}: {_CRITERION_RESULTS[label]}")

PERSON, SURFBOARD, WAVE, DOG, CAT = range(5)
ON, ABOVE, NEAR = range(3)


def box(x1=0.0, y1=0.0, x2=10.0, y2=10.0) -> BoundingBox:
    return BoundingBox(x1, y1, x2, y2)


def make_graph(image_id, categories, edges, width=100, height=100) -> SceneGraph:
    nodes = tuple(ObjectNode(c, box(i * 10, 0, i * 10 + 5, 5)) for i, c in enumerate(categories))
    return SceneGraph(image_id, width, height, nodes, tuple(Relationship(*e) for e in edges))


@pytest.fixture
def vocab() -> Vocabulary:
    return Vocabulary(
        ("person", "surfboard", "wave", "dog", "cat"),
        ("on", "above", "near"),
    )


@pytest.fixture
def surf_graph() -> SceneGraph:
    """Three nodes person/surfboard/wave with wave-above-person and person-on-surfboard."""
    return make_graph("surf", [PERSON, SURFBOARD, WAVE], [(2, ABOVE, 0), (0, ON, 1)])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def write_jsonl(path, objs) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for obj in objs:
            f.write(json.dumps(obj) + "\n")


def write_vocab(path, objects, predicates) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"objects": list(objects), "predicates": list(predicates)}, f)


def dataset_of(vocab, *graphs) -> Dataset:
    return Dataset(vocab, tuple(graphs))
