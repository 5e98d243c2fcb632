from __future__ import annotations

import json

import numpy as np
import pytest

from sggkit.ingest import (
    Dataset,
    ParseError,
    load_dataset,
    load_embeddings,
    load_feature_matrix,
    load_predictions,
    load_vocabulary,
    save_dataset,
)

from .conftest import ON, PERSON, make_graph, write_jsonl, write_vocab


class TestLoadVocabulary:
    def test_positional_ids(self, tmp_path):
        path = tmp_path / "vocab.json"
        write_vocab(path, ["person", "dog"], ["on"])
        vocab = load_vocabulary(path)
        assert vocab.object_id("person") == 0
        assert vocab.object_id("dog") == 1
        assert vocab.predicate_id("on") == 0

    @pytest.mark.parametrize(
        "payload",
        [
            {"objects": ["a"]},
            {"objects": [], "predicates": ["on"]},
            {"objects": ["a", "a"], "predicates": ["on"]},
            {"objects": ["a", ""], "predicates": ["on"]},
        ],
    )
    def test_rejects_bad_payload(self, tmp_path, payload):
        path = tmp_path / "vocab.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(ParseError):
            load_vocabulary(path)


class TestLoadDataset:
    def line(self, **overrides):
        obj = {
            "image_id": "img1",
            "width": 100,
            "height": 80,
            "objects": [
                {"category": 0, "box": [0, 0, 10, 10]},
                {"category": 1, "box": [5, 5, 20, 20]},
            ],
            "relationships": [{"subject": 0, "predicate": 0, "object": 1}],
        }
        obj.update(overrides)
        return obj

    def test_basic(self, tmp_path, vocab):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [self.line()])
        ds = load_dataset(path, vocab)
        assert len(ds) == 1
        assert ds.graphs[0].num_nodes == 2
        assert ds.graphs[0].num_edges == 1

    def test_rejects_self_loop_naming_image(self, tmp_path, vocab):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [self.line(relationships=[{"subject": 0, "predicate": 0, "object": 0}])])
        with pytest.raises(ParseError, match="img1"):
            load_dataset(path, vocab)

    def test_rejects_degenerate_box(self, tmp_path, vocab):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [self.line(objects=[{"category": 0, "box": [10, 0, 10, 10]}],
                                     relationships=[])])
        with pytest.raises(ParseError, match="img1"):
            load_dataset(path, vocab)

    def test_rejects_category_out_of_range(self, tmp_path, vocab):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [self.line(objects=[{"category": 9, "box": [0, 0, 1, 1]}],
                                     relationships=[])])
        with pytest.raises(ParseError, match="category 9"):
            load_dataset(path, vocab)

    def test_ignores_unknown_keys(self, tmp_path, vocab):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [self.line(extra="whatever")])
        assert len(load_dataset(path, vocab)) == 1

    def test_round_trip(self, tmp_path, vocab, surf_graph):
        ds = Dataset(vocab, (surf_graph, make_graph("b", [PERSON, PERSON], [(0, ON, 1)])))
        path = tmp_path / "round.jsonl"
        save_dataset(ds, path)
        loaded = load_dataset(path, vocab)
        assert loaded.graphs == ds.graphs

    def test_order_preserved(self, tmp_path, vocab):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [self.line(image_id=f"img{i}") for i in range(5)])
        ds = load_dataset(path, vocab)
        assert [g.image_id for g in ds.graphs] == [f"img{i}" for i in range(5)]


class TestLoadEmbeddings:
    def test_single_word(self, tmp_path):
        from sggkit.model import Vocabulary

        vocab = Vocabulary(("cat",), ("on",))
        path = tmp_path / "emb.txt"
        path.write_text("cat 1.0 0.0\n")
        table = load_embeddings(path, vocab)
        assert table.dimension == 2
        np.testing.assert_array_equal(table.vector(0), [1.0, 0.0])

    def test_multiword_mean(self, tmp_path):
        from sggkit.model import Vocabulary

        vocab = Vocabulary(("traffic light",), ("on",))
        path = tmp_path / "emb.txt"
        path.write_text("light 0 2\ntraffic 2 0\n")
        table = load_embeddings(path, vocab)
        np.testing.assert_array_equal(table.vector(0), [1.0, 1.0])

    def test_mixed_dimensions_rejected(self, tmp_path, vocab):
        path = tmp_path / "emb.txt"
        path.write_text("person 1 0\nsurfboard 1 0 0\n")
        with pytest.raises(ParseError, match="dimension"):
            load_embeddings(path, vocab)

    def test_unresolvable_category_listed(self, tmp_path, vocab):
        path = tmp_path / "emb.txt"
        path.write_text("person 1 0\nsurfboard 0 1\nwave 1 1\ndog 0.5 1\n")
        with pytest.raises(ParseError, match="cat"):
            load_embeddings(path, vocab)


class TestLoadFeatureMatrix:
    def test_basic(self, tmp_path):
        path = tmp_path / "f.tsv"
        path.write_text("2 3\n1 2 3\n4 5 6\n")
        m = load_feature_matrix(path)
        np.testing.assert_array_equal(m, [[1, 2, 3], [4, 5, 6]])

    def test_empty_is_valid(self, tmp_path):
        path = tmp_path / "f.tsv"
        path.write_text("0 4\n")
        assert load_feature_matrix(path).shape == (0, 4)

    def test_nan_names_row(self, tmp_path):
        path = tmp_path / "f.tsv"
        rows = "\n".join("0 0" for _ in range(5)) + "\nnan 0\n"
        path.write_text("6 2\n" + rows + "\n")
        with pytest.raises(ParseError, match="row 5"):
            load_feature_matrix(path)

    def test_row_count_mismatch(self, tmp_path):
        path = tmp_path / "f.tsv"
        path.write_text("3 2\n1 2\n3 4\n")
        with pytest.raises(ParseError, match="expected 3 rows"):
            load_feature_matrix(path)


class TestLoadPredictions:
    def test_label_mode_one_hot(self, tmp_path, vocab):
        path = tmp_path / "p.jsonl"
        write_jsonl(
            path,
            [
                {
                    "image_id": "img1",
                    "object_labels": [2, 0],
                    "pairs": [
                        {"subject": 0, "object": 1, "predicate_scores": [0.5, 0.3, 0.2]}
                    ],
                }
            ],
        )
        preds = load_predictions(path, vocab)
        assert preds[0].object_scores[0].tolist() == [0, 0, 1, 0, 0]
        assert preds[0].object_scores[1].tolist() == [1, 0, 0, 0, 0]

    def test_score_mode(self, tmp_path, vocab):
        path = tmp_path / "p.jsonl"
        write_jsonl(
            path,
            [
                {
                    "image_id": "img1",
                    "object_scores": [[0.2, 0.2, 0.2, 0.2, 0.2]],
                    "pairs": [],
                }
            ],
        )
        preds = load_predictions(path, vocab)
        assert preds[0].num_nodes == 1

    def test_wrong_score_length_rejected(self, tmp_path, vocab):
        path = tmp_path / "p.jsonl"
        write_jsonl(
            path,
            [
                {
                    "image_id": "img1",
                    "object_labels": [0, 1],
                    "pairs": [{"subject": 0, "object": 1, "predicate_scores": [0.5, 0.5]}],
                }
            ],
        )
        with pytest.raises(ParseError, match="predicate_scores"):
            load_predictions(path, vocab)
