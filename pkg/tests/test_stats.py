from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from sggkit.ingest import Dataset
from sggkit.model import Triplet, Vocabulary, categorical_triplets
from sggkit.stats import (
    TripletFrequencyTable,
    build_frequency_table,
    marginal_distributions,
    predicate_frequencies,
    shot_subsets,
)

from .conftest import ABOVE, CAT, DOG, ON, PERSON, SURFBOARD, WAVE, dataset_of, make_graph


def toy_corpus(vocab):
    graphs = [
        make_graph("a", [PERSON, SURFBOARD, WAVE], [(0, ON, 1), (2, ABOVE, 0)]),
        make_graph("b", [PERSON, SURFBOARD], [(0, ON, 1), (0, ON, 1)]),
        make_graph("c", [DOG, CAT], [(0, 2, 1)]),
        make_graph("d", [DOG, SURFBOARD, CAT], [(0, ON, 1), (2, ABOVE, 0)]),
        make_graph("e", [PERSON], []),
    ]
    return dataset_of(vocab, *graphs)


class TestFrequencyTable:
    def test_counts_match_brute_force(self, vocab):
        corpus = toy_corpus(vocab)
        table = build_frequency_table(corpus)
        brute = Counter()
        for graph in corpus.graphs:
            for edge in graph.edges:
                brute[
                    (graph.nodes[edge.subject].category, edge.predicate,
                     graph.nodes[edge.object].category)
                ] += 1
        assert {tuple(t): c for t, c in table.counts.items()} == dict(brute)
        assert table.total_triplets == sum(brute.values())
        assert table.distinct_triplets == len(brute)

    def test_shared_composition_counted_across_graphs(self, vocab):
        ds = dataset_of(
            vocab,
            make_graph("a", [PERSON, SURFBOARD], [(0, ON, 1)]),
            make_graph("b", [PERSON, SURFBOARD], [(0, ON, 1)]),
        )
        assert build_frequency_table(ds).count(Triplet(PERSON, ON, SURFBOARD)) == 2

    def test_empty_edges_everywhere(self, vocab):
        ds = dataset_of(vocab, make_graph("a", [PERSON], []), make_graph("b", [DOG], []))
        assert build_frequency_table(ds).counts == {}

    def test_graph_order_invariance(self, vocab):
        corpus = toy_corpus(vocab)
        reversed_ds = Dataset(vocab, tuple(reversed(corpus.graphs)))
        assert build_frequency_table(corpus).counts == build_frequency_table(reversed_ds).counts

    def test_json_round_trip(self, vocab):
        table = build_frequency_table(toy_corpus(vocab))
        again = TripletFrequencyTable.from_json_obj(table.to_json_obj())
        assert again.counts == table.counts


class TestShotSubsets:
    def make_table(self, spec):
        return TripletFrequencyTable({Triplet(*t): c for t, c in spec.items()})

    def test_boundaries(self, vocab):
        # counts 0 / 10 / 11 / 100 / 101 land in zero / few10 / few100 / few100 / nowhere
        table = self.make_table(
            {
                (PERSON, ON, SURFBOARD): 10,
                (DOG, ON, SURFBOARD): 11,
                (WAVE, ABOVE, PERSON): 100,
                (CAT, ON, SURFBOARD): 101,
            }
        )
        test = dataset_of(
            vocab,
            make_graph("t1", [PERSON, SURFBOARD, DOG, CAT, WAVE],
                       [(0, ON, 1), (2, ON, 1), (3, ON, 1), (4, ABOVE, 0), (0, 2, 3)]),
        )
        subsets = shot_subsets(test, table)
        assert subsets.zero.triplets == {Triplet(PERSON, 2, CAT)}
        assert subsets.few10.triplets == {Triplet(PERSON, ON, SURFBOARD)}
        assert subsets.few100.triplets == {
            Triplet(DOG, ON, SURFBOARD),
            Triplet(WAVE, ABOVE, PERSON),
        }
        # >100 triplet is in no shipped bucket but still in the all-shot set
        assert Triplet(CAT, ON, SURFBOARD) in subsets.all_shot.triplets

    def test_edges_filtered_nodes_kept(self, vocab):
        table = self.make_table({(PERSON, ON, SURFBOARD): 3})
        test = dataset_of(
            vocab,
            make_graph("t1", [PERSON, SURFBOARD, DOG], [(0, ON, 1), (2, ON, 1)]),
        )
        subsets = shot_subsets(test, table)
        zs_graph = subsets.zero.dataset.graphs[0]
        assert zs_graph.num_nodes == 3  # full node list kept for object scoring
        assert [tuple(t) for t in categorical_triplets(zs_graph)] == [(DOG, ON, SURFBOARD)]
        few10_graph = subsets.few10.dataset.graphs[0]
        assert [tuple(t) for t in categorical_triplets(few10_graph)] == [(PERSON, ON, SURFBOARD)]

    def test_graphs_without_bucket_triplets_dropped(self, vocab):
        table = self.make_table({(PERSON, ON, SURFBOARD): 3})
        test = dataset_of(
            vocab,
            make_graph("seen", [PERSON, SURFBOARD], [(0, ON, 1)]),
            make_graph("unseen", [DOG, CAT], [(0, ON, 1)]),
        )
        subsets = shot_subsets(test, table)
        assert [g.image_id for g in subsets.zero.dataset.graphs] == ["unseen"]
        assert [g.image_id for g in subsets.few10.dataset.graphs] == ["seen"]
        assert len(subsets.all_shot.dataset) == 2

    def test_buckets_partition_test_triplets(self, vocab):
        rng = np.random.default_rng(7)
        train_graphs = [
            make_graph(
                f"tr{i}",
                rng.integers(0, 5, size=3).tolist(),
                [(0, int(rng.integers(0, 3)), 1), (1, int(rng.integers(0, 3)), 2)],
            )
            for i in range(30)
        ]
        test_graphs = [
            make_graph(
                f"te{i}",
                rng.integers(0, 5, size=3).tolist(),
                [(0, int(rng.integers(0, 3)), 1), (2, int(rng.integers(0, 3)), 0)],
            )
            for i in range(20)
        ]
        train = dataset_of(vocab, *train_graphs)
        test = dataset_of(vocab, *test_graphs)
        table = build_frequency_table(train)
        subsets = shot_subsets(test, table)
        for graph in test.graphs:
            for t in categorical_triplets(graph):
                memberships = [
                    t in subsets.zero.triplets,
                    t in subsets.few10.triplets,
                    t in subsets.few100.triplets,
                    table.count(t) > 100,
                ]
                assert sum(memberships) == 1


class TestPredicateFrequencies:
    def test_single_edge(self, vocab):
        ds = dataset_of(vocab, make_graph("a", [PERSON, DOG], [(0, ABOVE, 1)]))
        f = predicate_frequencies(ds)
        assert f.tolist() == [0.0, 1.0, 0.0]

    def test_three_to_one(self, vocab):
        ds = dataset_of(
            vocab,
            make_graph("a", [PERSON, DOG], [(0, ON, 1), (1, ON, 0), (0, ON, 1), (0, ABOVE, 1)]),
        )
        f = predicate_frequencies(ds)
        assert f.tolist() == [0.75, 0.25, 0.0]

    def test_matches_brute_force_and_sums_to_one(self, vocab):
        corpus = toy_corpus(vocab)
        f = predicate_frequencies(corpus)
        counts = Counter(e.predicate for g in corpus.graphs for e in g.edges)
        total = sum(counts.values())
        for p in range(vocab.num_predicates):
            assert f[p] == pytest.approx(counts.get(p, 0) / total)
        assert abs(f.sum() - 1.0) < 1e-12


class TestMarginals:
    def test_object_fractions(self, vocab):
        ds = dataset_of(vocab, make_graph("a", [PERSON, PERSON, PERSON, DOG], []))
        obj, _ = marginal_distributions(ds)
        assert obj.normalized()[PERSON] == pytest.approx(0.75)
        assert obj.normalized()[DOG] == pytest.approx(0.25)

    def test_empty_dataset(self, vocab):
        obj, pred = marginal_distributions(Dataset(vocab, ()))
        assert obj.total == 0 and pred.total == 0

    def test_zero_shot_subset_shares_top_categories_with_full_test(self):
        # Long-tailed synthetic corpus: the dominant categories also dominate
        # among unseen compositions, so top entries of both histograms agree.
        num_obj, num_pred = 12, 6
        vocab = Vocabulary(
            tuple(f"o{i}" for i in range(num_obj)),
            tuple(f"p{i}" for i in range(num_pred)),
        )
        rng = np.random.default_rng(0)
        obj_p = 1.0 / np.arange(1, num_obj + 1)
        obj_p /= obj_p.sum()
        pred_p = 1.0 / np.arange(1, num_pred + 1)
        pred_p /= pred_p.sum()

        def sample_graph(name):
            cats = rng.choice(num_obj, size=3, p=obj_p).tolist()
            edges = [
                (0, int(rng.choice(num_pred, p=pred_p)), 1),
                (1, int(rng.choice(num_pred, p=pred_p)), 2),
            ]
            return make_graph(name, cats, edges)

        train = dataset_of(vocab, *(sample_graph(f"tr{i}") for i in range(400)))
        test = dataset_of(vocab, *(sample_graph(f"te{i}") for i in range(400)))
        subsets = shot_subsets(test, build_frequency_table(train))
        assert len(subsets.zero.dataset) > 20

        obj_full, pred_full = marginal_distributions(test)
        obj_zs, pred_zs = marginal_distributions(subsets.zero.dataset)
        top = lambda h, k: {name for name, _, _ in h.top_k(k)}
        assert top(obj_full, 3) & top(obj_zs, 3)
        assert top(pred_full, 2) == top(pred_zs, 2)
