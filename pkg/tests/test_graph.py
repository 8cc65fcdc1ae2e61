import json

import pytest

from joinscope.graph import build_graph, dump_edges
from joinscope.similarity import ALL_SIGNALS, SignalType, SimilarityRecord


def record(a, b, score=0.0, **per_signal):
    scores = {s: score for s in ALL_SIGNALS}
    for name, v in per_signal.items():
        scores[SignalType(name)] = v
    return SimilarityRecord(a, b, scores)


class TestBuildGraph:
    def test_k_below_one_rejected(self):
        with pytest.raises(ValueError, match="k must be"):
            build_graph([record(0, 1, 0.5)], 0)

    def test_union_keeps_weaker_endpoints_choice(self):
        # node 0's best is 1, but 0 is still node 2's best available partner,
        # so (0, 2) survives k=1 through the union rule
        records = [
            record(0, 1, jaccard_full=0.9),
            record(0, 2, jaccard_full=0.4),
            record(1, 2, jaccard_full=0.3),
        ]
        g = build_graph(records, 1, n_nodes=3)
        kept = set(g.edges[SignalType.JACCARD_FULL])
        assert kept == {(0, 1), (0, 2)}

    def test_zero_score_candidates_excluded(self):
        records = [record(0, 1, jaccard_full=0.0), record(0, 2, jaccard_full=0.2)]
        g = build_graph(records, 3, n_nodes=3)
        assert set(g.edges[SignalType.JACCARD_FULL]) == {(0, 2)}

    def test_relations_are_independent(self):
        records = [
            record(0, 1, jaccard_full=0.9),
            record(0, 2, distribution_js=0.8),
        ]
        g = build_graph(records, 1, n_nodes=3)
        assert set(g.edges[SignalType.JACCARD_FULL]) == {(0, 1)}
        assert set(g.edges[SignalType.DISTRIBUTION_JS]) == {(0, 2)}

    def test_score_tie_breaks_toward_smaller_partner_id(self):
        records = [record(0, 1, jaccard_full=0.5), record(0, 2, jaccard_full=0.5)]
        g = build_graph(records, 1, n_nodes=3)
        # node 0 picks partner 1; nodes 1 and 2 each pick node 0, so both edges stay
        assert set(g.edges[SignalType.JACCARD_FULL]) == {(0, 1), (0, 2)}
        g4 = build_graph(records + [record(1, 2, jaccard_full=0.9)], 1, n_nodes=3)
        assert (0, 1) in g4.edges[SignalType.JACCARD_FULL]

    def test_neighbors_sorted_with_scores(self):
        records = [record(0, 2, jaccard_full=0.2), record(0, 1, jaccard_full=0.7)]
        g = build_graph(records, 2, n_nodes=3)
        assert g.neighbors(0, SignalType.JACCARD_FULL) == [(1, 0.7), (2, 0.2)]

    def test_degree_sums_over_relations(self):
        records = [record(0, 1, jaccard_full=0.5, distribution_js=0.5)]
        g = build_graph(records, 1, n_nodes=2)
        assert g.degree(0) == 2
        assert g.degree(1) == 2


def random_records(rng, n_nodes, n_tables, zero_fraction=0.3):
    table_of = [rng.randint(n_tables) for _ in range(n_nodes)]
    records = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if table_of[i] == table_of[j]:
                continue
            scores = {s: (0.0 if rng.rand() < zero_fraction else float(rng.rand()))
                      for s in ALL_SIGNALS}
            records.append(SimilarityRecord(i, j, scores))
    return records, table_of


class TestInvariants:
    def test_top_k_presence_no_zero_edges_determinism(self, rng):
        for trial in range(10):
            n_nodes = rng.randint(6, 14)
            records, table_of = random_records(rng, n_nodes, 4)
            for k in range(1, 6):
                g = build_graph(records, k, n_nodes=n_nodes)
                again = build_graph(records, k, n_nodes=n_nodes)
                assert g.edges == again.edges
                for rel in ALL_SIGNALS:
                    for (u, v), score in g.edges[rel].items():
                        assert score > 0
                        assert table_of[u] != table_of[v]
                    # every node's top-min(k, candidates) partners must be present
                    for i in range(n_nodes):
                        cands = []
                        for r in records:
                            if r.scores[rel] <= 0:
                                continue
                            if r.node_a == i:
                                cands.append((-r.scores[rel], r.node_b))
                            elif r.node_b == i:
                                cands.append((-r.scores[rel], r.node_a))
                        cands.sort()
                        for _, j in cands[:k]:
                            key = (i, j) if i < j else (j, i)
                            assert key in g.edges[rel]

    def test_larger_k_keeps_superset_of_edges(self, rng):
        records, _ = random_records(rng, 10, 3)
        prev = None
        for k in range(1, 6):
            g = build_graph(records, k, n_nodes=10)
            edges = {rel: set(g.edges[rel]) for rel in ALL_SIGNALS}
            if prev is not None:
                for rel in ALL_SIGNALS:
                    assert prev[rel] <= edges[rel]
            prev = edges


class TestDump:
    def test_edges_written_as_json_lines(self, tmp_path):
        g = build_graph([record(0, 1, jaccard_full=0.5)], 1, n_nodes=2)
        path = tmp_path / "edges.jsonl"
        dump_edges(g, path)
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert {"u": 0, "v": 1, "relation": "jaccard_full", "score": 0.5} in lines
