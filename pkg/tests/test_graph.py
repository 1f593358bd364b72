import json
from itertools import combinations

import numpy as np
import pytest

from causalpath.graph import (
    ARROW,
    CIRCLE,
    TAIL,
    BackgroundKnowledge,
    GraphError,
    MixedGraph,
    NoExtensionError,
    apply_meek_rules,
    consistent_extension,
    cpdag_of,
    d_separated,
    is_dag,
    knowledge_violations,
    simplify_by_weight,
    structural_hamming_distance,
    to_dot,
)

from oracles import (
    build_dag,
    compelled_orientations,
    cpdag_bruteforce,
    d_separated_bruteforce,
    enumerate_dags,
    has_cycle_dfs,
    random_dag_edges,
)


def chain():
    g = MixedGraph(["A", "B", "C"])
    g.add_directed("A", "B")
    g.add_directed("B", "C")
    return g


def collider():
    g = MixedGraph(["A", "B", "C"])
    g.add_directed("A", "B")
    g.add_directed("C", "B")
    return g


class TestMixedGraph:
    def test_marks_and_queries(self):
        g = MixedGraph(["a", "b", "c"], kind="pag")
        g.add_edge("a", "b", CIRCLE, ARROW)
        g.add_bidirected("b", "c")
        assert g.mark_at("a", "b") == CIRCLE
        assert g.mark_at("b", "a") == ARROW
        assert g.is_bidirected("b", "c")
        assert not g.is_directed("a", "b")
        assert g.adjacent("b") == ["a", "c"]

    def test_one_edge_per_pair_and_no_self_loops(self):
        g = MixedGraph(["a", "b"])
        g.add_directed("a", "b")
        with pytest.raises(GraphError):
            g.add_directed("b", "a")
        with pytest.raises(GraphError):
            g.add_directed("a", "a")

    def test_json_roundtrip(self):
        g = collider()
        g.set_weight("A", "B", 0.4)
        g2 = MixedGraph.from_json(g.to_json())
        assert g == g2

    def test_equality_ignores_node_order(self):
        g1 = MixedGraph(["a", "b"])
        g1.add_directed("a", "b")
        g2 = MixedGraph(["b", "a"])
        g2.add_directed("a", "b")
        assert g1 == g2


class TestIsDag:
    def test_empty_graph(self):
        assert is_dag(MixedGraph(["A", "B", "C"]))

    def test_two_cycle_rejected(self):
        # A->B plus B->A cannot even be built (one edge per pair); check a
        # 3-cycle instead plus the direct mark check
        g = MixedGraph(["A", "B", "C"])
        g.add_directed("A", "B")
        g.add_directed("B", "C")
        g.add_directed("C", "A")
        assert not is_dag(g)

    def test_undirected_edge_disqualifies(self):
        g = MixedGraph(["A", "B"])
        g.add_undirected("A", "B")
        assert not is_dag(g)

    def test_against_dfs_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            p = int(rng.integers(2, 8))
            nodes = [f"X{i:02d}" for i in range(p)]
            # arbitrary directed graphs, not necessarily acyclic
            edges = []
            built = MixedGraph(nodes)
            for a, b in combinations(nodes, 2):
                r = rng.random()
                if r < 0.25:
                    built.add_directed(a, b)
                    edges.append((a, b))
                elif r < 0.5:
                    built.add_directed(b, a)
                    edges.append((b, a))
            assert is_dag(built) == (not has_cycle_dfs(nodes, edges))


class TestDSeparation:
    def test_chain_blocked_by_middle(self):
        assert d_separated(chain(), "A", "C", ["B"])
        assert not d_separated(chain(), "A", "C")

    def test_collider_opens_when_conditioned(self):
        g = collider()
        assert d_separated(g, "A", "C")
        assert not d_separated(g, "A", "C", ["B"])

    def test_collider_descendant_opens_path(self):
        g = MixedGraph(["A", "B", "C", "D"])
        g.add_directed("A", "B")
        g.add_directed("C", "B")
        g.add_directed("B", "D")
        assert not d_separated(g, "A", "C", ["D"])

    def test_unknown_node(self):
        with pytest.raises(GraphError):
            d_separated(chain(), "A", "Z")

    def test_matches_path_enumeration_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            p = int(rng.integers(3, 8))
            nodes, edges = random_dag_edges(p, float(rng.choice([0.2, 0.4, 0.6])), rng)
            g = build_dag(nodes, edges)
            names = sorted(nodes)
            for x, y in combinations(names, 2):
                rest = [v for v in names if v not in (x, y)]
                for r in range(min(3, len(rest)) + 1):
                    for zs in combinations(rest, r):
                        assert d_separated(g, x, y, zs) == d_separated_bruteforce(g, x, y, zs), (
                            edges, x, y, zs)


class TestMeekRules:
    def test_rule1_example(self):
        g = MixedGraph(["A", "B", "C"], "cpdag")
        g.add_directed("A", "B")
        g.add_undirected("B", "C")
        out = apply_meek_rules(g)
        assert out.is_directed("B", "C")

    def test_undirected_triangle_unchanged(self):
        g = MixedGraph(["A", "B", "C"], "cpdag")
        g.add_undirected("A", "B")
        g.add_undirected("B", "C")
        g.add_undirected("A", "C")
        assert apply_meek_rules(g) == g

    def test_idempotent_and_monotone(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            p = int(rng.integers(3, 7))
            nodes, edges = random_dag_edges(p, 0.4, rng)
            pattern = cpdag_of(build_dag(nodes, edges))
            closed = apply_meek_rules(pattern)
            assert apply_meek_rules(closed) == closed
            for a, b in pattern.directed_edges():
                assert closed.is_directed(a, b)

    def test_matches_extension_enumeration(self):
        # the oriented edges after closure are exactly those shared by all
        # consistent DAG extensions of the v-structure pattern
        rng = np.random.default_rng(5)
        for _ in range(30):
            p = int(rng.integers(3, 6))
            nodes, edges = random_dag_edges(p, 0.5, rng)
            dag = build_dag(nodes, edges)
            pattern = MixedGraph(sorted(nodes), "cpdag")
            for a, b, _, _ in dag.edges():
                pattern.add_undirected(a, b)
            for v in nodes:
                for x, y in combinations(sorted(dag.parents(v)), 2):
                    if not dag.has_edge(x, y):
                        pattern.orient(x, v)
                        pattern.orient(y, v)
            closed = apply_meek_rules(pattern)
            oracle = compelled_orientations(pattern)
            for pair, compelled in oracle.items():
                a, b = pair
                if compelled is None:
                    assert closed.is_undirected(a, b)
                else:
                    assert closed.is_directed(*compelled)

    def test_forbidden_orientation_skipped(self):
        g = MixedGraph(["A", "B", "C"], "cpdag")
        g.add_directed("A", "B")
        g.add_undirected("B", "C")
        bk = BackgroundKnowledge(forbidden=[("B", "C")])
        conflicts = []
        out = apply_meek_rules(g, bk, conflicts)
        assert out.is_undirected("B", "C")
        assert conflicts


class TestCpdagOf:
    def test_chain_is_fully_undirected(self):
        c = cpdag_of(chain())
        assert c.is_undirected("A", "B") and c.is_undirected("B", "C")

    def test_collider_is_compelled(self):
        c = cpdag_of(collider())
        assert c.is_directed("A", "B") and c.is_directed("C", "B")

    def test_matches_equivalence_class_union_p4(self):
        nodes = ["X00", "X01", "X02", "X03"]
        count = 0
        for edges in enumerate_dags(nodes):
            count += 1
            if count % 7:  # subsample for speed; still covers 78 DAGs
                continue
            assert cpdag_of(build_dag(nodes, edges)) == cpdag_bruteforce(nodes, edges)

    def test_same_cpdag_iff_same_dsep_statements(self):
        # exhaustive over all DAGs on 3 nodes
        from oracles import all_dsep_statements

        nodes = ["X00", "X01", "X02"]
        dags = [build_dag(nodes, e) for e in enumerate_dags(nodes)]
        assert len(dags) == 25
        cpdags = [cpdag_of(g) for g in dags]
        dseps = [frozenset(all_dsep_statements(g)) for g in dags]
        for i in range(len(dags)):
            for j in range(i + 1, len(dags)):
                assert (cpdags[i] == cpdags[j]) == (dseps[i] == dseps[j])


class TestConsistentExtension:
    def test_single_undirected_edge_tiebreak(self):
        g = MixedGraph(["A", "B"], "cpdag")
        g.add_undirected("A", "B")
        assert consistent_extension(g).is_directed("A", "B")

    def test_vstructure_passthrough(self):
        c = cpdag_of(collider())
        assert consistent_extension(c) == collider()

    def test_roundtrip_property(self):
        rng = np.random.default_rng(13)
        for _ in range(60):
            p = int(rng.integers(2, 8))
            nodes, edges = random_dag_edges(p, 0.4, rng)
            c = cpdag_of(build_dag(nodes, edges))
            ext = consistent_extension(c)
            assert is_dag(ext)
            assert cpdag_of(ext) == c

    def test_no_extension_reports_node(self):
        # a chordless undirected 4-cycle: every acyclic orientation creates a
        # new v-structure at some corner, so no consistent extension exists
        g = MixedGraph(["A", "B", "C", "D"], "cpdag")
        g.add_undirected("A", "B")
        g.add_undirected("B", "C")
        g.add_undirected("C", "D")
        g.add_undirected("D", "A")
        with pytest.raises(NoExtensionError) as err:
            consistent_extension(g)
        assert err.value.node in {"A", "B", "C", "D"}


class TestShd:
    def test_identical(self):
        assert structural_hamming_distance(chain(), chain()) == 0

    def test_flipped_edge(self):
        g1 = MixedGraph(["A", "B"])
        g1.add_directed("A", "B")
        g2 = MixedGraph(["A", "B"])
        g2.add_directed("B", "A")
        assert structural_hamming_distance(g1, g2) == 1

    def test_missing_edge(self):
        g1 = MixedGraph(["A", "B", "C"])
        g1.add_directed("A", "B")
        assert structural_hamming_distance(g1, chain()) == 1

    def test_node_mismatch(self):
        with pytest.raises(GraphError):
            structural_hamming_distance(chain(), MixedGraph(["A", "B"]))


class TestSimplifyByWeight:
    def test_paper_threshold_convention(self):
        g = MixedGraph(["a", "b", "c", "d"], "weighted-dag")
        g.add_directed("a", "b", weight=0.3)
        g.add_directed("a", "c", weight=-0.26)
        g.add_directed("a", "d", weight=0.1)
        out = simplify_by_weight(g, 0.25)
        assert out.edge_count == 2
        assert out.has_edge("a", "b") and out.has_edge("a", "c")

    def test_zero_threshold_identity(self):
        g = MixedGraph(["a", "b"], "weighted-dag")
        g.add_directed("a", "b", weight=0.7)
        assert simplify_by_weight(g, 0.0) == g

    def test_all_below_threshold(self):
        g = MixedGraph(["a", "b"], "weighted-dag")
        g.add_directed("a", "b", weight=0.1)
        assert simplify_by_weight(g, 0.25).edge_count == 0


class TestBackgroundKnowledge:
    def test_tier_forbids_backward(self):
        bk = BackgroundKnowledge(tiers=[["a"], ["b"]])
        assert bk.is_forbidden("b", "a")
        assert not bk.is_forbidden("a", "b")

    def test_required_forbidden_overlap_rejected(self):
        with pytest.raises(GraphError):
            BackgroundKnowledge(forbidden=[("a", "b")], required=[("a", "b")])

    def test_required_cycle_rejected(self):
        with pytest.raises(GraphError):
            BackgroundKnowledge(required=[("a", "b"), ("b", "a")])

    def test_violation_audit(self):
        g = MixedGraph(["a", "b", "c"])
        g.add_directed("b", "a")
        bk = BackgroundKnowledge(tiers=[["a"], ["b"]], required=[("a", "c")])
        v = knowledge_violations(g, bk)
        assert any("forbidden" in s for s in v)
        assert any("required" in s for s in v)

    def test_json_roundtrip(self):
        bk = BackgroundKnowledge(tiers=[["a"], ["b", "c"]], forbidden=[("c", "b")])
        bk2 = BackgroundKnowledge.from_json_dict(bk.to_json_dict())
        assert bk2.to_json_dict() == bk.to_json_dict()


class TestDot:
    def test_edge_conventions(self):
        g = MixedGraph(["a", "b", "c", "d"], "pag")
        g.add_directed("a", "b")
        g.add_undirected("b", "c")
        g.add_bidirected("c", "d")
        g.add_edge("a", "d", CIRCLE, ARROW)
        text = to_dot(g)
        assert '"a" -> "b";' in text
        assert "dir=none" in text
        assert "dir=both" in text
        assert "odot" in text

    def test_weight_colors(self):
        g = MixedGraph(["a", "b", "c"], "weighted-dag")
        g.add_directed("a", "b", weight=0.5)
        g.add_directed("a", "c", weight=-0.5)
        text = to_dot(g)
        assert "color=blue" in text and "color=red" in text
        assert 'label="0.500"' in text

    def test_json_export_parses(self):
        g = chain()
        data = json.loads(g.to_json())
        assert data["nodes"] == ["A", "B", "C"]
        assert len(data["edges"]) == 2
