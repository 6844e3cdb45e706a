import json

import numpy as np
import pytest

from mfcf.forest import (AdjacencyView, CliqueForest, ForestError,
                         add_seed_clique, clique_expand, edge_count_identity,
                         first_violation, forest_from_dict, forest_to_dict,
                         is_chordal, is_perfect_elimination,
                         perfect_elimination_order, to_adjacency,
                         validate_perfect_sequence)


def seeded(members, p):
    forest = CliqueForest(p=p)
    add_seed_clique(forest, members)
    return forest


class TestCliqueExpand:
    def test_general_case_creates_clique_and_separator(self):
        forest = seeded([1, 2, 3, 4], p=6)
        idx = clique_expand(forest, 0, 5, (1, 2))
        assert forest.cliques[idx] == (1, 2, 5)
        assert forest.separators == [(1, 2)]
        assert forest.tree_edges == [(0, 1, 0)]
        assert forest.vertex_order[-1] == 5

    def test_empty_separator_starts_disconnected_root(self):
        forest = seeded([1, 2, 3, 4], p=6)
        idx = clique_expand(forest, 0, 5, ())
        assert forest.cliques[idx] == (5,)
        assert forest.separators == []
        assert forest.tree_edges == []

    def test_full_separator_extends_in_place(self):
        forest = seeded([1, 2, 3, 4], p=6)
        idx = clique_expand(forest, 0, 5, (1, 2, 3, 4))
        assert idx == 0
        assert forest.cliques == [(1, 2, 3, 4, 5)]
        assert forest.separators == []

    def test_vertex_already_placed_rejected(self):
        forest = seeded([1, 2], p=4)
        clique_expand(forest, 0, 3, (1,))
        with pytest.raises(ForestError, match="not isolated"):
            clique_expand(forest, 0, 3, (2,))

    def test_separator_not_subset_rejected(self):
        forest = seeded([1, 2], p=5)
        with pytest.raises(ForestError, match="invalid separator"):
            clique_expand(forest, 0, 4, (3,))

    def test_parent_is_earliest_clique_containing_separator(self):
        forest = seeded([0, 1, 2], p=6)
        clique_expand(forest, 0, 3, (0, 1))   # clique 1 = {0,1,3}
        clique_expand(forest, 1, 4, (0, 1))   # separator also inside clique 0
        assert forest.tree_edges[-1][0] == 0


class TestToAdjacency:
    def test_single_clique_complete(self):
        forest = seeded([0, 1, 2], p=3)
        assert to_adjacency(forest).edges == {(0, 1), (0, 2), (1, 2)}

    def test_disjoint_cliques(self):
        forest = seeded([0, 1], p=4)
        clique_expand(forest, 0, 2, ())
        clique_expand(forest, 1, 3, (2,))
        assert to_adjacency(forest).edges == {(0, 1), (2, 3)}

    def test_overlapping_cliques_share_edges(self):
        forest = seeded([0, 1, 2], p=4)
        clique_expand(forest, 0, 3, (1, 2))
        edges = to_adjacency(forest).edges
        assert len(edges) == 5
        assert (0, 3) not in edges


class TestIsChordal:
    def test_complete_graph(self):
        edges = {(a, b) for a in range(5) for b in range(a + 1, 5)}
        assert is_chordal(AdjacencyView(5, edges))

    def test_four_cycle_not_chordal(self):
        g = AdjacencyView(4, {(0, 1), (1, 2), (2, 3), (0, 3)})
        assert not is_chordal(g)

    def test_four_cycle_with_chord(self):
        g = AdjacencyView(4, {(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)})
        assert is_chordal(g)

    def test_six_cycle_not_chordal(self):
        g = AdjacencyView(6, {(i, (i + 1) % 6) if i < 5 else (0, 5)
                              for i in range(6)})
        assert not is_chordal(g)

    def test_empty_graph(self):
        assert is_chordal(AdjacencyView(4, set()))

    def test_random_expansion_sequences_always_chordal(self):
        # Property: anything reachable through clique_expand stays chordal.
        rng = np.random.default_rng(7)
        for _ in range(200):
            p = int(rng.integers(2, 14))
            forest = seeded([int(rng.integers(p))], p=p)
            for v in range(p):
                if v in forest.placed():
                    continue
                ci = int(rng.integers(len(forest.cliques)))
                clique = forest.cliques[ci]
                s = int(rng.integers(0, len(clique) + 1))
                sep = tuple(sorted(
                    int(clique[i])
                    for i in rng.choice(len(clique), size=s, replace=False)))
                clique_expand(forest, ci, v, sep)
            assert is_chordal(to_adjacency(forest))
            assert validate_perfect_sequence(forest)
            assert first_violation(forest) is None


class TestPerfectSequence:
    def test_figure_example(self):
        forest = seeded([1, 2, 3, 4], p=6)
        clique_expand(forest, 0, 5, (1, 2))
        assert validate_perfect_sequence(forest)

    def test_broken_running_intersection(self):
        bad = CliqueForest(p=5, cliques=[(1, 2), (3, 4), (1, 3)],
                           separators=[(1,)], tree_edges=[(0, 2, 0)],
                           vertex_order=[1, 2, 3, 4])
        assert not validate_perfect_sequence(bad)

    def test_single_clique_vacuous(self):
        assert validate_perfect_sequence(seeded([0, 1], p=2))

    def test_tree_edge_separator_must_match_intersection(self):
        forest = seeded([0, 1, 2], p=4)
        clique_expand(forest, 0, 3, (0, 1))
        forest.separators[0] = (0,)
        assert not validate_perfect_sequence(forest)


class TestPerfectElimination:
    def test_reverse_of_insertion_order(self):
        forest = seeded([1, 2, 3, 4], p=5)
        clique_expand(forest, 0, 0, (1, 2))
        assert perfect_elimination_order(forest) == [0, 4, 3, 2, 1]

    def test_incomplete_forest_rejected(self):
        forest = seeded([0, 1], p=3)
        with pytest.raises(ForestError, match="incomplete"):
            perfect_elimination_order(forest)

    def test_elimination_order_is_simplicial(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            p = int(rng.integers(3, 15))
            forest = seeded([int(rng.integers(p))], p=p)
            for v in range(p):
                if v in forest.placed():
                    continue
                ci = int(rng.integers(len(forest.cliques)))
                clique = forest.cliques[ci]
                s = int(rng.integers(1, len(clique) + 1))
                sep = tuple(sorted(
                    int(clique[i])
                    for i in rng.choice(len(clique), size=s, replace=False)))
                clique_expand(forest, ci, v, sep)
            order = perfect_elimination_order(forest)
            assert is_perfect_elimination(to_adjacency(forest), order)


def test_edge_count_matches_inclusion_exclusion():
    rng = np.random.default_rng(11)
    for _ in range(50):
        p = int(rng.integers(2, 16))
        forest = seeded([int(rng.integers(p))], p=p)
        for v in range(p):
            if v in forest.placed():
                continue
            ci = int(rng.integers(len(forest.cliques)))
            clique = forest.cliques[ci]
            s = int(rng.integers(1, len(clique) + 1))
            sep = tuple(sorted(
                int(clique[i])
                for i in rng.choice(len(clique), size=s, replace=False)))
            clique_expand(forest, ci, v, sep)
        assert len(to_adjacency(forest).edges) == edge_count_identity(forest)


def test_cliques_remain_maximal_under_expansion():
    rng = np.random.default_rng(13)
    for _ in range(50):
        p = int(rng.integers(3, 14))
        forest = seeded([int(rng.integers(p))], p=p)
        for v in range(p):
            if v in forest.placed():
                continue
            ci = int(rng.integers(len(forest.cliques)))
            clique = forest.cliques[ci]
            s = int(rng.integers(1, len(clique) + 1))
            sep = tuple(sorted(
                int(clique[i])
                for i in rng.choice(len(clique), size=s, replace=False)))
            clique_expand(forest, ci, v, sep)
        sets = [set(c) for c in forest.cliques]
        for i, a in enumerate(sets):
            for j, b in enumerate(sets):
                if i != j:
                    assert not a <= b


def test_json_round_trip_identical():
    forest = seeded([1, 2, 3, 4], p=6)
    clique_expand(forest, 0, 5, (1, 2))
    clique_expand(forest, 0, 0, ())
    d = forest_to_dict(forest)
    again = forest_from_dict(json.loads(json.dumps(d)))
    assert again.cliques == forest.cliques
    assert again.separators == forest.separators
    assert again.tree_edges == forest.tree_edges
    assert again.vertex_order == forest.vertex_order
    assert forest_to_dict(again) == d


def test_malformed_dict_raises():
    with pytest.raises(ForestError):
        forest_from_dict({"p": 3})
