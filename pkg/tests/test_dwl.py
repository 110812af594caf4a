import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwlkit.dwl import (
    NODE_A,
    NODE_B,
    NODE_C,
    NODE_D,
    NODE_E,
    ColorTable,
    Coloring,
    Verdict,
    dwl_distinguish,
    dwl_refine,
    dwl_refine_many,
    dygnn_sim,
    hopedgn_symbolic,
    merge_colorings,
    refines,
    same_partition,
    sim_pair_color,
    static_wl1,
    twin_paths_graph,
    wl1_distinguish,
)
from dwlkit.harness.generators import random_dynamic_graph, random_graph_pair
from dwlkit.temporal_graph import DynamicGraph, Event, brute_force_isomorphic_until

T4 = 4.0


def graph(n, triples, feats=None):
    return DynamicGraph(n, [Event(u, v, t) for u, v, t in triples], feats)


def pairs_of(seed, count):
    rng = np.random.default_rng(seed)
    return [random_graph_pair(rng) for _ in range(count)]


# -- colour table ------------------------------------------------------------


def test_color_table_injective_audit():
    rng = random.Random(0)
    table = ColorTable()
    seen: dict = {}
    for _ in range(100_000):
        sig = (rng.randrange(50), tuple(rng.randrange(4) for _ in range(rng.randrange(4))), rng.random() < 0.5)
        cid = table(sig)
        assert seen.setdefault(sig, cid) == cid
    assert len(set(seen.values())) == len(seen) == len(table)
    assert sorted(seen.values()) == list(range(len(table)))


def test_color_table_insertion_order():
    table = ColorTable()
    assert [table("x"), table("y"), table("x"), table(("x",))] == [0, 1, 0, 2]
    assert table.next_id == 3
    assert "y" in table and "z" not in table


# -- partition helpers -------------------------------------------------------


def test_same_partition_and_refines():
    a = {0: 5, 1: 5, 2: 7}
    b = {0: 1, 1: 1, 2: 0}
    c = {0: 1, 1: 2, 2: 0}
    assert same_partition(a, b)
    assert not same_partition(a, c)
    assert refines(c, a) and not refines(a, c)
    with pytest.raises(ValueError):
        same_partition(a, {0: 1})


# -- 1-DWL -------------------------------------------------------------------


def test_single_node_stable_after_one_round():
    col = dwl_refine(graph(1, []), 1.0)
    assert col.stable and col.rounds_run == 1
    assert col.num_classes() == 1


def test_refine_rejects_k3():
    with pytest.raises(ValueError):
        dwl_refine(graph(2, []), 1.0, k=3)


def test_refine_rejects_unknown_multiplicity():
    with pytest.raises(ValueError):
        dwl_refine(graph(2, []), 1.0, multiplicity="twice")


def test_twin_paths_one_dwl_merges_c_and_d():
    col = dwl_refine(twin_paths_graph(), T4)
    assert col.stable
    for j in range(col.rounds_run + 1):
        assert col.at(j)[NODE_C] == col.at(j)[NODE_D]
    assert col.at(50)[NODE_C] == col.at(50)[NODE_D]


def test_twin_paths_two_dwl_splits_pairs_by_round_one():
    col = dwl_refine(twin_paths_graph(), T4, k=2)
    assert col.rounds[0][(NODE_A, NODE_C)] == col.rounds[0][(NODE_A, NODE_D)]
    assert col.rounds[1][(NODE_A, NODE_C)] != col.rounds[1][(NODE_A, NODE_D)]
    assert col.final[(NODE_A, NODE_C)] != col.final[(NODE_A, NODE_D)]


def test_twin_paths_oracle_confirms_pair_non_isomorphism():
    g = twin_paths_graph()
    assert not brute_force_isomorphic_until(g, g, T4, pin={NODE_A: NODE_A, NODE_C: NODE_D})
    # the nodes on their own are automorphic
    assert brute_force_isomorphic_until(g, g, T4, pin={NODE_C: NODE_D})


def test_twin_paths_rejects_bad_times():
    with pytest.raises(ValueError):
        twin_paths_graph(2.0, 1.0)


def test_distinguish_identical():
    g = random_dynamic_graph(5, 8, seed=1)
    for k in (1, 2):
        v = dwl_distinguish(g, g, 11.0, k=k)
        assert v == Verdict(False, v.round) and v.name == "PossiblyIsomorphic"


def test_distinguish_shifted_timestamp():
    v = dwl_distinguish(graph(2, [(0, 1, 1.0)]), graph(2, [(0, 1, 2.0)]), 3.0, k=1)
    assert v == Verdict(True, 1)
    assert v.to_dict() == {"verdict": "NonIsomorphic", "round": 1}


def test_distinguish_node_count_mismatch():
    v = dwl_distinguish(graph(2, []), graph(3, []), 1.0)
    assert v == Verdict(True, 0)


def test_distinguish_ignores_future_events():
    gA = graph(3, [(0, 1, 1.0), (1, 2, 5.0)])
    gB = graph(3, [(0, 1, 1.0), (0, 2, 6.0)])
    assert not dwl_distinguish(gA, gB, 2.0).non_isomorphic
    assert dwl_distinguish(gA, gB, 7.0).non_isomorphic


def test_verdict_first_differing_round():
    for gA, gB, t in pairs_of(11, 40):
        cols = dwl_refine_many([gA, gB], t, k=1)
        v = dwl_distinguish(gA, gB, t)
        if v.non_isomorphic:
            r = v.round
            assert cols[0].histogram(r) != cols[1].histogram(r)
            assert all(cols[0].histogram(j) == cols[1].histogram(j) for j in range(r))


def test_multiplicity_flag_matters():
    # u meets w twice, u' meets two distinct nodes once each at the same time;
    # with a single neighbour entry per node the first loses the repeat count
    gA = graph(3, [(0, 1, 1.0), (0, 1, 1.0)])
    gB = graph(3, [(0, 1, 1.0), (0, 2, 1.0)])
    assert dwl_distinguish(gA, gB, 2.0, multiplicity="event").non_isomorphic
    assert dwl_distinguish(gA, gB, 2.0, multiplicity="neighbor").non_isomorphic


@pytest.mark.parametrize("k", [1, 2])
def test_refinement_is_deterministic(k):
    g = random_dynamic_graph(5, 10, t_max=6, seed=4, discrete=True)
    a = dwl_refine(g, 4.5, k=k)
    b = dwl_refine(g, 4.5, k=k)
    assert a.rounds == b.rounds


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("seed", range(5))
def test_partitions_only_refine(k, seed):
    g = random_dynamic_graph(5, 9, t_max=6, seed=seed, discrete=True, feature_values=2)
    col = dwl_refine(g, 5.5, k=k, init="features")
    for j in range(col.rounds_run):
        assert refines(col.rounds[j + 1], col.rounds[j])


def test_max_rounds_zero():
    col = dwl_refine(twin_paths_graph(), T4, max_rounds=0)
    assert col.rounds_run == 0 and not col.stable
    with pytest.raises(IndexError):
        col.at(1)


# -- randomized properties ---------------------------------------------------


@pytest.mark.parametrize("seed", range(4))
def test_soundness_against_oracle(seed):
    for gA, gB, t in pairs_of(seed, 60):
        iso = brute_force_isomorphic_until(gA, gB, t)
        if iso:
            for k in (1, 2):
                assert not dwl_distinguish(gA, gB, t, k=k, init="features").non_isomorphic


@pytest.mark.parametrize("seed", range(4))
def test_hierarchy_one_refuted_implies_two_refuted(seed):
    for gA, gB, t in pairs_of(100 + seed, 60):
        if dwl_distinguish(gA, gB, t, k=1).non_isomorphic:
            assert dwl_distinguish(gA, gB, t, k=2).non_isomorphic


def test_pair_colour_determines_endpoint_node_colours():
    # the containment argument: equal 2-DWL pair colours force equal 1-DWL node colours
    for gA, gB, t in pairs_of(7, 30):
        nodes = dwl_refine_many([gA, gB], t, k=1, table=ColorTable())
        pairs = dwl_refine_many([gA, gB], t, k=2, table=ColorTable())
        n1, n2 = merge_colorings([c.final for c in nodes]), merge_colorings([c.final for c in pairs])
        endpoint = {(gi, (u, v)): (n1[(gi, u)], n1[(gi, v)]) for (gi, (u, v)) in n2}
        assert refines(n2, endpoint)


def test_pair_oracle_soundness_for_two_dwl():
    # pinned pair isomorphism implies equal 2-DWL pair colours
    rng = np.random.default_rng(3)
    checked = 0
    for gA, gB, t in pairs_of(21, 40):
        if gA.node_count != gB.node_count or gA.node_count < 2:
            continue
        cols = dwl_refine_many([gA, gB], t, k=2)
        for _ in range(3):
            u, v = (int(x) for x in rng.choice(gA.node_count, 2, replace=False))
            a, b = (int(x) for x in rng.choice(gB.node_count, 2, replace=False))
            if brute_force_isomorphic_until(gA, gB, t, pin={u: a, v: b}):
                checked += 1
                assert cols[0].final[(u, v)] == cols[1].final[(a, b)]
    assert checked > 0


# -- static 1-WL -------------------------------------------------------------


def test_static_path_of_three():
    col = static_wl1(graph(3, [(0, 1, 1.0), (1, 2, 2.0)]), rounds=1)
    c = col.rounds[1]
    assert c[0] == c[2] != c[1]


def test_static_two_triangles_vs_hexagon():
    tri = graph(6, [(0, 1, 1), (1, 2, 1), (2, 0, 1), (3, 4, 1), (4, 5, 1), (5, 3, 1)])
    hexagon = graph(6, [(i, (i + 1) % 6, 1) for i in range(6)])
    assert not wl1_distinguish(tri, hexagon).non_isomorphic


@pytest.mark.parametrize("seed", range(8))
def test_single_timestamp_dwl_matches_static(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    evs = [tuple(int(x) for x in rng.choice(n, 2, replace=False)) + (3.0,) for _ in range(rng.integers(1, 10))]
    g = graph(n, evs)
    dyn = dwl_refine(g, 5.0)
    stat = static_wl1(g, rounds=dyn.rounds_run)
    for j in range(dyn.rounds_run + 1):
        assert refines(dyn.at(j), stat.rounds[j])
        assert same_partition(dyn.at(j), stat.rounds[j])


# -- symbolic DyGNN ----------------------------------------------------------


def test_sim_zero_rounds_partitions_by_features():
    g = graph(4, [(0, 1, 1.0)], feats=np.array([[0.0], [1.0], [0.0], [2.0]]))
    col = dygnn_sim(g, 2.0, 0, ColorTable())
    c = col.rounds[0]
    assert c[0] == c[2] and len({c[0], c[1], c[3]}) == 3


def test_sim_rejects_unknown_message():
    with pytest.raises(ValueError):
        dygnn_sim(graph(2, []), 1.0, 1, ColorTable(), message="pulse")


@pytest.mark.parametrize("message", ["interval", "sequence"])
def test_vanilla_sim_collides_on_twin_paths(message):
    col = dygnn_sim(twin_paths_graph(), T4, 6, ColorTable(), message=message)
    for j in range(7):
        assert sim_pair_color(col, (NODE_A, NODE_C), j) == sim_pair_color(col, (NODE_A, NODE_D), j)


def test_mite_sim_separates_twin_paths():
    g = twin_paths_graph()
    table = ColorTable()
    left = dygnn_sim(g, T4, 3, table, mite_target=(NODE_A, NODE_C))
    right = dygnn_sim(g, T4, 3, table, mite_target=(NODE_A, NODE_D))
    assert sim_pair_color(left, (NODE_A, NODE_C), 0) == sim_pair_color(right, (NODE_A, NODE_D), 0)
    for j in (1, 2, 3):
        assert sim_pair_color(left, (NODE_A, NODE_C), j) != sim_pair_color(right, (NODE_A, NODE_D), j)


def test_mite_sim_single_target_splits_c_and_d():
    # B met A, E did not, so the MITE colours of B and E differ and reach C and D
    col = dygnn_sim(twin_paths_graph(), T4, 2, ColorTable(), mite_target=(NODE_A, NODE_C))
    assert col.rounds[0][NODE_B] != col.rounds[0][NODE_E]
    assert col.rounds[1][NODE_C] != col.rounds[1][NODE_D]


@pytest.mark.parametrize("message", ["interval", "sequence"])
@pytest.mark.parametrize("multiplicity", ["event", "neighbor"])
def test_one_dwl_refines_sim(message, multiplicity):
    for gA, gB, t in pairs_of(31, 80):
        dwl = dwl_refine_many([gA, gB], t, k=1, init="features", multiplicity=multiplicity)
        rounds = dwl[0].rounds_run + 1
        table = ColorTable()
        sims = [dygnn_sim(g, t, rounds, table, message=message) for g in (gA, gB)]
        for j in range(rounds + 1):
            fine = merge_colorings([c.at(j) for c in dwl])
            coarse = merge_colorings([s.rounds[j] for s in sims])
            assert refines(fine, coarse)


# -- symbolic HopeDGN --------------------------------------------------------


def test_hope_single_event_pair_stands_out():
    g = graph(3, [(0, 1, 1.0)])
    c = hopedgn_symbolic(g, 2.0, 1).rounds[1]
    others = {c[s] for s in c if s not in ((0, 1), (1, 0))}
    assert c[(0, 1)] not in others


def test_hope_rejects_unknown_mode():
    with pytest.raises(ValueError):
        hopedgn_symbolic(graph(2, []), 1.0, 1, mode="regional")


@pytest.mark.parametrize("mode", ["global", "local"])
def test_hope_separates_twin_pairs(mode):
    c = hopedgn_symbolic(twin_paths_graph(), T4, 1, mode=mode).rounds[1]
    assert c[(NODE_A, NODE_C)] != c[(NODE_A, NODE_D)]


@pytest.mark.parametrize("seed", range(3))
def test_global_hope_equals_two_dwl(seed):
    for gA, gB, t in pairs_of(50 + seed, 40):
        dwl = dwl_refine_many([gA, gB], t, k=2, init="features")
        rounds = dwl[0].rounds_run + 1
        table = ColorTable()
        hope = [hopedgn_symbolic(g, t, rounds, table=table) for g in (gA, gB)]
        for j in range(rounds + 1):
            a = merge_colorings([c.at(j) for c in dwl])
            b = merge_colorings([h.rounds[j] for h in hope])
            assert same_partition(a, b)


def test_dropping_history_breaks_equivalence():
    g = graph(2, [(0, 1, 1.0)])
    h = graph(2, [(0, 1, 2.0)])
    broken = dwl_refine_many([g, h], 3.0, k=2, include_history=False)
    hope_table = ColorTable()
    hope = [hopedgn_symbolic(x, 3.0, 2, table=hope_table) for x in (g, h)]
    a = merge_colorings([c.at(1) for c in broken])
    b = merge_colorings([x.rounds[1] for x in hope])
    assert not same_partition(a, b)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_relabel_invariance(seed):
    rng = np.random.default_rng(seed)
    g = random_dynamic_graph(5, 8, t_max=5, seed=seed, discrete=True)
    perm = rng.permutation(5).tolist()
    assert not dwl_distinguish(g, g.relabel(perm), 4.5, k=1).non_isomorphic
    assert not dwl_distinguish(g, g.relabel(perm), 4.5, k=2).non_isomorphic


def test_coloring_histogram_and_classes():
    col = Coloring("node", 1.0, [{0: 3, 1: 3, 2: 4}])
    assert col.histogram(0) == {3: 2, 4: 1}
    assert col.num_classes() == 2
