"""Randomized checks of the expressiveness hierarchy between DWL tests and model simulators.

Properties, each counted over seeded trials:

``hierarchy``      1-DWL refutes a pair of graphs only if 2-DWL does.
``soundness``      DWL never refutes a pair the brute-force oracle calls isomorphic.
``sim_bound``      the 1-DWL partition refines the simulated DyGNN partition each round.
``hope_equals_2dwl``  global symbolic HopeDGN and 2-DWL induce the same partitions.
``twin_paths``     the fixed two-path construction behaves as the hierarchy predicts.
``mite_witness``   a searched pair of graphs separates MITE-augmented from vanilla DyGNN.
"""
from __future__ import annotations

import io
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..dwl import (
    NODE_A,
    NODE_C,
    NODE_D,
    ColorTable,
    dwl_distinguish,
    dwl_refine,
    dwl_refine_many,
    dygnn_sim,
    hopedgn_symbolic,
    merge_colorings,
    refines,
    same_partition,
    sim_pair_color,
    twin_paths_graph,
)
from ..temporal_graph import (
    DEFAULT_ORACLE_BOUND,
    DynamicGraph,
    OracleBoundError,
    brute_force_isomorphic_until,
    load_events,
    write_edge_list,
)
from .generators import random_dynamic_graph, random_graph_pair

PROPERTIES = ("hierarchy", "soundness", "sim_bound", "hope_equals_2dwl", "twin_paths", "mite_witness")
TWIN_QUERY_TIME = 4.0


@dataclass
class SuiteConfig:
    trials: int = 1000
    seed: int = 0
    max_nodes: int = 6
    max_events: int = 10
    t_max: float = 6.0
    search_budget: int = 3000
    # False swaps in a 2-DWL without timestamp terms, to check the suite notices
    two_dwl_history: bool = True

    def __post_init__(self):
        if self.trials < 0 or self.search_budget < 0:
            raise ValueError("trials and search_budget must be non-negative")
        if not 1 <= self.max_nodes <= DEFAULT_ORACLE_BOUND:
            raise OracleBoundError(f"max_nodes must lie in [1, {DEFAULT_ORACLE_BOUND}]")
        if self.max_events < 0 or self.t_max < 2:
            raise ValueError("need max_events >= 0 and t_max >= 2")


@dataclass
class PropertyResult:
    name: str
    trials: int = 0
    violations: int = 0
    counterexample: dict | None = None

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, ok: bool, payload) -> None:
        self.trials += 1
        if not ok:
            self.violations += 1
            if self.counterexample is None:
                self.counterexample = payload() if callable(payload) else payload

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "trials": self.trials,
            "violations": self.violations,
            "counterexample": self.counterexample,
        }


@dataclass
class SuiteReport:
    config: SuiteConfig
    properties: dict[str, PropertyResult]
    witness: dict | None = None
    elapsed: float = field(default=0.0, compare=False)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties.values())

    def to_dict(self) -> dict:
        # elapsed time stays out so equal seeds give byte-identical reports
        return {
            "passed": self.passed,
            "config": asdict(self.config),
            "properties": {k: v.to_dict() for k, v in self.properties.items()},
            "mite_witness": self.witness,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def graph_payload(g: DynamicGraph) -> dict:
    buf = io.StringIO()
    write_edge_list(g, buf)
    return {"node_count": g.node_count, "node_features": g.node_features.tolist(), "edge_list": buf.getvalue()}


def graph_from_payload(payload: dict) -> DynamicGraph:
    # the edge list alone loses isolated nodes and features
    events = load_events(io.StringIO(payload["edge_list"])).events
    return DynamicGraph(payload["node_count"], events, np.array(payload["node_features"], dtype=np.float64))


def _pair_payload(gA, gB, t, detail: str, **extra) -> dict:
    out = {"t": t, "detail": detail, "graphs": [graph_payload(gA), graph_payload(gB)]}
    out.update(extra)
    return out


# --------------------------------------------------------------------------
# per-trial checks


def check_hierarchy(gA, gB, t) -> tuple[bool, str]:
    one = dwl_distinguish(gA, gB, t, k=1)
    two = dwl_distinguish(gA, gB, t, k=2)
    return (not one.non_isomorphic) or two.non_isomorphic, f"1-DWL {one.to_dict()}, 2-DWL {two.to_dict()}"


def check_soundness(gA, gB, t, two_dwl_history: bool = True) -> tuple[bool | None, str]:
    """None when the oracle finds the graphs non-isomorphic (nothing to check)."""
    iso = brute_force_isomorphic_until(gA, gB, t)
    if not iso:
        return None, "oracle: non-isomorphic"
    one = dwl_distinguish(gA, gB, t, k=1, init="features")
    two = dwl_distinguish(gA, gB, t, k=2, init="features", include_history=two_dwl_history)
    ok = not one.non_isomorphic and not two.non_isomorphic
    return ok, f"oracle mapping {iso.mapping}; 1-DWL {one.to_dict()}, 2-DWL {two.to_dict()}"


def check_sim_bound(gA, gB, t) -> tuple[bool, str]:
    dwl = dwl_refine_many([gA, gB], t, k=1, init="features")
    rounds = dwl[0].rounds_run + 1
    for message in ("interval", "sequence"):
        table = ColorTable()
        sims = [dygnn_sim(g, t, rounds, table, message=message) for g in (gA, gB)]
        for j in range(rounds + 1):
            fine = merge_colorings([c.at(j) for c in dwl])
            coarse = merge_colorings([s.rounds[j] for s in sims])
            if not refines(fine, coarse):
                return False, f"round {j}, message {message}: equal 1-DWL colours, different simulator colours"
    return True, ""


def check_hope_equals_2dwl(gA, gB, t, two_dwl_history: bool = True) -> tuple[bool, str]:
    dwl = dwl_refine_many([gA, gB], t, k=2, init="features", include_history=two_dwl_history)
    rounds = dwl[0].rounds_run + 1
    table = ColorTable()
    hope = [hopedgn_symbolic(g, t, rounds, mode="global", table=table) for g in (gA, gB)]
    for j in range(rounds + 1):
        a = merge_colorings([c.at(j) for c in dwl])
        b = merge_colorings([h.rounds[j] for h in hope])
        if not same_partition(a, b):
            return False, f"partitions differ at round {j}"
    return True, ""


def twin_paths_checks() -> dict[str, bool]:
    g = twin_paths_graph()
    t = TWIN_QUERY_TIME
    ac, ad = (NODE_A, NODE_C), (NODE_A, NODE_D)
    one = dwl_refine(g, t, k=1)
    two = dwl_refine(g, t, k=2)
    rounds = one.rounds_run + 1
    vanilla = dygnn_sim(g, t, rounds, ColorTable())
    table = ColorTable()
    with_c = dygnn_sim(g, t, rounds, table, mite_target=ac)
    with_d = dygnn_sim(g, t, rounds, table, mite_target=ad)
    return {
        "1-DWL merges C and D at every round": all(
            one.at(j)[NODE_C] == one.at(j)[NODE_D] for j in range(rounds + 1)
        ),
        "2-DWL separates (A,C) and (A,D) by round 1": two.rounds[1][ac] != two.rounds[1][ad],
        "oracle: pairs are not isomorphic": not brute_force_isomorphic_until(g, g, t, pin={NODE_A: NODE_A, NODE_C: NODE_D}),
        "vanilla simulator collides": all(
            sim_pair_color(vanilla, ac, j) == sim_pair_color(vanilla, ad, j) for j in range(rounds + 1)
        ),
        "MITE simulator separates": any(
            sim_pair_color(with_c, ac, j) != sim_pair_color(with_d, ad, j) for j in range(rounds + 1)
        ),
    }


# --------------------------------------------------------------------------
# witness search


def _mite_separates(gA, gB, sA, sB, t) -> tuple[bool, bool]:
    """(vanilla collides at every round, MITE-augmented separates at some round)."""
    rounds = gA.node_count + gB.node_count
    table = ColorTable()
    va = dygnn_sim(gA, t, rounds, table)
    vb = dygnn_sim(gB, t, rounds, table)
    collide = all(sim_pair_color(va, sA, j) == sim_pair_color(vb, sB, j) for j in range(rounds + 1))
    if not collide:
        return False, False
    table = ColorTable()
    ma = dygnn_sim(gA, t, rounds, table, mite_target=sA)
    mb = dygnn_sim(gB, t, rounds, table, mite_target=sB)
    return True, any(sim_pair_color(ma, sA, j) != sim_pair_color(mb, sB, j) for j in range(rounds + 1))


def search_mite_witness(seed: int = 0, budget: int = 3000, max_nodes: int = 6, max_events: int = 8):
    """Find graphs and target pairs that vanilla DyGNN confuses, MITE separates,
    and the oracle confirms are non-isomorphic.  Returns a payload dict or None.

    Candidates are random discrete-time graphs; the second graph is either the
    same graph (comparing two pairs) or an independent draw of equal size.
    """
    rng = np.random.default_rng([seed, 0x5EED])
    for attempt in range(budget):
        n = int(rng.integers(3, max_nodes + 1))
        m = int(rng.integers(2, max_events + 1))
        gA = random_dynamic_graph(n, m, 6.0, rng, discrete=True)
        gB = gA if rng.random() < 0.5 else random_dynamic_graph(n, m, 6.0, rng, discrete=True)
        t = float(rng.integers(2, 7)) + 0.5
        sA = tuple(int(x) for x in rng.choice(n, 2, replace=False))
        sB = tuple(int(x) for x in rng.choice(n, 2, replace=False))
        if gA is gB and sA == sB:
            continue
        collide, separated = _mite_separates(gA, gB, sA, sB, t)
        if not (collide and separated):
            continue
        if brute_force_isomorphic_until(gA, gB, t, pin={sA[0]: sB[0], sA[1]: sB[1]}):
            continue
        return {
            "attempt": attempt,
            "t": t,
            "pairs": [list(sA), list(sB)],
            "graphs": [graph_payload(gA), graph_payload(gB)],
        }
    return None


def replay_mite_witness(payload: dict) -> dict[str, bool]:
    gA, gB = (graph_from_payload(p) for p in payload["graphs"])
    sA, sB = (tuple(p) for p in payload["pairs"])
    t = payload["t"]
    collide, separated = _mite_separates(gA, gB, sA, sB, t)
    return {
        "vanilla collides": collide,
        "MITE separates": separated,
        "oracle: non-isomorphic": not brute_force_isomorphic_until(gA, gB, t, pin={sA[0]: sB[0], sA[1]: sB[1]}),
    }


# --------------------------------------------------------------------------


def expressiveness_suite(config: SuiteConfig | None = None) -> SuiteReport:
    cfg = config or SuiteConfig()
    started = time.perf_counter()
    results = {name: PropertyResult(name) for name in PROPERTIES}
    for trial in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, trial])
        gA, gB, t = random_graph_pair(rng, cfg.max_nodes, cfg.max_events, cfg.t_max)

        def payload(detail, trial=trial, gA=gA, gB=gB, t=t):
            return lambda: _pair_payload(gA, gB, t, detail, trial=trial)

        ok, detail = check_hierarchy(gA, gB, t)
        results["hierarchy"].record(ok, payload(detail))
        ok, detail = check_soundness(gA, gB, t, cfg.two_dwl_history)
        if ok is not None:
            results["soundness"].record(ok, payload(detail))
        ok, detail = check_sim_bound(gA, gB, t)
        results["sim_bound"].record(ok, payload(detail))
        ok, detail = check_hope_equals_2dwl(gA, gB, t, cfg.two_dwl_history)
        results["hope_equals_2dwl"].record(ok, payload(detail))

    twin = twin_paths_checks()
    g = twin_paths_graph()
    for name, ok in twin.items():
        results["twin_paths"].record(ok, lambda name=name: _pair_payload(g, g, TWIN_QUERY_TIME, name))

    witness = search_mite_witness(cfg.seed, cfg.search_budget)
    if witness is None:
        results["mite_witness"].record(
            False, {"detail": f"no witness within {cfg.search_budget} candidates", "seed": cfg.seed}
        )
    else:
        for name, ok in replay_mite_witness(witness).items():
            results["mite_witness"].record(ok, dict(witness, detail=name))
    return SuiteReport(cfg, results, witness, time.perf_counter() - started)
