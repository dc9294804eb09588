import itertools

import numpy as np
import pytest

from trialiv.dag import COLLIDER, Dag, check_iv, d_separated
from trialiv.errors import DagError, ParseError, UnknownNodeError

CASE1 = Dag.from_text("R -> T\nT -> Y\nU -> Y\nlatent U\n")
CASE2 = Dag.from_text("R -> T\nT -> Y\nU -> T\nU -> Y\nlatent U\n")
CASE3 = Dag.from_text("R -> T\nU -> T\nU -> Y\nlatent U\n")


# --- construction and parsing ----------------------------------------------


def test_cycle_rejected():
    with pytest.raises(DagError):
        Dag(("A", "B"), (("A", "B"), ("B", "A")))


def test_self_loop_and_duplicate_edges_rejected():
    with pytest.raises(DagError):
        Dag(("A",), (("A", "A"),))
    with pytest.raises(DagError):
        Dag(("A", "B"), (("A", "B"), ("A", "B")))


def test_edge_to_unknown_node_rejected():
    with pytest.raises(DagError):
        Dag(("A",), (("A", "B"),))


def test_text_round_trip():
    text = CASE2.to_text()
    again = Dag.from_text(text)
    assert again.edges == CASE2.edges
    assert again.latent == CASE2.latent


def test_parse_error_reports_line():
    with pytest.raises(ParseError, match="line 2"):
        Dag.from_text("A -> B\nB => C\n")


# --- d-separation on the three named cases ----------------------------------


def test_case2_treatment_outcome_confounded():
    res = d_separated(CASE2, "T", "Y", ())
    assert not res.separated
    fork = [p for p in res.paths if p.path == ("T", "U", "Y")]
    assert fork and fork[0].open and fork[0].rules == ("fork",)


def test_chain_blocked_by_middle():
    chain = Dag(("A", "B", "C"), (("A", "B"), ("B", "C")))
    assert d_separated(chain, "A", "C", {"B"}).separated
    assert not d_separated(chain, "A", "C", ()).separated


def test_collider_opened_by_conditioning():
    coll = Dag(("A", "B", "C"), (("A", "B"), ("C", "B")))
    assert d_separated(coll, "A", "C", ()).separated
    res = d_separated(coll, "A", "C", {"B"})
    assert not res.separated
    assert res.paths[0].rules == (COLLIDER,)


def test_collider_opened_by_descendant():
    g = Dag(("A", "B", "C", "D"), (("A", "B"), ("C", "B"), ("B", "D")))
    assert d_separated(g, "A", "C", ()).separated
    assert not d_separated(g, "A", "C", {"D"}).separated


def test_witness_names_blocking_node():
    chain = Dag(("A", "B", "C"), (("A", "B"), ("B", "C")))
    res = d_separated(chain, "A", "C", {"B"})
    assert res.paths[0].blocking_node == "B"
    assert not res.paths[0].open


def test_unknown_node_raises():
    with pytest.raises(UnknownNodeError):
        d_separated(CASE2, "R", "Q", ())


def test_query_preconditions():
    with pytest.raises(DagError):
        d_separated(CASE2, "R", "R", ())
    with pytest.raises(DagError):
        d_separated(CASE2, "R", "Y", {"R"})


# --- IV checks ---------------------------------------------------------------


@pytest.mark.parametrize("graph", [CASE1, CASE2, CASE3])
def test_randomization_is_an_iv_in_all_cases(graph):
    report = check_iv(graph, "R", "T", "Y", ["U"])
    assert report.iv1 and report.iv2 and report.iv3
    assert report.all_hold


def test_direct_edge_breaks_exclusion():
    g = Dag.from_text("R -> T\nT -> Y\nU -> T\nU -> Y\nR -> Y\nlatent U\n")
    report = check_iv(g, "R", "T", "Y", ["U"])
    assert report.iv1 and report.iv2 and not report.iv3
    assert any(v.path == ("R", "Y") for v in report.iv3_open_paths)


def test_confounded_instrument_breaks_randomization():
    g = Dag.from_text("R -> T\nT -> Y\nU -> T\nU -> Y\nU -> R\nlatent U\n")
    report = check_iv(g, "R", "T", "Y", ["U"])
    assert not report.iv2
    assert "U" in report.iv2_open_paths


def test_no_directed_path_breaks_relevance():
    g = Dag(("R", "T", "Y"), (("T", "Y"),))
    assert not check_iv(g, "R", "T", "Y", []).iv1


# --- properties and oracle agreement -----------------------------------------


from dsep_oracle import agrees_with_oracle, all_dags, random_dag


def test_oracle_agreement_exhaustive_up_to_four_nodes():
    # Every labeled DAG on <= 4 nodes, every node pair, every conditioning set.
    for n in (2, 3, 4):
        for g in all_dags(n):
            assert agrees_with_oracle(g), g.edges


def test_oracle_agreement_sampled_five_and_six_nodes():
    rng = np.random.default_rng(20240)
    for n, reps in ((5, 120), (6, 80)):
        for _ in range(reps):
            g = random_dag(rng, n)
            assert agrees_with_oracle(g), g.edges


def test_separation_symmetric_in_endpoints():
    rng = np.random.default_rng(7)
    for _ in range(60):
        g = random_dag(rng, 5)
        nodes = list(g.nodes)
        a, b = nodes[0], nodes[1]
        z = frozenset(n for n in nodes[2:] if rng.random() < 0.5)
        assert (
            d_separated(g, a, b, z).separated == d_separated(g, b, a, z).separated
        )


def test_adding_edges_never_separates():
    # openness is monotone under edge addition for a fixed conditioning set
    rng = np.random.default_rng(99)
    for _ in range(60):
        g = random_dag(rng, 5, p=0.3)
        candidates = [
            (u, v)
            for u in g.nodes
            for v in g.nodes
            if u != v and (u, v) not in g.edges and (v, u) not in g.edges
        ]
        rng.shuffle(candidates)
        bigger = None
        for u, v in candidates:
            try:
                bigger = Dag(g.nodes, g.edges + ((u, v),))
                break
            except DagError:
                continue
        if bigger is None:
            continue
        for a, b in itertools.combinations(g.nodes, 2):
            rest = [n for n in g.nodes if n not in (a, b)]
            for r in range(len(rest) + 1):
                for z in itertools.combinations(rest, r):
                    if not d_separated(g, a, b, frozenset(z)).separated:
                        assert not d_separated(
                            bigger, a, b, frozenset(z)
                        ).separated
