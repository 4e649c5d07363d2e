import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import physarum_sue.oracles as oracles
from physarum_sue.network import DemandSet, OdDemand, example_demands, sheffi12
from physarum_sue.oracles import (
    PathExplosionError,
    bpr_integral,
    check_conservation,
    check_demand_satisfaction,
    check_loading_agreement,
    check_reverse_structure,
    dijkstra,
    enumerate_paths,
    path_costs,
    probit_path_probabilities_mc,
    stochastic_loading_expectation,
    sue_objective_estimate,
    williams_gradient_check,
)
from physarum_sue.probit import make_rng
from physarum_sue.solvers import SolverConfig, msa_stochastic_loading, solve

from support import CLOSED_FORM_18_20, demands, diamond, make_network, overlapping, triangle, two_route

NET = sheffi12()


def recount_paths(network, origin, destination):
    """Plain recursive enumeration over an adjacency dict."""
    succ = {}
    for link in network.links:
        succ.setdefault(link.from_node, []).append(link.to_node)

    def walk(node, seen):
        if node == destination:
            return 1
        return sum(walk(v, seen | {v}) for v in succ.get(node, []) if v not in seen)

    return walk(origin, {origin})


# ---------------------------------------------------------------- Dijkstra


def test_dijkstra_examples():
    sp = dijkstra(NET, NET.alpha, 1)
    assert sp.distance[1] == 20.0
    assert sp.path_nodes(12) == [1, 5, 6, 7, 8, 12]
    assert sp.distance[11] == 81.0
    single = make_network([(1, 2, 5.0, 0.0)])
    assert dijkstra(single, single.alpha, 1).distance[1] == 5.0
    tri = triangle()
    sp = dijkstra(tri, tri.alpha, 1)
    assert sp.distance[2] == 4.0
    assert sp.path_nodes(3) == [1, 2, 3]


def test_dijkstra_unreachable_and_validation():
    net = make_network([(1, 2, 1.0, 0.0), (3, 2, 1.0, 0.0)])
    sp = dijkstra(net, net.alpha, 1)
    assert math.isinf(sp.distance[2])
    assert not sp.reachable(3)
    with pytest.raises(ValueError):
        sp.path_links(3)
    with pytest.raises(ValueError):
        dijkstra(net, np.zeros(2), 1)


def test_dijkstra_tie_prefers_smaller_predecessor():
    sp = dijkstra(diamond(), np.ones(4), 1)
    assert sp.path_nodes(4) == [1, 2, 4]


random_graph = st.lists(
    st.tuples(st.integers(1, 6), st.integers(1, 6), st.floats(0.5, 20.0)),
    min_size=4,
    max_size=18,
    unique_by=lambda r: (r[0], r[1]),
).filter(lambda rows: all(i != j for i, j, _ in rows))


@settings(max_examples=60, deadline=None)
@given(random_graph)
def test_dijkstra_equals_brute_force(rows):
    net = make_network([(i, j, a, 0.0) for i, j, a in rows])
    sp = dijkstra(net, net.alpha, 1)
    for dest in net.nodes:
        if dest == 1:
            continue
        ps = enumerate_paths(net, OdDemand(1, dest, 1.0))
        if len(ps) == 0:
            assert not sp.reachable(dest)
        else:
            assert sp.distance[dest - 1] == pytest.approx(path_costs(ps, net.alpha).min(), rel=1e-12)


# ---------------------------------------------------------------- enumeration


def test_enumerate_small_examples():
    ps = enumerate_paths(diamond(), OdDemand(1, 4, 1.0), max_hops=4)
    assert ps.paths == ((1, 2, 4), (1, 3, 4))
    assert ps.incidence.shape == (4, 2)
    single = make_network([(1, 2, 5.0, 0.0)])
    assert len(enumerate_paths(single, OdDemand(1, 2, 1.0))) == 1


def test_enumerate_table1_matches_recount():
    ps = enumerate_paths(NET, OdDemand(1, 12, 20.0), max_hops=11)
    assert len(ps) == recount_paths(NET, 1, 12)
    assert len(set(ps.paths)) == len(ps)
    assert list(ps.paths) == sorted(ps.paths)
    for nodes, links in zip(ps.paths, ps.links):
        assert len(set(nodes)) == len(nodes)
        assert [NET.links[a].from_node for a in links] == list(nodes[:-1])
        assert np.array_equal(np.flatnonzero(ps.incidence[:, ps.paths.index(nodes)]), sorted(links))


def test_enumerate_hop_limit():
    short = enumerate_paths(NET, OdDemand(1, 12, 1.0), max_hops=5)
    assert len(short) > 0
    assert all(len(p) - 1 <= 5 for p in short.paths)
    assert len(short) < len(enumerate_paths(NET, OdDemand(1, 12, 1.0)))
    assert len(enumerate_paths(NET, OdDemand(1, 12, 1.0), max_hops=4)) == 0
    with pytest.raises(ValueError):
        enumerate_paths(NET, OdDemand(1, 12, 1.0), max_hops=0)


def test_enumerate_explosion_guard(monkeypatch):
    monkeypatch.setattr(oracles, "MAX_PATHS", 10)
    with pytest.raises(PathExplosionError, match="more than 10"):
        enumerate_paths(NET, OdDemand(1, 12, 1.0))


def test_path_cost_examples():
    net = make_network([(1, 2, 20, 0), (1, 3, 18, 0), (2, 4, 19, 0), (3, 4, 21, 0)])
    ps = enumerate_paths(net, OdDemand(1, 4, 1.0))
    assert path_costs(ps, net.alpha)[ps.paths.index((1, 2, 4))] == 39.0
    full = enumerate_paths(NET, OdDemand(1, 12, 1.0))
    k = full.paths.index((1, 5, 9, 10, 11, 12))
    assert path_costs(full, NET.alpha)[k] == 84.0


# ---------------------------------------------------------------- probit probabilities


def test_two_route_probability():
    net = two_route()
    ps = enumerate_paths(net, OdDemand(1, 4, 1.0))
    pp = probit_path_probabilities_mc(ps, net.alpha, net.alpha, 0.3, 1_000_000, make_rng(1))
    assert pp.probabilities[0] == pytest.approx(0.7232, abs=0.002)
    assert abs(pp.probabilities[0] - CLOSED_FORM_18_20) <= 3 / math.sqrt(pp.draws)
    assert pp.probabilities.sum() == pytest.approx(1.0, abs=1e-9)


def test_identical_routes_split_evenly():
    net = two_route(20.0, 20.0)
    ps = enumerate_paths(net, OdDemand(1, 4, 1.0))
    pp = probit_path_probabilities_mc(ps, net.alpha, net.alpha, 0.3, 1_000_000, make_rng(2))
    np.testing.assert_allclose(pp.probabilities, 0.5, atol=0.002)


def test_overlapping_paths_cancel_shared_noise():
    net = overlapping()
    ps = enumerate_paths(net, OdDemand(1, 6, 1.0))
    assert len(ps) == 2
    costs = path_costs(ps, net.alpha)
    assert costs[0] == costs[1]
    pp = probit_path_probabilities_mc(ps, net.alpha, net.alpha, 0.3, 1_000_000, make_rng(3))
    np.testing.assert_allclose(pp.probabilities, 0.5, atol=0.002)


def test_standard_error_shrinks_with_draws():
    net = two_route()
    ps = enumerate_paths(net, OdDemand(1, 4, 1.0))
    small = probit_path_probabilities_mc(ps, net.alpha, net.alpha, 0.3, 10_000, make_rng(4))
    big = probit_path_probabilities_mc(ps, net.alpha, net.alpha, 0.3, 1_000_000, make_rng(5))
    assert big.stderr[0] == pytest.approx(small.stderr[0] / 10, rel=0.05)
    assert abs(small.probabilities[0] - CLOSED_FORM_18_20) <= 3 / math.sqrt(small.draws)
    assert abs(big.probabilities[0] - CLOSED_FORM_18_20) <= 3 / math.sqrt(big.draws)


@settings(max_examples=20, deadline=None)
@given(t1=st.floats(5, 40), t2=st.floats(5, 40), seed=st.integers(0, 2**32))
def test_path_probability_matches_two_link_formula(t1, t2, seed):
    from physarum_sue.probit import two_link_choice_probability

    net = two_route(t1, t2)
    ps = enumerate_paths(net, OdDemand(1, 4, 1.0))
    draws = 20_000
    pp = probit_path_probabilities_mc(ps, net.alpha, net.alpha, 0.3, draws, make_rng(seed))
    assert abs(pp.probabilities[0] - two_link_choice_probability(t1, t2, t1, t2, 0.3)) <= 3 / math.sqrt(draws)
    assert pp.probabilities.sum() == pytest.approx(1.0, abs=1e-9)


def test_empty_pathset_rejected():
    net = make_network([(1, 2, 1.0, 0.0), (3, 2, 1.0, 0.0)])
    ps = enumerate_paths(net, OdDemand(1, 3, 1.0))
    with pytest.raises(ValueError):
        probit_path_probabilities_mc(ps, net.alpha, net.alpha, 0.3, 10, make_rng(0))


# ---------------------------------------------------------------- objective


def test_bpr_integral_closed_form():
    x = np.linspace(0, 12, 34)
    expected = NET.alpha * x + NET.beta * x**5 / 5
    np.testing.assert_allclose(bpr_integral(NET, x), expected)
    # against a trapezoid rule on one link
    a = NET.link_index(4, 8)
    w = np.linspace(0, x[a], 20_001)
    numeric = np.trapezoid(NET.alpha[a] + NET.beta[a] * w**4, w)
    assert bpr_integral(NET, x)[a] == pytest.approx(numeric, rel=1e-7)


def test_objective_single_link_closed_form():
    net = make_network([(1, 2, 3.0, 0.02)])
    q, x = 4.0, 4.0
    ps = [enumerate_paths(net, OdDemand(1, 2, q))]
    est = sue_objective_estimate(net, [x], demands((1, 2, q)), ps, 0.3, 200_000, make_rng(0))
    t = 3.0 + 0.02 * x**4
    closed = -q * t + x * t - (3.0 * x + 0.02 * x**5 / 5)
    assert abs(est.value - closed) <= 3 * est.stderr + 1e-12
    assert est.value == pytest.approx(-(3.0 * q + 0.02 * q**5 / 5), abs=0.05)


def test_objective_empty_problem_is_zero():
    est = sue_objective_estimate(NET, np.zeros(34), DemandSet(()), [], 0.3, 100, make_rng(0))
    assert est.value == 0.0 and est.stderr == 0.0


def test_objective_prefers_sue_flows_over_free_flow_loading():
    dem = example_demands(1)
    pathsets = [enumerate_paths(NET, d) for d in dem]
    sue = solve(NET, dem, SolverConfig(seed=0)).link_flows
    aon = np.zeros(34)
    aon[dijkstra(NET, NET.alpha, 1).path_links(12)] = 20.0
    z_sue = sue_objective_estimate(NET, sue, dem, pathsets, 0.3, 100_000, make_rng(1))
    z_aon = sue_objective_estimate(NET, aon, dem, pathsets, 0.3, 100_000, make_rng(2))
    gap_se = math.hypot(z_sue.stderr, z_aon.stderr)
    assert z_sue.value <= z_aon.value - 3 * gap_se


def test_objective_requires_aligned_pathsets():
    with pytest.raises(ValueError):
        sue_objective_estimate(NET, np.zeros(34), example_demands(2), [], 0.3, 10, make_rng(0))


# ---------------------------------------------------------------- Williams identity


@pytest.mark.parametrize(
    "net, gamma, expected",
    [
        (two_route(20.0, 20.0), 0.3, 0.5),
        (two_route(18.0, 20.0), 0.3, CLOSED_FORM_18_20),
        (two_route(10.0, 40.0), 0.01, 1.0),
    ],
    ids=["symmetric", "asymmetric", "dominant"],
)
def test_williams_identity(net, gamma, expected):
    ps = enumerate_paths(net, OdDemand(1, 4, 1.0))
    chk = williams_gradient_check(ps, net.alpha, net.alpha, gamma, 0, 1_000_000, make_rng(7))
    assert chk.gradient == pytest.approx(expected, abs=0.01)
    assert chk.probability == pytest.approx(expected, abs=0.01)
    assert chk.discrepancy <= 0.01


def test_williams_on_table1_paths():
    ps = enumerate_paths(NET, OdDemand(1, 12, 1.0))
    mean = NET.link_costs(np.full(34, 3.0))
    chk = williams_gradient_check(ps, mean, NET.alpha, 0.3, 0, 200_000, make_rng(8))
    assert chk.discrepancy <= 0.01


def test_williams_argument_checks():
    ps = enumerate_paths(two_route(), OdDemand(1, 4, 1.0))
    with pytest.raises(IndexError):
        williams_gradient_check(ps, np.ones(4), np.ones(4), 0.3, 5, 10, make_rng(0))
    with pytest.raises(ValueError):
        williams_gradient_check(ps, np.ones(4), np.ones(4), 0.3, 0, 10, make_rng(0), step=0.0)


# ---------------------------------------------------------------- loading agreement


def test_msa_loading_matches_path_probabilities():
    dem = example_demands(2)
    pathsets = [enumerate_paths(NET, d) for d in dem]
    costs = NET.link_costs(np.full(34, 2.0))
    draws = 50_000
    expected, se = stochastic_loading_expectation(NET, dem, pathsets, costs, 0.3, draws, make_rng(1))
    loaded = msa_stochastic_loading(NET, costs, dem, draws, 0.3, make_rng(2)).flows
    assert np.all(np.abs(loaded - expected) <= 3 * math.sqrt(2) * se + 1e-12)


# ---------------------------------------------------------------- verify checks


def test_checks_on_a_solution():
    dem = example_demands(1)
    x = solve(NET, dem, SolverConfig(seed=0)).link_flows
    assert check_conservation(NET, dem, x, 0.1).passed
    assert check_demand_satisfaction(NET, dem, x, 0.1).passed
    assert check_reverse_structure(NET, x).passed
    assert check_loading_agreement(NET, dem, x, 0.3, 20_000, make_rng(0)).passed


def test_checks_detect_faults():
    dem = example_demands(1)
    x = solve(NET, dem, SolverConfig(seed=0)).link_flows
    bad = x.copy()
    bad[NET.link_index(6, 7)] += 1.0
    res = check_conservation(NET, dem, bad, 0.1)
    assert not res.passed and "node" in res.detail
    zero = np.zeros(34)
    assert not check_demand_satisfaction(NET, dem, zero, 0.1).passed
    both = x.copy()
    both[NET.link_index(2, 1)] = 1.0
    res = check_reverse_structure(NET, both)
    assert not res.passed and "(1, 2)" in res.detail


def test_loading_check_skips_large_enumeration():
    dem = example_demands(1)
    res = check_loading_agreement(NET, dem, np.zeros(34), 0.3, 10, make_rng(0), max_paths=3)
    assert res.passed and res.detail.startswith("skipped")
