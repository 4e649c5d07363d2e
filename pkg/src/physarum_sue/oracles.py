"""Brute-force references for small networks.

Path enumeration, Monte Carlo probit path probabilities, the SUE objective,
the Williams derivative identity, Dijkstra, and the flow checks run by the
``verify`` command.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .network import DemandSet, Network, OdDemand
from .physarum import injection_vector, node_inflow
from .probit import iter_sample_batches

MAX_PATHS = 1_000_000


class PathExplosionError(RuntimeError):
    pass


# ---------------------------------------------------------------- shortest paths


def adjacency(network: Network) -> list[list[tuple[int, int]]]:
    """Per 0-based node: ``(head, link)`` pairs sorted by head index."""
    adj = []
    for links in network.out_links:
        adj.append(sorted((int(network.head[a]), a) for a in links))
    return adj


def shortest_tree(adj, costs: list[float], source: int, n: int):
    """Dijkstra on 0-based lists. Returns ``(dist, pred_link)``.

    Equal-distance candidates keep the predecessor with the smaller node index;
    the heap orders equal keys by node index.
    """
    inf = math.inf
    dist = [inf] * n
    pred_node = [n] * n
    pred = [-1] * n
    done = [False] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    pop, push = heapq.heappop, heapq.heappush
    while heap:
        d, u = pop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, a in adj[u]:
            nd = d + costs[a]
            dv = dist[v]
            if nd < dv:
                dist[v] = nd
                pred[v] = a
                pred_node[v] = u
                push(heap, (nd, v))
            elif nd == dv and u < pred_node[v] and not done[v]:
                pred[v] = a
                pred_node[v] = u
    return dist, pred


@dataclass(frozen=True)
class ShortestPaths:
    """Distances (``inf`` marks unreachable) and predecessor links (-1 for none)."""

    source: int
    distance: np.ndarray
    pred_link: np.ndarray
    network: Network

    def reachable(self, node: int) -> bool:
        return bool(np.isfinite(self.distance[node - 1]))

    def path_links(self, node: int) -> list[int]:
        if not self.reachable(node):
            raise ValueError(f"node {node} is unreachable from {self.source}")
        links = []
        v = node - 1
        while v != self.source - 1:
            a = int(self.pred_link[v])
            links.append(a)
            v = int(self.network.tail[a])
        return links[::-1]

    def path_nodes(self, node: int) -> list[int]:
        links = self.path_links(node)
        return [self.source] + [self.network.links[a].to_node for a in links]


def dijkstra(network: Network, lengths, source: int) -> ShortestPaths:
    lengths = np.asarray(lengths, dtype=float)
    if lengths.shape != (network.n_links,):
        raise ValueError("lengths must be aligned with network links")
    if np.any(lengths <= 0):
        raise ValueError("Dijkstra requires positive lengths")
    dist, pred = shortest_tree(adjacency(network), lengths.tolist(), source - 1, network.n_nodes)
    return ShortestPaths(source, np.array(dist), np.array(pred), network)


# ---------------------------------------------------------------- path sets


@dataclass(frozen=True)
class PathSet:
    od: OdDemand
    paths: tuple[tuple[int, ...], ...]
    links: tuple[tuple[int, ...], ...]
    incidence: np.ndarray  # (n_links, n_paths) 0/1

    def __len__(self) -> int:
        return len(self.paths)


def enumerate_paths(network: Network, od: OdDemand, max_hops: int | None = None) -> PathSet:
    """All simple directed paths for ``od`` with at most ``max_hops`` links, lexicographic."""
    if max_hops is None:
        max_hops = network.n_nodes - 1
    if max_hops < 1:
        raise ValueError("max_hops must be >= 1")
    adj = adjacency(network)
    src, dst = od.origin - 1, od.destination - 1
    paths: list[tuple[int, ...]] = []
    link_seqs: list[tuple[int, ...]] = []
    on_path = [False] * network.n_nodes
    nodes, links = [src], []
    on_path[src] = True

    # Explicit stack of neighbour iterators keeps recursion depth off the C stack.
    stack = [iter(adj[src])]
    while stack:
        step = next(stack[-1], None)
        if step is None:
            stack.pop()
            on_path[nodes.pop()] = False
            if links:
                links.pop()
            continue
        v, a = step
        if on_path[v] or len(links) + 1 > max_hops:
            continue
        if v == dst:
            paths.append(tuple(x + 1 for x in nodes) + (v + 1,))
            link_seqs.append(tuple(links) + (a,))
            if len(paths) > MAX_PATHS:
                explored = len(paths)
                raise PathExplosionError(
                    f"more than {MAX_PATHS} paths for OD ({od.origin},{od.destination}); "
                    f"aborted after {explored}"
                )
            continue
        if len(links) + 1 >= max_hops:
            continue
        nodes.append(v)
        links.append(a)
        on_path[v] = True
        stack.append(iter(adj[v]))

    incidence = np.zeros((network.n_links, len(paths)))
    for k, seq in enumerate(link_seqs):
        incidence[list(seq), k] = 1.0
    return PathSet(od, tuple(paths), tuple(link_seqs), incidence)


def path_costs(pathset: PathSet, link_costs) -> np.ndarray:
    """Path cost vector ``incidence.T @ link_costs``."""
    return pathset.incidence.T @ np.asarray(link_costs, dtype=float)


# ---------------------------------------------------------------- Monte Carlo probit


@dataclass(frozen=True)
class PathProbabilities:
    probabilities: np.ndarray
    stderr: np.ndarray
    draws: int


def probit_path_probabilities_mc(
    pathset: PathSet, mean_link_costs, free_flow, gamma: float, draws: int, rng
) -> PathProbabilities:
    """Frequency with which each path is the perceived-cheapest under shared link draws.

    Each sample draws one perceived cost per network link, so overlapping paths
    are correlated. Ties go to the lowest path index.
    """
    if len(pathset) == 0:
        raise ValueError("path set is empty")
    counts = np.zeros(len(pathset))
    inc = pathset.incidence
    for block, _ in iter_sample_batches(mean_link_costs, free_flow, gamma, rng, draws):
        winners = np.argmin(block @ inc, axis=1)
        counts += np.bincount(winners, minlength=len(pathset))
    p = counts / draws
    return PathProbabilities(p, np.sqrt(p * (1 - p) / draws), draws)


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


def bpr_integral(network: Network, flows) -> np.ndarray:
    """Closed-form integral of each link's cost from 0 to its flow."""
    x = np.asarray(flows, dtype=float)
    return network.alpha * x + network.beta * x**5 / 5.0


def sue_objective_estimate(
    network: Network,
    flows,
    demands: DemandSet,
    pathsets: list[PathSet],
    gamma: float,
    draws: int,
    rng,
) -> Estimate:
    """Monte Carlo estimate of the probit SUE objective at ``flows``.

    ``pathsets`` must be aligned with ``demands``. The expected minimum
    perceived path cost is estimated with the same link draws for every OD.
    """
    x = np.asarray(flows, dtype=float)
    t = network.link_costs(x)
    link_part = float(np.sum(x * t - bpr_integral(network, x)))
    if len(demands) == 0:
        return Estimate(link_part, 0.0)
    if len(pathsets) != len(demands):
        raise ValueError("one path set per demand is required")
    rates = np.array([d.rate for d in demands])
    total = 0.0
    total_sq = 0.0
    for block, _ in iter_sample_batches(t, network.alpha, gamma, rng, draws):
        mins = np.column_stack([(block @ ps.incidence).min(axis=1) for ps in pathsets])
        weighted = mins @ rates
        total += weighted.sum()
        total_sq += (weighted**2).sum()
    mean = total / draws
    var = max(total_sq / draws - mean**2, 0.0)
    return Estimate(-mean + link_part, math.sqrt(var / draws))


@dataclass(frozen=True)
class GradientCheck:
    gradient: float
    probability: float
    discrepancy: float


def williams_gradient_check(
    pathset: PathSet,
    mean_link_costs,
    free_flow,
    gamma: float,
    path_index: int,
    draws: int,
    rng,
    step: float | None = None,
) -> GradientCheck:
    """Centered finite difference of E[min path cost] in one path's mean cost.

    The perturbation shifts that path's sampled cost by ``+-step/2`` on common
    draws; the choice probability is tallied on the same draws.
    """
    if not 0 <= path_index < len(pathset):
        raise IndexError(f"path index {path_index} out of range for {len(pathset)} paths")
    if step is None:
        step = 1e-2 * float(path_costs(pathset, mean_link_costs)[path_index])
    if not step > 0:
        raise ValueError("step must be positive")
    diff_sum = 0.0
    wins = 0
    for block, _ in iter_sample_batches(mean_link_costs, free_flow, gamma, rng, draws):
        costs = block @ pathset.incidence
        wins += int(np.sum(np.argmin(costs, axis=1) == path_index))
        up = costs.copy()
        up[:, path_index] += step / 2
        costs[:, path_index] -= step / 2
        diff_sum += float(np.sum(up.min(axis=1) - costs.min(axis=1)))
    gradient = diff_sum / (draws * step)
    prob = wins / draws
    return GradientCheck(gradient, prob, abs(gradient - prob))


def stochastic_loading_expectation(
    network: Network, demands: DemandSet, pathsets: list[PathSet], mean_costs, gamma: float, draws: int, rng
):
    """Expected link flows ``sum_k q * P_k * delta_ak`` and their standard errors."""
    flows = np.zeros(network.n_links)
    var = np.zeros(network.n_links)
    for d, ps in zip(demands, pathsets):
        pp = probit_path_probabilities_mc(ps, mean_costs, network.alpha, gamma, draws, rng)
        # Share of draws whose cheapest path uses each link.
        p_link = np.clip(ps.incidence @ pp.probabilities, 0.0, 1.0)
        flows += d.rate * p_link
        var += d.rate**2 * p_link * (1 - p_link) / draws
    return flows, np.sqrt(var)


# ---------------------------------------------------------------- flow checks


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_conservation(network: Network, demands: DemandSet, flows, tol: float) -> CheckResult:
    imbalance = node_inflow(network, np.asarray(flows, dtype=float)) - injection_vector(network, demands)
    worst = int(np.argmax(np.abs(imbalance)))
    value = float(abs(imbalance[worst]))
    return CheckResult(
        "conservation",
        value <= tol,
        f"max node imbalance {value:.4g} at node {worst + 1} (tol {tol:g})",
    )


def check_demand_satisfaction(network: Network, demands: DemandSet, flows, tol: float) -> CheckResult:
    x = np.asarray(flows, dtype=float)
    net_out = -node_inflow(network, x)
    worst, where = 0.0, None
    for origin in demands.origins():
        expected = demands.total_from(origin) - sum(d.rate for d in demands if d.destination == origin)
        gap = abs(net_out[origin - 1] - expected)
        if gap >= worst:
            worst, where = gap, origin
    return CheckResult(
        "demand-satisfaction",
        worst <= tol,
        f"max origin outflow gap {worst:.4g} at node {where} (tol {tol:g})",
    )


def check_reverse_structure(network: Network, flows, threshold: float = 0.05) -> CheckResult:
    x = np.asarray(flows, dtype=float)
    both = []
    for a, l in enumerate(network.links):
        if l.from_node < l.to_node and network.has_link(l.to_node, l.from_node):
            b = network.link_index(l.to_node, l.from_node)
            if x[a] > threshold and x[b] > threshold:
                both.append((l.from_node, l.to_node))
    detail = "no node pair carries flow both ways" if not both else f"two-way flow on pairs {both}"
    return CheckResult("reverse-link-structure", not both, detail + f" (threshold {threshold:g})")


def check_loading_agreement(
    network: Network,
    demands: DemandSet,
    flows,
    gamma: float,
    draws: int,
    rng,
    max_paths: int = 5000,
    n_se: float = 4.0,
) -> CheckResult:
    """Monte Carlo all-or-nothing loading against path-enumeration probit loading.

    Both are evaluated at the mean costs implied by ``flows`` and must agree
    within ``n_se`` combined standard errors on every link.
    """
    from .solvers import msa_stochastic_loading

    pathsets = []
    for d in demands:
        try:
            ps = enumerate_paths(network, d)
        except PathExplosionError:
            return CheckResult("loading-agreement", True, "skipped: path enumeration too large")
        if len(ps) > max_paths:
            return CheckResult("loading-agreement", True, f"skipped: {len(ps)} paths exceed {max_paths}")
        pathsets.append(ps)
    costs = network.link_costs(np.asarray(flows, dtype=float))
    expected, se_paths = stochastic_loading_expectation(network, demands, pathsets, costs, gamma, draws, rng)
    loaded = msa_stochastic_loading(network, costs, demands, draws, gamma, rng).flows
    # Both estimates use the same number of independent draws, so their errors match.
    bound = n_se * np.sqrt(2.0) * se_paths + 1e-9
    gap = np.abs(loaded - expected)
    worst = int(np.argmax(gap))
    link = network.links[worst]
    return CheckResult(
        "loading-agreement",
        bool(np.all(gap <= bound)),
        f"max |MC loading - path probit loading| {gap[worst]:.4g} on link "
        f"({link.from_node},{link.to_node}), allowed {bound[worst]:.4g} ({n_se:g} s.e.)",
    )
