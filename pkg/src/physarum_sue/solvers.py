"""Probit stochastic user equilibrium solvers.

``PhysarumSUESolver`` drives Physarum relaxation steps on sampled link lengths
and averages the resulting fluxes; ``MSASolver`` is the method of successive
averages with Monte Carlo all-or-nothing loading. Both expose ``step()`` so a
run can be continued or inspected one outer iteration at a time.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Literal, NamedTuple

import numpy as np

from .network import DemandSet, InputError, Network, validate
from .oracles import adjacency, shortest_tree
from .physarum import PhysarumState, init_conductivity, origin_problems, relax
from .probit import iter_sample_batches, make_rng, sample_perceived_costs

MetricKind = Literal["root_abs_sum", "euclidean"]


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters.

    ``metric`` selects the outer stopping distance: ``"root_abs_sum"`` is
    sqrt(sum |a - b|), ``"euclidean"`` is sqrt(sum (a - b)**2).
    ``cost_flows`` picks which Physarum flows drive the length update:
    ``"averaged"`` (the running solution) or ``"auxiliary"`` (the last inner
    average). ``record_flows`` keeps the solution and auxiliary flows of every
    outer iteration.
    """

    gamma: float = 0.3
    epsilon0: float = 0.1
    inner_iterations: int = 1
    seed: int = 0
    max_outer: int = 100_000
    solver_kind: Literal["physarum", "msa"] = "physarum"
    metric: MetricKind = "root_abs_sum"
    cost_flows: Literal["averaged", "auxiliary"] = "averaged"
    record_flows: bool = False

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.epsilon0 > 0:
            raise ValueError(f"epsilon0 must be > 0, got {self.epsilon0}")
        if int(self.inner_iterations) != self.inner_iterations or self.inner_iterations < 1:
            raise ValueError(f"inner_iterations must be an integer >= 1, got {self.inner_iterations}")
        if int(self.max_outer) != self.max_outer or self.max_outer < 1:
            raise ValueError(f"max_outer must be an integer >= 1, got {self.max_outer}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.solver_kind not in ("physarum", "msa"):
            raise ValueError(f"unknown solver_kind {self.solver_kind!r}")
        if self.metric not in ("root_abs_sum", "euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.cost_flows not in ("averaged", "auxiliary"):
            raise ValueError(f"unknown cost_flows {self.cost_flows!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FlowSolution:
    link_flows: np.ndarray
    outer_iterations: int
    elapsed: float
    epsilon_trace: np.ndarray
    truncation_count: int
    converged: bool
    solver_kind: str
    link_keys: tuple[tuple[int, int], ...] = ()
    truncation_trace: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    elapsed_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    flow_trace: np.ndarray | None = None
    auxiliary_trace: np.ndarray | None = None


class Loading(NamedTuple):
    flows: np.ndarray
    truncated: int


def convergence_metric(prev, curr, kind: MetricKind = "euclidean") -> float:
    prev = np.asarray(prev, dtype=float)
    curr = np.asarray(curr, dtype=float)
    if prev.shape != curr.shape:
        raise ValueError(f"misaligned flow vectors {prev.shape} vs {curr.shape}")
    diff = curr - prev
    if kind == "euclidean":
        return float(np.sqrt(np.dot(diff, diff)))
    if kind == "root_abs_sum":
        return float(np.sqrt(np.abs(diff).sum()))
    raise ValueError(f"unknown metric {kind!r}")


class _AllOrNothing:
    """Shortest-path loading with the network's adjacency built once."""

    def __init__(self, network: Network, demands: DemandSet):
        self.network = network
        self.adj = adjacency(network)
        self.tail = network.tail.tolist()
        self.groups = [
            (origin - 1, [(d.destination - 1, d.rate) for d in group])
            for origin, group in demands.by_origin().items()
        ]

    def load(self, costs: list[float], out: np.ndarray) -> None:
        n = self.network.n_nodes
        tail = self.tail
        for origin, dests in self.groups:
            dist, pred = shortest_tree(self.adj, costs, origin, n)
            for dest, rate in dests:
                if pred[dest] < 0:
                    raise RuntimeError(f"destination {dest + 1} unreachable under sampled costs")
                v = dest
                while v != origin:
                    a = pred[v]
                    out[a] += rate
                    v = tail[a]

    def stochastic(self, mean_costs, inner_iterations: int, gamma: float, rng) -> Loading:
        total = np.zeros(self.network.n_links)
        truncated = 0
        for block, n_low in iter_sample_batches(mean_costs, self.network.alpha, gamma, rng, inner_iterations):
            truncated += n_low
            for row in block.tolist():
                self.load(row, total)
        return Loading(total / inner_iterations, truncated)


def msa_stochastic_loading(
    network: Network, mean_costs, demands: DemandSet, inner_iterations: int, gamma: float, rng
) -> Loading:
    """Average of ``inner_iterations`` all-or-nothing loadings on sampled perceived costs."""
    return _AllOrNothing(network, demands).stochastic(mean_costs, inner_iterations, gamma, rng)


def physarum_inner(
    network: Network,
    current_lengths,
    demands: DemandSet,
    inner_iterations: int,
    gamma: float,
    states: list[PhysarumState],
    rng,
    problems=None,
) -> Loading:
    """Average flux over ``inner_iterations`` relaxation steps on freshly sampled lengths.

    ``states`` holds one conductivity state per origin (``origin_problems``
    order) and is advanced in place; every state sees the same sampled lengths.
    """
    if problems is None:
        problems = origin_problems(network, demands)
    if len(problems) != len(states):
        raise ValueError("one Physarum state per origin is required")
    mean = np.asarray(current_lengths, dtype=float)
    average = np.zeros(network.n_links)
    truncated = 0
    for i in range(1, inner_iterations + 1):
        draw = sample_perceived_costs(mean, network.alpha, gamma, rng)
        truncated += draw.truncated
        q = np.zeros(network.n_links)
        for state, prob in zip(states, problems):
            state.lengths = draw.sampled_cost
            q += relax(state, prob.injections, prob.reference_node)
        average += (q - average) / i
    return Loading(average, truncated)


class _OuterLoop:
    kind = ""

    def __init__(self, network: Network, demands: DemandSet, config: SolverConfig):
        problems = validate(network, demands)
        if problems:
            raise InputError("; ".join(problems))
        if len(demands) == 0:
            raise InputError("demand set is empty")
        self.network = network
        self.demands = demands
        self.config = config
        self.rng = make_rng(config.seed)
        self.n = 0
        self.epsilons: list[float] = []
        self.truncations: list[int] = []
        self.elapsed_ms: list[float] = []
        self.flow_history: list[np.ndarray] = []
        self.aux_history: list[np.ndarray] = []
        self.converged = False
        self._clock = 0.0

    @property
    def flows(self) -> np.ndarray:
        raise NotImplementedError

    def _advance(self) -> tuple[float, int]:
        raise NotImplementedError

    def _stop_ok(self) -> bool:
        return True

    def step(self) -> float:
        """Run one outer iteration and return its convergence distance."""
        t0 = time.perf_counter()
        self.n += 1
        eps, truncated = self._advance()
        self._clock += time.perf_counter() - t0
        self.epsilons.append(eps)
        self.truncations.append(truncated)
        self.elapsed_ms.append(self._clock * 1e3)
        if self.config.record_flows:
            self.flow_history.append(self.flows.copy())
            self.aux_history.append(self.auxiliary.copy())
        self.converged = self._stop_ok() and eps <= self.config.epsilon0
        return eps

    def run(self) -> FlowSolution:
        while self.n < self.config.max_outer:
            self.step()
            if self.converged:
                break
        return self.solution()

    def solution(self) -> FlowSolution:
        return FlowSolution(
            link_flows=self.flows.copy(),
            outer_iterations=self.n,
            elapsed=self._clock,
            epsilon_trace=np.array(self.epsilons),
            truncation_count=int(sum(self.truncations)) + self._initial_truncations(),
            converged=self.converged,
            solver_kind=self.kind,
            link_keys=tuple((l.from_node, l.to_node) for l in self.network.links),
            truncation_trace=np.array(self.truncations, dtype=int),
            elapsed_trace=np.array(self.elapsed_ms),
            flow_trace=np.array(self.flow_history) if self.config.record_flows else None,
            auxiliary_trace=np.array(self.aux_history) if self.config.record_flows else None,
        )

    def _initial_truncations(self) -> int:
        return 0


class PhysarumSUESolver(_OuterLoop):
    """Outer loop: damp lengths toward current travel times, relax, average.

    Conductivities are drawn once per origin and persist across all outer
    iterations.
    """

    kind = "physarum"

    def __init__(self, network: Network, demands: DemandSet, config: SolverConfig):
        super().__init__(network, demands, config)
        self.problems = origin_problems(network, demands)
        self.states = [
            PhysarumState(network, init_conductivity(network, self.rng), network.alpha.copy())
            for _ in self.problems
        ]
        self.free_flow = network.alpha.copy()
        self.lengths = self.free_flow.copy()
        self.auxiliary = np.zeros(network.n_links)
        self.average = np.zeros(network.n_links)

    @property
    def flows(self) -> np.ndarray:
        return self.average

    def _advance(self):
        cfg = self.config
        driver = self.average if cfg.cost_flows == "averaged" else self.auxiliary
        self.lengths = 0.5 * (self.lengths + self.network.link_costs(driver))
        loading = physarum_inner(
            self.network, self.lengths, self.demands, cfg.inner_iterations, cfg.gamma,
            self.states, self.rng, self.problems,
        )
        self.auxiliary = loading.flows
        previous = self.average
        self.average = previous + (self.auxiliary - previous) / self.n
        return convergence_metric(previous, self.average, cfg.metric), loading.truncated


class MSASolver(_OuterLoop):
    """Method of successive averages with step 1/n.

    The stopping distance compares the new solution with the auxiliary flows.
    At n = 1 the full step makes the two identical, so the test is only
    applied from n = 2.
    """

    kind = "msa"

    def __init__(self, network: Network, demands: DemandSet, config: SolverConfig):
        super().__init__(network, demands, config)
        self.loader = _AllOrNothing(network, demands)
        start = self.loader.stochastic(network.alpha, config.inner_iterations, config.gamma, self.rng)
        self.current = start.flows
        self._start_truncations = start.truncated
        self.auxiliary = np.zeros(network.n_links)

    @property
    def flows(self) -> np.ndarray:
        return self.current

    def _advance(self):
        cfg = self.config
        loading = self.loader.stochastic(
            self.network.link_costs(self.current), cfg.inner_iterations, cfg.gamma, self.rng
        )
        self.auxiliary = loading.flows
        self.current = self.current + (self.auxiliary - self.current) / self.n
        return convergence_metric(self.auxiliary, self.current, cfg.metric), loading.truncated

    def _stop_ok(self) -> bool:
        return self.n >= 2

    def _initial_truncations(self) -> int:
        return self._start_truncations


def make_solver(network: Network, demands: DemandSet, config: SolverConfig):
    cls = PhysarumSUESolver if config.solver_kind == "physarum" else MSASolver
    return cls(network, demands, config)


def physarum_sue_solve(network: Network, demands: DemandSet, config: SolverConfig) -> FlowSolution:
    return PhysarumSUESolver(network, demands, config).run()


def msa_solve(network: Network, demands: DemandSet, config: SolverConfig) -> FlowSolution:
    return MSASolver(network, demands, config).run()


def solve(network: Network, demands: DemandSet, config: SolverConfig) -> FlowSolution:
    return make_solver(network, demands, config).run()


def compare_solutions(a, b) -> tuple[np.ndarray, float]:
    """Per-link absolute differences and their maximum."""
    if isinstance(a, FlowSolution) and isinstance(b, FlowSolution):
        if a.link_keys and b.link_keys and a.link_keys != b.link_keys:
            raise ValueError("solutions are on different networks")
    xa = np.asarray(getattr(a, "link_flows", a), dtype=float)
    xb = np.asarray(getattr(b, "link_flows", b), dtype=float)
    if xa.shape != xb.shape:
        raise ValueError(f"misaligned solutions {xa.shape} vs {xb.shape}")
    diff = np.abs(xa - xb)
    return diff, float(diff.max()) if diff.size else 0.0
