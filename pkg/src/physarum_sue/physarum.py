"""Directed two-way Physarum dynamics on a road network.

Every directed link (i, j) carries its own conductivity D_ij and length L_ij.
Pressures come from the weighted Laplacian whose pair weight is
``D_ij/L_ij + D_ji/L_ji``; the flux on a directed link is the positive part of
``(D_ij/L_ij) * (p_i - p_j)``; conductivities relax toward the flux by
``D <- (D + Q) / 2``.

Injections follow the convention ``sum_i w_ij (p_i - p_j) = b_j`` with
``b = -I`` at an origin and ``+I`` at a destination, so flow runs downhill in
pressure from origin to destinations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import DemandSet, Network, OdDemand

CONDUCTIVITY_FLOOR = 1e-12
RESIDUAL_RTOL = 1e-10


class PressureSolveError(RuntimeError):
    def __init__(self, message: str, disconnected: tuple[int, ...] = ()):
        self.disconnected = disconnected
        if disconnected:
            message += f" (nodes disconnected from the reference: {list(disconnected)})"
        super().__init__(message)


@dataclass
class PhysarumState:
    """Mutable per-solve state. Arrays are indexed like ``network.links`` / nodes (0-based)."""

    network: Network
    conductivity: np.ndarray
    lengths: np.ndarray
    pressures: np.ndarray = None
    fluxes: np.ndarray = None
    residual: float = 0.0
    _topology_connected: bool = field(default=None, repr=False)

    def __post_init__(self) -> None:
        m, n = self.network.n_links, self.network.n_nodes
        self.conductivity = np.asarray(self.conductivity, dtype=float)
        self.lengths = np.asarray(self.lengths, dtype=float)
        if self.conductivity.shape != (m,) or self.lengths.shape != (m,):
            raise ValueError("conductivity and lengths must be aligned with the network links")
        if self.pressures is None:
            self.pressures = np.zeros(n)
        if self.fluxes is None:
            self.fluxes = np.zeros(m)
        if self._topology_connected is None:
            self._topology_connected = len(_components(n, self.network.tail, self.network.head)) == 1

    @property
    def conductance(self) -> np.ndarray:
        return self.conductivity / self.lengths

    def dead_links(self) -> np.ndarray:
        """Indices of links whose conductivity sits at the floor."""
        return np.flatnonzero(self.conductivity <= CONDUCTIVITY_FLOOR)


def _components(n: int, tail, head, mask=None) -> list[list[int]]:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, (i, j) in enumerate(zip(tail.tolist(), head.tolist())):
        if mask is not None and not mask[a]:
            continue
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


def init_conductivity(network: Network, rng: np.random.Generator) -> np.ndarray:
    """Independent Uniform[0.5, 1] conductivity per directed link."""
    return 0.5 + 0.5 * rng.random(network.n_links)


def injection_vector(network: Network, demands: list[OdDemand] | DemandSet) -> np.ndarray:
    """Per-node net injection: ``-rate`` at each origin, ``+rate`` at each destination."""
    b = np.zeros(network.n_nodes)
    for d in demands:
        b[d.origin - 1] -= d.rate
        b[d.destination - 1] += d.rate
    return b


def assemble_laplacian(network: Network, conductance: np.ndarray) -> np.ndarray:
    """Dense weighted Laplacian; each directed link adds its conductance to its node pair."""
    n = network.n_nodes
    t, h = network.tail, network.head
    A = np.zeros((n, n))
    A[t, h] -= conductance
    A[h, t] -= conductance
    A[np.diag_indices(n)] = np.bincount(t, conductance, n) + np.bincount(h, conductance, n)
    return A


def solve_pressures(state: PhysarumState, injections: np.ndarray, reference_node: int) -> np.ndarray:
    """Node pressures with ``p[reference_node] = 0`` (reference is a 1-based id).

    Nodes outside the reference's component carry no injection and get pressure 0.
    The achieved residual is stored on ``state.residual``.
    """
    network = state.network
    n = network.n_nodes
    b = np.asarray(injections, dtype=float)
    if b.shape != (n,):
        raise ValueError(f"injection vector must have {n} entries")
    scale = 1.0 + np.linalg.norm(b)
    if abs(b.sum()) > 1e-9 * scale:
        raise ValueError(f"injections must sum to zero (sum={b.sum()!r})")
    ref = reference_node - 1
    G = state.conductance
    A = assemble_laplacian(network, G)

    if state._topology_connected and np.all(G > 0):
        keep = np.delete(np.arange(n), ref)
    else:
        comp = next(c for c in _components(n, network.tail, network.head, G > 0) if ref in c)
        outside = sorted(set(range(n)) - set(comp))
        stranded = [v + 1 for v in outside if b[v] != 0]
        if stranded:
            raise PressureSolveError(
                "injection at nodes with no conducting path to the reference",
                tuple(v + 1 for v in outside),
            )
        keep = np.array([v for v in comp if v != ref], dtype=np.intp)

    p = np.zeros(n)
    if keep.size:
        try:
            p[keep] = np.linalg.solve(A[np.ix_(keep, keep)], -b[keep])
        except np.linalg.LinAlgError as exc:
            raise PressureSolveError(f"singular pressure system: {exc}") from None
    residual = float(np.linalg.norm(A @ p + b))
    # Backward-error scale: a stable solve leaves a residual of order eps * |A| |p|.
    bound = RESIDUAL_RTOL * (scale + np.linalg.norm(A, np.inf) * np.linalg.norm(p, np.inf))
    if not np.isfinite(residual) or residual > bound:
        raise PressureSolveError(f"pressure residual {residual:.3e} exceeds tolerance")
    state.pressures = p
    state.residual = residual
    return p


def signed_flows(state: PhysarumState, pressures: np.ndarray) -> np.ndarray:
    """Unclipped per-link flow ``(D/L) * (p_tail - p_head)``; may be negative."""
    net = state.network
    return state.conductance * (pressures[net.tail] - pressures[net.head])


def node_inflow(network: Network, link_flows: np.ndarray) -> np.ndarray:
    """Net inflow per node for a per-link flow vector (inflow minus outflow)."""
    n = network.n_nodes
    return np.bincount(network.head, link_flows, n) - np.bincount(network.tail, link_flows, n)


def compute_fluxes(state: PhysarumState, pressures: np.ndarray) -> np.ndarray:
    """Positive-part flux per directed link."""
    return np.maximum(signed_flows(state, pressures), 0.0)


def update_conductivity(conductivity: np.ndarray, fluxes: np.ndarray) -> np.ndarray:
    fluxes = np.asarray(fluxes, dtype=float)
    if np.any(fluxes < 0):
        raise ValueError("fluxes must be nonnegative")
    return np.maximum(0.5 * (np.asarray(conductivity, dtype=float) + fluxes), CONDUCTIVITY_FLOOR)


def relax(state: PhysarumState, injections: np.ndarray, reference_node: int) -> np.ndarray:
    """One pressure solve, flux evaluation and conductivity update; returns the fluxes."""
    p = solve_pressures(state, injections, reference_node)
    q = compute_fluxes(state, p)
    state.fluxes = q
    state.conductivity = update_conductivity(state.conductivity, q)
    return q


@dataclass(frozen=True)
class OriginProblem:
    """The injection pattern for one origin and all of its destinations."""

    origin: int
    demands: tuple[OdDemand, ...]
    injections: np.ndarray
    reference_node: int


def origin_problems(network: Network, demands: DemandSet) -> list[OriginProblem]:
    """One problem per distinct origin, in order of first appearance."""
    problems = []
    for origin, group in demands.by_origin().items():
        problems.append(
            OriginProblem(
                origin=origin,
                demands=tuple(group),
                injections=injection_vector(network, group),
                reference_node=min(d.destination for d in group),
            )
        )
    return problems


@dataclass
class LoadResult:
    flows: np.ndarray
    steps: int
    converged: bool
    final_change: float
    states: list[PhysarumState]


def physarum_load(
    network: Network,
    lengths,
    demands: DemandSet,
    rng: np.random.Generator,
    max_steps: int = 10_000,
    flux_tolerance: float = 1e-6,
) -> LoadResult:
    """Run the dynamics on fixed lengths until fluxes settle; flows summed over origins.

    ``steps`` is the largest step count used by any origin; ``converged`` is
    False if some origin hit ``max_steps``.
    """
    lengths = np.asarray(lengths, dtype=float)
    if np.any(lengths <= 0):
        raise ValueError("lengths must be positive")
    total = np.zeros(network.n_links)
    states, steps_used, converged, worst = [], 0, True, 0.0
    for prob in origin_problems(network, demands):
        state = PhysarumState(network, init_conductivity(network, rng), lengths.copy())
        prev = state.fluxes.copy()
        change = np.inf
        step = 0
        while step < max_steps:
            step += 1
            q = relax(state, prob.injections, prob.reference_node)
            change = float(np.max(np.abs(q - prev)))
            prev = q
            if change <= flux_tolerance:
                break
        converged &= change <= flux_tolerance
        worst = max(worst, change)
        steps_used = max(steps_used, step)
        total += state.fluxes
        states.append(state)
    return LoadResult(total, steps_used, converged, worst, states)
