"""Problem instances: directed road networks with BPR link costs and OD demands."""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

NETWORK_HEADER = "from,to,alpha,beta"
DEMAND_HEADER = "origin,destination,demand"


class InputError(ValueError):
    """Malformed or inconsistent input data, optionally tied to a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Link:
    """A directed link with cost ``alpha + beta * flow**4``.

    ``alpha`` doubles as the free-flow travel time used to scale perception noise.
    """

    from_node: int
    to_node: int
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if self.from_node == self.to_node:
            raise InputError(f"self-loop on node {self.from_node}")
        if self.from_node < 1 or self.to_node < 1:
            raise InputError("node ids are 1-based positive integers")
        if not self.alpha > 0:
            raise InputError(f"alpha must be > 0 on link ({self.from_node},{self.to_node})")
        if self.beta < 0:
            raise InputError(f"beta must be >= 0 on link ({self.from_node},{self.to_node})")


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable directed network. Link order is the order of ingestion.

    Numeric attributes are exposed as read-only arrays aligned with ``links``;
    ``tail``/``head`` hold 0-based node indices.
    """

    n_nodes: int
    links: tuple[Link, ...]
    tail: np.ndarray = field(init=False, repr=False)
    head: np.ndarray = field(init=False, repr=False)
    alpha: np.ndarray = field(init=False, repr=False)
    beta: np.ndarray = field(init=False, repr=False)
    out_links: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    in_links: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    _index: dict = field(init=False, repr=False)

    def __post_init__(self) -> None:
        index = {}
        out = [[] for _ in range(self.n_nodes)]
        inc = [[] for _ in range(self.n_nodes)]
        for a, link in enumerate(self.links):
            key = (link.from_node, link.to_node)
            if key in index:
                raise InputError(f"duplicate link {key}")
            if max(key) > self.n_nodes:
                raise InputError(f"link {key} references a node above {self.n_nodes}")
            index[key] = a
            out[link.from_node - 1].append(a)
            inc[link.to_node - 1].append(a)

        def frozen(values, dtype):
            arr = np.array(values, dtype=dtype)
            arr.setflags(write=False)
            return arr

        set_ = object.__setattr__
        set_(self, "tail", frozen([l.from_node - 1 for l in self.links], np.intp))
        set_(self, "head", frozen([l.to_node - 1 for l in self.links], np.intp))
        set_(self, "alpha", frozen([l.alpha for l in self.links], float))
        set_(self, "beta", frozen([l.beta for l in self.links], float))
        set_(self, "out_links", tuple(tuple(x) for x in out))
        set_(self, "in_links", tuple(tuple(x) for x in inc))
        set_(self, "_index", index)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def nodes(self) -> range:
        return range(1, self.n_nodes + 1)

    def link_index(self, from_node: int, to_node: int) -> int:
        """Position of link (from_node, to_node); KeyError if absent."""
        return self._index[(from_node, to_node)]

    def has_link(self, from_node: int, to_node: int) -> bool:
        return (from_node, to_node) in self._index

    def link_costs(self, flows: np.ndarray) -> np.ndarray:
        """Vectorised BPR cost for every link."""
        flows = np.asarray(flows, dtype=float)
        if flows.shape != (self.n_links,):
            raise ValueError(f"expected {self.n_links} flows, got shape {flows.shape}")
        if np.any(flows < 0):
            raise ValueError("link flows must be nonnegative")
        return self.alpha + self.beta * flows**4

    def free_flow_costs(self) -> np.ndarray:
        return self.alpha.copy()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return self.n_nodes == other.n_nodes and self.links == other.links

    def __hash__(self) -> int:
        return hash((self.n_nodes, self.links))


@dataclass(frozen=True)
class OdDemand:
    origin: int
    destination: int
    rate: float

    def __post_init__(self) -> None:
        if self.origin == self.destination:
            raise InputError(f"origin equals destination ({self.origin})")
        if not self.rate > 0:
            raise InputError(f"demand rate must be > 0 for OD ({self.origin},{self.destination})")


@dataclass(frozen=True)
class DemandSet:
    demands: tuple[OdDemand, ...]

    def __post_init__(self) -> None:
        seen = set()
        for d in self.demands:
            key = (d.origin, d.destination)
            if key in seen:
                raise InputError(f"duplicate OD pair {key}")
            seen.add(key)

    def __iter__(self):
        return iter(self.demands)

    def __len__(self) -> int:
        return len(self.demands)

    def origins(self) -> list[int]:
        """Distinct origins in first-appearance order."""
        return list(dict.fromkeys(d.origin for d in self.demands))

    def by_origin(self) -> dict[int, list[OdDemand]]:
        groups: dict[int, list[OdDemand]] = {}
        for d in self.demands:
            groups.setdefault(d.origin, []).append(d)
        return groups

    def total_from(self, origin: int) -> float:
        return sum(d.rate for d in self.demands if d.origin == origin)


def link_cost(link: Link, flow: float) -> float:
    """BPR travel time ``alpha + beta * flow**4``."""
    if flow < 0:
        raise ValueError(f"negative flow {flow}")
    return link.alpha + link.beta * flow**4


def free_flow_cost(link: Link) -> float:
    return link.alpha


def _data_rows(text: str, header: str, kind: str):
    lines = text.splitlines()
    seen_header = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not seen_header:
            if line.replace(" ", "") != header:
                raise InputError(f"{kind} file must start with header '{header}'", lineno)
            seen_header = True
            continue
        yield lineno, [cell.strip() for cell in line.split(",")]
    if not seen_header:
        raise InputError(f"{kind} file is empty (missing header '{header}')")


def _number(cell: str, lineno: int, what: str, integer: bool = False):
    try:
        if integer:
            value = int(cell)
        else:
            value = float(cell)
    except ValueError:
        raise InputError(f"non-numeric {what} '{cell}'", lineno) from None
    if not integer and not np.isfinite(value):
        raise InputError(f"non-finite {what} '{cell}'", lineno)
    return value


def _read(text_or_stream) -> str:
    if isinstance(text_or_stream, str):
        return text_or_stream
    return text_or_stream.read()


def parse_network(text) -> Network:
    """Parse ``from,to,alpha,beta`` CSV text (or a readable stream) into a Network."""
    links: list[Link] = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, cells in _data_rows(_read(text), NETWORK_HEADER, "network"):
        if len(cells) != 4:
            raise InputError(f"expected 4 columns, got {len(cells)}", lineno)
        i = _number(cells[0], lineno, "from node", integer=True)
        j = _number(cells[1], lineno, "to node", integer=True)
        alpha = _number(cells[2], lineno, "alpha")
        beta = _number(cells[3], lineno, "beta")
        if (i, j) in seen:
            raise InputError(f"duplicate link ({i},{j}), first defined on line {seen[(i, j)]}", lineno)
        try:
            links.append(Link(i, j, alpha, beta))
        except InputError as exc:
            raise InputError(str(exc), lineno) from None
        seen[(i, j)] = lineno
    if not links:
        raise InputError("network has no links")
    n_nodes = max(max(l.from_node, l.to_node) for l in links)
    return Network(n_nodes, tuple(links))


def parse_demands(text) -> DemandSet:
    """Parse ``origin,destination,demand`` CSV text (or a readable stream)."""
    demands: list[OdDemand] = []
    seen: dict[tuple[int, int], int] = {}
    for lineno, cells in _data_rows(_read(text), DEMAND_HEADER, "demand"):
        if len(cells) != 3:
            raise InputError(f"expected 3 columns, got {len(cells)}", lineno)
        o = _number(cells[0], lineno, "origin", integer=True)
        d = _number(cells[1], lineno, "destination", integer=True)
        rate = _number(cells[2], lineno, "demand")
        if (o, d) in seen:
            raise InputError(f"duplicate OD pair ({o},{d})", lineno)
        try:
            demands.append(OdDemand(o, d, rate))
        except InputError as exc:
            raise InputError(str(exc), lineno) from None
        seen[(o, d)] = lineno
    return DemandSet(tuple(demands))


def serialize_network(network: Network) -> str:
    buf = io.StringIO()
    buf.write(NETWORK_HEADER + "\n")
    for l in network.links:
        buf.write(f"{l.from_node},{l.to_node},{l.alpha!r},{l.beta!r}\n")
    return buf.getvalue()


def serialize_demands(demands: DemandSet) -> str:
    rows = [DEMAND_HEADER] + [f"{d.origin},{d.destination},{d.rate!r}" for d in demands]
    return "\n".join(rows) + "\n"


def reachable_from(network: Network, source: int) -> set[int]:
    """1-based ids of nodes reachable from ``source`` along directed links."""
    seen = {source}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for a in network.out_links[u - 1]:
            v = network.links[a].to_node
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


def validate(network: Network, demands: DemandSet) -> list[str]:
    """Diagnostics for unknown nodes and unreachable destinations; empty when valid."""
    problems = []
    reach_cache: dict[int, set[int]] = {}
    for d in demands:
        bad = [v for v in (d.origin, d.destination) if not 1 <= v <= network.n_nodes]
        if bad:
            problems.extend(
                f"OD ({d.origin},{d.destination}): unknown node {v} (network has {network.n_nodes} nodes)"
                for v in bad
            )
            continue
        if d.origin not in reach_cache:
            reach_cache[d.origin] = reachable_from(network, d.origin)
        if d.destination not in reach_cache[d.origin]:
            problems.append(
                f"OD ({d.origin},{d.destination}): destination unreachable from origin"
            )
    return problems


def _bundled(name: str) -> str:
    return resources.files("physarum_sue").joinpath("data", name).read_text(encoding="utf-8")


def sheffi12() -> Network:
    """The bundled 12-node, 34-link test network."""
    return parse_network(_bundled("sheffi12.net.csv"))


def example_demands(number: int) -> DemandSet:
    """Bundled demand sets: 1 -> single OD (1,12,20); 2 -> (1,12,10) and (1,8,10)."""
    if number not in (1, 2):
        raise ValueError("bundled examples are 1 and 2")
    return parse_demands(_bundled(f"example{number}.od.csv"))


def bundled_path(name: str):
    """Filesystem-like handle to a bundled data file."""
    return resources.files("physarum_sue").joinpath("data", name)
