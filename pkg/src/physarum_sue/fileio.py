"""Flow, trace, manifest and DOT file formats."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .network import InputError, Network
from .probit import RNG_ALGORITHM
from .solvers import FlowSolution, SolverConfig

FLOWS_HEADER = "from,to,flow,flow_exact"
TRACE_HEADER = "outer_iter,epsilon,elapsed_ms,truncations"
TOOL_NAME = "physarum-sue"


def _write(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def format_flows(network: Network, flows) -> str:
    lines = [FLOWS_HEADER]
    for link, x in zip(network.links, np.asarray(flows, dtype=float).tolist()):
        lines.append(f"{link.from_node},{link.to_node},{x:.4f},{x!r}")
    return "\n".join(lines) + "\n"


def write_flows(path, network: Network, flows) -> None:
    _write(path, format_flows(network, flows))


def read_flows(path) -> tuple[list[tuple[int, int]], np.ndarray]:
    """Link keys and flows (the exact column when present) from a flows file."""
    keys, values = [], []
    seen_header = False
    header_cols: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = [c.strip() for c in line.split(",")]
            if not seen_header:
                if cells[:3] != ["from", "to", "flow"]:
                    raise InputError(f"flows file must start with header '{FLOWS_HEADER}'", lineno)
                header_cols = cells
                seen_header = True
                continue
            if len(cells) != len(header_cols):
                raise InputError(f"expected {len(header_cols)} columns, got {len(cells)}", lineno)
            try:
                key = (int(cells[0]), int(cells[1]))
                col = 3 if len(cells) > 3 else 2
                value = float(cells[col])
            except ValueError:
                raise InputError("non-numeric field", lineno) from None
            if key in keys:
                raise InputError(f"duplicate link {key}", lineno)
            if value < 0 or not np.isfinite(value):
                raise InputError(f"invalid flow {value}", lineno)
            keys.append(key)
            values.append(value)
    if not keys:
        raise InputError(f"flows file {path} has no data rows")
    return keys, np.array(values)


def flows_for_network(network: Network, keys, values) -> np.ndarray:
    """Reorder file flows onto the network's link order; the link sets must match."""
    expected = {(l.from_node, l.to_node) for l in network.links}
    if set(keys) != expected or len(keys) != len(expected):
        missing = sorted(expected - set(keys))
        extra = sorted(set(keys) - expected)
        raise InputError(f"flows do not match the network links (missing {missing[:5]}, extra {extra[:5]})")
    lookup = dict(zip(keys, values))
    return np.array([lookup[(l.from_node, l.to_node)] for l in network.links])


def format_trace(solution: FlowSolution, timing: bool = False) -> str:
    lines = [TRACE_HEADER]
    eps = solution.epsilon_trace.tolist()
    trunc = solution.truncation_trace.tolist()
    ms = solution.elapsed_trace.tolist()
    for n in range(solution.outer_iterations):
        elapsed = f"{ms[n]:.3f}" if timing else ""
        lines.append(f"{n + 1},{eps[n]!r},{elapsed},{trunc[n]}")
    return "\n".join(lines) + "\n"


def write_trace(path, solution: FlowSolution, timing: bool = False) -> None:
    _write(path, format_trace(solution, timing))


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_manifest(network_path, demands_path, config: SolverConfig, outputs: dict, version: str) -> dict:
    return {
        "tool": TOOL_NAME,
        "version": version,
        "rng": RNG_ALGORITHM,
        "network": str(network_path),
        "network_sha256": file_digest(network_path),
        "demands": str(demands_path),
        "demands_sha256": file_digest(demands_path),
        "config": config.to_dict(),
        "outputs": {k: str(v) for k, v in outputs.items() if v is not None},
    }


def write_manifest(path, manifest: dict) -> None:
    _write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in ("network", "demands", "config"):
        if key not in manifest:
            raise InputError(f"manifest {path} lacks '{key}'")
    return manifest


def config_from_manifest(manifest: dict) -> SolverConfig:
    fields = SolverConfig.__dataclass_fields__
    cfg = {k: v for k, v in manifest["config"].items() if k in fields}
    return SolverConfig(**cfg)


def to_dot(network: Network, flows=None) -> str:
    """Directed DOT graph; with flows, pen width scales with flow and unused links are dashed."""
    lines = ["digraph network {", "  rankdir=LR;", "  node [shape=circle];"]
    lines += [f"  {v};" for v in network.nodes]
    peak = 0.0
    if flows is not None:
        flows = np.asarray(flows, dtype=float)
        peak = float(flows.max()) if flows.size else 0.0
    for a, link in enumerate(network.links):
        attrs = [f'label="{link.alpha:g}/{link.beta:g}"']
        if flows is not None:
            x = float(flows[a])
            used = round(x, 4) > 0
            width = 1.0 + 4.0 * x / peak if peak > 0 else 1.0
            attrs[0] = f'label="{link.alpha:g}/{link.beta:g}\\n{x:.4f}"'
            attrs.append(f"penwidth={width:.3f}")
            attrs.append(f"style={'solid' if used else 'dashed'}")
        lines.append(f"  {link.from_node} -> {link.to_node} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
