"""Probit stochastic user equilibrium by Physarum flow adaptation and by MSA."""

from .network import (
    DemandSet,
    InputError,
    Link,
    Network,
    OdDemand,
    example_demands,
    free_flow_cost,
    link_cost,
    parse_demands,
    parse_network,
    serialize_network,
    sheffi12,
    validate,
)
from .solvers import (
    FlowSolution,
    MSASolver,
    PhysarumSUESolver,
    SolverConfig,
    compare_solutions,
    convergence_metric,
    msa_solve,
    physarum_sue_solve,
    solve,
)

__version__ = "0.1.0"
