"""Replicated lattice data types, a lossy network simulator and convergence checks."""
from .antientropy import AntiEntropyNode, DeltaInterval, FullState, causal_merge_guard
from .checker import Verdict, brute_force_oracle, lattice_law_suite
from .lattice import KINDS, LatticeCRDT, ReplicaId, make_kind
from .netsim import NetworkConfig, Simulator, run_to_quiescence
from .reductions import DeliveryMode, make_machine, phi_delta_to_op, phi_state_to_op
from .runner import run_scenario, sweep
from .scenario import Scenario, load_scenario, parse_scenario, serialize_scenario

__all__ = [
    "AntiEntropyNode",
    "DeliveryMode",
    "DeltaInterval",
    "FullState",
    "KINDS",
    "LatticeCRDT",
    "NetworkConfig",
    "ReplicaId",
    "Scenario",
    "Simulator",
    "Verdict",
    "brute_force_oracle",
    "causal_merge_guard",
    "lattice_law_suite",
    "load_scenario",
    "make_kind",
    "make_machine",
    "parse_scenario",
    "phi_delta_to_op",
    "phi_state_to_op",
    "run_scenario",
    "run_to_quiescence",
    "serialize_scenario",
    "sweep",
]
