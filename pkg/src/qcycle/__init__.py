"""Quantum and classical causal models on directed graphs, including cyclic ones.

Probabilities of cyclic models come from post-selected teleportation: every
edge that closes a loop is cut and re-joined by a teleportation gadget, and the
observed distribution is the success-conditioned one. Graph separation is
covered by d-separation and its cyclic generalisation, p-separation.
"""

__version__ = "0.1.0"

from .distribution import Distribution
from .engine import (
    CyclicResult,
    acyclic_probability,
    cycle_weights,
    cyclic_probability,
    markov_check,
    self_cycle,
)
from .errors import (
    CapExceededError,
    DimensionError,
    DocumentError,
    GraphError,
    InconsistentModelError,
    ModelError,
    QcycleError,
)
from .graph import (
    CausalGraph,
    TeleportationGraph,
    VertexSplitGraph,
    build_teleportation_graph,
    build_vertex_split_graph,
    enumerate_acyclic_edge_subsets,
    enumerate_vertex_split_sets,
    is_acyclic,
    maximal_teleportation_graph,
    parents,
)
from .kernels import BACKEND
from .model import (
    CausalModel,
    FunctionalModel,
    TeleProtocol,
    bell_protocol,
    build_teleportation_model,
    embed_functional_model,
    self_test_protocol,
    validate_model,
    verify_protocol,
)
from .separation import (
    SeparationQuery,
    conditionally_independent,
    d_separated,
    p_separated,
)
from .tensor import (
    ComplexTensor,
    KrausChannel,
    Povm,
    apply_channel,
    decohere,
    partial_trace,
    tensor_product,
    validate_cptp,
    validate_povm,
)

__all__ = [
    "BACKEND",
    "CapExceededError",
    "CausalGraph",
    "CausalModel",
    "ComplexTensor",
    "CyclicResult",
    "DimensionError",
    "Distribution",
    "DocumentError",
    "FunctionalModel",
    "GraphError",
    "InconsistentModelError",
    "KrausChannel",
    "ModelError",
    "Povm",
    "QcycleError",
    "SeparationQuery",
    "TeleProtocol",
    "TeleportationGraph",
    "VertexSplitGraph",
    "acyclic_probability",
    "apply_channel",
    "bell_protocol",
    "build_teleportation_graph",
    "build_teleportation_model",
    "build_vertex_split_graph",
    "conditionally_independent",
    "cycle_weights",
    "cyclic_probability",
    "d_separated",
    "decohere",
    "embed_functional_model",
    "enumerate_acyclic_edge_subsets",
    "enumerate_vertex_split_sets",
    "is_acyclic",
    "markov_check",
    "maximal_teleportation_graph",
    "p_separated",
    "parents",
    "partial_trace",
    "self_cycle",
    "self_test_protocol",
    "tensor_product",
    "validate_cptp",
    "validate_model",
    "validate_povm",
    "verify_protocol",
]
