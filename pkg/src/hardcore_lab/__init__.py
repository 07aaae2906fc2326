"""Desk-scale tools for the hard-core model on bipartite graphs.

Modules: ``graph`` (bipartite graphs, closures, 2-linked sets), ``containers``
(graph containers and their audits), ``polymer`` (defect polymers and the
cluster expansion), ``hardcore`` (exact oracles, samplers, Glauber dynamics),
``fptas`` (truncated-expansion estimates) and ``cli``.
"""

from .errors import InvariantViolation, SizeGuardError, ValidationError
from .graph import BipartiteGraph, VertexSet, complete_bipartite, hypercube

__all__ = ["BipartiteGraph", "VertexSet", "hypercube", "complete_bipartite",
           "ValidationError", "SizeGuardError", "InvariantViolation"]
