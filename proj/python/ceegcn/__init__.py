"""Weighted-graph clustering with graph contraction and sparse graph attention."""

from ._core import clustering_accuracy, cluster, contract, entmax, modularity, synth_sbm

__all__ = ["clustering_accuracy", "cluster", "contract", "entmax", "modularity", "synth_sbm"]
__version__ = "0.1.0"
