"""Temporal graphs and the graph-based frame scoring network."""

from lgrln.model.graphs import Adjacency, VideoGraphs, build_graphs
from lgrln.model.network import NetworkOutput, SummarizationNetwork, count_parameters

__all__ = [
    "Adjacency",
    "NetworkOutput",
    "SummarizationNetwork",
    "VideoGraphs",
    "build_graphs",
    "count_parameters",
]
