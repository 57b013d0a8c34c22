"""Distance and hop-wise structure encoding for graph attention networks."""
from .graph import EgoNet, Graph, GraphFormatError, degrees, extract_ego_net, load_edge_list

__version__ = "0.1.0"

__all__ = ["EgoNet", "Graph", "GraphFormatError", "degrees", "extract_ego_net", "load_edge_list"]
