"""Hop-wise structural indicators of ego-nets.

Per node the structure vector is laid out as::

    [in_deg, out_deg, (triangles, clustering, square_clustering,
                       density, self_loops, transitivity) for r = 1..k]

giving ``6k + 2`` columns.  All indicators use the undirected simple view;
self-loops only show up in the ``self_loops`` column.  Degenerate
denominators yield 0 rather than NaN.
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .graph import EgoNet, Graph, degrees, extract_ego_net

HOP_FIELDS = ("triangles", "clustering", "square_clustering", "density", "self_loops", "transitivity")
NODE_LEVEL = ("triangles", "clustering", "square_clustering")
GRAPH_LEVEL = ("density", "self_loops", "transitivity")


def structure_width(k: int) -> int:
    return len(HOP_FIELDS) * k + 2


def column_names(k: int) -> list[str]:
    return ["in_degree", "out_degree"] + [f"{f}@{r}" for r in range(1, k + 1) for f in HOP_FIELDS]


def _args(net: EgoNet):
    return net.offsets, net.targets, net.dist_from_center, net.radius


def count_triangles(net: EgoNet, v: int) -> int:
    """Triangles through local node ``v`` inside the ego-net."""
    return int(_kernels.triangles_at(*_args(net), v))


def clustering(net: EgoNet, v: int) -> float:
    return float(_kernels.clustering_at(*_args(net), v))


def square_clustering(net: EgoNet, v: int) -> float:
    """Fraction of potential squares through ``v`` that exist.

    For each neighbor pair u < w, ``q`` is the number of common neighbors
    other than ``v`` and ``a = (k_u - (1 + q + theta)) + (k_w - (1 + q + theta))``
    with ``theta`` = 1 when u and w are adjacent.  Result is sum(q) / sum(a + q).
    """
    return float(_kernels.square_clustering_at(*_args(net), v))


def graph_level(net: EgoNet) -> tuple[float, int, float]:
    """(density, self_loops, transitivity) of the whole ego-net."""
    nodes = np.arange(net.num_nodes, dtype=np.int64)
    dens, loops, trans = _kernels.graph_level(*_args(net), nodes, net.num_nodes)
    return float(dens), int(loops), float(trans)


def structure_vector(g: Graph, v: int, k: int) -> np.ndarray:
    """Structure vector of a single node, built ego-net by ego-net."""
    if k < 1:
        raise ValueError("k must be >= 1")
    in_deg, out_deg = degrees(g)
    out = [float(in_deg[v]), float(out_deg[v])]
    for r in range(1, k + 1):
        net = extract_ego_net(g, v, r)
        c = net.center_local
        dens, loops, trans = graph_level(net)
        out += [count_triangles(net, c), clustering(net, c), square_clustering(net, c), dens, loops, trans]
    return np.asarray(out, dtype=np.float64)


def hop_columns(k: int, fields) -> list[int]:
    """Column indices of the given per-hop fields across all hops."""
    idx = [HOP_FIELDS.index(f) for f in fields]
    return [2 + len(HOP_FIELDS) * (r - 1) + i for r in range(1, k + 1) for i in idx]
