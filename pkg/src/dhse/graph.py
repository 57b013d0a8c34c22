"""Immutable CSR graph storage, edge-list loading and ego-net extraction."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels


class GraphFormatError(ValueError):
    """Raised for malformed edge lists or out-of-range node ids."""


def _csr(src: np.ndarray, dst: np.ndarray, num_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    # unique on the packed key sorts by (src, dst) and drops parallel edges
    keys = np.unique(src.astype(np.int64) * num_nodes + dst.astype(np.int64))
    rows = keys // num_nodes if num_nodes else keys
    cols = keys - rows * num_nodes
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=num_nodes), out=offsets[1:])
    return offsets, cols.astype(np.int64)


@dataclass(frozen=True)
class Graph:
    """Directed graph plus its symmetrized simple view, both as sorted CSR.

    Parallel edges are dropped; self-loops are kept in both views.
    """

    num_nodes: int
    directed_offsets: np.ndarray
    directed_targets: np.ndarray
    undirected_offsets: np.ndarray
    undirected_targets: np.ndarray
    self_loop_flags: np.ndarray

    @classmethod
    def from_edges(cls, src, dst, num_nodes: int | None = None) -> "Graph":
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise GraphFormatError("source and target arrays differ in length")
        if src.size and min(src.min(), dst.min()) < 0:
            raise GraphFormatError("negative node id")
        top = int(max(src.max(), dst.max())) + 1 if src.size else 0
        if num_nodes is None:
            num_nodes = top
        elif top > num_nodes:
            raise GraphFormatError(f"node id {top - 1} >= declared num_nodes {num_nodes}")
        d_off, d_tgt = _csr(src, dst, num_nodes)
        u_off, u_tgt = _csr(np.concatenate([src, dst]), np.concatenate([dst, src]), num_nodes)
        loops = np.zeros(num_nodes, dtype=bool)
        loops[src[src == dst]] = True
        for arr in (d_off, d_tgt, u_off, u_tgt, loops):
            arr.setflags(write=False)
        return cls(num_nodes, d_off, d_tgt, u_off, u_tgt, loops)

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted undirected neighbors of ``v`` (includes ``v`` on a self-loop)."""
        return self.undirected_targets[self.undirected_offsets[v]:self.undirected_offsets[v + 1]]

    def undirected_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Each undirected edge once as (u, v) with u <= v."""
        rows = np.repeat(np.arange(self.num_nodes), np.diff(self.undirected_offsets))
        keep = rows <= self.undirected_targets
        return rows[keep], self.undirected_targets[keep]

    @property
    def num_directed_edges(self) -> int:
        return int(self.directed_targets.size)


_SPLIT = re.compile(r"\s+")


def load_edge_list(path, num_nodes: int | None = None) -> Graph:
    """Read a whitespace separated ``u v`` edge list; ``#`` lines are comments."""
    src: list[int] = []
    dst: list[int] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = _SPLIT.split(line)
            if len(parts) != 2:
                raise GraphFormatError(f"{path}:{lineno}: expected 2 fields, got {len(parts)}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
            if u < 0 or v < 0:
                raise GraphFormatError(f"{path}:{lineno}: negative node id")
            if num_nodes is not None and max(u, v) >= num_nodes:
                raise GraphFormatError(
                    f"{path}:{lineno}: node id {max(u, v)} >= declared num_nodes {num_nodes}"
                )
            src.append(u)
            dst.append(v)
    return Graph.from_edges(np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), num_nodes)


def save_edge_list(path, src, dst) -> None:
    with open(Path(path), "w") as fh:
        for u, v in zip(np.asarray(src).tolist(), np.asarray(dst).tolist()):
            fh.write(f"{u}\t{v}\n")


def degrees(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """(in_degree, out_degree) over the directed view."""
    out_deg = np.diff(g.directed_offsets)
    in_deg = np.bincount(g.directed_targets, minlength=g.num_nodes).astype(np.int64)
    return in_deg, out_deg


@dataclass(frozen=True)
class EgoNet:
    """Induced subgraph of every node within ``radius`` hops of ``center``.

    Local ids index into ``nodes`` (sorted global ids); ``offsets``/``targets``
    is the induced undirected CSR over local ids.
    """

    center: int
    radius: int
    nodes: np.ndarray
    offsets: np.ndarray
    targets: np.ndarray
    dist_from_center: np.ndarray
    local_of_global: dict = field(repr=False)

    @property
    def center_local(self) -> int:
        return self.local_of_global[self.center]

    @property
    def num_nodes(self) -> int:
        return int(self.nodes.size)

    @property
    def num_edges(self) -> int:
        """Undirected edge count including self-loops."""
        rows = np.repeat(np.arange(self.num_nodes), np.diff(self.offsets))
        return int(np.count_nonzero(rows <= self.targets))


def extract_ego_net(g: Graph, center: int, r: int) -> EgoNet:
    if not 0 <= center < g.num_nodes:
        raise IndexError(f"center {center} outside [0, {g.num_nodes})")
    if r < 1:
        raise ValueError("hop radius must be >= 1")
    level = np.full(g.num_nodes, -1, dtype=np.int64)
    queue = np.empty(g.num_nodes, dtype=np.int64)
    cnt = _kernels.bfs_levels(g.undirected_offsets, g.undirected_targets, center, r, level, queue)
    nodes = np.sort(queue[:cnt])
    local_of = np.full(g.num_nodes, -1, dtype=np.int64)
    local_of[nodes] = np.arange(cnt)
    off, tgt = _kernels.induced_csr(g.undirected_offsets, g.undirected_targets, nodes, local_of)
    return EgoNet(
        center=int(center),
        radius=int(r),
        nodes=nodes,
        offsets=off,
        targets=tgt,
        dist_from_center=level[nodes],
        local_of_global={int(u): i for i, u in enumerate(nodes.tolist())},
    )
