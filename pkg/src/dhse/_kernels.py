"""Numba kernels shared by single-ego-net queries and bulk extraction.

All kernels take a CSR adjacency (``offsets``, ``targets``) with sorted
neighbor lists plus a ``level`` array of hop distances.  A node ``w`` is
inside the current ego-net iff ``0 <= level[w] <= radius``; this lets the
same code run on an extracted EgoNet (level = distance from center) and on
the full graph during bulk extraction (level = BFS scratch).
"""
import warnings

import numpy as np
from numba import NumbaWarning, njit, prange

# this TBB build is too old for numba; it falls back to the OpenMP/workqueue layer
warnings.filterwarnings("ignore", message="The TBB threading layer", category=NumbaWarning)

STRUCT_PER_HOP = 6


@njit(cache=True, inline="always")
def _inside(level, radius, w):
    lv = level[w]
    return lv >= 0 and lv <= radius


@njit(cache=True)
def bfs_levels(offsets, targets, center, radius, level, queue):
    """BFS from ``center`` up to ``radius`` hops.

    ``level`` must be -1 everywhere on entry.  Visited nodes get their hop
    distance written into ``level`` and are appended to ``queue`` in BFS
    order.  Returns the number of visited nodes.  Self-loops never expand
    the frontier.
    """
    level[center] = 0
    queue[0] = center
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        du = level[u]
        if du >= radius:
            continue
        for p in range(offsets[u], offsets[u + 1]):
            w = targets[p]
            if level[w] < 0:
                level[w] = du + 1
                queue[tail] = w
                tail += 1
    return tail


@njit(cache=True)
def inside_degree(offsets, targets, level, radius, u):
    d = 0
    for p in range(offsets[u], offsets[u + 1]):
        w = targets[p]
        if w != u and _inside(level, radius, w):
            d += 1
    return d


@njit(cache=True)
def common_neighbors(offsets, targets, level, radius, a, b, skip):
    """Count inside nodes adjacent to both ``a`` and ``b``, excluding a, b, skip."""
    i = offsets[a]
    ie = offsets[a + 1]
    j = offsets[b]
    je = offsets[b + 1]
    c = 0
    while i < ie and j < je:
        x = targets[i]
        y = targets[j]
        if x < y:
            i += 1
        elif y < x:
            j += 1
        else:
            if x != a and x != b and x != skip and _inside(level, radius, x):
                c += 1
            i += 1
            j += 1
    return c


@njit(cache=True)
def has_edge(offsets, targets, u, w):
    lo = offsets[u]
    hi = offsets[u + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        t = targets[mid]
        if t < w:
            lo = mid + 1
        elif t > w:
            hi = mid
        else:
            return True
    return False


@njit(cache=True)
def triangles_at(offsets, targets, level, radius, v):
    c = 0
    for p in range(offsets[v], offsets[v + 1]):
        u = targets[p]
        if u != v and _inside(level, radius, u):
            c += common_neighbors(offsets, targets, level, radius, v, u, v)
    return c // 2


@njit(cache=True)
def clustering_at(offsets, targets, level, radius, v):
    d = inside_degree(offsets, targets, level, radius, v)
    if d < 2:
        return 0.0
    t = triangles_at(offsets, targets, level, radius, v)
    return 2.0 * t / (d * (d - 1.0))


@njit(cache=True)
def square_clustering_at(offsets, targets, level, radius, v):
    nb = np.empty(offsets[v + 1] - offsets[v], dtype=np.int64)
    m = 0
    for p in range(offsets[v], offsets[v + 1]):
        u = targets[p]
        if u != v and _inside(level, radius, u):
            nb[m] = u
            m += 1
    if m < 2:
        return 0.0
    deg = np.empty(m, dtype=np.int64)
    for i in range(m):
        deg[i] = inside_degree(offsets, targets, level, radius, nb[i])
    num = 0
    den = 0
    for i in range(m):
        u = nb[i]
        for j in range(i + 1, m):
            w = nb[j]
            q = common_neighbors(offsets, targets, level, radius, u, w, v)
            theta = 1 if has_edge(offsets, targets, u, w) else 0
            num += q
            den += (deg[i] - (1 + q + theta)) + (deg[j] - (1 + q + theta)) + q
    if den == 0:
        return 0.0
    return num / den


@njit(cache=True)
def graph_level(offsets, targets, level, radius, nodes, count):
    """(density, self_loops, transitivity) of the ego-net made of nodes[:count]."""
    m2 = 0
    loops = 0
    tri3 = 0
    triads = 0
    for i in range(count):
        u = nodes[i]
        d = 0
        for p in range(offsets[u], offsets[u + 1]):
            w = targets[p]
            if not _inside(level, radius, w):
                continue
            if w == u:
                loops += 1
                continue
            d += 1
            if w > u:
                tri3 += common_neighbors(offsets, targets, level, radius, u, w, -1)
        m2 += d
        triads += d * (d - 1) // 2
    density = 0.0
    if count >= 2:
        density = m2 / (count * (count - 1.0))
    trans = 0.0
    if triads > 0:
        trans = tri3 / triads
    return density, loops, trans


@njit(cache=True)
def _node_block(offsets, targets, k, v, level, queue, out_struct, out_hist):
    cnt = bfs_levels(offsets, targets, v, k, level, queue)
    for r in range(1, k + 1):
        # BFS order is sorted by level, so the r-hop net is a queue prefix
        n_r = 0
        while n_r < cnt and level[queue[n_r]] <= r:
            n_r += 1
        base = STRUCT_PER_HOP * (r - 1)
        out_struct[base] = triangles_at(offsets, targets, level, r, v)
        out_struct[base + 1] = clustering_at(offsets, targets, level, r, v)
        out_struct[base + 2] = square_clustering_at(offsets, targets, level, r, v)
        dens, loops, trans = graph_level(offsets, targets, level, r, queue, n_r)
        out_struct[base + 3] = dens
        out_struct[base + 4] = loops
        out_struct[base + 5] = trans
    for i in range(1, cnt):
        out_hist[level[queue[i]] - 1] += 1
    for i in range(cnt):
        level[queue[i]] = -1


@njit(cache=True, parallel=True)
def extract_blocks(offsets, targets, k, num_chunks):
    """Hop-wise indicators (n, 6k) and hop-distance histograms (n, k) for every node."""
    n = offsets.shape[0] - 1
    out_struct = np.zeros((n, STRUCT_PER_HOP * k), dtype=np.float64)
    out_hist = np.zeros((n, k), dtype=np.int64)
    chunk = (n + num_chunks - 1) // num_chunks
    for c in prange(num_chunks):
        lo = c * chunk
        hi = min(n, lo + chunk)
        if lo >= hi:
            continue
        level = np.full(n, -1, dtype=np.int64)
        queue = np.empty(n, dtype=np.int64)
        for v in range(lo, hi):
            _node_block(offsets, targets, k, v, level, queue, out_struct[v], out_hist[v])
    return out_struct, out_hist


@njit(cache=True)
def induced_csr(offsets, targets, nodes, local_of):
    """Induced CSR over ``nodes`` (sorted); ``local_of`` maps global -> local or -1."""
    m = nodes.shape[0]
    new_off = np.zeros(m + 1, dtype=np.int64)
    for i in range(m):
        u = nodes[i]
        c = 0
        for p in range(offsets[u], offsets[u + 1]):
            if local_of[targets[p]] >= 0:
                c += 1
        new_off[i + 1] = new_off[i] + c
    new_tgt = np.empty(new_off[m], dtype=np.int64)
    for i in range(m):
        u = nodes[i]
        q = new_off[i]
        for p in range(offsets[u], offsets[u + 1]):
            lw = local_of[targets[p]]
            if lw >= 0:
                new_tgt[q] = lw
                q += 1
    return new_off, new_tgt


@njit(cache=True)
def edge_aggregate(offsets, src, weights, x):
    """out[i] = sum over edges e of row i of weights[e, h] * x[src[e], h, :].

    Edges are grouped by destination row via ``offsets`` (CSR by destination).
    """
    n = offsets.shape[0] - 1
    heads = x.shape[1]
    width = x.shape[2]
    out = np.zeros((n, heads, width), dtype=x.dtype)
    for i in range(n):
        for e in range(offsets[i], offsets[i + 1]):
            j = src[e]
            for h in range(heads):
                w = weights[e, h]
                for d in range(width):
                    out[i, h, d] += w * x[j, h, d]
    return out


@njit(cache=True)
def edge_aggregate_backward(offsets, src, weights, x, grad_out, t_offsets, t_edges, dst):
    """Gradients of ``edge_aggregate`` w.r.t. weights and x.

    ``t_offsets``/``t_edges`` list the edge ids grouped by source node so the
    x-gradient is accumulated row by row; ``dst`` is the destination per edge.
    """
    n = offsets.shape[0] - 1
    heads = x.shape[1]
    width = x.shape[2]
    grad_w = np.empty_like(weights)
    grad_x = np.zeros_like(x)
    for i in range(n):
        for e in range(offsets[i], offsets[i + 1]):
            j = src[e]
            for h in range(heads):
                acc = 0.0
                for d in range(width):
                    acc += grad_out[i, h, d] * x[j, h, d]
                grad_w[e, h] = acc
    for j in range(n):
        for p in range(t_offsets[j], t_offsets[j + 1]):
            e = t_edges[p]
            i = dst[e]
            for h in range(heads):
                w = weights[e, h]
                for d in range(width):
                    grad_x[j, h, d] += w * grad_out[i, h, d]
    return grad_w, grad_x
