"""Compiled inner loops over the implicit Freudenthal triangulation.

Vertices are addressed by their row-major id ``v = x + nx * (y + ny * z)``.
Every kernel takes the grid shape and the table of edge offsets produced by
:func:`edge_offsets` instead of an explicit adjacency structure.
"""

import heapq
import itertools

import numba
import numpy as np


def edge_offsets(dim):
    """Edge vectors of the Freudenthal (Kuhn) triangulation.

    Two vertices share an edge iff their coordinate difference is a nonzero
    0/1 vector or the negation of one, i.e. every cell is split along its
    (+1, +1[, +1]) main diagonal.
    """
    pos = [c for c in itertools.product((0, 1), repeat=3) if any(c)]
    if dim == 2:
        pos = [c for c in pos if c[2] == 0]
    pos.sort(key=lambda c: (sum(c), c[::-1]))
    offs = pos + [tuple(-x for x in c) for c in pos]
    return np.array(offs, dtype=np.int64)


def link_edges(offs):
    """Index pairs (i, j) of neighbor offsets that are adjacent in the link.

    The Kuhn triangulation is a flag complex, so two neighbors of ``v`` span
    a triangle with ``v`` exactly when they are themselves adjacent.
    """
    as_set = {tuple(o) for o in offs}
    pairs = []
    for i in range(len(offs)):
        for j in range(i + 1, len(offs)):
            if tuple(offs[i] - offs[j]) in as_set:
                pairs.append((i, j))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


@numba.njit(cache=True)
def _neighbor(v, i, nx, ny, nz, offs):
    x = v % nx
    y = (v // nx) % ny
    z = v // (nx * ny)
    xx = x + offs[i, 0]
    yy = y + offs[i, 1]
    zz = z + offs[i, 2]
    if xx < 0 or yy < 0 or zz < 0 or xx >= nx or yy >= ny or zz >= nz:
        return -1
    return xx + nx * (yy + ny * zz)


@numba.njit(cache=True)
def neighbor_table(nx, ny, nz, offs):
    n = nx * ny * nz
    k = offs.shape[0]
    out = np.empty((n, k), np.int64)
    for v in range(n):
        for i in range(k):
            out[v, i] = _neighbor(v, i, nx, ny, nz, offs)
    return out


@numba.njit(cache=True)
def _find(parent, u):
    while parent[u] != u:
        parent[u] = parent[parent[u]]
        u = parent[u]
    return u


@numba.njit(cache=True)
def sweep_pairs(order, rank, nx, ny, nz, offs):
    """Union-find sweep of the filtration given by ``order``.

    Returns (birth_vertices, death_vertices) for every component death.
    When several components meet at one vertex, all but the oldest die,
    emitted in increasing order of their birth rank.
    """
    n = order.shape[0]
    k = offs.shape[0]
    parent = np.full(n, -1, np.int64)
    birth = np.empty(n, np.int64)
    out_b = np.empty(n, np.int64)
    out_d = np.empty(n, np.int64)
    roots = np.empty(k, np.int64)
    m = 0
    for r in range(n):
        v = order[r]
        nr = 0
        for i in range(k):
            u = _neighbor(v, i, nx, ny, nz, offs)
            if u < 0 or parent[u] < 0:
                continue
            ru = _find(parent, u)
            dup = False
            for j in range(nr):
                if roots[j] == ru:
                    dup = True
                    break
            if not dup:
                roots[nr] = ru
                nr += 1
        if nr == 0:
            parent[v] = v
            birth[v] = v
            continue
        # insertion sort by age of the component
        for a in range(1, nr):
            cur = roots[a]
            key = rank[birth[cur]]
            b = a - 1
            while b >= 0 and rank[birth[roots[b]]] > key:
                roots[b + 1] = roots[b]
                b -= 1
            roots[b + 1] = cur
        oldest = roots[0]
        for j in range(1, nr):
            out_b[m] = birth[roots[j]]
            out_d[m] = v
            m += 1
            parent[roots[j]] = oldest
        parent[v] = oldest
    return out_b[:m].copy(), out_d[:m].copy()


@numba.njit(cache=True)
def flood(values, order, rank, seeds, nx, ny, nz, offs, descending):
    """Priority flood from ``seeds`` in ascending (or descending) order.

    Every popped vertex takes ``max(value, previous popped value)`` (``min``
    when descending), which flattens any basin not containing a seed to the
    level at which the flood first enters it. Returns the new values and the
    pop sequence, which is a valid total order for the new values.
    """
    n = values.shape[0]
    k = offs.shape[0]
    seen = np.zeros(n, np.bool_)
    heap = [np.int64(0)]
    heap.pop()
    for s in seeds:
        if not seen[s]:
            seen[s] = True
            key = rank[s] if not descending else n - 1 - rank[s]
            heapq.heappush(heap, np.int64(key))
    new_values = values.copy()
    seq = np.empty(n, np.int64)
    count = 0
    cur = 0.0
    while len(heap) > 0:
        key = heapq.heappop(heap)
        v = order[key] if not descending else order[n - 1 - key]
        val = values[v]
        if count > 0:
            if descending:
                if cur < val:
                    val = cur
            elif cur > val:
                val = cur
        cur = val
        new_values[v] = val
        seq[count] = v
        count += 1
        for i in range(k):
            u = _neighbor(v, i, nx, ny, nz, offs)
            if u >= 0 and not seen[u]:
                seen[u] = True
                key = rank[u] if not descending else n - 1 - rank[u]
                heapq.heappush(heap, np.int64(key))
    return new_values, seq[:count].copy()


@numba.njit(cache=True)
def flood_tree(order, rank, seeds, nx, ny, nz, offs, descending):
    """Discovery tree of the priority flood from ``seeds``.

    ``pred[v]`` is the vertex whose pop first reached ``v`` (-1 for seeds and
    unreached vertices); following it from any vertex gives a path to a seed
    whose highest (lowest when descending) value is the flood level there.
    """
    n = order.shape[0]
    k = offs.shape[0]
    seen = np.zeros(n, np.bool_)
    pred = np.full(n, -1, np.int64)
    heap = [np.int64(0)]
    heap.pop()
    for s in seeds:
        if not seen[s]:
            seen[s] = True
            key = rank[s] if not descending else n - 1 - rank[s]
            heapq.heappush(heap, np.int64(key))
    while len(heap) > 0:
        key = heapq.heappop(heap)
        v = order[key] if not descending else order[n - 1 - key]
        for i in range(k):
            u = _neighbor(v, i, nx, ny, nz, offs)
            if u >= 0 and not seen[u]:
                seen[u] = True
                pred[u] = v
                key = rank[u] if not descending else n - 1 - rank[u]
                heapq.heappush(heap, np.int64(key))
    return pred


@numba.njit(cache=True)
def extremum_flags(rank, nx, ny, nz, offs):
    """-1 for local minima, +1 for local maxima, 0 otherwise."""
    n = rank.shape[0]
    k = offs.shape[0]
    out = np.zeros(n, np.int8)
    for v in range(n):
        lower = 0
        upper = 0
        for i in range(k):
            u = _neighbor(v, i, nx, ny, nz, offs)
            if u < 0:
                continue
            if rank[u] < rank[v]:
                lower += 1
            else:
                upper += 1
        if lower == 0:
            out[v] = -1
        elif upper == 0:
            out[v] = 1
    return out


@numba.njit(cache=True)
def link_components(rank, nx, ny, nz, offs, pairs):
    """Number of connected components of the lower and upper link per vertex."""
    n = rank.shape[0]
    k = offs.shape[0]
    low = np.zeros(n, np.int64)
    up = np.zeros(n, np.int64)
    nb = np.empty(k, np.int64)
    side = np.empty(k, np.int64)
    parent = np.empty(k, np.int64)
    for v in range(n):
        for i in range(k):
            u = _neighbor(v, i, nx, ny, nz, offs)
            nb[i] = u
            if u < 0:
                side[i] = 0
            elif rank[u] < rank[v]:
                side[i] = -1
            else:
                side[i] = 1
            parent[i] = i
        for p in range(pairs.shape[0]):
            a = pairs[p, 0]
            b = pairs[p, 1]
            if side[a] != 0 and side[a] == side[b]:
                ra = _find(parent, a)
                rb = _find(parent, b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
        cl = 0
        cu = 0
        for i in range(k):
            if side[i] != 0 and _find(parent, i) == i:
                if side[i] < 0:
                    cl += 1
                else:
                    cu += 1
        low[v] = cl
        up[v] = cu
    return low, up
