"""Field generators and independent reference implementations for the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import ndimage

from topc.field import CriticalType, build_field

RUNNING = [0, 4, 2, 5, 6, 7, 8, 9, 10]


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def running_example():
    return build_field((3, 3, 1), np.array(RUNNING, dtype=float))


def smooth_noise(rng, dims=(32, 32, 32), sigma=2.0, noise=0.01):
    """Gaussian-smoothed noise scaled to unit range plus white noise."""
    shape = dims[::-1]
    a = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="nearest")
    a = a / np.ptp(a) + noise * rng.standard_normal(shape)
    return build_field(dims, a.ravel())


def feature_field(rng, n=32, k=12, noise=0.001):
    """A few Gaussian bumps and dips of random width, scaled to unit range, plus white noise."""
    x = np.arange(n, dtype=np.float64)
    z, y, xx = np.meshgrid(x, x, x, indexing="ij")
    a = np.zeros((n, n, n))
    for _ in range(k):
        c = rng.uniform(0, n, 3)
        w = rng.uniform(2, 6)
        h = rng.uniform(-1, 1)
        a += h * np.exp(-((xx - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2) / (2 * w * w))
    a = a / np.ptp(a) + noise * rng.standard_normal(a.shape)
    return build_field((n, n, n), a.ravel())


def ramp(n=64):
    x = np.linspace(0.0, 1.0, n)
    return build_field((n, n, n), (x[None, None, :] + x[None, :, None] + x[:, None, None]).ravel())


def random_field(rng, max_dims=(16, 16, 8), kind=None):
    """Random grid (2D or 3D) with a mix of value distributions, ties included."""
    dims = tuple(int(rng.integers(2, m + 1)) for m in max_dims)
    if rng.random() < 0.3:
        dims = dims[:2] + (1,)
    n = int(np.prod(dims))
    kind = kind or rng.choice(["normal", "integers", "smooth"])
    if kind == "normal":
        values = rng.standard_normal(n)
    elif kind == "integers":
        values = rng.integers(0, 5, n).astype(float)
    else:
        values = ndimage.gaussian_filter(rng.standard_normal(dims[::-1]), 1.0).ravel()
    offsets = rng.permutation(n) if rng.random() < 0.5 else None
    return build_field(dims, values, offsets)


# -- triangulation by explicit simplex enumeration ---------------------------

def cell_simplices(dims):
    """Top simplices of the grid: each cube split along its main diagonal.

    A 3D cell yields 6 tetrahedra, one per axis permutation, each walking from
    the cell origin to the opposite corner one unit step at a time. A 2D cell
    yields 2 triangles the same way.
    """
    nx, ny, nz = dims
    d = 3 if nz > 1 else 2
    units = np.eye(3, dtype=int)[:d]
    out = []
    for z in range(max(nz - 1, 1) if d == 3 else 1):
        for y in range(ny - 1):
            for x in range(nx - 1):
                for perm in itertools.permutations(range(d)):
                    p = np.array([x, y, z])
                    simplex = [tuple(p)]
                    for axis in perm:
                        p = p + units[axis]
                        simplex.append(tuple(p))
                    out.append([a + nx * (b + ny * c) for a, b, c in simplex])
    return out


def brute_neighbors(dims, v):
    nb = set()
    for s in cell_simplices(dims):
        if v in s:
            nb.update(s)
    nb.discard(v)
    return sorted(nb)


def _components(nodes, edges):
    parent = {u: u for u in nodes}

    def find(u):
        while parent[u] != u:
            u = parent[u]
        return u

    for a, b in edges:
        if a in parent and b in parent:
            parent[find(a)] = find(b)
    return len({find(u) for u in nodes})


def brute_classify(field, v):
    """Critical type from link components computed on explicit simplices."""
    rank = field.order.rank
    link_v, link_e = set(), set()
    for s in cell_simplices(field.dims):
        if v not in s:
            continue
        others = [u for u in s if u != v]
        link_v.update(others)
        link_e.update(itertools.combinations(sorted(others), 2))
    lower = {u for u in link_v if rank[u] < rank[v]}
    upper = link_v - lower
    lo = _components(lower, link_e)
    up = _components(upper, link_e)
    if lo == 0:
        return CriticalType.MINIMUM
    if up == 0:
        return CriticalType.MAXIMUM
    if lo > 2 or up > 2:
        return CriticalType.DEGENERATE
    if field.dims[2] == 1:
        return CriticalType.SADDLE1 if (lo == 2 or up == 2) else CriticalType.REGULAR
    if lo == 2 and up == 2:
        return CriticalType.DEGENERATE
    if lo == 2:
        return CriticalType.SADDLE1
    if up == 2:
        return CriticalType.SADDLE2
    return CriticalType.REGULAR


# -- diagram distances by exhaustive enumeration -----------------------------

def _partial_matchings(n, m):
    """Every partial injection of range(m) into range(n), as tuples with None for unmatched."""
    if m == 0:
        yield ()
        return
    for rest in _partial_matchings(n, m - 1):
        yield rest + (None,)
        for j in range(n):
            if j not in rest:
                yield rest + (j,)


def _enum_class(a, b, reduce):
    if not a and not b:
        return 0.0
    best = math.inf
    for targets in _partial_matchings(len(a), len(b)):
        costs = []
        for i, j in enumerate(targets):
            if j is None:
                costs.append(b[i][1] - b[i][0])
            else:
                costs.append(max(abs(b[i][0] - a[j][0]), abs(b[i][1] - a[j][1])))
        costs += [a[j][1] - a[j][0] for j in set(range(len(a))) - set(targets)]
        best = min(best, reduce(costs))
    return best


def enumerated_distance(d1, d2, kind):
    """Bottleneck or Wasserstein distance by trying every partial matching per class."""
    reduce = (lambda c: max(c, default=0.0)) if kind == "bottleneck" else (lambda c: math.fsum(c))
    parts = []
    for cls in np.union1d(d1.pair_class, d2.pair_class):
        a = list(zip(d1.birth_value[d1.pair_class == cls], d1.death_value[d1.pair_class == cls]))
        b = list(zip(d2.birth_value[d2.pair_class == cls], d2.death_value[d2.pair_class == cls]))
        parts.append(_enum_class(a, b, reduce))
    return max(parts, default=0.0) if kind == "bottleneck" else math.fsum(parts)


def make_diagram(pairs, field_range=(0.0, 10.0)):
    """Diagram from (birth, death, class) triples with dummy vertex ids."""
    from topc.persistence import PersistenceDiagram

    n = len(pairs)
    return PersistenceDiagram(
        np.arange(n, dtype=np.int64),
        np.arange(n, dtype=np.int64) + n,
        np.array([p[0] for p in pairs], dtype=float),
        np.array([p[1] for p in pairs], dtype=float),
        np.array([p[2] for p in pairs], dtype=np.int8),
        field_range,
    )


def random_quantized(rng, max_dims=(9, 9, 5)):
    """Random (QuantizedField, TopologicalIndex, epsilon, flags, external) for codec tests."""
    from topc.codec import EXTERNAL_CODECS, build_index, make_flags
    from topc.quantize import partition_from_values, quantize

    f = random_field(rng, max_dims=max_dims, kind=rng.choice(["normal", "integers"]))
    n = f.n_vertices
    k = int(rng.integers(0, min(n, 12) + 1))
    crit = rng.choice(n, size=k, replace=False)
    # the global extrema always delimit the partition
    crit = np.unique(np.concatenate([crit, f.order.order[[0, -1]]]))
    pointwise = bool(rng.random() < 0.4)
    eps = float(rng.uniform(0.05, 2.0))
    part = partition_from_values(f.values[crit], pointwise, eps)
    q = quantize(f, part, crit)
    types = rng.integers(0, 4, crit.size).astype(np.uint8)
    index = build_index(crit, types, f.values[crit], f.order.rank[crit], q.partition)
    external = EXTERNAL_CODECS["uq8"].compress_field(f.values) if rng.random() < 0.3 else None
    backend = "zlib" if rng.random() < 0.3 else "bz2"
    flags = make_flags(pointwise=pointwise, external=external is not None, backend=backend,
                       source_f32=bool(rng.random() < 0.5))
    return q, index, eps, flags, external
