"""Sample graph construction and balanced domain partitioning.

Samples are linked into a symmetrized k-nearest-neighbour graph, split into
balanced domains by deterministic greedy region growing with
Kernighan-Lin-style boundary refinement, and the domain relation matrix is
the Gaussian kernel of the domain centroids with a zero diagonal.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .kernel import KernelParams, gram


@dataclass(frozen=True)
class SampleGraph:
    """Undirected knn graph over samples, retaining the feature matrix."""

    features: np.ndarray
    neighbors: tuple  # tuple of sorted int arrays, one per sample
    k: int

    @property
    def n(self):
        return self.features.shape[0]

    def edges(self):
        for i, nbrs in enumerate(self.neighbors):
            for j in nbrs:
                if j > i:
                    yield (i, int(j))

    def edge_count(self):
        return sum(len(nbrs) for nbrs in self.neighbors) // 2


@dataclass(frozen=True)
class DomainPartition:
    """Assignment of samples to domains plus per-domain centroids and sizes."""

    assignments: np.ndarray
    centroids: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=int)
        c = np.asarray(self.centroids, dtype=float)
        s = np.asarray(self.sizes, dtype=int)
        object.__setattr__(self, "assignments", a)
        object.__setattr__(self, "centroids", c)
        object.__setattr__(self, "sizes", s)
        n_d = c.shape[0]
        if s.shape[0] != n_d:
            raise ValidationError("sizes/centroids length mismatch")
        if a.size and (a.min() < 0 or a.max() >= n_d):
            raise ValidationError("assignment index out of range")
        counts = np.bincount(a, minlength=n_d)
        if not np.array_equal(counts, s):
            raise ValidationError("sizes do not match assignment counts")

    @property
    def n_domains(self):
        return self.centroids.shape[0]


@dataclass(frozen=True)
class DomainGraph:
    """Symmetric nonnegative domain relation matrix with zero diagonal."""

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        object.__setattr__(self, "adjacency", a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError("adjacency must be square")
        if not np.allclose(a, a.T, atol=1e-12):
            raise ValidationError("adjacency must be symmetric")
        if a.size and (a.min() < 0 or a.max() > 1.0 + 1e-12):
            raise ValidationError("adjacency entries must lie in [0, 1]")
        if np.abs(np.diagonal(a)).max(initial=0.0) > 0:
            raise ValidationError("adjacency diagonal must be zero")

    @property
    def n_domains(self):
        return self.adjacency.shape[0]


def build_knn_graph(features, k):
    """Symmetrized k-nearest-neighbour graph under Euclidean distance.

    Ties break toward the lower sample index; self-loops are excluded and
    directed neighbour picks are symmetrized by union.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise ValidationError("features must be 2-D")
    n = x.shape[0]
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise ValidationError(f"k must be a positive integer, got {k}")
    if n <= k:
        raise ValidationError(f"need more than k={k} samples, got {n}")
    sq = np.einsum("ij,ij->i", x, x)
    nbr_sets = [set() for _ in range(n)]
    for i in range(n):
        d2 = np.maximum(sq + sq[i] - 2.0 * (x @ x[i]), 0.0)
        d2[i] = np.inf
        # stable sort on (distance, index) makes ties deterministic
        order = np.lexsort((np.arange(n), d2))[:k]
        for j in order:
            nbr_sets[i].add(int(j))
            nbr_sets[int(j)].add(i)
    neighbors = tuple(np.array(sorted(s), dtype=int) for s in nbr_sets)
    return SampleGraph(x, neighbors, int(k))


def _bfs_distances(neighbors, sources, n):
    dist = np.full(n, np.inf)
    queue = list(sources)
    for s in sources:
        dist[s] = 0.0
    head = 0
    while head < len(queue):
        v = queue[head]
        head += 1
        for u in neighbors[v]:
            if not np.isfinite(dist[u]):
                dist[u] = dist[v] + 1
                queue.append(int(u))
    return dist


def _spread_seeds(neighbors, n, n_d, rng):
    """Farthest-first seed selection; unreachable vertices win outright."""
    seeds = [int(rng.integers(n))]
    while len(seeds) < n_d:
        dist = _bfs_distances(neighbors, seeds, n)
        unreached = np.where(~np.isfinite(dist))[0]
        if unreached.size:
            seeds.append(int(unreached[0]))
            continue
        dist[np.asarray(seeds, dtype=int)] = -1.0
        seeds.append(int(np.argmax(dist)))
    return seeds


def _grow_regions(neighbors, n, n_d, seeds, targets):
    part = np.full(n, -1, dtype=int)
    sizes = np.zeros(n_d, dtype=int)
    for p, s in enumerate(seeds):
        part[s] = p
        sizes[p] = 1
    remaining = n - n_d
    while remaining > 0:
        progressed = False
        for p in range(n_d):
            if sizes[p] >= targets[p] or remaining == 0:
                continue
            best, best_gain = -1, 0
            members = np.where(part == p)[0]
            seen = set()
            for v in members:
                for u in neighbors[v]:
                    if part[u] == -1 and u not in seen:
                        seen.add(int(u))
            for u in sorted(seen):
                gain = sum(1 for w in neighbors[u] if part[w] == p)
                if gain > best_gain or (gain == best_gain and best == -1):
                    best, best_gain = u, gain
            if best == -1:
                free = np.where(part == -1)[0]
                best = int(free[0])
            part[best] = p
            sizes[p] += 1
            remaining -= 1
            progressed = True
        if not progressed:  # all parts full; cannot happen when sum(targets)==n
            free = np.where(part == -1)[0]
            for u in free:
                p = int(np.argmin(sizes))
                part[u] = p
                sizes[p] += 1
            remaining = 0
    return part, sizes


def _edge_cut(neighbors, part):
    cut = 0
    for i, nbrs in enumerate(neighbors):
        for j in nbrs:
            if j > i and part[i] != part[j]:
                cut += 1
    return cut


def _refine(neighbors, part, sizes, lo, hi, max_passes=10):
    """Boundary moves (balance-preserving) plus best-gain pair swaps."""
    n = len(part)
    for _ in range(max_passes):
        improved = False
        # single moves: only between parts that stay within [lo, hi]
        for v in range(n):
            p = part[v]
            if sizes[p] - 1 < lo:
                continue
            counts = {}
            for u in neighbors[v]:
                counts[part[u]] = counts.get(part[u], 0) + 1
            internal = counts.get(p, 0)
            best_q, best_gain = -1, 0
            for q in sorted(counts):
                if q == p or sizes[q] + 1 > hi:
                    continue
                gain = counts[q] - internal
                if gain > best_gain:
                    best_q, best_gain = q, gain
            if best_q >= 0:
                sizes[p] -= 1
                sizes[best_q] += 1
                part[v] = best_q
                improved = True
        # swaps: exchange boundary vertices between two parts (sizes fixed)
        boundary = [
            v for v in range(n) if any(part[u] != part[v] for u in neighbors[v])
        ]
        for vi in range(len(boundary)):
            v = boundary[vi]
            cv = {}
            for u in neighbors[v]:
                cv[part[u]] = cv.get(part[u], 0) + 1
            for ui in range(vi + 1, len(boundary)):
                u = boundary[ui]
                p, q = part[v], part[u]
                if p == q:
                    continue
                cu = {}
                for w in neighbors[u]:
                    cu[part[w]] = cu.get(part[w], 0) + 1
                linked = 1 if u in neighbors[v] else 0
                gain = (
                    cv.get(q, 0)
                    - cv.get(p, 0)
                    + cu.get(p, 0)
                    - cu.get(q, 0)
                    - 2 * linked
                )
                if gain > 0:
                    part[v], part[u] = q, p
                    improved = True
                    cv = {}
                    for w in neighbors[v]:
                        cv[part[w]] = cv.get(part[w], 0) + 1
        if not improved:
            break
    return part, sizes


def partition_balanced(graph, n_d, seed):
    """Split the graph into ``n_d`` balanced domains, deterministically.

    Greedy region growing from spread-out seeds, followed by edge-cut
    refinement under a hard balance cap: every domain ends with either
    ``floor(n/n_d)`` or ``ceil(n/n_d)`` samples.
    """
    if not (isinstance(n_d, (int, np.integer)) and n_d >= 1):
        raise ValidationError(f"n_d must be a positive integer, got {n_d}")
    n = graph.n
    if n < n_d:
        raise ValidationError(f"cannot split {n} samples into {n_d} domains")
    rng = np.random.default_rng(seed)
    base, rem = divmod(n, n_d)
    targets = np.array([base + (1 if p < rem else 0) for p in range(n_d)])
    seeds = _spread_seeds(graph.neighbors, n, n_d, rng)
    part, sizes = _grow_regions(graph.neighbors, n, n_d, seeds, targets)
    lo, hi = base, base + (1 if rem else 0)
    part, sizes = _refine(graph.neighbors, part, sizes, lo, hi)
    centroids = np.zeros((n_d, graph.features.shape[1]))
    for p in range(n_d):
        centroids[p] = graph.features[part == p].mean(axis=0)
    return DomainPartition(part, centroids, sizes)


def domain_adjacency(centroids, sigma):
    """Gaussian-kernel relation matrix of the domain centroids, zero diagonal."""
    c = np.asarray(centroids, dtype=float)
    if c.ndim != 2 or c.shape[0] < 1:
        raise ValidationError("centroids must be a nonempty 2-D matrix")
    a = gram(c, c, KernelParams(sigma=sigma)).entries.copy()
    np.fill_diagonal(a, 0.0)
    return DomainGraph(a)


def write_partition(path, partition, ids):
    """Serialize ``sample_id<TAB>domain_index`` lines."""
    if len(ids) != partition.assignments.shape[0]:
        raise ValidationError("ids length does not match the partition")
    with open(path, "w", encoding="utf-8") as fh:
        for sid, dom in zip(ids, partition.assignments):
            fh.write(f"{sid}\t{int(dom)}\n")


def read_partition(path):
    """Parse a partition file back into (ids, assignments)."""
    ids, doms = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            sid, dom = line.split("\t")
            ids.append(sid)
            doms.append(int(dom))
    return ids, np.asarray(doms, dtype=int)
