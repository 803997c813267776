# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled graph kernels; behavioral twin of kernels.pure.

Same contracts, same deterministic tie-breaks, same return types. Kept in
lockstep with the pure module — any change lands in both or in neither.
"""
from libc.stdlib cimport malloc, free

IMPLEMENTATION = "compiled"


def shortest_paths(int n, list edges, int src):
    """Hop-count BFS from ``src``; returns (dist, first_hop) as lists."""
    cdef int m = len(edges)
    cdef int i, a, b, u, v, d, best, head, tail
    # One arena carved into CSR adjacency plus the BFS work arrays.
    cdef size_t ints = 7 * n + 1 + 2 * m + 1
    cdef int *arena = <int *> malloc(ints * sizeof(int))
    if arena == NULL:
        raise MemoryError()
    cdef int *deg = arena
    cdef int *off = deg + n
    cdef int *fill = off + n + 1
    cdef int *dist = fill + n
    cdef int *first = dist + n
    cdef int *queue = first + n
    cdef int *order = queue + n
    cdef int *adj = order + n
    try:
        for i in range(n):
            deg[i] = 0
        for i in range(m):
            a = edges[i][0]
            b = edges[i][1]
            deg[a] += 1
            deg[b] += 1
        off[0] = 0
        for i in range(n):
            off[i + 1] = off[i] + deg[i]
            fill[i] = off[i]
        for i in range(m):
            a = edges[i][0]
            b = edges[i][1]
            adj[fill[a]] = b
            fill[a] += 1
            adj[fill[b]] = a
            fill[b] += 1
        for u in range(n):
            # insertion sort per neighbor list (lists are short)
            for i in range(off[u] + 1, off[u + 1]):
                v = adj[i]
                d = i - 1
                while d >= off[u] and adj[d] > v:
                    adj[d + 1] = adj[d]
                    d -= 1
                adj[d + 1] = v
        for i in range(n):
            dist[i] = -1
            first[i] = -1
        dist[src] = 0
        first[src] = src
        head = 0
        tail = 0
        queue[tail] = src
        tail += 1
        while head < tail:
            u = queue[head]
            head += 1
            for i in range(off[u], off[u + 1]):
                v = adj[i]
                if dist[v] == -1:
                    dist[v] = dist[u] + 1
                    queue[tail] = v
                    tail += 1
        # BFS emits nodes in nondecreasing distance; reuse that order for
        # the first-hop DP instead of re-sorting.
        for i in range(tail):
            order[i] = queue[i]
        for i in range(tail):
            v = order[i]
            d = dist[v]
            if d == 0:
                continue
            if d == 1:
                first[v] = v
                continue
            best = -1
            for u in range(off[v], off[v + 1]):
                a = adj[u]
                if dist[a] == d - 1 and first[a] != -1:
                    if best == -1 or first[a] < best:
                        best = first[a]
            first[v] = best
        return [dist[i] for i in range(n)], [first[i] for i in range(n)]
    finally:
        free(arena)


def spanning_tree(int n, list edges):
    """Deterministic spanning forest over sorted normalized edges."""
    cdef int a, b, ra, rb
    cdef int *parent = <int *> malloc(n * sizeof(int))
    if parent == NULL:
        raise MemoryError()
    try:
        for a in range(n):
            parent[a] = a
        normalized = sorted({(min(e[0], e[1]), max(e[0], e[1])) for e in edges})
        chosen = []
        for a, b in normalized:
            ra = a
            while parent[ra] != ra:
                parent[ra] = parent[parent[ra]]
                ra = parent[ra]
            rb = b
            while parent[rb] != rb:
                parent[rb] = parent[parent[rb]]
                rb = parent[rb]
            if ra != rb:
                parent[rb] = ra
                chosen.append((a, b))
        return chosen
    finally:
        free(parent)


def components(int n, list edges):
    """comp[v] = smallest index in v's connected component."""
    cdef int a, b, ra, rb, v
    cdef int *parent = <int *> malloc(n * sizeof(int))
    if parent == NULL:
        raise MemoryError()
    try:
        for v in range(n):
            parent[v] = v
        for e in edges:
            ra = e[0]
            while parent[ra] != ra:
                parent[ra] = parent[parent[ra]]
                ra = parent[ra]
            rb = e[1]
            while parent[rb] != rb:
                parent[rb] = parent[parent[rb]]
                rb = parent[rb]
            if ra != rb:
                if ra < rb:
                    parent[rb] = ra
                else:
                    parent[ra] = rb
        return [_find(parent, v) for v in range(n)]
    finally:
        free(parent)


cdef int _find(int *parent, int x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x
