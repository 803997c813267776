"""Pure-Python graph kernels; reference twin of the compiled extension.

Nodes are dense ints 0..n-1 (callers map node ids to indices in sorted-id
order so index comparisons equal lexicographic id comparisons). All results
are deterministic: ties break toward the smallest index / edge tuple.
The compiled module must be call-for-call identical; tests compare both.
"""
from __future__ import annotations

from collections import deque

IMPLEMENTATION = "pure"


def shortest_paths(n: int, edges: list[tuple[int, int]], src: int) -> tuple[list[int], list[int]]:
    """Hop-count BFS from ``src``; returns (dist, first_hop).

    dist[v] is -1 when unreachable. first_hop[v] is the smallest possible
    first-hop index over all shortest src→v paths (src maps to itself),
    -1 when unreachable.
    """
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    for lst in adj:
        lst.sort()
    dist = [-1] * n
    first = [-1] * n
    dist[src] = 0
    first[src] = src
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] == -1:
                dist[v] = dist[u] + 1
                queue.append(v)
    # First hop of a one-hop path is the neighbor itself; beyond that, the
    # best first hop is inherited from the best predecessor on any shortest
    # path. Processing by increasing distance makes the choice well-defined.
    order = sorted((d, v) for v, d in enumerate(dist) if d > 0)
    for d, v in order:
        if d == 1:
            first[v] = v
            continue
        best = -1
        for u in adj[v]:
            if dist[u] == d - 1 and first[u] != -1:
                if best == -1 or first[u] < best:
                    best = first[u]
        first[v] = best
    return dist, first


def spanning_tree(n: int, edges: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Deterministic spanning forest: greedy over edges in sorted order.

    Edges are normalized (min, max) and deduplicated; the result is the
    lexicographically smallest spanning forest, returned sorted.
    """
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen: list[tuple[int, int]] = []
    for a, b in sorted({(min(a, b), max(a, b)) for a, b in edges}):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
            chosen.append((a, b))
    return chosen


def components(n: int, edges: list[tuple[int, int]]) -> list[int]:
    """Connected components; comp[v] is the smallest index in v's component."""
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb
    return [find(v) for v in range(n)]
