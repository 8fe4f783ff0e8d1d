import pytest

from dcn_robust.topology import (
    build_bcube,
    build_dcell,
    build_fat_tree,
    build_three_layer,
)


@pytest.fixture(scope="session")
def tiny_topologies():
    """Small instances used by oracle-style tests."""
    return {
        "three-layer": build_three_layer(2, 3, 2),
        "fat-tree": build_fat_tree(4),
        "bcube": build_bcube(4, 1),
        "bcube-cell": build_bcube(2, 0),
        "bcube-2x2": build_bcube(2, 1),
        "dcell": build_dcell(4, 1),
    }


def bfs_distances(adj: list[list[int]], source: int) -> list[float]:
    """Plain BFS used as the independent oracle for path metrics."""
    dist = [float("inf")] * len(adj)
    dist[source] = 0
    queue = [source]
    while queue:
        nxt = []
        for u in queue:
            for v in adj[u]:
                if dist[v] == float("inf"):
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        queue = nxt
    return dist


def degraded_adjacency(topo, removed_links=(), removed_switches=(), removed_servers=()):
    """Adjacency lists of the surviving graph (oracle-side construction)."""
    dead_nodes = set(removed_switches) | set(removed_servers)
    dead_links = {tuple(sorted(link)) for link in removed_links}
    adj = [[] for _ in range(topo.n_nodes)]
    for u, v in zip(topo.edges_u.tolist(), topo.edges_v.tolist()):
        if u in dead_nodes or v in dead_nodes or (u, v) in dead_links:
            continue
        adj[u].append(v)
        adj[v].append(u)
    return adj


def oracle_accessible_servers(topo, adj, removed_switches=()) -> set[int]:
    """Servers reachable from any surviving gateway (multi-source BFS)."""
    dead = set(removed_switches)
    seen = {g for g in topo.gateways.tolist() if g not in dead}
    queue = list(seen)
    while queue:
        u = queue.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return {n for n in seen if n < topo.n_servers}
