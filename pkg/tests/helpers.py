"""Shared test utilities: random instances and independent brute-force oracles."""

import itertools

from limbtrack.model import Detection, Edge, EdgeKind, PartType, ProblemGraph, Solution


def random_instance(
    rng,
    n_min=2,
    n_max=6,
    edge_prob=0.7,
    cost_scale=2.0,
    constraint_pair_frac=0.3,
):
    """Random mixed-sign instance with consistent must-link/must-cut sets.

    Every node gets a distinct part type so arbitrary cross-type edges are
    structurally legal.
    """
    n = int(rng.integers(n_min, n_max + 1))
    parts = [PartType(i, f"p{i}") for i in range(n)]
    dets = [Detection(i, 0, (float(i), 0.0), 0.5, parts[i]) for i in range(n)]
    node_costs = {i: float(rng.normal(0.0, cost_scale)) for i in range(n)}
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                edges.append(Edge(i, j, EdgeKind.CROSS_TYPE, float(rng.normal(0.0, cost_scale))))

    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    must_link, must_cut = set(), set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() >= constraint_pair_frac:
                continue
            if rng.random() < 0.5:
                must_link.add((i, j))
                ra, rb = find(i), find(j)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
            else:
                must_cut.add((i, j))
    must_cut = {
        (a, b) for (a, b) in must_cut if find(a) != find(b) and (a, b) not in must_link
    }
    return ProblemGraph(dets, edges, node_costs, must_link, must_cut)


def brute_force_optimum(graph):
    """Independent exhaustive minimizer: label every node -1 (out) or with a
    cluster index, filter feasible labelings, return (objective, Solution).

    Deliberately structured differently from the package solver: flat label
    enumeration instead of recursive block assignment.
    """
    nodes = sorted(graph.by_id)
    n = len(nodes)
    adj = graph.adjacency
    link_extra = {}
    for a, b in graph.must_link:
        link_extra.setdefault(a, set()).add(b)
        link_extra.setdefault(b, set()).add(a)

    best = (float("inf"), None)
    for labels in itertools.product(range(-1, n), repeat=n):
        assign = dict(zip(nodes, labels))
        ok = True
        for a, b in graph.must_link:
            if assign[a] == -1 or assign[a] != assign[b]:
                ok = False
                break
        if ok:
            for a, b in graph.must_cut:
                if assign[a] != -1 and assign[a] == assign[b]:
                    ok = False
                    break
        if not ok:
            continue
        blocks = {}
        for node, lab in assign.items():
            if lab != -1:
                blocks.setdefault(lab, set()).add(node)
        connected = True
        for block in blocks.values():
            start = min(block)
            seen = {start}
            stack = [start]
            while stack:
                cur = stack.pop()
                nbrs = set(adj[cur]) | link_extra.get(cur, set())
                for nbr in nbrs:
                    if nbr in block and nbr not in seen:
                        seen.add(nbr)
                        stack.append(nbr)
            if len(seen) != len(block):
                connected = False
                break
        if not connected:
            continue
        total = sum(graph.node_costs[node] for node, lab in assign.items() if lab != -1)
        for e in graph.edges:
            if assign[e.u] != -1 and assign[e.u] == assign[e.v]:
                total += e.cost
        if total < best[0] - 1e-12:
            sel = [node for node, lab in assign.items() if lab != -1]
            best = (total, Solution(sel, {node: assign[node] for node in sel}))
    return best


def all_simple_cycles(node_ids, edge_pairs):
    """Every simple cycle (length >= 3) of the graph, as node tuples.

    Canonical orientation: starts at the smallest node, second < last.
    Only usable on tiny graphs (exhaustive over subsets x permutations).
    """
    edges = {tuple(sorted(p)) for p in edge_pairs}
    nodes = sorted(node_ids)
    cycles = []
    for k in range(3, len(nodes) + 1):
        for subset in itertools.combinations(nodes, k):
            first, rest = subset[0], subset[1:]
            for perm in itertools.permutations(rest):
                if perm[0] > perm[-1]:
                    continue
                cyc = (first,) + perm
                if all(
                    tuple(sorted((cyc[i], cyc[(i + 1) % k]))) in edges for i in range(k)
                ):
                    cycles.append(cyc)
    return cycles


def cycle_inequalities_hold(cycle, labels):
    """True iff the cycle does not have exactly one cut edge."""
    k = len(cycle)
    cut = sum(
        1 - labels[tuple(sorted((cycle[i], cycle[(i + 1) % k])))] for i in range(k)
    )
    return cut != 1
