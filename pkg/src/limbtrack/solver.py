"""Exact and local-search solvers for the subgraph multicut instances.

The exact solver enumerates every feasible (selection, connected
partition) pair and is the oracle for small graphs. The local-search
solver scales to real instances: greedy agglomeration from singletons
followed by sweeps of node relocations, selection toggles, pairwise
cluster merges and 2-coloring cluster splits. Both honor must-link and
must-cut constraints; must-link pairs are contracted into supernodes
before search so they can never be separated.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphStructureError, InfeasibleConstraintsError
from .model import (
    Edge,
    EdgeKind,
    ProblemGraph,
    Solution,
    SolverParams,
    objective,
)

_EPS = 1e-12


@dataclass
class MoveLog:
    """Accepted local-search moves with their objective deltas."""

    moves: list[tuple[str, float]] = field(default_factory=list)
    initial_objective: float = 0.0

    def record(self, kind: str, delta: float) -> None:
        self.moves.append((kind, delta))

    @property
    def total_delta(self) -> float:
        return sum(d for _, d in self.moves)

    def __len__(self) -> int:
        return len(self.moves)


@dataclass
class ConstraintMapping:
    """Bookkeeping to translate between original nodes and supernodes."""

    node_map: dict[int, int]  # original node -> supernode
    members: dict[int, tuple[int, ...]]  # supernode -> original nodes
    forced: frozenset[int]  # supernodes that must stay selected

    def expand(self, sol: Solution) -> Solution:
        selected: list[int] = []
        cluster_of: dict[int, int] = {}
        for snode in sol.selected:
            cid = sol.cluster_of[snode]
            for orig in self.members[snode]:
                selected.append(orig)
                cluster_of[orig] = cid
        return Solution(selected, cluster_of)


def apply_constraints(graph: ProblemGraph) -> tuple[ProblemGraph, ConstraintMapping]:
    """Contract must-link pairs into supernodes; remap must-cut pairs.

    Supernode cost = sum of member costs + sum of intra-group edge costs
    (those edges are joined in every feasible solution). Raises
    InfeasibleConstraintsError when a must-link chain connects a must-cut
    pair, naming the offending cycle.
    """
    parent = {n: n for n in graph.by_id}

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    link_adj: dict[int, list[int]] = {}
    for a, b in sorted(graph.must_link):
        link_adj.setdefault(a, []).append(b)
        link_adj.setdefault(b, []).append(a)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for a, b in sorted(graph.must_cut):
        if find(a) == find(b):
            chain = _link_path(link_adj, a, b)
            raise InfeasibleConstraintsError(
                f"must-cut pair ({a},{b}) is connected by the must-link chain "
                f"{'-'.join(map(str, chain))}",
                cycle=chain + [a],
            )

    groups: dict[int, list[int]] = {}
    for n in sorted(graph.by_id):
        groups.setdefault(find(n), []).append(n)

    linked_nodes = set(link_adj)
    node_map: dict[int, int] = {}
    members: dict[int, tuple[int, ...]] = {}
    costs: dict[int, float] = {}
    forced: set[int] = set()
    detections = []
    for root, group in groups.items():
        rep = min(group)
        members[rep] = tuple(group)
        costs[rep] = sum(graph.node_costs[n] for n in group)
        for n in group:
            node_map[n] = rep
        detections.append(graph.by_id[rep])
        if any(n in linked_nodes for n in group):
            forced.add(rep)

    merged_edges: dict[tuple[int, int], tuple[EdgeKind, float]] = {}
    for e in graph.edges:
        su, sv = node_map[e.u], node_map[e.v]
        if su == sv:
            costs[su] += e.cost  # internal edge: always joined once selected
            continue
        pair = (su, sv) if su < sv else (sv, su)
        if pair in merged_edges:
            kind, c = merged_edges[pair]
            merged_edges[pair] = (kind, c + e.cost)
        else:
            merged_edges[pair] = (e.kind, e.cost)

    cut_pairs = set()
    for a, b in graph.must_cut:
        sa, sb = node_map[a], node_map[b]
        cut_pairs.add((sa, sb) if sa < sb else (sb, sa))

    reduced = ProblemGraph(
        detections=detections,
        edges=[Edge(u, v, kind, c) for (u, v), (kind, c) in sorted(merged_edges.items())],
        node_costs=costs,
        must_link=(),
        must_cut=cut_pairs,
        validate_kinds=False,
    )
    return reduced, ConstraintMapping(node_map, members, frozenset(forced))


def _link_path(link_adj: dict[int, list[int]], a: int, b: int) -> list[int]:
    """Shortest must-link path from a to b (exists when called)."""
    prev = {a: a}
    queue = [a]
    while queue:
        cur = queue.pop(0)
        if cur == b:
            break
        for nbr in sorted(link_adj.get(cur, ())):
            if nbr not in prev:
                prev[nbr] = cur
                queue.append(nbr)
    path = [b]
    while path[-1] != a:
        path.append(prev[path[-1]])
    return path[::-1]


# ---------------------------------------------------------------------------
# Exact solver
# ---------------------------------------------------------------------------


def solve_exact(graph: ProblemGraph, params: SolverParams | None = None) -> Solution:
    """Global minimizer by enumeration of feasible configurations.

    Every node is either unselected or assigned to a partition block;
    blocks must be edge-connected, must-link pairs share a block (and are
    selected), must-cut pairs never share one. Ties are broken by the
    lexicographically smallest canonical encoding.
    """
    params = params or SolverParams()
    n = len(graph)
    if n > params.max_exact_nodes:
        raise GraphStructureError(
            f"exact solver limited to {params.max_exact_nodes} nodes, instance has {n}"
        )
    # quick contradiction check
    apply_constraints(graph)

    nodes = sorted(graph.by_id)
    adj = graph.adjacency
    linked = {}
    for a, b in graph.must_link:
        linked.setdefault(a, set()).add(b)
        linked.setdefault(b, set()).add(a)
    cut = graph.must_cut

    # no incumbent yet: the empty solution is infeasible under must-link,
    # and is otherwise enumerated like any other configuration
    best_obj = float("inf")
    best_sol: Solution | None = None
    best_key: tuple = ()

    blocks: list[list[int]] = []

    def feasible_final() -> bool:
        # must-link pairs count as connections (contraction semantics)
        for block in blocks:
            block_set = set(block)
            seen = {block[0]}
            stack = [block[0]]
            while stack:
                cur = stack.pop()
                nbrs = set(adj[cur]) | linked.get(cur, set())
                for nbr in nbrs:
                    if nbr in block_set and nbr not in seen:
                        seen.add(nbr)
                        stack.append(nbr)
            if len(seen) != len(block):
                return False
        return True

    def evaluate() -> None:
        nonlocal best_obj, best_sol, best_key
        if not feasible_final():
            return
        total = 0.0
        cluster_of = {}
        selected = []
        for cid, block in enumerate(blocks):
            for node in block:
                cluster_of[node] = cid
                selected.append(node)
                total += graph.node_costs[node]
            for i, u in enumerate(block):
                for v in block[i + 1 :]:
                    cost = adj[u].get(v)
                    if cost is not None:
                        total += cost
        if best_sol is None or total < best_obj - _EPS:
            best_obj = total
            best_sol = Solution(selected, cluster_of)
            best_key = best_sol.canonical_form()
        elif abs(total - best_obj) <= _EPS:
            cand = Solution(selected, cluster_of)
            if cand.canonical_form() < best_key:
                best_sol = cand
                best_key = cand.canonical_form()

    def recurse(idx: int) -> None:
        if idx == len(nodes):
            evaluate()
            return
        node = nodes[idx]
        partners = linked.get(node, ())
        placed_partner_blocks = {
            bi for bi, block in enumerate(blocks) if any(p in block for p in partners)
        }
        if len(placed_partner_blocks) > 1:
            return  # partners already split: dead branch
        must_block = placed_partner_blocks.pop() if placed_partner_blocks else None

        # option 1: leave unselected (forbidden for must-link members)
        if not partners:
            recurse(idx + 1)

        # option 2: join an existing block
        for bi, block in enumerate(blocks):
            if must_block is not None and bi != must_block:
                continue
            if any(((min(node, m), max(node, m)) in cut) for m in block):
                continue
            block.append(node)
            recurse(idx + 1)
            block.pop()

        # option 3: open a new block
        if must_block is None:
            blocks.append([node])
            recurse(idx + 1)
            blocks.pop()

    recurse(0)
    assert best_sol is not None  # a feasible configuration always exists
    return best_sol


# ---------------------------------------------------------------------------
# Local search
# ---------------------------------------------------------------------------


class _SearchState:
    """Mutable partition state over the constraint-reduced graph."""

    def __init__(self, graph: ProblemGraph, forced: frozenset[int]):
        self.graph = graph
        self.adj = graph.adjacency
        self.costs = graph.node_costs
        self.forced = forced
        self.cluster_of: dict[int, int] = {}
        self.members: dict[int, set[int]] = {}
        self.cut_partners: dict[int, set[int]] = {}  # node -> nodes it must not join
        for a, b in graph.must_cut:
            self.cut_partners.setdefault(a, set()).add(b)
            self.cut_partners.setdefault(b, set()).add(a)
        self.cluster_cuts: dict[int, set[int]] = {}  # cluster -> forbidden node set
        self._next_cid = 0

    # -- cluster bookkeeping ------------------------------------------------

    def new_cluster(self, nodes: set[int]) -> int:
        cid = self._next_cid
        self._next_cid += 1
        self.members[cid] = nodes
        forbidden: set[int] = set()
        for n in nodes:
            self.cluster_of[n] = cid
            forbidden |= self.cut_partners.get(n, set())
        self.cluster_cuts[cid] = forbidden
        return cid

    def drop_node(self, node: int) -> None:
        cid = self.cluster_of.pop(node)
        self.members[cid].discard(node)
        if not self.members[cid]:
            del self.members[cid]
            del self.cluster_cuts[cid]
        else:
            self.cluster_cuts[cid] = set().union(
                *(self.cut_partners.get(n, set()) for n in self.members[cid])
            )

    def add_node(self, node: int, cid: int) -> None:
        self.cluster_of[node] = cid
        self.members[cid].add(node)
        self.cluster_cuts[cid] |= self.cut_partners.get(node, set())

    def cluster_blocked(self, node: int, cid: int) -> bool:
        return node in self.cluster_cuts[cid]

    def merge_blocked(self, ca: int, cb: int) -> bool:
        return bool(self.cluster_cuts[ca] & self.members[cb])

    # -- deltas ---------------------------------------------------------------

    def attach_weight(self, node: int, cid: int) -> float:
        members = self.members[cid]
        return sum(c for nbr, c in self.adj[node].items() if nbr in members)

    def detach_weight(self, node: int) -> float:
        cid = self.cluster_of[node]
        members = self.members[cid]
        return sum(c for nbr, c in self.adj[node].items() if nbr in members and nbr != node)

    def adjacent_clusters(self, node: int) -> list[int]:
        own = self.cluster_of.get(node)
        cids = {
            self.cluster_of[nbr]
            for nbr in self.adj[node]
            if nbr in self.cluster_of and self.cluster_of[nbr] != own
        }
        return sorted(cids)

    def normalize_components(self, cid: int) -> None:
        """Split a cluster into its connected components (objective-neutral:
        disconnected parts share no edges by definition)."""
        if cid not in self.members:
            return
        nodes = self.members[cid]
        if len(nodes) <= 1:
            return
        comps: list[set[int]] = []
        remaining = set(nodes)
        while remaining:
            start = min(remaining)
            comp = {start}
            stack = [start]
            while stack:
                cur = stack.pop()
                for nbr in self.adj[cur]:
                    if nbr in remaining and nbr not in comp:
                        comp.add(nbr)
                        stack.append(nbr)
            remaining -= comp
            comps.append(comp)
        if len(comps) == 1:
            return
        del self.members[cid]
        del self.cluster_cuts[cid]
        for comp in comps:
            self.new_cluster(comp)

    def solution(self) -> Solution:
        return Solution(list(self.cluster_of), dict(self.cluster_of))


def _greedy_agglomerate(state: _SearchState, log: MoveLog, budget: list[int]) -> None:
    """Merge the best edge-connected cluster pair while it improves."""
    weights: dict[tuple[int, int], float] = {}
    for e in state.graph.edges:
        cu = state.cluster_of.get(e.u)
        cv = state.cluster_of.get(e.v)
        if cu is None or cv is None or cu == cv:
            continue
        pair = (cu, cv) if cu < cv else (cv, cu)
        weights[pair] = weights.get(pair, 0.0) + e.cost
    cluster_adj: dict[int, set[int]] = {}
    for ca, cb in weights:
        cluster_adj.setdefault(ca, set()).add(cb)
        cluster_adj.setdefault(cb, set()).add(ca)

    heap = [(w, ca, cb) for (ca, cb), w in weights.items() if w < -_EPS]
    heapq.heapify(heap)
    while heap and budget[0] > 0:
        w, ca, cb = heapq.heappop(heap)
        pair = (ca, cb)
        if weights.get(pair) != w or w >= -_EPS:
            continue
        if ca not in state.members or cb not in state.members:
            continue
        if state.merge_blocked(ca, cb):
            continue
        # merge cb into ca
        small, big = (ca, cb) if len(state.members[ca]) <= len(state.members[cb]) else (cb, ca)
        for node in list(state.members[small]):
            state.cluster_of[node] = big
        state.members[big] |= state.members.pop(small)
        state.cluster_cuts[big] |= state.cluster_cuts.pop(small)
        log.record("merge-clusters", w)
        budget[0] -= 1
        # rewire weights of the absorbed cluster
        for other in list(cluster_adj.get(small, ())):
            if other == big:
                continue
            p_old = (small, other) if small < other else (other, small)
            w_old = weights.pop(p_old, 0.0)
            p_new = (big, other) if big < other else (other, big)
            w_new = weights.get(p_new, 0.0) + w_old
            weights[p_new] = w_new
            cluster_adj.setdefault(big, set()).add(other)
            cluster_adj[other].add(big)
            cluster_adj[other].discard(small)
            if w_new < -_EPS:
                heapq.heappush(heap, (w_new, *p_new))
        weights.pop((min(ca, cb), max(ca, cb)), None)
        cluster_adj.pop(small, None)
        cluster_adj.get(big, set()).discard(small)


def _try_split(state: _SearchState, cid: int) -> tuple[float, set[int]] | None:
    """2-coloring sweep approximating the cluster's min-attraction cut.

    Returns (delta, side) when splitting off ``side`` improves the
    objective, i.e. the edges across the cut are net-repulsive.
    """
    nodes = sorted(state.members[cid])
    if len(nodes) < 2:
        return None
    internal = [
        (u, v, state.adj[u][v])
        for i, u in enumerate(nodes)
        for v in nodes[i + 1 :]
        if v in state.adj[u]
    ]
    if not internal:
        return None
    worst = max(internal, key=lambda t: (t[2], t[0], t[1]))
    if worst[2] <= _EPS:
        return None  # no repulsive internal edge: nothing to cut
    side_a = {worst[0]}
    side_b = {worst[1]}
    color = {worst[0]: 0, worst[1]: 1}
    for n in nodes:
        if n in color:
            continue
        to_a = sum(c for nbr, c in state.adj[n].items() if color.get(nbr) == 0)
        to_b = sum(c for nbr, c in state.adj[n].items() if color.get(nbr) == 1)
        # join the side it is more attracted to (ties to side a)
        if to_a <= to_b:
            color[n] = 0
            side_a.add(n)
        else:
            color[n] = 1
            side_b.add(n)
    # sweep: flip nodes while it increases the crossing cost
    for _ in range(4):
        changed = False
        for n in nodes:
            own = color[n]
            to_a = sum(c for nbr, c in state.adj[n].items() if color.get(nbr) == 0 and nbr != n)
            to_b = sum(c for nbr, c in state.adj[n].items() if color.get(nbr) == 1 and nbr != n)
            # crossing contribution if on side a: to_b; if on side b: to_a
            if own == 0 and to_a > to_b + _EPS and len(side_a) > 1:
                color[n] = 1
                side_a.discard(n)
                side_b.add(n)
                changed = True
            elif own == 1 and to_b > to_a + _EPS and len(side_b) > 1:
                color[n] = 0
                side_b.discard(n)
                side_a.add(n)
                changed = True
        if not changed:
            break
    crossing = sum(c for u, v, c in internal if color[u] != color[v])
    if crossing > _EPS:
        return (-crossing, side_b)
    return None


def solve_local_search(
    graph: ProblemGraph, params: SolverParams | None = None
) -> Solution:
    """Feasible low-cost solution by constrained local search."""
    sol, _ = solve_local_search_logged(graph, params)
    return sol


def solve_local_search_logged(
    graph: ProblemGraph, params: SolverParams | None = None
) -> tuple[Solution, MoveLog]:
    """Local search returning the accepted-move log alongside the solution."""
    params = params or SolverParams()
    reduced, mapping = apply_constraints(graph)
    rng = np.random.default_rng(params.seed)
    state = _SearchState(reduced, mapping.forced)
    log = MoveLog()
    budget = [params.move_budget]

    # init: singletons of negative-cost nodes plus forced supernodes
    for node in sorted(reduced.by_id):
        if reduced.node_costs[node] < 0.0 or node in mapping.forced:
            state.new_cluster({node})
    log.initial_objective = sum(reduced.node_costs[n] for n in state.cluster_of)

    _greedy_agglomerate(state, log, budget)

    node_order = sorted(reduced.by_id)
    improved = True
    while improved and budget[0] > 0:
        improved = False
        order = list(node_order)
        rng.shuffle(order)

        for node in order:
            if budget[0] <= 0:
                break
            if node in state.cluster_of:
                own = state.cluster_of[node]
                detach = state.detach_weight(node)
                best_delta = 0.0
                best_move = None
                # relocate to an edge-adjacent cluster
                for cid in state.adjacent_clusters(node):
                    if state.cluster_blocked(node, cid):
                        continue
                    delta = state.attach_weight(node, cid) - detach
                    if delta < best_delta - _EPS:
                        best_delta = delta
                        best_move = ("move-node", cid)
                # deselect (forced supernodes stay)
                if node not in state.forced:
                    delta = -state.costs[node] - detach
                    if delta < best_delta - _EPS:
                        best_delta = delta
                        best_move = ("toggle-selection", None)
                if best_move is None:
                    continue
                kind, target = best_move
                state.drop_node(node)
                if kind == "move-node":
                    state.add_node(node, target)
                if own in state.members:
                    state.normalize_components(own)
                log.record(kind, best_delta)
                budget[0] -= 1
                improved = True
            else:
                base = state.costs[node]
                best_delta = base  # select as singleton
                best_cid = None
                for cid in state.adjacent_clusters(node):
                    if state.cluster_blocked(node, cid):
                        continue
                    delta = base + state.attach_weight(node, cid)
                    if delta < best_delta - _EPS:
                        best_delta = delta
                        best_cid = cid
                if best_delta < -_EPS:
                    if best_cid is None:
                        state.new_cluster({node})
                    else:
                        state.add_node(node, best_cid)
                    log.record("toggle-selection", best_delta)
                    budget[0] -= 1
                    improved = True

        if budget[0] <= 0:
            break

        # pairwise merges
        merges_before = len(log)
        _greedy_agglomerate(state, log, budget)
        if len(log) > merges_before:
            improved = True

        # cluster splits
        for cid in sorted(state.members):
            if budget[0] <= 0:
                break
            res = _try_split(state, cid)
            if res is None:
                continue
            delta, side = res
            for node in sorted(side):
                state.cluster_of.pop(node)
                state.members[cid].discard(node)
            state.cluster_cuts[cid] = set().union(
                *(state.cut_partners.get(n, set()) for n in state.members[cid])
            )
            new_cid = state.new_cluster(set(side))
            log.record("split-cluster", delta)
            budget[0] -= 1
            state.normalize_components(cid)
            state.normalize_components(new_cid)
            improved = True

    reduced_sol = state.solution()
    return mapping.expand(reduced_sol), log


def oracle_gap(graph: ProblemGraph, params: SolverParams | None = None) -> dict:
    """Compare local search against the exact oracle on one instance."""
    params = params or SolverParams()
    exact = solve_exact(graph, params)
    local = solve_local_search(graph, params)
    obj_exact = objective(graph, exact)
    obj_local = objective(graph, local)
    return {
        "objective_exact": obj_exact,
        "objective_local": obj_local,
        "gap": obj_local - obj_exact,
        "matches": abs(obj_local - obj_exact) <= 1e-9,
    }
