"""Problem instance and solution types for subgraph-multicut tracking.

A problem instance couples body-part detections (nodes, each with a
retention cost) with typed weighted edges and optional hard must-link /
must-cut constraints. A solution selects a node subset and partitions it
into clusters; each cluster must be connected in the subgraph induced by
the joined edges, which makes the edge labeling consistent with a
partition by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping

from .errors import GraphStructureError


class EdgeKind(Enum):
    CROSS_TYPE = "cross"
    SAME_TYPE = "same"
    TEMPORAL = "temporal"
    ROOT_ATTACHMENT = "attach"


@dataclass(frozen=True)
class PartType:
    """A body-joint category (e.g. neck, left wrist).

    ``is_root`` marks the head joints used to anchor person identity.
    """

    id: int
    name: str
    is_root: bool = False


@dataclass(frozen=True)
class Detection:
    """One body-part proposal: where, when, what, and how confident.

    ``score`` must lie strictly inside (0, 1) so its log-odds is finite.
    """

    node_id: int
    frame: int
    pos: tuple[float, float]
    score: float
    part: PartType

    def __post_init__(self):
        if not (0.0 < self.score < 1.0):
            raise ValueError(f"detection score must be in (0,1), got {self.score}")
        if self.frame < 0:
            raise ValueError(f"frame must be non-negative, got {self.frame}")


@dataclass(frozen=True)
class Edge:
    """Weighted pairwise term between two detections.

    Endpoints are canonicalized so that ``u < v``. The cost is the price
    of putting both endpoints in the same cluster (negative = attractive).
    """

    u: int
    v: int
    kind: EdgeKind
    cost: float

    def __post_init__(self):
        if self.u == self.v:
            raise GraphStructureError(f"self-loop on node {self.u}")
        if self.u > self.v:
            lo, hi = self.v, self.u
            object.__setattr__(self, "u", lo)
            object.__setattr__(self, "v", hi)

    @property
    def pair(self) -> tuple[int, int]:
        return (self.u, self.v)


@dataclass(frozen=True)
class SolverParams:
    """Knobs for the exact and local-search solvers."""

    max_exact_nodes: int = 10
    move_budget: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.max_exact_nodes > 12:
            raise ValueError(
                f"max_exact_nodes is capped at 12 (got {self.max_exact_nodes}): "
                "exhaustive partition enumeration explodes beyond that"
            )
        if self.max_exact_nodes < 1:
            raise ValueError("max_exact_nodes must be >= 1")
        if self.move_budget < 1:
            raise ValueError("move_budget must be >= 1")


@dataclass(frozen=True)
class Violation:
    """One feasibility violation found by validate()."""

    kind: str  # selection | unknown-node | connectivity | must-link | must-cut
    nodes: tuple[int, ...]
    message: str


class ProblemGraph:
    """Immutable problem instance: detections, typed edges, constraints.

    ``node_costs`` maps node_id -> retention cost; defaults to the
    log-odds cost of each detection score when not given explicitly.
    """

    def __init__(
        self,
        detections: Iterable[Detection],
        edges: Iterable[Edge],
        node_costs: Mapping[int, float] | None = None,
        must_link: Iterable[tuple[int, int]] = (),
        must_cut: Iterable[tuple[int, int]] = (),
        validate_kinds: bool = True,
    ):
        # validate_kinds is off for constraint-contracted graphs, whose
        # representative detections no longer carry edge-kind semantics
        self.detections: tuple[Detection, ...] = tuple(detections)
        self.edges: tuple[Edge, ...] = tuple(edges)
        self.by_id: dict[int, Detection] = {}
        for det in self.detections:
            if det.node_id in self.by_id:
                raise GraphStructureError(f"duplicate node_id {det.node_id}")
            self.by_id[det.node_id] = det

        if node_costs is None:
            self.node_costs: dict[int, float] = {
                d.node_id: node_cost(d.score) for d in self.detections
            }
        else:
            self.node_costs = {int(k): float(v) for k, v in node_costs.items()}
            missing = set(self.by_id) - set(self.node_costs)
            if missing:
                raise GraphStructureError(f"node_costs missing nodes {sorted(missing)}")

        seen_pairs: set[tuple[int, int]] = set()
        for e in self.edges:
            for end in e.pair:
                if end not in self.by_id:
                    raise GraphStructureError(f"edge {e.pair} references unknown node {end}")
            if e.pair in seen_pairs:
                raise GraphStructureError(f"duplicate edge {e.pair}")
            seen_pairs.add(e.pair)
            if validate_kinds:
                self._check_edge_kind(e)

        self.must_link: frozenset[tuple[int, int]] = frozenset(
            _canon_pair(p) for p in must_link
        )
        self.must_cut: frozenset[tuple[int, int]] = frozenset(
            _canon_pair(p) for p in must_cut
        )
        overlap = self.must_link & self.must_cut
        if overlap:
            raise GraphStructureError(f"pairs both must-link and must-cut: {sorted(overlap)}")
        for pair in list(self.must_link) + list(self.must_cut):
            for end in pair:
                if end not in self.by_id:
                    raise GraphStructureError(f"constraint pair {pair} references unknown node {end}")

    def _check_edge_kind(self, e: Edge) -> None:
        a, b = self.by_id[e.u], self.by_id[e.v]
        if e.kind is EdgeKind.TEMPORAL:
            if a.part.id != b.part.id or abs(a.frame - b.frame) != 1:
                raise GraphStructureError(
                    f"temporal edge {e.pair} must join equal part types in adjacent frames"
                )
        elif e.kind is EdgeKind.SAME_TYPE:
            if a.part.id != b.part.id or a.frame != b.frame:
                raise GraphStructureError(
                    f"same-type edge {e.pair} must join equal part types in one frame"
                )
        elif e.kind is EdgeKind.ROOT_ATTACHMENT:
            if not (a.part.is_root ^ b.part.is_root):
                raise GraphStructureError(
                    f"root-attachment edge {e.pair} must join a root node to a non-root node"
                )
        elif e.kind is EdgeKind.CROSS_TYPE:
            if a.part.id == b.part.id:
                raise GraphStructureError(
                    f"cross-type edge {e.pair} must join different part types"
                )

    @cached_property
    def adjacency(self) -> dict[int, dict[int, float]]:
        """node -> {neighbor: edge cost}."""
        adj: dict[int, dict[int, float]] = {d.node_id: {} for d in self.detections}
        for e in self.edges:
            adj[e.u][e.v] = e.cost
            adj[e.v][e.u] = e.cost
        return adj

    @cached_property
    def edge_by_pair(self) -> dict[tuple[int, int], Edge]:
        return {e.pair: e for e in self.edges}

    @property
    def node_ids(self) -> list[int]:
        return [d.node_id for d in self.detections]

    def __len__(self) -> int:
        return len(self.detections)


class Solution:
    """A feasible assignment: selected nodes plus their cluster partition.

    Cluster ids are canonicalized to 0..k-1 ordered by smallest member,
    which makes equal partitions compare (and serialize) identically.
    """

    def __init__(self, selected: Iterable[int], cluster_of: Mapping[int, int]):
        selected = frozenset(int(n) for n in selected)
        cluster_of = {int(k): int(v) for k, v in cluster_of.items()}
        if set(cluster_of) != set(selected):
            raise GraphStructureError("cluster_of keys must equal the selected set")
        members: dict[int, list[int]] = {}
        for node, cid in cluster_of.items():
            members.setdefault(cid, []).append(node)
        blocks = sorted(tuple(sorted(m)) for m in members.values())
        self.selected: frozenset[int] = selected
        self.cluster_of: dict[int, int] = {}
        for cid, block in enumerate(blocks):
            for node in block:
                self.cluster_of[node] = cid
        self._blocks: tuple[tuple[int, ...], ...] = tuple(blocks)

    @staticmethod
    def empty() -> "Solution":
        return Solution(frozenset(), {})

    @property
    def clusters(self) -> tuple[tuple[int, ...], ...]:
        """Clusters as sorted member tuples, ordered by smallest member."""
        return self._blocks

    def canonical_form(self) -> tuple[tuple[int, ...], ...]:
        """Deterministic encoding used for tie-breaking and equality."""
        return self._blocks

    def edge_labels(self, graph: ProblemGraph) -> dict[tuple[int, int], int]:
        """Induced y: 1 iff both endpoints selected and co-clustered."""
        labels = {}
        for e in graph.edges:
            joined = (
                e.u in self.selected
                and e.v in self.selected
                and self.cluster_of[e.u] == self.cluster_of[e.v]
            )
            labels[e.pair] = 1 if joined else 0
        return labels

    def __eq__(self, other):
        return isinstance(other, Solution) and self._blocks == other._blocks

    def __hash__(self):
        return hash(self._blocks)

    def __repr__(self):
        return f"Solution(clusters={self._blocks})"


def node_cost(score: float, paper_sign: bool = False) -> float:
    """Retention cost of a detection from its score.

    Default convention: -log(score / (1 - score)), so confident detections
    carry negative cost and lower the minimized objective. ``paper_sign``
    flips to the literal log-odds orientation for comparison runs.
    """
    if not (0.0 < score < 1.0):
        raise ValueError(f"score must be in the open interval (0,1), got {score}")
    logit = math.log(score / (1.0 - score))
    return logit if paper_sign else -logit


def objective(graph: ProblemGraph, sol: Solution) -> float:
    """Sum of retained-node costs plus joined-edge costs."""
    for node in sol.selected:
        if node not in graph.by_id:
            raise GraphStructureError(f"solution references unknown node {node}")
    total = sum(graph.node_costs[n] for n in sol.selected)
    for e in graph.edges:
        if (
            e.u in sol.selected
            and e.v in sol.selected
            and sol.cluster_of[e.u] == sol.cluster_of[e.v]
        ):
            total += e.cost
    return total


def validate(graph: ProblemGraph, sol: Solution) -> list[Violation]:
    """Report every feasibility violation of ``sol`` on ``graph``.

    Empty result means: all selected nodes exist, every cluster is
    connected in the joined subgraph (the canonical multicut form, which
    implies the cycle consistency of the edge labeling), and every
    must-link / must-cut pair is respected.
    """
    out: list[Violation] = []
    unknown = [n for n in sol.selected if n not in graph.by_id]
    for n in unknown:
        out.append(Violation("unknown-node", (n,), f"selected node {n} is not in the graph"))
    if unknown:
        return out

    # must-link pairs are atomic (contracted during search), so they count
    # as connections when checking the canonical connected-cluster form
    adj: dict[int, set[int]] = {n: set(nbrs) for n, nbrs in graph.adjacency.items()}
    for a, b in graph.must_link:
        adj[a].add(b)
        adj[b].add(a)
    for block in sol.clusters:
        if len(block) == 1:
            continue
        block_set = set(block)
        seen = {block[0]}
        stack = [block[0]]
        while stack:
            cur = stack.pop()
            for nbr in adj[cur]:
                if nbr in block_set and nbr not in seen:
                    seen.add(nbr)
                    stack.append(nbr)
        if len(seen) != len(block):
            out.append(
                Violation(
                    "connectivity",
                    block,
                    f"cluster {block} is disconnected in the joined subgraph",
                )
            )

    for a, b in sorted(graph.must_link):
        ok = (
            a in sol.selected
            and b in sol.selected
            and sol.cluster_of[a] == sol.cluster_of[b]
        )
        if not ok:
            out.append(
                Violation(
                    "must-link",
                    (a, b),
                    f"must-link pair ({a},{b}) is not selected into one cluster",
                )
            )
    for a, b in sorted(graph.must_cut):
        if (
            a in sol.selected
            and b in sol.selected
            and sol.cluster_of[a] == sol.cluster_of[b]
        ):
            out.append(
                Violation("must-cut", (a, b), f"must-cut pair ({a},{b}) shares a cluster")
            )
    return out


def _canon_pair(pair: tuple[int, int]) -> tuple[int, int]:
    a, b = int(pair[0]), int(pair[1])
    if a == b:
        raise GraphStructureError(f"constraint pair may not be a self-pair: ({a},{b})")
    return (a, b) if a < b else (b, a)
