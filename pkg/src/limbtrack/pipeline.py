"""End-to-end articulated tracking over a detection sequence.

Stages: score filtering, head-track seeding on the root joints, then a
constrained full-body solve where each head track is pinned together by
must-link constraints and separated from other tracks by must-cut
constraints. Clusters that contain no head track are discarded; the
surviving clusters become per-person pose tracks keyed by head-track id.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

from .builder import (
    CostModels,
    SidecarData,
    SparsityPattern,
    build_bu,
    build_tdbu,
)
from .errors import ConfigError, GraphStructureError
from .model import Detection, ProblemGraph, SolverParams, objective
from .skeleton import DEFAULT_PERSON_PART
from .solver import solve_local_search

MODEL_VARIANTS = ("bu-full", "bu-sparse", "tdbu")

# tracking-time score filters per model variant
DEFAULT_SCORE_THRESHOLDS = {"bu-full": 0.65, "bu-sparse": 0.65, "tdbu": 0.7}


@dataclass
class TrackSet:
    """Per-person, per-frame part positions with scores.

    entries: person -> frame -> part id -> ((x, y), score)
    """

    n_frames: int
    entries: dict[int, dict[int, dict[int, tuple[tuple[float, float], float]]]] = field(
        default_factory=dict
    )

    def add(self, person: int, frame: int, part: int, pos, score: float) -> None:
        if not (0 <= frame < self.n_frames):
            raise GraphStructureError(
                f"frame {frame} outside sequence of {self.n_frames} frames"
            )
        frames = self.entries.setdefault(person, {})
        parts = frames.setdefault(frame, {})
        if part in parts:
            raise GraphStructureError(
                f"duplicate entry for person {person}, frame {frame}, part {part}"
            )
        parts[part] = ((float(pos[0]), float(pos[1])), float(score))

    def persons(self) -> list[int]:
        return sorted(self.entries)

    def frames_of(self, person: int) -> list[int]:
        return sorted(self.entries.get(person, {}))

    def pose(self, person: int, frame: int) -> dict[int, tuple[tuple[float, float], float]]:
        return self.entries.get(person, {}).get(frame, {})

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SequenceConfig:
    """Variant choice and solve/windowing knobs for one sequence."""

    model: str = "bu-sparse"
    window: int = 41
    margin: int = 10
    solver: SolverParams = field(default_factory=SolverParams)
    score_thresholds: dict = field(default_factory=lambda: dict(DEFAULT_SCORE_THRESHOLDS))
    person_part: str = DEFAULT_PERSON_PART
    temporal_gate: float | None = None
    paper_sign: bool = False

    def __post_init__(self):
        if self.model not in MODEL_VARIANTS:
            raise ConfigError(f"unknown model variant {self.model!r}")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.margin < 0 or (self.window > 2 * self.margin) is False:
            raise ConfigError("window must exceed twice the margin")

    @property
    def threshold(self) -> float:
        return float(self.score_thresholds.get(self.model, 0.0))


def filter_by_score(
    frames: list[list[Detection]], threshold: float
) -> list[list[Detection]]:
    """Keep detections with score strictly greater than the threshold."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError(f"threshold must be in [0,1], got {threshold}")
    return [[d for d in dets if d.score > threshold] for dets in frames]


def extract_pose(
    cluster_detections: Iterable[Detection], frame: int
) -> dict[int, tuple[tuple[float, float], float]]:
    """Per part type present at the frame, the highest-score detection
    (ties broken by lowest node id)."""
    best: dict[int, Detection] = {}
    for d in cluster_detections:
        if d.frame != frame:
            continue
        cur = best.get(d.part.id)
        if cur is None or (-d.score, d.node_id) < (-cur.score, cur.node_id):
            best[d.part.id] = d
    return {pid: (d.pos, d.score) for pid, d in best.items()}


def seed_head_tracks(
    frames: list[list[Detection]],
    models: CostModels,
    cfg: SequenceConfig | None = None,
    sidecars: SidecarData | None = None,
) -> TrackSet:
    """Track the root (head) joints only: a reduced graph with same-type,
    temporal, and root-pair cross-type edges. Fails over occlusion gaps
    longer than one frame (no long-range edges), splitting the track."""
    cfg = cfg or SequenceConfig()
    n_frames = len(frames)
    head_frames = [[d for d in dets if d.part.is_root] for dets in frames]
    tracks = TrackSet(n_frames)
    if not any(head_frames):
        return tracks

    root_parts = sorted(
        {d.part for dets in head_frames for d in dets}, key=lambda p: p.id
    )
    pattern = SparsityPattern(
        frozenset(
            (min(a.id, b.id), max(a.id, b.id))
            for i, a in enumerate(root_parts)
            for b in root_parts[i + 1 :]
        )
    )
    graph = build_bu(
        head_frames,
        models,
        pattern=pattern,
        temporal_gate=cfg.temporal_gate,
        sidecars=sidecars,
        paper_sign=cfg.paper_sign,
    )
    sol = solve_local_search(graph, cfg.solver)
    for person, block in enumerate(sol.clusters):
        dets = [graph.by_id[n] for n in block]
        for frame in sorted({d.frame for d in dets}):
            for part, (pos, score) in sorted(extract_pose(dets, frame).items()):
                tracks.add(person, frame, part, pos, score)
    return tracks


def _index_detections(frames: list[list[Detection]]) -> dict:
    index = {}
    for dets in frames:
        for d in dets:
            key = (d.frame, d.part.id, d.pos[0], d.pos[1])
            if key not in index or d.node_id < index[key]:
                index[key] = d.node_id
    return index


def _head_track_nodes(
    head_tracks: TrackSet, frames: list[list[Detection]]
) -> dict[int, dict[int, dict[int, int]]]:
    """track id -> frame -> part -> node_id, resolved by exact lookup."""
    index = _index_detections(frames)
    out: dict[int, dict[int, dict[int, int]]] = {}
    for person in head_tracks.persons():
        for frame in head_tracks.frames_of(person):
            for part, (pos, _score) in head_tracks.pose(person, frame).items():
                node = index.get((frame, part, pos[0], pos[1]))
                if node is None:
                    raise GraphStructureError(
                        f"head track {person} references a detection absent from the "
                        f"sequence (frame {frame}, part {part}, pos {pos})"
                    )
                out.setdefault(person, {}).setdefault(frame, {})[part] = node
    return out


def _seed_constraints(track_nodes: dict) -> tuple[set, set]:
    """Must-link within each head track; must-cut across different tracks."""
    must_link: set[tuple[int, int]] = set()
    must_cut: set[tuple[int, int]] = set()

    def pair(a, b):
        return (a, b) if a < b else (b, a)

    for frames_of in track_nodes.values():
        frame_ids = sorted(frames_of)
        for f in frame_ids:
            parts = frames_of[f]
            # bind the root pair within a frame into one person anchor
            part_ids = sorted(parts)
            for i, pa in enumerate(part_ids):
                for pb in part_ids[i + 1 :]:
                    must_link.add(pair(parts[pa], parts[pb]))
            # temporal chain per part
            if f + 1 in frames_of:
                nxt = frames_of[f + 1]
                for p, node in parts.items():
                    if p in nxt:
                        must_link.add(pair(node, nxt[p]))

    tracks = sorted(track_nodes)
    for i, ta in enumerate(tracks):
        for tb in tracks[i + 1 :]:
            for fa, parts_a in track_nodes[ta].items():
                for fb in (fa, fa + 1, fa - 1):
                    parts_b = track_nodes[tb].get(fb)
                    if not parts_b:
                        continue
                    for na in parts_a.values():
                        for nb in parts_b.values():
                            must_cut.add(pair(na, nb))
    return must_link, must_cut


def _window_spans(n_frames: int, window: int, margin: int):
    """(core_start, core_end, win_start, win_end) spans covering the clip."""
    if n_frames <= window:
        return [(0, n_frames, 0, n_frames)]
    core = window - 2 * margin
    spans = []
    start = 0
    while start < n_frames:
        end = min(start + core, n_frames)
        spans.append((start, end, max(0, start - margin), min(n_frames, end + margin)))
        start = end
    return spans


def track_full(
    frames: list[list[Detection]],
    head_tracks: TrackSet,
    cfg: SequenceConfig,
    models: CostModels,
    sidecars: SidecarData | None = None,
    stats: dict | None = None,
) -> TrackSet:
    """Solve the configured variant over the sequence under head-track
    constraints and convert clusters into person tracks.

    When ``stats`` is given it receives the summed solve objective and
    the window count.
    """
    n_frames = len(frames)
    out = TrackSet(n_frames)
    if stats is not None:
        stats.update({"objective": 0.0, "windows": 0})
    if n_frames == 0:
        return out
    track_nodes = _head_track_nodes(head_tracks, frames)

    for wi, (c0, c1, w0, w1) in enumerate(_window_spans(n_frames, cfg.window, cfg.margin)):
        window_frames = frames[w0:w1]
        win_node_ids = {d.node_id for dets in window_frames for d in dets}
        win_tracks = {
            t: {f: parts for f, parts in fr.items() if w0 <= f < w1}
            for t, fr in track_nodes.items()
        }
        win_tracks = {t: fr for t, fr in win_tracks.items() if fr}
        must_link, must_cut = _seed_constraints(win_tracks)

        if cfg.model == "tdbu":
            by_id = {d.node_id: d for dets in window_frames for d in dets}
            root_ids = sorted(
                node
                for fr in win_tracks.values()
                for parts in fr.values()
                for part, node in parts.items()
                if by_id[node].part.name == cfg.person_part
            )
            atts = [
                a
                for a in (sidecars.attachments if sidecars else [])
                if a.root in root_ids and a.proposal in win_node_ids
            ]
            graph = build_tdbu(
                window_frames,
                [by_id[r] for r in root_ids],
                atts,
                models,
                temporal_gate=cfg.temporal_gate,
                sidecars=sidecars,
                paper_sign=cfg.paper_sign,
            )
        else:
            pattern = None
            if cfg.model == "bu-sparse":
                parts = sorted(
                    {d.part for dets in window_frames for d in dets}, key=lambda p: p.id
                )
                pattern = _kinematic_pattern_for(parts)
            graph = build_bu(
                window_frames,
                models,
                pattern=pattern,
                temporal_gate=cfg.temporal_gate,
                sidecars=sidecars,
                paper_sign=cfg.paper_sign,
            )

        graph = ProblemGraph(
            graph.detections,
            graph.edges,
            graph.node_costs,
            must_link=must_link | set(graph.must_link),
            must_cut=must_cut | set(graph.must_cut),
        )
        params = replace(cfg.solver, seed=cfg.solver.seed + 1009 * (wi + 1))
        sol = solve_local_search(graph, params)
        if stats is not None:
            stats["objective"] += objective(graph, sol)
            stats["windows"] += 1

        node_track = {
            node: t
            for t, fr in win_tracks.items()
            for parts in fr.values()
            for node in parts.values()
        }
        for block in sol.clusters:
            owners = sorted({node_track[n] for n in block if n in node_track})
            if len(owners) != 1:
                continue  # no head track (or, infeasibly, several): discard
            person = owners[0]
            dets = [graph.by_id[n] for n in block]
            for frame in sorted({d.frame for d in dets}):
                if not (c0 <= frame < c1):
                    continue
                for part, (pos, score) in sorted(extract_pose(dets, frame).items()):
                    out.add(person, frame, part, pos, score)
    return out


def _kinematic_pattern_for(parts):
    from .skeleton import KINEMATIC_TREE

    names = {p.name for p in parts}
    pairs = [(a, b) for a, b in KINEMATIC_TREE if a in names and b in names]
    return SparsityPattern.from_name_pairs(list(parts), pairs)


def track_sequence(
    frames: list[list[Detection]],
    models: CostModels,
    cfg: SequenceConfig | None = None,
    sidecars: SidecarData | None = None,
) -> TrackSet:
    """Filter, seed head tracks, and run the constrained full-body solve."""
    cfg = cfg or SequenceConfig()
    filtered = filter_by_score(frames, cfg.threshold)
    heads = seed_head_tracks(filtered, models, cfg, sidecars)
    return track_full(filtered, heads, cfg, models, sidecars)
