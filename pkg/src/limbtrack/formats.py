"""Line-delimited file formats: parse and write every artifact losslessly.

All files are whitespace-delimited text with ``#``-prefixed header
records; the first line always carries the format name and version.
Floats are written with repr so parse(write(x)) == x exactly. Field
orders are frozen in FORMATS.md.
"""

from __future__ import annotations

import json
from pathlib import Path

from .builder import ConditionalAttachment, LogisticModel, SidecarData
from .errors import ConfigError, ParseError
from .metrics import GroundTruth, GtPerson
from .model import Detection, Edge, EdgeKind, PartType, ProblemGraph, Solution
from .pipeline import TrackSet
from .skeleton import KINEMATIC_TREE, make_parts
from .temporal import CorrespondenceSet, DescriptorSet

_KIND_TO_TOKEN = {
    EdgeKind.CROSS_TYPE: "cross",
    EdgeKind.SAME_TYPE: "same",
    EdgeKind.TEMPORAL: "temporal",
    EdgeKind.ROOT_ATTACHMENT: "attach",
}
_TOKEN_TO_KIND = {v: k for k, v in _KIND_TO_TOKEN.items()}


class _Reader:
    """Tokenized reader with line-accurate errors and header handling."""

    def __init__(self, path, expected_format):
        self.path = str(path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read file: {exc}", path=self.path)
        self.lines = text.splitlines()
        self.headers: dict[str, list[str]] = {}
        self.records: list[tuple[int, list[str]]] = []
        if not self.lines:
            raise ParseError("empty file (missing #format header)", path=self.path, line=1)
        for i, raw in enumerate(self.lines, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = line[1:].split()
                if not fields:
                    raise ParseError("empty header record", path=self.path, line=i)
                key = fields[0]
                if key in self.headers:
                    raise ParseError(f"duplicate header #{key}", path=self.path, line=i)
                self.headers[key] = fields[1:]
            else:
                self.records.append((i, line.split()))
        fmt = self.headers.get("format")
        if fmt is None or len(fmt) != 2 or fmt[0] != expected_format:
            raise ParseError(
                f"expected '#format {expected_format} v1' header", path=self.path, line=1
            )
        if fmt[1] != "v1":
            raise ParseError(f"unsupported {expected_format} version {fmt[1]}", path=self.path)

    def error(self, line, message):
        raise ParseError(message, path=self.path, line=line)

    def float_(self, line, token, what):
        try:
            return float(token)
        except ValueError:
            self.error(line, f"bad {what} {token!r}")

    def int_(self, line, token, what):
        try:
            return int(token)
        except ValueError:
            self.error(line, f"bad {what} {token!r}")


def _parts_from_headers(reader: _Reader) -> list[PartType]:
    names = reader.headers.get("parts")
    if not names:
        reader.error(1, "missing #parts header")
    roots = tuple(reader.headers.get("roots", ()))
    for r in roots:
        if r not in names:
            reader.error(1, f"root {r!r} not in #parts")
    return make_parts(tuple(names), roots)


def _parts_headers(parts: list[PartType]) -> list[str]:
    lines = ["#parts " + " ".join(p.name for p in parts)]
    roots = [p.name for p in parts if p.is_root]
    if roots:
        lines.append("#roots " + " ".join(roots))
    return lines


def _fmt(x: float) -> str:
    return repr(float(x))


# -- detections --------------------------------------------------------------


def write_detections(path, frames: list[list[Detection]], parts: list[PartType]) -> None:
    lines = ["#format detections v1", *_parts_headers(parts), f"#frames {len(frames)}"]
    for dets in frames:
        for d in dets:
            lines.append(
                f"{d.frame} {d.part.name} {_fmt(d.pos[0])} {_fmt(d.pos[1])} {_fmt(d.score)}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def parse_detections(path) -> tuple[list[list[Detection]], list[PartType]]:
    """Frame-grouped detections; node ids assigned in file order."""
    r = _Reader(path, "detections")
    parts = _parts_from_headers(r)
    by_name = {p.name: p for p in parts}
    declared = r.headers.get("frames")
    n_frames = r.int_(1, declared[0], "#frames") if declared else None

    records = []
    for line, f in r.records:
        if len(f) != 5:
            r.error(line, f"expected 5 fields (frame part x y score), got {len(f)}")
        frame = r.int_(line, f[0], "frame")
        if frame < 0:
            r.error(line, f"negative frame {frame}")
        part = by_name.get(f[1])
        if part is None:
            r.error(line, f"unknown part {f[1]!r}")
        x = r.float_(line, f[2], "x")
        y = r.float_(line, f[3], "y")
        score = r.float_(line, f[4], "score")
        if not (0.0 < score < 1.0):
            r.error(line, f"score {score} outside the open interval (0,1)")
        records.append((frame, part, x, y, score))

    count = n_frames if n_frames is not None else (
        max((rec[0] for rec in records), default=-1) + 1
    )
    frames: list[list[Detection]] = [[] for _ in range(count)]
    for node_id, (frame, part, x, y, score) in enumerate(records):
        if frame >= count:
            raise ParseError(
                f"frame {frame} beyond declared #frames {count}", path=str(path)
            )
        frames[frame].append(Detection(node_id, frame, (x, y), score, part))
    return frames, parts


# -- sidecars -----------------------------------------------------------------


def write_descriptors(path, descriptors: dict[int, DescriptorSet]) -> None:
    dims = {len(d.vectors[0]) for d in descriptors.values()}
    if len(dims) > 1:
        raise ValueError(f"mixed descriptor dimensions {sorted(dims)}")
    dim = dims.pop() if dims else 0
    lines = ["#format descriptors v1", f"#dim {dim}"]
    for node in sorted(descriptors):
        for vec in descriptors[node].vectors:
            lines.append(f"{node} " + " ".join(_fmt(v) for v in vec))
    Path(path).write_text("\n".join(lines) + "\n")


def parse_descriptors(path) -> dict[int, DescriptorSet]:
    r = _Reader(path, "descriptors")
    dim_h = r.headers.get("dim")
    if not dim_h:
        r.error(1, "missing #dim header")
    dim = r.int_(1, dim_h[0], "#dim")
    vectors: dict[int, list[tuple[float, ...]]] = {}
    for line, f in r.records:
        if len(f) != dim + 1:
            r.error(line, f"expected node id + {dim} values, got {len(f)} fields")
        node = r.int_(line, f[0], "node id")
        vec = tuple(r.float_(line, t, "descriptor value") for t in f[1:])
        vectors.setdefault(node, []).append(vec)
    return {n: DescriptorSet(n, tuple(v)) for n, v in vectors.items()}


def write_correspondences(path, corr: dict[tuple[int, str], CorrespondenceSet]) -> None:
    lines = ["#format correspondences v1"]
    for (t, direction) in sorted(corr):
        for x1, y1, x2, y2 in corr[(t, direction)].points:
            lines.append(
                f"{t} {direction} {_fmt(x1)} {_fmt(y1)} {_fmt(x2)} {_fmt(y2)}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def parse_correspondences(path) -> dict[tuple[int, str], CorrespondenceSet]:
    r = _Reader(path, "correspondences")
    acc: dict[tuple[int, str], list] = {}
    for line, f in r.records:
        if len(f) != 6:
            r.error(line, f"expected 6 fields (t dir x1 y1 x2 y2), got {len(f)}")
        t = r.int_(line, f[0], "frame")
        direction = f[1]
        if direction not in ("fwd", "rev"):
            r.error(line, f"direction must be fwd or rev, got {direction!r}")
        pts = tuple(r.float_(line, tok, "coordinate") for tok in f[2:])
        acc.setdefault((t, direction), []).append(pts)
    return {
        key: CorrespondenceSet(key[0], key[1], tuple(points))
        for key, points in acc.items()
    }


def write_attachments(path, attachments: list[ConditionalAttachment]) -> None:
    lines = ["#format attachments v1"]
    for a in attachments:
        lines.append(f"{a.root} {a.proposal} {_fmt(a.probability)}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_attachments(path) -> list[ConditionalAttachment]:
    r = _Reader(path, "attachments")
    out = []
    for line, f in r.records:
        if len(f) != 3:
            r.error(line, f"expected 3 fields (root proposal p), got {len(f)}")
        root = r.int_(line, f[0], "root node")
        proposal = r.int_(line, f[1], "proposal node")
        p = r.float_(line, f[2], "probability")
        if not (0.0 < p < 1.0):
            r.error(line, f"probability {p} outside (0,1)")
        out.append(ConditionalAttachment(root, proposal, p))
    return out


def validate_sidecars(frames: list[list[Detection]], sidecars: SidecarData) -> None:
    """Every node referenced by a sidecar must exist in the detections."""
    known = {d.node_id for dets in frames for d in dets}
    for node in sidecars.descriptors:
        if node not in known:
            raise ParseError(f"descriptor references unknown node {node}")
    for a in sidecars.attachments:
        for node in (a.root, a.proposal):
            if node not in known:
                raise ParseError(f"attachment references unknown node {node}")


# -- ground truth -------------------------------------------------------------


def write_groundtruth(path, gt: GroundTruth) -> None:
    lines = [
        "#format groundtruth v1",
        *_parts_headers(gt.parts),
        f"#frames {gt.n_frames}",
        f"#stride {gt.annotated_stride}",
    ]
    for person in sorted(gt.head_sizes):
        lines.append(f"headsize {person} {_fmt(gt.head_sizes[person])}")
    for frame in sorted(gt.poses):
        for person in gt.poses[frame]:
            for part_id, pos in sorted(person.parts.items()):
                name = gt.parts[part_id].name
                lines.append(
                    f"pose {frame} {person.person_id} {name} {_fmt(pos[0])} {_fmt(pos[1])}"
                )
    for frame in sorted(gt.ignore_regions):
        for x0, y0, x1, y1 in gt.ignore_regions[frame]:
            lines.append(
                f"ignore {frame} {_fmt(x0)} {_fmt(y0)} {_fmt(x1)} {_fmt(y1)}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def parse_groundtruth(path) -> GroundTruth:
    r = _Reader(path, "groundtruth")
    parts = _parts_from_headers(r)
    by_name = {p.name: p for p in parts}
    frames_h = r.headers.get("frames")
    if not frames_h:
        r.error(1, "missing #frames header")
    n_frames = r.int_(1, frames_h[0], "#frames")
    stride = r.int_(1, r.headers.get("stride", ["1"])[0], "#stride")

    gt = GroundTruth(parts=parts, n_frames=n_frames, annotated_stride=stride)
    person_at: dict[tuple[int, int], GtPerson] = {}
    for line, f in r.records:
        tag = f[0]
        if tag == "headsize":
            if len(f) != 3:
                r.error(line, "headsize needs: person value")
            h = r.float_(line, f[2], "head size")
            if h <= 0:
                r.error(line, f"head size must be positive, got {h}")
            gt.head_sizes[r.int_(line, f[1], "person")] = h
        elif tag == "pose":
            if len(f) != 6:
                r.error(line, "pose needs: frame person part x y")
            frame = r.int_(line, f[1], "frame")
            person = r.int_(line, f[2], "person")
            part = by_name.get(f[3])
            if part is None:
                r.error(line, f"unknown part {f[3]!r}")
            x = r.float_(line, f[4], "x")
            y = r.float_(line, f[5], "y")
            key = (frame, person)
            if key not in person_at:
                person_at[key] = GtPerson(person, {})
                gt.poses.setdefault(frame, []).append(person_at[key])
            if part.id in person_at[key].parts:
                r.error(line, f"duplicate pose entry for {f[3]}")
            person_at[key].parts[part.id] = (x, y)
        elif tag == "ignore":
            if len(f) != 6:
                r.error(line, "ignore needs: frame x0 y0 x1 y1")
            frame = r.int_(line, f[1], "frame")
            rect = tuple(r.float_(line, t, "coordinate") for t in f[2:])
            gt.ignore_regions.setdefault(frame, []).append(rect)
        else:
            r.error(line, f"unknown record type {tag!r}")
    for frame, persons in gt.poses.items():
        for p in persons:
            if p.person_id not in gt.head_sizes:
                raise ParseError(
                    f"person {p.person_id} has no headsize record", path=str(path)
                )
    return gt


# -- tracks -------------------------------------------------------------------


def write_tracks(path, tracks: TrackSet, parts: list[PartType]) -> None:
    lines = ["#format tracks v1", *_parts_headers(parts), f"#frames {tracks.n_frames}"]
    for person in tracks.persons():
        for frame in tracks.frames_of(person):
            for part_id, (pos, score) in sorted(tracks.pose(person, frame).items()):
                name = parts[part_id].name
                lines.append(
                    f"{frame} {person} {name} {_fmt(pos[0])} {_fmt(pos[1])} {_fmt(score)}"
                )
    Path(path).write_text("\n".join(lines) + "\n")


def parse_tracks(path) -> tuple[TrackSet, list[PartType]]:
    r = _Reader(path, "tracks")
    parts = _parts_from_headers(r)
    by_name = {p.name: p for p in parts}
    frames_h = r.headers.get("frames")
    if not frames_h:
        r.error(1, "missing #frames header")
    tracks = TrackSet(r.int_(1, frames_h[0], "#frames"))
    for line, f in r.records:
        if len(f) != 6:
            r.error(line, "expected 6 fields (frame person part x y score)")
        frame = r.int_(line, f[0], "frame")
        person = r.int_(line, f[1], "person")
        part = by_name.get(f[2])
        if part is None:
            r.error(line, f"unknown part {f[2]!r}")
        x = r.float_(line, f[3], "x")
        y = r.float_(line, f[4], "y")
        score = r.float_(line, f[5], "score")
        tracks.add(person, frame, part.id, (x, y), score)
    return tracks, parts


# -- problem graphs and solutions ----------------------------------------------


def write_graph(path, graph: ProblemGraph, parts: list[PartType]) -> None:
    lines = ["#format graph v1", *_parts_headers(parts)]
    for d in graph.detections:
        lines.append(
            f"node {d.node_id} {d.frame} {d.part.name} {_fmt(d.pos[0])} "
            f"{_fmt(d.pos[1])} {_fmt(d.score)} {_fmt(graph.node_costs[d.node_id])}"
        )
    for e in graph.edges:
        lines.append(f"edge {e.u} {e.v} {_KIND_TO_TOKEN[e.kind]} {_fmt(e.cost)}")
    for a, b in sorted(graph.must_link):
        lines.append(f"mustlink {a} {b}")
    for a, b in sorted(graph.must_cut):
        lines.append(f"mustcut {a} {b}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_graph(path) -> tuple[ProblemGraph, list[PartType]]:
    r = _Reader(path, "graph")
    parts = _parts_from_headers(r)
    by_name = {p.name: p for p in parts}
    detections, edges, costs, ml, mc = [], [], {}, set(), set()
    for line, f in r.records:
        tag = f[0]
        if tag == "node":
            if len(f) != 8:
                r.error(line, "node needs: id frame part x y score cost")
            part = by_name.get(f[3])
            if part is None:
                r.error(line, f"unknown part {f[3]!r}")
            node_id = r.int_(line, f[1], "node id")
            detections.append(
                Detection(
                    node_id,
                    r.int_(line, f[2], "frame"),
                    (r.float_(line, f[4], "x"), r.float_(line, f[5], "y")),
                    r.float_(line, f[6], "score"),
                    part,
                )
            )
            costs[node_id] = r.float_(line, f[7], "cost")
        elif tag == "edge":
            if len(f) != 5:
                r.error(line, "edge needs: u v kind cost")
            kind = _TOKEN_TO_KIND.get(f[3])
            if kind is None:
                r.error(line, f"unknown edge kind {f[3]!r}")
            edges.append(
                Edge(
                    r.int_(line, f[1], "u"),
                    r.int_(line, f[2], "v"),
                    kind,
                    r.float_(line, f[4], "cost"),
                )
            )
        elif tag in ("mustlink", "mustcut"):
            if len(f) != 3:
                r.error(line, f"{tag} needs: a b")
            pair = (r.int_(line, f[1], "a"), r.int_(line, f[2], "b"))
            (ml if tag == "mustlink" else mc).add(pair)
        else:
            r.error(line, f"unknown record type {tag!r}")
    graph = ProblemGraph(detections, edges, costs, must_link=ml, must_cut=mc)
    return graph, parts


def write_solution(path, sol: Solution, objective_value: float) -> None:
    lines = ["#format solution v1", f"#objective {_fmt(objective_value)}"]
    for node in sorted(sol.selected):
        lines.append(f"{node} {sol.cluster_of[node]}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_solution(path) -> tuple[Solution, float]:
    r = _Reader(path, "solution")
    obj_h = r.headers.get("objective")
    if not obj_h:
        r.error(1, "missing #objective header")
    obj = r.float_(1, obj_h[0], "#objective")
    cluster_of = {}
    for line, f in r.records:
        if len(f) != 2:
            r.error(line, "expected 2 fields (node cluster)")
        cluster_of[r.int_(line, f[0], "node")] = r.int_(line, f[1], "cluster")
    return Solution(set(cluster_of), cluster_of), obj


# -- logistic models -----------------------------------------------------------


def write_model(path, model: LogisticModel) -> None:
    lines = [
        "#format model v1",
        f"#schema {model.schema}",
        "#features " + " ".join(model.feature_names),
        "weights " + " ".join(_fmt(w) for w in model.weights),
    ]
    if model.mean is not None:
        lines.append("mean " + " ".join(_fmt(v) for v in model.mean))
        lines.append("std " + " ".join(_fmt(v) for v in model.std))
    for name in sorted(model.imputation):
        lines.append(f"impute {name} {_fmt(model.imputation[name])}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_model(path) -> LogisticModel:
    r = _Reader(path, "model")
    schema_h = r.headers.get("schema")
    feats_h = r.headers.get("features")
    if not schema_h or feats_h is None:
        r.error(1, "missing #schema or #features header")
    weights = mean = std = None
    imputation = {}
    for line, f in r.records:
        tag = f[0]
        vals = f[1:]
        if tag == "weights":
            weights = tuple(r.float_(line, t, "weight") for t in vals)
        elif tag == "mean":
            mean = tuple(r.float_(line, t, "mean") for t in vals)
        elif tag == "std":
            std = tuple(r.float_(line, t, "std") for t in vals)
        elif tag == "impute":
            if len(vals) != 2:
                r.error(line, "impute needs: feature value")
            imputation[vals[0]] = r.float_(line, vals[1], "imputation")
        else:
            r.error(line, f"unknown record type {tag!r}")
    if weights is None:
        raise ParseError("missing weights record", path=str(path))
    if (mean is None) != (std is None):
        raise ParseError("mean and std must appear together", path=str(path))
    return LogisticModel(
        schema=" ".join(schema_h),
        feature_names=tuple(feats_h),
        weights=weights,
        mean=mean,
        std=std,
        imputation=imputation,
    )


def write_regressor(path, regressor, parts: list[PartType]) -> None:
    """Directed mean-offset table of the cross-type location regressor."""
    lines = ["#format regressor v1", *_parts_headers(parts)]
    for (a, b) in sorted(regressor.offsets):
        dx, dy = regressor.offsets[(a, b)]
        lines.append(f"offset {parts[a].name} {parts[b].name} {_fmt(dx)} {_fmt(dy)}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_regressor(path):
    from .builder import CrossTypeRegressor

    r = _Reader(path, "regressor")
    parts = _parts_from_headers(r)
    by_name = {p.name: p for p in parts}
    offsets = {}
    for line, f in r.records:
        if len(f) != 5 or f[0] != "offset":
            r.error(line, "expected: offset part_a part_b dx dy")
        pa, pb = by_name.get(f[1]), by_name.get(f[2])
        if pa is None or pb is None:
            r.error(line, f"unknown part in offset record: {f[1]} {f[2]}")
        offsets[(pa.id, pb.id)] = (
            r.float_(line, f[3], "dx"),
            r.float_(line, f[4], "dy"),
        )
    return CrossTypeRegressor(offsets), parts


# -- overlay export -------------------------------------------------------------


def write_overlay(path, tracks: TrackSet, parts: list[PartType]) -> None:
    """Per-frame pose points and skeleton segments for external plotting."""
    by_name = {p.name: p for p in parts}
    tree = [
        (by_name[a].id, by_name[b].id)
        for a, b in KINEMATIC_TREE
        if a in by_name and b in by_name
    ]
    lines = ["#format overlay v1", *_parts_headers(parts), f"#frames {tracks.n_frames}"]
    for frame in range(tracks.n_frames):
        for person in tracks.persons():
            pose = tracks.pose(person, frame)
            for part_id, (pos, score) in sorted(pose.items()):
                lines.append(
                    f"pose {frame} {person} {parts[part_id].name} "
                    f"{_fmt(pos[0])} {_fmt(pos[1])} {_fmt(score)}"
                )
            for pa, pb in tree:
                if pa in pose and pb in pose:
                    (xa, ya), _ = pose[pa]
                    (xb, yb), _ = pose[pb]
                    lines.append(
                        f"limb {frame} {person} {parts[pa].name} {parts[pb].name} "
                        f"{_fmt(xa)} {_fmt(ya)} {_fmt(xb)} {_fmt(yb)}"
                    )
    Path(path).write_text("\n".join(lines) + "\n")


def parse_overlay(path) -> tuple[TrackSet, list[PartType], list[tuple]]:
    """Overlay records back as (tracks, parts, limb segments)."""
    r = _Reader(path, "overlay")
    parts = _parts_from_headers(r)
    by_name = {p.name: p for p in parts}
    frames_h = r.headers.get("frames")
    if not frames_h:
        r.error(1, "missing #frames header")
    tracks = TrackSet(r.int_(1, frames_h[0], "#frames"))
    limbs = []
    for line, f in r.records:
        if f[0] == "pose":
            if len(f) != 7:
                r.error(line, "pose needs: frame person part x y score")
            part = by_name.get(f[3])
            if part is None:
                r.error(line, f"unknown part {f[3]!r}")
            tracks.add(
                r.int_(line, f[2], "person"),
                r.int_(line, f[1], "frame"),
                part.id,
                (r.float_(line, f[4], "x"), r.float_(line, f[5], "y")),
                r.float_(line, f[6], "score"),
            )
        elif f[0] == "limb":
            if len(f) != 9:
                r.error(line, "limb needs: frame person part_a part_b x1 y1 x2 y2")
            pa, pb = by_name.get(f[3]), by_name.get(f[4])
            if pa is None or pb is None:
                r.error(line, f"unknown part in limb record: {f[3]} {f[4]}")
            limbs.append(
                (
                    r.int_(line, f[1], "frame"),
                    r.int_(line, f[2], "person"),
                    pa.id,
                    pb.id,
                    r.float_(line, f[5], "x1"),
                    r.float_(line, f[6], "y1"),
                    r.float_(line, f[7], "x2"),
                    r.float_(line, f[8], "y2"),
                )
            )
        else:
            r.error(line, f"unknown record type {f[0]!r}")
    return tracks, parts, limbs


# -- run config and summaries ----------------------------------------------------

CONFIG_KEYS = {
    "head_size": float,
    "temporal_gate": float,
    "region_side": float,
    "window": int,
    "margin": int,
    "score_threshold_bu_full": float,
    "score_threshold_bu_sparse": float,
    "score_threshold_tdbu": float,
    "move_budget": int,
    "max_exact_nodes": int,
    "pckh_alpha": float,
    "tdbu_unary": float,
}


def parse_config(path) -> dict:
    """Validated key/value run configuration; unknown keys are errors."""
    r = _Reader(path, "config")
    out = {}
    for line, f in r.records:
        if len(f) != 2:
            r.error(line, "expected 2 fields (key value)")
        key, raw = f
        if key in out:
            r.error(line, f"duplicate key {key!r}")
        caster = CONFIG_KEYS.get(key)
        if caster is None:
            raise ConfigError(f"{r.path}:{line}: unknown config key {key!r}")
        try:
            out[key] = caster(raw)
        except ValueError:
            r.error(line, f"bad value {raw!r} for {key!r}")
    return out


def write_summary(path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
