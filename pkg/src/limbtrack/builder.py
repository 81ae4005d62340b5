"""Graph construction for the bottom-up and top-down/bottom-up models.

Edge costs come from logistic models mapped through the log-odds cost
transform: an edge probability p becomes cost -log(p/(1-p)), attractive
(negative) above p = 0.5 and repulsive below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GraphStructureError
from .model import Detection, Edge, EdgeKind, PartType, ProblemGraph, node_cost
from .skeleton import KINEMATIC_TREE, canonical_offsets_px, part_index
from .temporal import (
    CorrespondenceSet,
    DescriptorSet,
    RegionSpec,
    assemble_g,
    delta_l2,
)

CROSS_FEATURES = ("offset_fwd", "angle_fwd", "offset_bwd", "angle_bwd")


@dataclass(frozen=True)
class EdgeFeatureVector:
    """Named, finite feature values for one candidate edge."""

    names: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.names) != len(self.values):
            raise ValueError("feature names and values must align")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError(f"non-finite feature values: {self.values}")

    def get(self, name: str) -> float:
        return self.values[self.names.index(name)]

    def project(self, names: tuple[str, ...]) -> "EdgeFeatureVector":
        return EdgeFeatureVector(tuple(names), tuple(self.get(n) for n in names))


@dataclass(frozen=True, eq=False)
class LogisticModel:
    """Logistic scorer over a named feature schema.

    ``weights`` holds the bias first, then one weight per feature, applied
    to standardized features when standardization statistics are present.
    ``imputation`` carries feature-wise medians for missing modalities.
    """

    schema: str
    feature_names: tuple[str, ...]
    weights: tuple[float, ...]
    mean: tuple[float, ...] | None = None
    std: tuple[float, ...] | None = None
    imputation: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.weights) != len(self.feature_names) + 1:
            raise ValueError(
                f"model {self.schema!r}: {len(self.feature_names)} features need "
                f"{len(self.feature_names) + 1} weights, got {len(self.weights)}"
            )

    def probability(self, features: EdgeFeatureVector) -> float:
        if features.names != self.feature_names:
            raise ValueError(
                f"feature schema mismatch: model {self.schema!r} expects "
                f"{self.feature_names}, got {features.names}"
            )
        x = np.asarray(features.values, dtype=float)
        if self.mean is not None:
            x = (x - np.asarray(self.mean)) / np.asarray(self.std)
        z = self.weights[0] + float(np.dot(self.weights[1:], x))
        return _sigmoid(z)


@dataclass(frozen=True)
class SparsityPattern:
    """Unordered part-type-id pairs allowed to carry cross-type edges."""

    pairs: frozenset[tuple[int, int]]

    @staticmethod
    def from_name_pairs(parts: list[PartType], name_pairs) -> "SparsityPattern":
        idx = part_index(parts)
        out = set()
        for a, b in name_pairs:
            if a not in idx or b not in idx:
                raise ConfigError(f"unknown part type in sparsity pattern: ({a}, {b})")
            pa, pb = idx[a].id, idx[b].id
            out.add((min(pa, pb), max(pa, pb)))
        return SparsityPattern(frozenset(out))

    @staticmethod
    def kinematic_tree(parts: list[PartType]) -> "SparsityPattern":
        return SparsityPattern.from_name_pairs(parts, KINEMATIC_TREE)

    def allows(self, a: PartType, b: PartType) -> bool:
        return (min(a.id, b.id), max(a.id, b.id)) in self.pairs


@dataclass(frozen=True)
class ConditionalAttachment:
    """Person-conditioned link probability between a root detection and a
    proposal in the same frame (values ingested from file)."""

    root: int
    proposal: int
    probability: float

    def __post_init__(self):
        if not (0.0 < self.probability < 1.0):
            raise ValueError(
                f"attachment probability must be in (0,1), got {self.probability}"
            )


@dataclass(frozen=True)
class CrossTypeRegressor:
    """Mean relative image offsets between directed part-type pairs."""

    offsets: dict[tuple[int, int], tuple[float, float]]

    def predict(self, src: Detection, dst_type: PartType) -> tuple[float, float]:
        mu = self.offsets.get((src.part.id, dst_type.id))
        if mu is None:
            raise ConfigError(
                f"no location regressor for pair ({src.part.name} -> {dst_type.name})"
            )
        return (src.pos[0] + mu[0], src.pos[1] + mu[1])


@dataclass
class SidecarData:
    """Optional per-node descriptors and per-frame-pair correspondences."""

    descriptors: dict[int, DescriptorSet] = field(default_factory=dict)
    correspondences: dict[tuple[int, str], CorrespondenceSet] = field(default_factory=dict)
    attachments: list[ConditionalAttachment] = field(default_factory=list)


@dataclass
class CostModels:
    """Bundle of the trained/default pairwise and unary cost models."""

    head_size: float
    same_type: LogisticModel
    cross_type: LogisticModel
    cross_regressor: CrossTypeRegressor
    temporal: LogisticModel
    region: RegionSpec = RegionSpec()

    @property
    def temporal_gate(self) -> float:
        return 2.0 * self.head_size


def _sigmoid(z: float) -> float:
    if z >= 0:
        p = 1.0 / (1.0 + math.exp(-z))
    else:
        e = math.exp(z)
        p = e / (1.0 + e)
    return min(max(p, 1e-12), 1.0 - 1e-12)


def edge_cost_from_probability(p: float, paper_sign: bool = False) -> float:
    """Cost of joining two detections given their link probability."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"probability must be in the open interval (0,1), got {p}")
    logit = math.log(p / (1.0 - p))
    return logit if paper_sign else -logit


def same_type_cost(
    distance: float, model: LogisticModel, paper_sign: bool = False
) -> float:
    """Attractive/repulsive cost between same-type detections in one frame."""
    if distance < 0:
        raise ValueError("distance must be non-negative")
    fv = EdgeFeatureVector(("distance",), (float(distance),))
    return edge_cost_from_probability(model.probability(fv), paper_sign)


def cross_type_features(
    a: Detection, b: Detection, regressor: CrossTypeRegressor
) -> EdgeFeatureVector:
    """Geometric agreement features for a cross-type pair, both directions.

    Forward direction runs from the lower part id to the higher so the
    vector is independent of argument order.
    """
    s, t = (a, b) if a.part.id < b.part.id else (b, a)
    off_f, ang_f = _direction_features(s, t, regressor)
    off_b, ang_b = _direction_features(t, s, regressor)
    return EdgeFeatureVector(CROSS_FEATURES, (off_f, ang_f, off_b, ang_b))


def _direction_features(src, dst, regressor):
    pred = regressor.predict(src, dst.part)
    off = math.hypot(dst.pos[0] - pred[0], dst.pos[1] - pred[1])
    mu = regressor.offsets[(src.part.id, dst.part.id)]
    actual = (dst.pos[0] - src.pos[0], dst.pos[1] - src.pos[1])
    ang = _angle_between(mu, actual)
    return off, ang


def _angle_between(u, v):
    nu = math.hypot(*u)
    nv = math.hypot(*v)
    if nu < 1e-12 or nv < 1e-12:
        return 0.0
    c = (u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return math.acos(min(1.0, max(-1.0, c)))


def cross_type_cost(
    pair_features: EdgeFeatureVector, model: LogisticModel, paper_sign: bool = False
) -> float:
    """Cost for a cross-type edge from its geometric feature vector."""
    return edge_cost_from_probability(model.probability(pair_features), paper_sign)


def temporal_cost(
    a: Detection,
    b: Detection,
    models: CostModels,
    sidecars: SidecarData | None,
    paper_sign: bool = False,
) -> float:
    """Cost for a temporal edge; missing sidecar inputs are imputed."""
    lo, hi = (a, b) if a.frame < b.frame else (b, a)
    desc_a = desc_b = None
    corr_fwd = corr_rev = None
    if sidecars is not None:
        desc_a = sidecars.descriptors.get(lo.node_id)
        desc_b = sidecars.descriptors.get(hi.node_id)
        corr_fwd = sidecars.correspondences.get((lo.frame, "fwd"))
        corr_rev = sidecars.correspondences.get((lo.frame, "rev"))
    g = assemble_g(
        lo,
        hi,
        desc_a,
        desc_b,
        corr_fwd,
        corr_rev,
        region=models.region,
        imputation=models.temporal.imputation,
    )
    fv = g.project(models.temporal.feature_names)
    return edge_cost_from_probability(models.temporal.probability(fv), paper_sign)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _temporal_edges(frames, models, sidecars, temporal_gate, paper_sign):
    gate = models.temporal_gate if temporal_gate is None else float(temporal_gate)
    edges = []
    for t in range(len(frames) - 1):
        for a in frames[t]:
            for b in frames[t + 1]:
                if a.part.id != b.part.id:
                    continue
                if delta_l2(a, b) > gate:
                    continue
                cost = temporal_cost(a, b, models, sidecars, paper_sign)
                edges.append(Edge(a.node_id, b.node_id, EdgeKind.TEMPORAL, cost))
    return edges


def _same_type_edges(dets, models, paper_sign):
    edges = []
    for i, a in enumerate(dets):
        for b in dets[i + 1 :]:
            if a.part.id != b.part.id:
                continue
            cost = same_type_cost(delta_l2(a, b), models.same_type, paper_sign)
            edges.append(Edge(a.node_id, b.node_id, EdgeKind.SAME_TYPE, cost))
    return edges


def build_bu(
    frames: list[list[Detection]],
    models: CostModels,
    pattern: SparsityPattern | None = None,
    temporal_gate: float | None = None,
    sidecars: SidecarData | None = None,
    paper_sign: bool = False,
) -> ProblemGraph:
    """Bottom-up graph: within-frame cross-type edges (full or per sparsity
    pattern), same-type edges, temporal edges, and log-odds node costs."""
    edges: list[Edge] = []
    detections: list[Detection] = []
    for dets in frames:
        detections.extend(dets)
        edges.extend(_same_type_edges(dets, models, paper_sign))
        for i, a in enumerate(dets):
            for b in dets[i + 1 :]:
                if a.part.id == b.part.id:
                    continue
                if pattern is not None and not pattern.allows(a.part, b.part):
                    continue
                fv = cross_type_features(a, b, models.cross_regressor)
                cost = cross_type_cost(fv, models.cross_type, paper_sign)
                edges.append(Edge(a.node_id, b.node_id, EdgeKind.CROSS_TYPE, cost))
    edges.extend(_temporal_edges(frames, models, sidecars, temporal_gate, paper_sign))
    node_costs = {d.node_id: node_cost(d.score, paper_sign) for d in detections}
    return ProblemGraph(detections, edges, node_costs)


def build_tdbu(
    frames: list[list[Detection]],
    roots: list[Detection],
    attachments: list[ConditionalAttachment],
    models: CostModels,
    temporal_gate: float | None = None,
    sidecars: SidecarData | None = None,
    paper_sign: bool = False,
    unary: float = 0.0,
) -> ProblemGraph:
    """Top-down/bottom-up graph: star-shaped attachment edges from person
    (root) nodes, pairwise must-cut between same-frame roots, same-type and
    temporal edges, constant node costs, and no generic cross-type edges."""
    detections = [d for dets in frames for d in dets]
    by_id = {d.node_id: d for d in detections}
    root_ids = set()
    for r in roots:
        if r.node_id not in by_id:
            raise GraphStructureError(f"root node {r.node_id} is not among the detections")
        if not r.part.is_root:
            raise GraphStructureError(
                f"root node {r.node_id} has non-root part type {r.part.name!r}"
            )
        root_ids.add(r.node_id)

    must_cut = set()
    by_frame_roots: dict[int, list[int]] = {}
    for rid in sorted(root_ids):
        by_frame_roots.setdefault(by_id[rid].frame, []).append(rid)
    for rids in by_frame_roots.values():
        for i, a in enumerate(rids):
            for b in rids[i + 1 :]:
                must_cut.add((a, b))

    edges: list[Edge] = []
    for att in attachments:
        if att.root not in root_ids:
            raise GraphStructureError(
                f"attachment references node {att.root}, which is not a root"
            )
        if att.proposal not in by_id:
            raise GraphStructureError(
                f"attachment references unknown proposal {att.proposal}"
            )
        if by_id[att.root].frame != by_id[att.proposal].frame:
            raise GraphStructureError(
                f"attachment ({att.root},{att.proposal}) crosses frames "
                f"{by_id[att.root].frame} and {by_id[att.proposal].frame}"
            )
        cost = edge_cost_from_probability(att.probability, paper_sign)
        edges.append(Edge(att.root, att.proposal, EdgeKind.ROOT_ATTACHMENT, cost))

    for dets in frames:
        edges.extend(_same_type_edges(dets, models, paper_sign))
    edges.extend(_temporal_edges(frames, models, sidecars, temporal_gate, paper_sign))

    node_costs = dict.fromkeys(by_id, float(unary))
    return ProblemGraph(detections, edges, node_costs, must_cut=must_cut)


# ---------------------------------------------------------------------------
# Logistic training
# ---------------------------------------------------------------------------


def logistic_loss_grad(weights: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """L2-regularized cross-entropy and its gradient; bias unregularized."""
    z = weights[0] + X @ weights[1:]
    # log(1 + e^z) - y*z, computed stably
    ce = float(np.mean(np.logaddexp(0.0, z) - y * z))
    loss = ce + 0.5 * l2 * float(np.dot(weights[1:], weights[1:]))
    p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
    resid = (p - y) / len(y)
    grad = np.empty_like(weights)
    grad[0] = resid.sum()
    grad[1:] = X.T @ resid + l2 * weights[1:]
    return loss, grad


def train_logistic(
    samples: list[EdgeFeatureVector],
    labels: list[int],
    l2: float = 1e-3,
    steps: int = 500,
    lr: float = 0.5,
    schema: str | None = None,
) -> LogisticModel:
    """Fit a logistic model by gradient descent with backtracking.

    Features are standardized internally (statistics stored on the model),
    which keeps the default step size stable across feature scales. The
    halving backtrack makes the training loss non-increasing per step.
    """
    if not samples:
        raise ValueError("training needs at least one sample")
    names = samples[0].names
    for s in samples:
        if s.names != names:
            raise ValueError(f"inconsistent feature schema: {s.names} vs {names}")
    X_raw = np.asarray([s.values for s in samples], dtype=float)
    y = np.asarray(labels, dtype=float)
    if X_raw.shape[0] != y.shape[0]:
        raise ValueError("samples and labels length mismatch")

    mean = X_raw.mean(axis=0)
    std = X_raw.std(axis=0)
    std[std < 1e-9] = 1.0
    X = (X_raw - mean) / std

    w = np.zeros(X.shape[1] + 1)
    loss, grad = logistic_loss_grad(w, X, y, l2)
    for _ in range(steps):
        step = lr
        for _ in range(30):
            w_new = w - step * grad
            loss_new, grad_new = logistic_loss_grad(w_new, X, y, l2)
            if loss_new <= loss + 1e-15:
                break
            step *= 0.5
        else:
            break  # no descent direction at float precision
        w, loss, grad = w_new, loss_new, grad_new

    medians = np.median(X_raw, axis=0)
    return LogisticModel(
        schema=schema or ("features:" + "+".join(names)),
        feature_names=names,
        weights=tuple(float(v) for v in w),
        mean=tuple(float(v) for v in mean),
        std=tuple(float(v) for v in std),
        imputation={n: float(m) for n, m in zip(names, medians)},
    )


def fit_cross_type_regressor(
    poses: list[dict[int, tuple[float, float]]], parts: list[PartType]
) -> CrossTypeRegressor:
    """Mean relative offsets between all directed part-type pairs, estimated
    from labeled single-person poses (part id -> position)."""
    sums: dict[tuple[int, int], list] = {}
    for pose in poses:
        for pa, pos_a in pose.items():
            for pb, pos_b in pose.items():
                if pa == pb:
                    continue
                acc = sums.setdefault((pa, pb), [0.0, 0.0, 0])
                acc[0] += pos_b[0] - pos_a[0]
                acc[1] += pos_b[1] - pos_a[1]
                acc[2] += 1
    offsets = {
        key: (sx / cnt, sy / cnt) for key, (sx, sy, cnt) in sums.items() if cnt > 0
    }
    return CrossTypeRegressor(offsets)


# ---------------------------------------------------------------------------
# Defaults
# ---------------------------------------------------------------------------


def default_cross_type_regressor(parts: list[PartType], head_size: float) -> CrossTypeRegressor:
    """Regressor from the canonical neutral-pose skeleton."""
    canon = canonical_offsets_px(parts, head_size)
    offsets = {}
    for a in parts:
        for b in parts:
            if a.id == b.id:
                continue
            offsets[(a.id, b.id)] = (
                canon[b.id][0] - canon[a.id][0],
                canon[b.id][1] - canon[a.id][1],
            )
    return CrossTypeRegressor(offsets)


def default_temporal_model(
    head_size: float, features: tuple[str, ...] = ("l2", "sift", "dm")
) -> LogisticModel:
    """Hand-calibrated temporal logistic for any feature subset."""
    weight_of = {
        "l2": -3.0 / head_size,
        "sift": -1.5,
        "dm": 5.0,
        "dm_rev": 5.0,
    }
    names: list[str] = []
    for f in features:
        if f == "dm":
            names.extend(["dm", "dm_rev"])
        elif f in ("l2", "sift"):
            names.append(f)
        else:
            raise ConfigError(f"unknown temporal feature {f!r}")
    bias = 2.0 if names == ["l2"] else 0.8
    return LogisticModel(
        schema="temporal:" + "+".join(features),
        feature_names=tuple(names),
        weights=(bias, *(weight_of[n] for n in names)),
    )


def default_cost_models(
    parts: list[PartType],
    head_size: float = 16.0,
    temporal_features: tuple[str, ...] = ("l2", "sift", "dm"),
    region: RegionSpec | None = None,
) -> CostModels:
    """Calibrated default models at a given reference head size."""
    same_type = LogisticModel(
        schema="same_type:distance",
        feature_names=("distance",),
        weights=(2.0, -4.0 / head_size),
    )
    cross_type = LogisticModel(
        schema="cross_type:v1",
        feature_names=CROSS_FEATURES,
        weights=(2.5, -2.0 / head_size, -0.35, -2.0 / head_size, -0.35),
    )
    return CostModels(
        head_size=head_size,
        same_type=same_type,
        cross_type=cross_type,
        cross_regressor=default_cross_type_regressor(parts, head_size),
        temporal=default_temporal_model(head_size, temporal_features),
        region=region or RegionSpec(),
    )
