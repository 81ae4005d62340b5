"""Labeled pair extraction and model fitting from annotated sequences.

Candidate temporal pairs mirror the builder's gating; labels come from
ground-truth proximity: a pair is positive when both detections lie
within the match radius of the same person's same joint in their
respective frames. Cross-type pairs within a frame are labeled the same
way (same person = positive).
"""

from __future__ import annotations

from .builder import (
    CostModels,
    CrossTypeRegressor,
    EdgeFeatureVector,
    LogisticModel,
    cross_type_features,
    fit_cross_type_regressor,
    train_logistic,
)
from .metrics import GroundTruth
from .model import Detection
from .temporal import assemble_g, delta_l2


def _gt_identity(det: Detection, gt: GroundTruth, radius: float):
    """(person, part) of the nearest GT joint within radius, else None."""
    best = None
    for person in gt.poses.get(det.frame, []):
        pos = person.parts.get(det.part.id)
        if pos is None:
            continue
        d = delta_l2(det, Detection(det.node_id, det.frame, pos, det.score, det.part))
        if d <= radius and (best is None or d < best[0]):
            best = (d, person.person_id)
    return None if best is None else (best[1], det.part.id)


def temporal_training_samples(
    frames: list[list[Detection]],
    sidecars,
    gt: GroundTruth,
    models: CostModels,
    match_radius: float | None = None,
    temporal_gate: float | None = None,
) -> tuple[list[EdgeFeatureVector], list[int]]:
    """Full 4-feature vectors and binary labels for gated temporal pairs."""
    radius = match_radius if match_radius is not None else 0.75 * models.head_size
    gate = temporal_gate if temporal_gate is not None else models.temporal_gate
    ident: dict[int, tuple[int, int] | None] = {}
    for dets in frames:
        for d in dets:
            ident[d.node_id] = _gt_identity(d, gt, radius)

    samples: list[EdgeFeatureVector] = []
    labels: list[int] = []
    for t in range(len(frames) - 1):
        for a in frames[t]:
            for b in frames[t + 1]:
                if a.part.id != b.part.id or delta_l2(a, b) > gate:
                    continue
                g = assemble_g(
                    a,
                    b,
                    sidecars.descriptors.get(a.node_id) if sidecars else None,
                    sidecars.descriptors.get(b.node_id) if sidecars else None,
                    sidecars.correspondences.get((t, "fwd")) if sidecars else None,
                    sidecars.correspondences.get((t, "rev")) if sidecars else None,
                    region=models.region,
                )
                same = (
                    ident[a.node_id] is not None
                    and ident[a.node_id] == ident[b.node_id]
                )
                samples.append(g)
                labels.append(1 if same else 0)
    return samples, labels


def fit_temporal_model(
    frames: list[list[Detection]],
    sidecars,
    gt: GroundTruth,
    models: CostModels,
    features: tuple[str, ...] = ("l2", "sift", "dm"),
    l2: float = 1e-3,
    steps: int = 500,
    lr: float = 0.5,
) -> LogisticModel:
    """Train the temporal logistic for a feature subset on one sequence."""
    full, labels = temporal_training_samples(frames, sidecars, gt, models)
    if not full:
        raise ValueError("no gated temporal pairs to train on")
    names: list[str] = []
    for f in features:
        if f == "dm":
            names.extend(["dm", "dm_rev"])
        else:
            names.append(f)
    samples = [s.project(tuple(names)) for s in full]
    model = train_logistic(
        samples, labels, l2=l2, steps=steps, lr=lr,
        schema="temporal:" + "+".join(features),
    )
    return model


def cross_type_training_samples(
    frames: list[list[Detection]],
    gt: GroundTruth,
    regressor: CrossTypeRegressor,
    match_radius: float,
) -> tuple[list[EdgeFeatureVector], list[int]]:
    """Within-frame cross-type pairs with same-person labels."""
    samples: list[EdgeFeatureVector] = []
    labels: list[int] = []
    for dets in frames:
        idents = {d.node_id: _gt_identity(d, gt, match_radius) for d in dets}
        for i, a in enumerate(dets):
            for b in dets[i + 1 :]:
                if a.part.id == b.part.id:
                    continue
                samples.append(cross_type_features(a, b, regressor))
                ia, ib = idents[a.node_id], idents[b.node_id]
                same_person = ia is not None and ib is not None and ia[0] == ib[0]
                labels.append(1 if same_person else 0)
    return samples, labels


def fit_cross_type(
    frames: list[list[Detection]],
    gt: GroundTruth,
    models: CostModels,
    match_radius: float | None = None,
    l2: float = 1e-3,
    steps: int = 500,
    lr: float = 0.5,
) -> tuple[CrossTypeRegressor, LogisticModel]:
    """Fit location regressors from the GT poses, then the cross-type
    logistic from labeled detection pairs."""
    radius = match_radius if match_radius is not None else 0.75 * models.head_size
    poses = [
        dict(person.parts)
        for frame in sorted(gt.poses)
        for person in gt.poses[frame]
    ]
    regressor = fit_cross_type_regressor(poses, gt.parts)
    samples, labels = cross_type_training_samples(frames, gt, regressor, radius)
    if not samples:
        raise ValueError("no cross-type pairs to train on")
    model = train_logistic(samples, labels, l2=l2, steps=steps, lr=lr, schema="cross_type:v1")
    return regressor, model
