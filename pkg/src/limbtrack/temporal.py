"""Temporal pairwise features between detections in adjacent frames.

The feature vector for a candidate temporal link is, in fixed order:
position distance, appearance-descriptor distance, and two motion-field
agreement ratios (forward and reverse correspondence sets).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GraphStructureError
from .model import Detection

TEMPORAL_FEATURES = ("l2", "sift", "dm", "dm_rev")


@dataclass(frozen=True)
class DescriptorSet:
    """Appearance descriptors of one detection, one vector per dominant
    orientation (at least one)."""

    node_id: int
    vectors: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if not self.vectors:
            raise ValueError("DescriptorSet needs at least one vector")
        lengths = {len(v) for v in self.vectors}
        if len(lengths) != 1:
            raise ValueError(f"descriptor vectors have mixed lengths {sorted(lengths)}")


@dataclass(frozen=True)
class CorrespondenceSet:
    """Point correspondences between two adjacent frames.

    Forward sets are computed frame t -> t+1 (first point lives in frame t);
    reverse sets invert the image order (first point lives in frame t+1).
    """

    frame: int  # earlier frame t of the pair (t, t+1)
    direction: str  # "fwd" | "rev"
    points: tuple[tuple[float, float, float, float], ...]  # (x1, y1, x2, y2)

    def __post_init__(self):
        if self.direction not in ("fwd", "rev"):
            raise ValueError(f"direction must be fwd or rev, got {self.direction!r}")
        for rec in self.points:
            if not all(np.isfinite(rec)):
                raise ValueError(f"non-finite correspondence point {rec}")


@dataclass(frozen=True)
class RegionSpec:
    """Square region of side ``side`` pixels centered on a detection."""

    side: float = 64.0

    def __post_init__(self):
        if self.side <= 0:
            raise ValueError("region side must be positive")

    def contains(self, center: tuple[float, float], point: tuple[float, float]) -> bool:
        half = self.side / 2.0
        return (
            abs(point[0] - center[0]) <= half and abs(point[1] - center[1]) <= half
        )


def delta_l2(a: Detection, b: Detection) -> float:
    """Euclidean distance between the two detection positions."""
    dx = a.pos[0] - b.pos[0]
    dy = a.pos[1] - b.pos[1]
    return float(np.hypot(dx, dy))


def delta_sift(desc_a: DescriptorSet, desc_b: DescriptorSet) -> float:
    """Minimal Euclidean distance over all descriptor-vector pairs."""
    va = np.asarray(desc_a.vectors, dtype=float)
    vb = np.asarray(desc_b.vectors, dtype=float)
    if va.shape[1] != vb.shape[1]:
        raise ValueError(
            f"descriptor lengths differ: {va.shape[1]} vs {vb.shape[1]}"
        )
    diffs = va[:, None, :] - vb[None, :, :]
    return float(np.sqrt((diffs**2).sum(axis=2)).min())


def delta_dm(
    corr: CorrespondenceSet,
    center_i: tuple[float, float],
    center_j: tuple[float, float],
    region: RegionSpec = RegionSpec(),
) -> float:
    """Motion-field agreement between two part-centered square regions.

    Ratio of correspondences whose first point lies in the region around
    detection i and whose second point lies in the region around detection
    j, over all correspondences touching either region (each side counted
    separately). Region membership is boundary-inclusive. Returns 0 when no
    correspondence touches either region.
    """
    both = 0
    in_i = 0
    in_j = 0
    for x1, y1, x2, y2 in corr.points:
        first = region.contains(center_i, (x1, y1))
        second = region.contains(center_j, (x2, y2))
        in_i += first
        in_j += second
        both += first and second
    denom = in_i + in_j
    if denom == 0:
        return 0.0
    return both / denom


def assemble_g(
    a: Detection,
    b: Detection,
    desc_a: DescriptorSet | None,
    desc_b: DescriptorSet | None,
    corr_fwd: CorrespondenceSet | None,
    corr_rev: CorrespondenceSet | None,
    region: RegionSpec = RegionSpec(),
    imputation: dict[str, float] | None = None,
) -> "EdgeFeatureVector":
    """Assemble the 4-feature temporal vector for detections in frames
    (t, t+1). Missing descriptor or correspondence inputs are imputed per
    feature (population medians when provided, else 0)."""
    if a.frame > b.frame:
        a, b = b, a
        desc_a, desc_b = desc_b, desc_a
    if b.frame - a.frame != 1:
        raise GraphStructureError(
            f"temporal features need adjacent frames, got {a.frame} and {b.frame}"
        )
    if a.part.id != b.part.id:
        raise GraphStructureError("temporal features need equal part types")
    imputation = imputation or {}

    l2 = delta_l2(a, b)
    if desc_a is not None and desc_b is not None:
        sift = delta_sift(desc_a, desc_b)
    else:
        sift = float(imputation.get("sift", 0.0))
    if corr_fwd is not None:
        dm = delta_dm(corr_fwd, a.pos, b.pos, region)
    else:
        dm = float(imputation.get("dm", 0.0))
    if corr_rev is not None:
        # inverted image order: the first point lives in frame t+1
        dm_rev = delta_dm(corr_rev, b.pos, a.pos, region)
    else:
        dm_rev = float(imputation.get("dm_rev", 0.0))
    from .builder import EdgeFeatureVector  # local import to avoid a cycle

    return EdgeFeatureVector(TEMPORAL_FEATURES, (l2, sift, dm, dm_rev))


def subset_features(
    full: "EdgeFeatureVector", subset: Sequence[str]
) -> "EdgeFeatureVector":
    """Project the 4-feature temporal vector onto a feature subset.

    ``dm`` expands to both motion-agreement directions.
    """
    from .builder import EdgeFeatureVector

    names: list[str] = []
    for feat in subset:
        if feat == "dm":
            names.extend(["dm", "dm_rev"])
        elif feat in ("l2", "sift"):
            names.append(feat)
        else:
            raise ValueError(f"unknown temporal feature {feat!r}")
    index = {n: i for i, n in enumerate(full.names)}
    values = tuple(full.values[index[n]] for n in names)
    return EdgeFeatureVector(tuple(names), values)
