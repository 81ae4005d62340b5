"""Canonical 14-joint body layout shared by builders and the scene generator.

Offsets are expressed in head-size units relative to the neck (x grows
right, y grows down); multiply by a head size in pixels to get geometry.
"""

from __future__ import annotations

from .model import PartType

DEFAULT_PART_NAMES = (
    "head_top",
    "neck",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_hip",
    "r_knee",
    "r_ankle",
    "l_hip",
    "l_knee",
    "l_ankle",
)

# the two head joints anchor person identity
DEFAULT_ROOT_NAMES = ("head_top", "neck")

# person-node part for star-shaped attachment graphs
DEFAULT_PERSON_PART = "neck"

# tree of adjacent joints: the sparse within-frame connectivity
KINEMATIC_TREE = (
    ("head_top", "neck"),
    ("neck", "r_shoulder"),
    ("neck", "l_shoulder"),
    ("r_shoulder", "r_elbow"),
    ("r_elbow", "r_wrist"),
    ("l_shoulder", "l_elbow"),
    ("l_elbow", "l_wrist"),
    ("neck", "r_hip"),
    ("neck", "l_hip"),
    ("r_hip", "r_knee"),
    ("r_knee", "r_ankle"),
    ("l_hip", "l_knee"),
    ("l_knee", "l_ankle"),
)

CANONICAL_OFFSETS = {
    "head_top": (0.0, -1.0),
    "neck": (0.0, 0.0),
    "r_shoulder": (-0.75, 0.45),
    "r_elbow": (-0.95, 1.35),
    "r_wrist": (-1.05, 2.2),
    "l_shoulder": (0.75, 0.45),
    "l_elbow": (0.95, 1.35),
    "l_wrist": (1.05, 2.2),
    "r_hip": (-0.45, 2.3),
    "r_knee": (-0.5, 3.5),
    "r_ankle": (-0.5, 4.7),
    "l_hip": (0.45, 2.3),
    "l_knee": (0.5, 3.5),
    "l_ankle": (0.5, 4.7),
}


def make_parts(
    names: tuple[str, ...] = DEFAULT_PART_NAMES,
    roots: tuple[str, ...] = DEFAULT_ROOT_NAMES,
) -> list[PartType]:
    """Part vocabulary with contiguous ids; roots marked by name."""
    if len(set(names)) != len(names):
        raise ValueError("part names must be unique")
    unknown = set(roots) - set(names)
    if unknown:
        raise ValueError(f"root names not in vocabulary: {sorted(unknown)}")
    if len(roots) > 2:
        raise ValueError("at most one root pair is supported")
    return [PartType(i, n, is_root=n in roots) for i, n in enumerate(names)]


def part_index(parts: list[PartType]) -> dict[str, PartType]:
    return {p.name: p for p in parts}


def canonical_offsets_px(parts: list[PartType], head_size: float) -> dict[int, tuple[float, float]]:
    """Per part id, the neutral-pose offset from the neck, in pixels."""
    out = {}
    for p in parts:
        if p.name not in CANONICAL_OFFSETS:
            raise ValueError(f"no canonical offset for part {p.name!r}")
        dx, dy = CANONICAL_OFFSETS[p.name]
        out[p.id] = (dx * head_size, dy * head_size)
    return out
