"""Synthetic articulated scenes with exact ground truth.

Stick-figure persons follow smooth sinusoidal base motion with per-joint
limb swing. Detections are ground-truth joints plus Gaussian noise,
dropped at the miss rate, mixed with uniform clutter. Descriptors are
per-(person, part) stable random vectors; correspondences sample the true
motion field on a grid. Everything is deterministic per seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .builder import ConditionalAttachment, SidecarData
from .metrics import GroundTruth, GtPerson
from .model import Detection, PartType
from .pipeline import TrackSet
from .skeleton import canonical_offsets_px, make_parts

# limb swing amplitude as a fraction of head size, per part name
_SWING_FRAC = {
    "head_top": 0.0,
    "neck": 0.0,
    "r_shoulder": 0.1,
    "l_shoulder": 0.1,
    "r_elbow": 0.18,
    "l_elbow": 0.18,
    "r_wrist": 0.28,
    "l_wrist": 0.28,
    "r_hip": 0.05,
    "l_hip": 0.05,
    "r_knee": 0.15,
    "l_knee": 0.15,
    "r_ankle": 0.25,
    "l_ankle": 0.25,
}


@dataclass(frozen=True)
class SynthConfig:
    persons: int = 3
    frames: int = 21
    head_size: float = 16.0
    spacing: float = 120.0
    motion_amplitude: float = 14.0
    noise_sigma: float = 0.0
    miss_rate: float = 0.0
    clutter_rate: float = 0.0
    descriptor_dim: int = 16
    grid_step: float = 16.0
    seed: int = 0

    def __post_init__(self):
        if self.persons < 0 or self.frames < 0:
            raise ValueError("persons and frames must be non-negative")
        if not (0.0 <= self.miss_rate <= 1.0 and 0.0 <= self.clutter_rate <= 1.0):
            raise ValueError("rates must lie in [0,1]")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")
        if self.head_size <= 0 or self.spacing <= 0 or self.grid_step <= 0:
            raise ValueError("head_size, spacing and grid_step must be positive")


@dataclass
class SynthScene:
    config: SynthConfig
    parts: list[PartType]
    frames: list[list[Detection]]
    sidecars: SidecarData
    gt: GroundTruth
    provenance: dict[int, tuple[int, int] | None]  # node -> (person, part) | None


def synth_generate(cfg: SynthConfig) -> SynthScene:
    """Generate one scene; byte-stable for a fixed config."""
    rng = np.random.default_rng(cfg.seed)
    parts = make_parts()
    offsets = canonical_offsets_px(parts, cfg.head_size)
    root_ids = {p.id for p in parts if p.is_root}

    # per-person motion parameters, drawn in fixed order
    motion = []
    for _ in range(cfg.persons):
        motion.append(
            {
                "freq": rng.uniform(0.07, 0.14, size=2),
                "phase": rng.uniform(0.0, 2 * math.pi, size=2),
                "swing_freq": rng.uniform(0.05, 0.12, size=len(parts)),
                "swing_phase": rng.uniform(0.0, 2 * math.pi, size=len(parts)),
            }
        )

    def joint_pos(person: int, part: PartType, t: int) -> tuple[float, float]:
        m = motion[person]
        base_x = 100.0 + person * cfg.spacing + cfg.motion_amplitude * math.sin(
            2 * math.pi * m["freq"][0] * t + m["phase"][0]
        )
        base_y = 8.0 * cfg.head_size + 0.6 * cfg.motion_amplitude * math.sin(
            2 * math.pi * m["freq"][1] * t + m["phase"][1]
        )
        amp = _SWING_FRAC[part.name] * cfg.head_size
        sw = 2 * math.pi * m["swing_freq"][part.id] * t + m["swing_phase"][part.id]
        dx, dy = offsets[part.id]
        return (
            base_x + dx + amp * math.sin(sw),
            base_y + dy + 0.5 * amp * math.cos(sw),
        )

    gt = GroundTruth(parts=parts, n_frames=cfg.frames)
    for pid in range(cfg.persons):
        gt.head_sizes[pid] = cfg.head_size
    for t in range(cfg.frames):
        gt.poses[t] = [
            GtPerson(pid, {p.id: joint_pos(pid, p, t) for p in parts})
            for pid in range(cfg.persons)
        ]

    # scene bounding box (for clutter and the correspondence grid)
    if cfg.persons and cfg.frames:
        xs = [pos[0] for ps in gt.poses.values() for p in ps for pos in p.parts.values()]
        ys = [pos[1] for ps in gt.poses.values() for p in ps for pos in p.parts.values()]
        bbox = (min(xs) - 40.0, min(ys) - 40.0, max(xs) + 40.0, max(ys) + 40.0)
    else:
        bbox = (0.0, 0.0, 200.0, 200.0)

    # stable descriptor bases per (person, part): two orientations each
    base_desc = {}
    for pid in range(cfg.persons):
        for p in parts:
            base_desc[(pid, p.id)] = (
                rng.normal(size=cfg.descriptor_dim),
                rng.normal(size=cfg.descriptor_dim),
            )

    frames: list[list[Detection]] = []
    sidecars = SidecarData()
    provenance: dict[int, tuple[int, int] | None] = {}
    next_id = 0
    for t in range(cfg.frames):
        dets: list[Detection] = []
        for pid in range(cfg.persons):
            for p in parts:
                if cfg.miss_rate > 0 and rng.random() < cfg.miss_rate:
                    continue
                x, y = joint_pos(pid, p, t)
                if cfg.noise_sigma > 0:
                    x += rng.normal(0.0, cfg.noise_sigma)
                    y += rng.normal(0.0, cfg.noise_sigma)
                score = float(rng.uniform(0.75, 0.98))
                det = Detection(next_id, t, (x, y), score, p)
                dets.append(det)
                provenance[next_id] = (pid, p.id)
                b1, b2 = base_desc[(pid, p.id)]
                vecs = [tuple(b1 + rng.normal(0.0, 0.05, cfg.descriptor_dim))]
                if rng.random() < 0.25:
                    vecs.append(tuple(b2 + rng.normal(0.0, 0.05, cfg.descriptor_dim)))
                sidecars.descriptors[next_id] = _descriptor(next_id, vecs)
                next_id += 1
        n_clutter = int(rng.binomial(max(1, cfg.persons * len(parts)), cfg.clutter_rate))
        true_positions = [(d.part, d.pos) for d in dets]
        for _ in range(n_clutter):
            # most clutter is a near-joint decoy; the rest is uniform
            if true_positions and rng.random() < 0.7:
                p, (jx, jy) = true_positions[int(rng.integers(0, len(true_positions)))]
                x = float(jx + rng.normal(0.0, 1.2 * cfg.head_size))
                y = float(jy + rng.normal(0.0, 1.2 * cfg.head_size))
            else:
                p = parts[int(rng.integers(0, len(parts)))]
                x = float(rng.uniform(bbox[0], bbox[2]))
                y = float(rng.uniform(bbox[1], bbox[3]))
            score = float(rng.uniform(0.5, 0.9))
            det = Detection(next_id, t, (x, y), score, p)
            dets.append(det)
            provenance[next_id] = None
            vecs = [tuple(rng.normal(size=cfg.descriptor_dim))]
            sidecars.descriptors[next_id] = _descriptor(next_id, vecs)
            next_id += 1
        frames.append(dets)

    _add_correspondences(cfg, gt, sidecars, bbox)
    _add_attachments(cfg, rng, frames, provenance, sidecars, root_ids)
    return SynthScene(cfg, parts, frames, sidecars, gt, provenance)


def _descriptor(node_id, vecs):
    from .temporal import DescriptorSet

    return DescriptorSet(node_id, tuple(vecs))


def _add_correspondences(cfg, gt, sidecars, bbox):
    from .temporal import CorrespondenceSet

    if cfg.frames < 2:
        return
    radius = 1.5 * cfg.head_size
    grid_x = np.arange(bbox[0], bbox[2] + 1e-9, cfg.grid_step)
    grid_y = np.arange(bbox[1], bbox[3] + 1e-9, cfg.grid_step)
    grid = np.array([(gx, gy) for gx in grid_x for gy in grid_y])

    def joints_at(t):
        out = []
        for person in gt.poses.get(t, []):
            for part, pos in sorted(person.parts.items()):
                out.append((person.person_id, part, pos))
        return out

    for t in range(cfg.frames - 1):
        for direction, src_t, dst_t in (("fwd", t, t + 1), ("rev", t + 1, t)):
            joints = joints_at(src_t)
            dst_pose = {
                (p.person_id, part): pos
                for p in gt.poses.get(dst_t, [])
                for part, pos in p.parts.items()
            }
            points = []
            if joints:
                jpos = np.array([j[2] for j in joints])
                d2 = ((grid[:, None, :] - jpos[None, :, :]) ** 2).sum(axis=2)
                nearest = d2.argmin(axis=1)
                near_ok = np.sqrt(d2[np.arange(len(grid)), nearest]) <= radius
            else:
                nearest = np.zeros(len(grid), dtype=int)
                near_ok = np.zeros(len(grid), dtype=bool)
            for gi, (gx, gy) in enumerate(grid):
                if near_ok[gi]:
                    pid, part, pos = joints[nearest[gi]]
                    dest = dst_pose.get((pid, part))
                    if dest is None:
                        mx = my = 0.0
                    else:
                        mx, my = dest[0] - pos[0], dest[1] - pos[1]
                else:
                    mx = my = 0.0
                points.append((float(gx), float(gy), float(gx + mx), float(gy + my)))
            sidecars.correspondences[(t, direction)] = CorrespondenceSet(
                t, direction, tuple(points)
            )


def _add_attachments(cfg, rng, frames, provenance, sidecars, root_ids):
    from .skeleton import DEFAULT_PART_NAMES, DEFAULT_PERSON_PART

    neck_id = DEFAULT_PART_NAMES.index(DEFAULT_PERSON_PART)
    for dets in frames:
        necks = [
            d
            for d in dets
            if d.part.id == neck_id and provenance[d.node_id] is not None
        ]
        proposals = [d for d in dets if d.part.id not in root_ids]
        for neck in necks:
            neck_person = provenance[neck.node_id][0]
            for d in proposals:
                prov = provenance[d.node_id]
                if prov is not None and prov[0] == neck_person:
                    p = float(np.clip(rng.normal(0.94, 0.02), 0.85, 0.98))
                else:
                    p = float(np.clip(rng.normal(0.05, 0.02), 0.02, 0.15))
                sidecars.attachments.append(
                    ConditionalAttachment(neck.node_id, d.node_id, p)
                )


def gt_trackset(gt: GroundTruth, score: float = 0.9) -> TrackSet:
    """Ground truth reshaped as a TrackSet (constant score)."""
    tracks = TrackSet(gt.n_frames)
    for frame in sorted(gt.poses):
        for person in gt.poses[frame]:
            for part, pos in sorted(person.parts.items()):
                tracks.add(person.person_id, frame, part, pos, score)
    return tracks
