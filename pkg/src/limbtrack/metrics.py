"""Pose-estimation AP and per-joint tracking MOTA against ground truth.

Matching uses the head-size-normalized gate: a prediction matches a
ground-truth joint when their distance is at most alpha times the
person's head size (closed threshold). Predictions strictly inside an
ignore region count neither as hits nor as false positives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import PartType
from .pipeline import TrackSet


@dataclass
class GtPerson:
    person_id: int
    parts: dict[int, tuple[float, float]]  # part id -> position


@dataclass
class GroundTruth:
    """Annotated sequence: per-frame persons, head sizes, ignore regions."""

    parts: list[PartType]
    n_frames: int
    poses: dict[int, list[GtPerson]] = field(default_factory=dict)  # frame -> persons
    head_sizes: dict[int, float] = field(default_factory=dict)  # person -> length
    ignore_regions: dict[int, list[tuple[float, float, float, float]]] = field(
        default_factory=dict
    )  # frame -> rectangles (x0, y0, x1, y1)
    annotated_stride: int = 1

    def __post_init__(self):
        for pid, h in self.head_sizes.items():
            if h <= 0:
                raise ValueError(f"head size of person {pid} must be positive")
        for frame, persons in self.poses.items():
            ids = [p.person_id for p in persons]
            if len(ids) != len(set(ids)):
                raise ValueError(f"duplicate person ids in frame {frame}")

    def annotated_frames(self) -> list[int]:
        return [f for f in range(self.n_frames) if f % self.annotated_stride == 0]

    def head_size(self, person: int) -> float:
        return self.head_sizes[person]

    def part_gt_counts(self) -> dict[int, int]:
        counts = dict.fromkeys((p.id for p in self.parts), 0)
        for frame in self.annotated_frames():
            for person in self.poses.get(frame, []):
                for part in person.parts:
                    counts[part] += 1
        return counts


def match_pckh(
    pred: tuple[float, float],
    gt: tuple[float, float],
    head_size: float,
    alpha: float = 0.5,
) -> bool:
    """Head-size-normalized correctness gate (closed threshold)."""
    if head_size <= 0:
        raise ValueError("head size must be positive")
    return math.hypot(pred[0] - gt[0], pred[1] - gt[1]) <= alpha * head_size


def _inside_any(pos, rects) -> bool:
    """Strictly inside any rectangle."""
    x, y = pos
    return any(x0 < x < x1 and y0 < y < y1 for x0, y0, x1, y1 in rects)


def _frame_predictions(tracks: TrackSet, frame: int, ignore_rects):
    """Predicted persons at a frame, dropping those fully inside ignore
    regions; person score is the max part score (rank-stable under any
    monotone rescaling of the part scores)."""
    preds = []
    for person in tracks.persons():
        pose = tracks.pose(person, frame)
        if not pose:
            continue
        if ignore_rects and all(_inside_any(pos, ignore_rects) for pos, _ in pose.values()):
            continue
        score = max(s for _, s in pose.values())
        preds.append((person, pose, score))
    preds.sort(key=lambda t: (-t[2], t[0]))
    return preds


# ---------------------------------------------------------------------------
# Average precision
# ---------------------------------------------------------------------------


@dataclass
class ApReport:
    per_part: dict[int, float | None]  # part id -> AP (None when no GT)
    gt_counts: dict[int, int]
    part_names: dict[int, str]
    # raw PR staircase per part: (recalls, precisions) in rank order
    pr_curves: dict[int, tuple[list[float], list[float]]] = field(default_factory=dict)

    @property
    def mean(self) -> float:
        vals = [v for v in self.per_part.values() if v is not None]
        return float(np.mean(vals)) if vals else float("nan")


def _greedy_person_matches(preds, gt_persons, head_sizes, alpha):
    """Score-ordered greedy one-to-one person assignment.

    A prediction may claim the unmatched GT person with the most gate
    passes over their common parts, requiring a strict majority of those
    parts to pass.
    """
    matches = {}
    taken = set()
    for person, pose, _score in preds:
        best = None
        for gt in gt_persons:
            if gt.person_id in taken:
                continue
            common = [p for p in pose if p in gt.parts]
            if not common:
                continue
            hs = head_sizes[gt.person_id]
            passes = sum(
                match_pckh(pose[p][0], gt.parts[p], hs, alpha) for p in common
            )
            if passes * 2 <= len(common):
                continue
            dist = float(
                np.mean(
                    [math.dist(pose[p][0], gt.parts[p]) for p in common]
                )
            )
            key = (-passes, dist, gt.person_id)
            if best is None or key < best[0]:
                best = (key, gt)
        if best is not None:
            matches[person] = best[1]
            taken.add(best[1].person_id)
    return matches


def ap_per_part(
    tracks: TrackSet, gt: GroundTruth, alpha: float = 0.5
) -> ApReport:
    """Per-part average precision with score-ranked PR sweeps.

    Per frame, predicted persons are greedily assigned to GT persons
    (highest score first, strict-majority gate agreement); each part
    prediction of an assigned person scores against that GT person's
    part, unassigned predictions count as false positives, and the PR
    curve per part is integrated with every-point interpolation.
    """
    entries: dict[int, list[tuple[float, bool]]] = {p.id: [] for p in gt.parts}
    for frame in gt.annotated_frames():
        gt_persons = gt.poses.get(frame, [])
        rects = gt.ignore_regions.get(frame, [])
        preds = _frame_predictions(tracks, frame, rects)
        matches = _greedy_person_matches(preds, gt_persons, gt.head_sizes, alpha)
        for person, pose, _score in preds:
            gt_person = matches.get(person)
            for part, (pos, score) in sorted(pose.items()):
                if gt_person is not None and part in gt_person.parts:
                    hs = gt.head_sizes[gt_person.person_id]
                    hit = match_pckh(pos, gt_person.parts[part], hs, alpha)
                    entries[part].append((score, hit))
                elif _inside_any(pos, rects):
                    continue  # neither hit nor false positive
                else:
                    entries[part].append((score, False))

    gt_counts = gt.part_gt_counts()
    per_part: dict[int, float | None] = {}
    curves: dict[int, tuple[list[float], list[float]]] = {}
    for part, recs in entries.items():
        total = gt_counts.get(part, 0)
        if total == 0:
            per_part[part] = None
            continue
        per_part[part], curves[part] = _average_precision(recs, total)
    names = {p.id: p.name for p in gt.parts}
    return ApReport(per_part, gt_counts, names, curves)


def _average_precision(records, gt_total):
    """Area under the PR curve, every-point interpolation.

    Returns (ap, (recalls, precisions)) with the raw rank-order staircase.
    """
    if not records:
        return 0.0, ([], [])
    order = sorted(range(len(records)), key=lambda i: (-records[i][0], i))
    tp = fp = 0
    recalls, precisions = [], []
    for i in order:
        if records[i][1]:
            tp += 1
        else:
            fp += 1
        recalls.append(tp / gt_total)
        precisions.append(tp / (tp + fp))
    # running max of precision from the right
    interp = precisions[:]
    for i in range(len(interp) - 2, -1, -1):
        interp[i] = max(interp[i], interp[i + 1])
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(recalls, interp):
        ap += (r - prev_r) * p
        prev_r = r
    return ap, (recalls, precisions)


# ---------------------------------------------------------------------------
# MOTA
# ---------------------------------------------------------------------------


@dataclass
class MotaRow:
    part: str
    gt: int = 0
    fn: int = 0
    fp: int = 0
    idsw: int = 0

    @property
    def mota(self) -> float:
        if self.gt == 0:
            return float("nan")
        return 1.0 - (self.fn + self.fp + self.idsw) / self.gt


@dataclass
class MotaReport:
    rows: dict[int, MotaRow]  # part id -> row

    @property
    def average(self) -> MotaRow:
        """Summed counts; the average MOTA is the mean over parts with GT."""
        out = MotaRow("average")
        for row in self.rows.values():
            out.gt += row.gt
            out.fn += row.fn
            out.fp += row.fp
            out.idsw += row.idsw
        return out

    @property
    def mean_mota(self) -> float:
        vals = [r.mota for r in self.rows.values() if r.gt > 0]
        return float(np.mean(vals)) if vals else float("nan")


def mota(
    tracks: TrackSet, gt: GroundTruth, alpha: float = 0.5, hungarian: bool = False
) -> MotaReport:
    """Per-joint CLEAR-MOT over annotated frames.

    Previous-frame correspondences persist while they stay within the
    gate; remaining pairs match greedily by distance (or optimally when
    ``hungarian``). Identity switches count when a GT joint's matched
    hypothesis changes relative to its last known match.
    """
    rows = {p.id: MotaRow(p.name) for p in gt.parts}
    last_match: dict[tuple[int, int], int] = {}  # (part, gt person) -> pred person

    for frame in gt.annotated_frames():
        gt_persons = gt.poses.get(frame, [])
        rects = gt.ignore_regions.get(frame, [])
        preds = _frame_predictions(tracks, frame, rects)
        for part in rows:
            gt_joints = {
                p.person_id: p.parts[part] for p in gt_persons if part in p.parts
            }
            pred_joints = {
                person: pose[part] for person, pose, _ in preds if part in pose
            }
            rows[part].gt += len(gt_joints)

            matched_gt: dict[int, int] = {}
            used_preds: set[int] = set()
            # persistence of previous assignments
            for gid, gpos in sorted(gt_joints.items()):
                hyp = last_match.get((part, gid))
                if hyp is None or hyp not in pred_joints or hyp in used_preds:
                    continue
                if match_pckh(pred_joints[hyp][0], gpos, gt.head_sizes[gid], alpha):
                    matched_gt[gid] = hyp
                    used_preds.add(hyp)

            remaining_gt = [g for g in sorted(gt_joints) if g not in matched_gt]
            remaining_pred = [p for p in sorted(pred_joints) if p not in used_preds]
            if remaining_gt and remaining_pred:
                pairs = _assign(
                    remaining_gt,
                    remaining_pred,
                    gt_joints,
                    pred_joints,
                    gt.head_sizes,
                    alpha,
                    hungarian,
                )
                for gid, pid in pairs:
                    matched_gt[gid] = pid
                    used_preds.add(pid)

            for gid, pid in sorted(matched_gt.items()):
                prev = last_match.get((part, gid))
                if prev is not None and prev != pid:
                    rows[part].idsw += 1
                last_match[(part, gid)] = pid

            rows[part].fn += len(gt_joints) - len(matched_gt)
            for pid in sorted(pred_joints):
                if pid in used_preds:
                    continue
                if _inside_any(pred_joints[pid][0], rects):
                    continue
                rows[part].fp += 1
    return MotaReport(rows)


def _assign(gt_ids, pred_ids, gt_joints, pred_joints, head_sizes, alpha, hungarian):
    candidates = []
    for gid in gt_ids:
        for pid in pred_ids:
            d = math.dist(pred_joints[pid][0], gt_joints[gid])
            if d <= alpha * head_sizes[gid]:
                candidates.append((d, gid, pid))
    if not candidates:
        return []
    if hungarian:
        from scipy.optimize import linear_sum_assignment

        big = 1e9
        cost = np.full((len(gt_ids), len(pred_ids)), big)
        gi = {g: i for i, g in enumerate(gt_ids)}
        pi = {p: i for i, p in enumerate(pred_ids)}
        for d, gid, pid in candidates:
            cost[gi[gid], pi[pid]] = d
        rows_idx, cols_idx = linear_sum_assignment(cost)
        return [
            (gt_ids[r], pred_ids[c])
            for r, c in zip(rows_idx, cols_idx)
            if cost[r, c] < big
        ]
    candidates.sort()
    out = []
    taken_g, taken_p = set(), set()
    for d, gid, pid in candidates:
        if gid in taken_g or pid in taken_p:
            continue
        out.append((gid, pid))
        taken_g.add(gid)
        taken_p.add(pid)
    return out
