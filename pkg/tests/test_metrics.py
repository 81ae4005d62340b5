"""AP and MOTA against hand-computed scenarios and metric invariants."""

import math

import numpy as np
import pytest

from limbtrack.metrics import GroundTruth, GtPerson, ap_per_part, match_pckh, mota
from limbtrack.pipeline import TrackSet
from limbtrack.skeleton import make_parts
from limbtrack.synth import SynthConfig, gt_trackset, synth_generate

PARTS2 = make_parts(("head", "hand"), roots=("head",))


def _gt_two_persons(frames=10, sep=200.0, parts=PARTS2):
    gt = GroundTruth(parts=parts, n_frames=frames)
    gt.head_sizes = {0: 16.0, 1: 16.0}
    for f in range(frames):
        gt.poses[f] = [
            GtPerson(0, {p.id: (float(10 * p.id), float(f)) for p in parts}),
            GtPerson(1, {p.id: (sep + 10 * p.id, float(f)) for p in parts}),
        ]
    return gt


def _tracks_matching(gt, swap_from=None, score=0.9):
    """Tracks equal to GT; optionally with pred ids swapped from a frame on."""
    tracks = TrackSet(gt.n_frames)
    for f in sorted(gt.poses):
        for person in gt.poses[f]:
            pid = person.person_id
            if swap_from is not None and f >= swap_from:
                pid = 1 - pid
            for part, pos in sorted(person.parts.items()):
                tracks.add(pid, f, part, pos, score)
    return tracks


class TestMatchPckh:
    def test_zero_distance(self):
        assert match_pckh((5.0, 5.0), (5.0, 5.0), 16.0)

    def test_boundary_inclusive(self):
        assert match_pckh((8.0, 0.0), (0.0, 0.0), 16.0, alpha=0.5)

    def test_beyond_gate(self):
        assert not match_pckh((16.0, 0.0), (0.0, 0.0), 16.0, alpha=0.5)

    def test_head_size_must_be_positive(self):
        with pytest.raises(ValueError):
            match_pckh((0, 0), (0, 0), 0.0)


class TestMota:
    def test_perfect_tracks(self):
        gt = _gt_two_persons()
        rep = mota(_tracks_matching(gt), gt)
        for row in rep.rows.values():
            assert row.mota == 1.0
            assert row.fn == row.fp == row.idsw == 0
        assert rep.mean_mota == 1.0

    def test_empty_tracks_gives_zero(self):
        gt = _gt_two_persons()
        rep = mota(TrackSet(gt.n_frames), gt)
        for row in rep.rows.values():
            assert row.fn == row.gt == 20
            assert row.mota == 0.0

    def test_persistent_swap_counts_two_switches_per_part(self):
        # identities exchanged once at frame 5 and kept: one switch per person
        gt = _gt_two_persons(frames=10)
        rep = mota(_tracks_matching(gt, swap_from=5), gt)
        for row in rep.rows.values():
            assert row.idsw == 2
            assert row.fn == row.fp == 0
            assert row.mota == pytest.approx(1.0 - 2 / 20)

    def test_transient_swap_counts_four(self):
        # swap at frame 5 and revert at 6: every change from the last known
        # hypothesis counts, so 2 + 2 switches
        gt = _gt_two_persons(frames=10)
        tracks = TrackSet(gt.n_frames)
        for f in sorted(gt.poses):
            for person in gt.poses[f]:
                pid = 1 - person.person_id if f == 5 else person.person_id
                for part, pos in sorted(person.parts.items()):
                    tracks.add(pid, f, part, pos, 0.9)
        rep = mota(tracks, gt)
        for row in rep.rows.values():
            assert row.idsw == 4

    def test_report_identity(self):
        gt = _gt_two_persons()
        rep = mota(_tracks_matching(gt, swap_from=7), gt)
        for row in rep.rows.values():
            assert row.mota == pytest.approx(1.0 - (row.fn + row.fp + row.idsw) / row.gt,
                                             abs=1e-12)
            assert row.mota <= 1.0

    def test_relabeling_invariance(self):
        gt = _gt_two_persons()
        base = _tracks_matching(gt, swap_from=5)
        relabeled = TrackSet(gt.n_frames)
        mapping = {0: 13, 1: 7}
        for person in base.persons():
            for frame in base.frames_of(person):
                for part, (pos, s) in base.pose(person, frame).items():
                    relabeled.add(mapping[person], frame, part, pos, s)
        a = mota(base, gt)
        b = mota(relabeled, gt)
        for pid in a.rows:
            assert (a.rows[pid].fn, a.rows[pid].fp, a.rows[pid].idsw) == (
                b.rows[pid].fn, b.rows[pid].fp, b.rows[pid].idsw
            )

    def test_ignore_region_spurious_prediction_changes_nothing(self):
        gt = _gt_two_persons()
        gt.ignore_regions = {f: [(500.0, -50.0, 600.0, 50.0)] for f in range(10)}
        clean = mota(_tracks_matching(gt), gt)
        noisy_tracks = _tracks_matching(gt)
        for f in range(10):
            for part in (0, 1):
                noisy_tracks.add(99, f, part, (550.0, 0.0), 0.99)
        noisy = mota(noisy_tracks, gt)
        for pid in clean.rows:
            assert clean.rows[pid].mota == noisy.rows[pid].mota

    def test_hungarian_beats_greedy_on_crafted_case(self):
        parts = make_parts(("head",), roots=("head",))
        gt = GroundTruth(parts=parts, n_frames=1)
        gt.head_sizes = {0: 40.0, 1: 40.0}
        gt.poses[0] = [GtPerson(0, {0: (0.0, 0.0)}), GtPerson(1, {0: (10.0, 0.0)})]
        tracks = TrackSet(1)
        tracks.add(0, 0, 0, (4.0, 0.0), 0.9)    # near both, nearest to GT 0
        tracks.add(1, 0, 0, (-15.0, 0.0), 0.8)  # reaches only GT 0
        greedy = mota(tracks, gt)
        optimal = mota(tracks, gt, hungarian=True)
        assert greedy.rows[0].fn == 1 and greedy.rows[0].fp == 1
        assert optimal.rows[0].fn == 0 and optimal.rows[0].fp == 0

    def test_synth_gt_roundtrip(self):
        scene = synth_generate(SynthConfig(persons=2, frames=6, seed=3))
        rep = mota(gt_trackset(scene.gt), scene.gt)
        assert rep.mean_mota == 1.0


class TestAp:
    def test_perfect_predictions(self):
        gt = _gt_two_persons()
        rep = ap_per_part(_tracks_matching(gt, score=0.9), gt)
        assert all(v == 1.0 for v in rep.per_part.values())
        assert rep.mean == 1.0

    def test_no_predictions(self):
        gt = _gt_two_persons()
        rep = ap_per_part(TrackSet(gt.n_frames), gt)
        assert all(v == 0.0 for v in rep.per_part.values())

    def test_spurious_lower_scored_person_keeps_full_ap(self):
        # hand PR sweep: [(hi, TP), (lo, FP)] at full recall -> AP 1.0
        parts = PARTS2
        gt = GroundTruth(parts=parts, n_frames=1)
        gt.head_sizes = {0: 16.0}
        gt.poses[0] = [GtPerson(0, {0: (0.0, 0.0), 1: (10.0, 0.0)})]
        tracks = TrackSet(1)
        tracks.add(0, 0, 0, (0.0, 0.0), 0.9)
        tracks.add(0, 0, 1, (10.0, 0.0), 0.9)
        tracks.add(1, 0, 0, (500.0, 0.0), 0.5)
        tracks.add(1, 0, 1, (510.0, 0.0), 0.5)
        rep = ap_per_part(tracks, gt)
        assert rep.per_part[0] == 1.0 and rep.per_part[1] == 1.0

    def test_high_scored_false_positive_halves_area(self):
        # entries [(0.9, FP), (0.7, TP)] with 2 GT joints -> AP 0.25
        parts = make_parts(("head",), roots=("head",))
        gt = GroundTruth(parts=parts, n_frames=1)
        gt.head_sizes = {0: 16.0, 1: 16.0}
        gt.poses[0] = [GtPerson(0, {0: (0.0, 0.0)}), GtPerson(1, {0: (200.0, 0.0)})]
        tracks = TrackSet(1)
        tracks.add(0, 0, 0, (0.0, 0.0), 0.7)     # matches GT 0
        tracks.add(1, 0, 0, (900.0, 0.0), 0.9)   # spurious, higher score
        rep = ap_per_part(tracks, gt)
        assert rep.per_part[0] == pytest.approx(0.25)

    def test_monotone_rescaling_invariance(self):
        scene = synth_generate(
            SynthConfig(persons=2, frames=8, noise_sigma=3.0, clutter_rate=0.15, seed=9)
        )
        tracks = gt_trackset(scene.gt)
        # degrade: drop some, add clutter predictions with varying scores
        rng = np.random.default_rng(1)
        noisy = TrackSet(tracks.n_frames)
        for person in tracks.persons():
            for frame in tracks.frames_of(person):
                for part, (pos, _s) in tracks.pose(person, frame).items():
                    if rng.random() < 0.15:
                        continue
                    noisy.add(person, frame, part,
                              (pos[0] + rng.normal(0, 6), pos[1] + rng.normal(0, 6)),
                              float(rng.uniform(0.2, 0.95)))
        base = ap_per_part(noisy, scene.gt)
        rescaled = TrackSet(noisy.n_frames)
        for person in noisy.persons():
            for frame in noisy.frames_of(person):
                for part, (pos, s) in noisy.pose(person, frame).items():
                    rescaled.add(person, frame, part, pos, s**3)
        again = ap_per_part(rescaled, scene.gt)
        for pid in base.per_part:
            assert base.per_part[pid] == pytest.approx(again.per_part[pid], abs=1e-12)

    def test_ignore_region_spurious_prediction_changes_nothing(self):
        gt = _gt_two_persons()
        gt.ignore_regions = {f: [(500.0, -50.0, 600.0, 50.0)] for f in range(10)}
        tracks = _tracks_matching(gt)
        clean = ap_per_part(tracks, gt)
        noisy_tracks = _tracks_matching(gt)
        for f in range(10):
            for part in (0, 1):
                noisy_tracks.add(99, f, part, (550.0, float(part)), 0.99)
        noisy = ap_per_part(noisy_tracks, gt)
        for pid in clean.per_part:
            assert clean.per_part[pid] == noisy.per_part[pid]

    def test_zero_gt_part_excluded_from_mean(self):
        parts = make_parts(("head", "hand"), roots=("head",))
        gt = GroundTruth(parts=parts, n_frames=1)
        gt.head_sizes = {0: 16.0}
        gt.poses[0] = [GtPerson(0, {0: (0.0, 0.0)})]  # no hand annotation
        tracks = TrackSet(1)
        tracks.add(0, 0, 0, (0.0, 0.0), 0.9)
        rep = ap_per_part(tracks, gt)
        assert rep.per_part[1] is None
        assert rep.mean == 1.0


class TestAnnotationStride:
    """Every-k-th-frame annotation: unannotated frames are skipped, so
    predictions there are neither hits nor false positives."""

    def _strided_gt(self):
        gt = _gt_two_persons(frames=10)
        gt.annotated_stride = 2
        gt.poses = {f: persons for f, persons in gt.poses.items() if f % 2 == 0}
        return gt

    def test_mota_ignores_unannotated_frames(self):
        gt = self._strided_gt()
        tracks = TrackSet(10)
        for f in range(10):  # predictions on every frame, junk on odd ones
            for person in (0, 1):
                for part in (0, 1):
                    pos = (person * 200.0 + 10 * part, float(f)) if f % 2 == 0 else (
                        900.0, 900.0)
                    tracks.add(person, f, part, pos, 0.9)
        rep = mota(tracks, gt)
        for row in rep.rows.values():
            assert row.gt == 10  # 2 persons x 5 annotated frames
            assert row.fp == 0 and row.fn == 0 and row.mota == 1.0

    def test_ap_gt_counts_follow_stride(self):
        gt = self._strided_gt()
        rep = ap_per_part(_tracks_matching(gt), gt)
        assert all(c == 10 for c in rep.gt_counts.values())
        assert rep.mean == 1.0
