"""Head seeding, constrained full tracking, pose extraction, windowing."""

import dataclasses

import pytest

from limbtrack.builder import default_cost_models
from limbtrack.errors import ConfigError
from limbtrack.metrics import mota
from limbtrack.model import Detection, PartType
from limbtrack.pipeline import (
    SequenceConfig,
    TrackSet,
    extract_pose,
    filter_by_score,
    seed_head_tracks,
    track_full,
    track_sequence,
)
from limbtrack.skeleton import make_parts, part_index
from limbtrack.synth import SynthConfig, synth_generate

PARTS = make_parts()
IDX = part_index(PARTS)
MODELS = default_cost_models(PARTS, head_size=16.0)


def _scene(**kw):
    cfg = dict(persons=2, frames=8, seed=11)
    cfg.update(kw)
    return synth_generate(SynthConfig(**cfg))


class TestFilterByScore:
    def test_strictly_greater(self):
        dets = [
            Detection(0, 0, (0, 0), 0.65, IDX["neck"]),
            Detection(1, 0, (1, 0), 0.651, IDX["neck"]),
        ]
        out = filter_by_score([dets], 0.65)
        assert [d.node_id for d in out[0]] == [1]

    def test_zero_keeps_everything(self):
        dets = [Detection(0, 0, (0, 0), 0.1, IDX["neck"])]
        assert filter_by_score([dets], 0.0) == [dets]

    def test_threshold_domain(self):
        with pytest.raises(ValueError):
            filter_by_score([], 1.5)

    def test_variant_defaults(self):
        assert SequenceConfig(model="bu-sparse").threshold == 0.65
        assert SequenceConfig(model="bu-full").threshold == 0.65
        assert SequenceConfig(model="tdbu").threshold == 0.7


class TestExtractPose:
    def test_argmax_by_score(self):
        dets = [
            Detection(3, 0, (0, 0), 0.8, IDX["r_wrist"]),
            Detection(4, 0, (5, 5), 0.6, IDX["r_wrist"]),
        ]
        pose = extract_pose(dets, 0)
        assert pose[IDX["r_wrist"].id] == ((0.0, 0.0), 0.8)

    def test_tie_breaks_to_lowest_node_id(self):
        dets = [
            Detection(9, 0, (1, 1), 0.8, IDX["r_wrist"]),
            Detection(2, 0, (2, 2), 0.8, IDX["r_wrist"]),
        ]
        pose = extract_pose(dets, 0)
        assert pose[IDX["r_wrist"].id] == ((2.0, 2.0), 0.8)

    def test_absent_parts_absent(self):
        dets = [Detection(0, 0, (0, 0), 0.9, IDX["neck"])]
        pose = extract_pose(dets, 0)
        assert IDX["r_ankle"].id not in pose

    def test_frame_filtering(self):
        dets = [Detection(0, 1, (0, 0), 0.9, IDX["neck"])]
        assert extract_pose(dets, 0) == {}


class TestSeedHeadTracks:
    def test_single_person_single_track(self):
        scene = _scene(persons=1, frames=5)
        heads = seed_head_tracks(scene.frames, MODELS, sidecars=scene.sidecars)
        assert len(heads) == 1
        assert heads.frames_of(0) == list(range(5))

    def test_two_people_no_mixing(self):
        scene = _scene(persons=2, frames=8)
        heads = seed_head_tracks(scene.frames, MODELS, sidecars=scene.sidecars)
        assert len(heads) == 2
        neck = IDX["neck"].id
        gt_by_pid = {}
        for frame in sorted(scene.gt.poses):
            for p in scene.gt.poses[frame]:
                gt_by_pid.setdefault(p.person_id, {})[frame] = p.parts[neck]
        for person in heads.persons():
            # every neck position of a track must follow exactly one GT person
            owners = set()
            for frame in heads.frames_of(person):
                pos = heads.pose(person, frame).get(neck)
                if pos is None:
                    continue
                for pid, by_frame in gt_by_pid.items():
                    if by_frame.get(frame) == pos[0]:
                        owners.add(pid)
            assert len(owners) == 1

    def test_missing_head_frame_splits_track(self):
        scene = _scene(persons=1, frames=7)
        frames = [
            [d for d in dets if not (d.frame == 3 and d.part.is_root)]
            for dets in scene.frames
        ]
        heads = seed_head_tracks(frames, MODELS, sidecars=scene.sidecars)
        assert len(heads) == 2  # no long-range edges: the gap splits the track

    def test_no_roots_empty(self):
        scene = _scene(persons=1, frames=3)
        frames = [[d for d in dets if not d.part.is_root] for dets in scene.frames]
        heads = seed_head_tracks(frames, MODELS, sidecars=scene.sidecars)
        assert len(heads) == 0


class TestTrackFull:
    def _run(self, scene, model="bu-sparse", seed=0):
        cfg = SequenceConfig(model=model, solver=dataclasses.replace(
            SequenceConfig().solver, seed=seed))
        return track_sequence(scene.frames, MODELS, cfg, scene.sidecars)

    def test_empty_sequence(self):
        out = track_sequence([], MODELS, SequenceConfig(), None)
        assert len(out) == 0 and out.n_frames == 0

    def test_zero_noise_small_scene_perfect(self):
        scene = _scene()
        tracks = self._run(scene)
        assert mota(tracks, scene.gt).mean_mota == 1.0

    def test_head_positions_coincide_with_seeds(self):
        scene = _scene()
        cfg = SequenceConfig(model="bu-sparse")
        heads = seed_head_tracks(scene.frames, MODELS, cfg, scene.sidecars)
        tracks = track_full(scene.frames, heads, cfg, MODELS, scene.sidecars)
        for person in heads.persons():
            for frame in heads.frames_of(person):
                for part, (pos, _score) in heads.pose(person, frame).items():
                    assert tracks.pose(person, frame)[part][0] == pos

    def test_no_detection_shared_between_persons(self):
        scene = _scene(persons=3, frames=6)
        tracks = self._run(scene)
        seen = set()
        for person in tracks.persons():
            for frame in tracks.frames_of(person):
                for part, (pos, score) in tracks.pose(person, frame).items():
                    key = (frame, part, pos)
                    assert key not in seen
                    seen.add(key)

    def test_deterministic(self):
        scene = _scene(persons=3, frames=6, noise_sigma=2.0, clutter_rate=0.1)
        a = self._run(scene, seed=5)
        b = self._run(scene, seed=5)
        assert a.entries == b.entries

    def test_limb_deletion_leaves_other_joints_untouched(self):
        scene = _scene(persons=2, frames=8)
        wrist = IDX["r_wrist"].id
        pruned = [
            [
                d
                for d in dets
                if not (
                    d.part.id == wrist
                    and d.frame in (3, 4, 5)
                    and scene.provenance[d.node_id] == (0, wrist)
                )
            ]
            for dets in scene.frames
        ]
        full = self._run(scene)
        cut = track_sequence(pruned, MODELS, SequenceConfig(), scene.sidecars)
        for person in full.persons():
            for frame in full.frames_of(person):
                for part, entry in full.pose(person, frame).items():
                    if part == wrist:
                        continue
                    assert cut.pose(person, frame).get(part) == entry

    def test_removing_a_person_removes_exactly_that_person(self):
        scene = _scene(persons=3, frames=6)
        kept = [
            [d for d in dets
             if scene.provenance[d.node_id] is None
             or scene.provenance[d.node_id][0] != 2]
            for dets in scene.frames
        ]
        full = self._run(scene)
        reduced = track_sequence(kept, MODELS, SequenceConfig(), scene.sidecars)
        assert len(reduced) == len(full) - 1
        rep = mota(reduced, scene.gt)
        # persons 0 and 1 still tracked perfectly; person 2 all misses
        assert rep.average.fp == 0 and rep.average.idsw == 0
        assert rep.average.fn == 14 * 6

    def test_long_sequence_windowing(self):
        scene = _scene(persons=2, frames=50)
        cfg = SequenceConfig(model="bu-sparse", window=21, margin=5)
        tracks = track_sequence(scene.frames, MODELS, cfg, scene.sidecars)
        rep = mota(tracks, scene.gt)
        assert rep.mean_mota == 1.0  # stitched by head-track identity

    def test_tdbu_root_exclusivity(self):
        scene = _scene(persons=2, frames=6)
        tracks = self._run(scene, model="tdbu")
        assert mota(tracks, scene.gt).mean_mota == 1.0

    def test_tdbu_windowed_long_sequence(self):
        scene = _scene(persons=2, frames=50)
        cfg = SequenceConfig(model="tdbu", window=21, margin=5)
        tracks = track_sequence(scene.frames, MODELS, cfg, scene.sidecars)
        assert mota(tracks, scene.gt).mean_mota == 1.0

    def test_track_full_reports_solve_stats(self):
        scene = _scene(persons=2, frames=8)
        cfg = SequenceConfig(model="bu-sparse")
        heads = seed_head_tracks(scene.frames, MODELS, cfg, scene.sidecars)
        stats = {}
        track_full(scene.frames, heads, cfg, MODELS, scene.sidecars, stats=stats)
        assert stats["windows"] == 1
        assert stats["objective"] < 0.0

    def test_window_config_validation(self):
        with pytest.raises(ConfigError):
            SequenceConfig(window=10, margin=5)
        with pytest.raises(ConfigError):
            SequenceConfig(model="nope")
