"""CLI subcommands, exit codes, and run summaries."""

import json
from pathlib import Path

import pytest

from limbtrack.cli import main

pytestmark = pytest.mark.usefixtures("tmp_path")


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    assert run("synth-generate", "--out", out, "--persons", "2", "--frames", "6",
               "--seed", "7") == 0
    return out


class TestSynthGenerate:
    def test_writes_all_files(self, scene_dir):
        for name in (
            "detections.txt",
            "descriptors.txt",
            "correspondences.txt",
            "attachments.txt",
            "groundtruth.txt",
            "summary.json",
        ):
            assert (scene_dir / name).exists()

    def test_summary_is_machine_readable(self, scene_dir):
        summary = json.loads((scene_dir / "summary.json").read_text())
        assert summary["command"] == "synth-generate"
        assert summary["detections"] > 0
        assert "total_s" in summary["timings"]


class TestTrackAndEval:
    def test_track_eval_roundtrip(self, scene_dir, tmp_path):
        tracks = tmp_path / "tracks.txt"
        assert run(
            "track", "--detections", scene_dir / "detections.txt",
            "--descriptors", scene_dir / "descriptors.txt",
            "--correspondences", scene_dir / "correspondences.txt",
            "--attachments", scene_dir / "attachments.txt",
            "--out", tracks, "--model", "bu-sparse",
        ) == 0
        summary = json.loads((tmp_path / "tracks.txt.summary.json").read_text())
        assert summary["persons"] == 2
        assert {"proposal_s", "graph_s", "total_s"} <= set(summary["timings"])

        motaf = tmp_path / "mota.txt"
        assert run("eval-mota", "--tracks", tracks, "--gt",
                   scene_dir / "groundtruth.txt", "--out", motaf) == 0
        assert motaf.exists()
        assert (tmp_path / "mota.png").exists()
        rows = motaf.read_text().splitlines()
        assert rows[0] == "#format mota-report v1"
        assert rows[-1].startswith("average")
        summary = json.loads((tmp_path / "mota.txt.summary.json").read_text())
        assert summary["mean_mota"] == 1.0

        apf = tmp_path / "ap.txt"
        assert run("eval-ap", "--tracks", tracks, "--gt",
                   scene_dir / "groundtruth.txt", "--out", apf, "--no-figures") == 0
        assert not (tmp_path / "ap.png").exists()
        summary = json.loads((tmp_path / "ap.txt.summary.json").read_text())
        assert summary["mean_ap"] == 1.0

    def test_tdbu_model(self, scene_dir, tmp_path):
        tracks = tmp_path / "tracks_tdbu.txt"
        assert run(
            "track", "--detections", scene_dir / "detections.txt",
            "--attachments", scene_dir / "attachments.txt",
            "--descriptors", scene_dir / "descriptors.txt",
            "--correspondences", scene_dir / "correspondences.txt",
            "--out", tracks, "--model", "tdbu",
        ) == 0

    def test_export_overlay(self, scene_dir, tmp_path):
        tracks = tmp_path / "tracks.txt"
        run("track", "--detections", scene_dir / "detections.txt", "--out", tracks)
        overlay = tmp_path / "overlay.txt"
        assert run("export-overlay", "--tracks", tracks, "--out", overlay) == 0
        assert overlay.read_text().startswith("#format overlay v1")


class TestSolvePath:
    def test_build_solve_oracle(self, scene_dir, tmp_path):
        graph = tmp_path / "graph.txt"
        assert run("build-graph", "--detections", scene_dir / "detections.txt",
                   "--descriptors", scene_dir / "descriptors.txt",
                   "--correspondences", scene_dir / "correspondences.txt",
                   "--out", graph, "--model", "bu-sparse") == 0
        sol = tmp_path / "solution.txt"
        assert run("solve", "--graph", graph, "--out", sol) == 0
        summary = json.loads((tmp_path / "solution.txt.summary.json").read_text())
        assert summary["clusters"] >= 2
        assert summary["objective"] < 0

    def test_oracle_check_small_instance(self, tmp_path):
        graph = tmp_path / "small.txt"
        graph.write_text(
            "#format graph v1\n#parts a b c\n"
            "node 0 0 a 0.0 0.0 0.5 -1.0\n"
            "node 1 0 b 1.0 0.0 0.5 -1.0\n"
            "node 2 0 c 2.0 0.0 0.5 -1.0\n"
            "edge 0 1 cross -1.0\nedge 1 2 cross -1.0\n"
        )
        out = tmp_path / "oracle.json"
        assert run("oracle-check", "--graph", graph, "--out", out) == 0
        data = json.loads(out.read_text())
        assert data["matches"] is True
        assert data["objective_exact"] == -5.0

    def test_paper_sign_flag(self, scene_dir, tmp_path):
        graph = tmp_path / "graph_ps.txt"
        assert run("build-graph", "--detections", scene_dir / "detections.txt",
                   "--out", graph, "--model", "bu-sparse", "--paper-sign") == 0
        # literal orientation: confident detections now cost positive
        costs = [
            float(line.split()[7])
            for line in graph.read_text().splitlines()
            if line.startswith("node ")
        ]
        assert all(c > 0 for c in costs)


class TestTrainPairwise:
    def test_temporal_and_cross(self, scene_dir, tmp_path):
        model = tmp_path / "temporal.txt"
        assert run(
            "train-pairwise", "--detections", scene_dir / "detections.txt",
            "--gt", scene_dir / "groundtruth.txt",
            "--descriptors", scene_dir / "descriptors.txt",
            "--correspondences", scene_dir / "correspondences.txt",
            "--kind", "temporal", "--features", "l2,dm", "--out", model,
        ) == 0
        text = model.read_text()
        assert "#schema temporal:l2+dm" in text

        cross = tmp_path / "cross.txt"
        assert run(
            "train-pairwise", "--detections", scene_dir / "detections.txt",
            "--gt", scene_dir / "groundtruth.txt",
            "--kind", "cross-type", "--out", cross,
        ) == 0
        assert cross.exists()
        assert (tmp_path / "cross.regressor.txt").exists()

    def test_trained_models_feed_tracking(self, scene_dir, tmp_path):
        model = tmp_path / "temporal.txt"
        run("train-pairwise", "--detections", scene_dir / "detections.txt",
            "--gt", scene_dir / "groundtruth.txt",
            "--descriptors", scene_dir / "descriptors.txt",
            "--correspondences", scene_dir / "correspondences.txt",
            "--kind", "temporal", "--out", model)
        tracks = tmp_path / "tracks.txt"
        assert run(
            "track", "--detections", scene_dir / "detections.txt",
            "--descriptors", scene_dir / "descriptors.txt",
            "--correspondences", scene_dir / "correspondences.txt",
            "--temporal-model", model, "--out", tracks,
        ) == 0


class TestExitCodes:
    def test_usage_error(self):
        assert run("track") == 1  # missing required arguments

    def test_unknown_command(self):
        assert run("frobnicate") == 1

    def test_parse_error(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("#format detections v1\n#parts neck\n0 neck 1.0 2.0 2.0\n")
        assert run("track", "--detections", bad, "--out", tmp_path / "o.txt") == 2

    def test_config_error(self, scene_dir, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("#format config v1\nbogus_key 1\n")
        assert run("track", "--detections", scene_dir / "detections.txt",
                   "--config", cfg, "--out", tmp_path / "o.txt") == 2

    def test_infeasible_error(self, tmp_path):
        graph = tmp_path / "contradiction.txt"
        graph.write_text(
            "#format graph v1\n#parts a b c\n"
            "node 0 0 a 0.0 0.0 0.5 -1.0\n"
            "node 1 0 b 1.0 0.0 0.5 -1.0\n"
            "node 2 0 c 2.0 0.0 0.5 -1.0\n"
            "edge 0 1 cross -1.0\nedge 1 2 cross -1.0\n"
            "mustlink 0 1\nmustlink 1 2\nmustcut 0 2\n"
        )
        assert run("solve", "--graph", graph, "--out", tmp_path / "s.txt") == 3

    def test_bad_feature_subset(self, scene_dir, tmp_path):
        assert run("track", "--detections", scene_dir / "detections.txt",
                   "--out", tmp_path / "o.txt", "--features", "l2,bogus") == 2


class TestDegenerateInputs:
    def test_track_on_empty_detections(self, tmp_path):
        empty = tmp_path / "empty.txt"
        empty.write_text("#format detections v1\n#parts neck\n#roots neck\n#frames 0\n")
        out = tmp_path / "tracks.txt"
        assert run("track", "--detections", empty, "--out", out) == 0
        assert out.read_text().startswith("#format tracks v1")

    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run("--help")
        assert exc.value.code == 0
        assert "synth-generate" in capsys.readouterr().out
