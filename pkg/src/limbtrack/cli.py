"""Command-line interface.

Subcommands cover the whole workflow: synthetic data generation, graph
building, solving (with an exact-oracle check), end-to-end tracking,
evaluation with figures, pairwise-model training, and overlay export.
Every run writes a machine-readable JSON summary with the objective and
per-stage timings (proposal ingest vs. graph partitioning). Exit codes:
0 success, 1 usage, 2 parse/config, 3 infeasible constraints, 4 internal.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

from . import formats
from .builder import CostModels, SidecarData, default_cost_models
from .errors import ConfigError, GraphStructureError, InfeasibleConstraintsError, ParseError
from .metrics import ap_per_part, mota
from .model import SolverParams, objective, validate
from .pipeline import (
    DEFAULT_SCORE_THRESHOLDS,
    SequenceConfig,
    seed_head_tracks,
    track_full,
    filter_by_score,
)
from .solver import oracle_gap, solve_local_search
from .synth import SynthConfig, synth_generate
from .temporal import RegionSpec
from .training import fit_cross_type, fit_temporal_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_INTERNAL = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(Exception):
    """Raised for bad command lines; mapped to exit code 1."""


def _features_tuple(spec: str) -> tuple[str, ...]:
    feats = tuple(tok.strip() for tok in spec.split(",") if tok.strip())
    for f in feats:
        if f not in ("l2", "sift", "dm"):
            raise ConfigError(f"unknown temporal feature {f!r} (choose from l2,sift,dm)")
    if not feats:
        raise ConfigError("--features must name at least one of l2,sift,dm")
    return feats


def _load_run_config(path) -> dict:
    return formats.parse_config(path) if path else {}


def _build_models(args, cfg: dict, parts) -> CostModels:
    head_size = cfg.get("head_size", 16.0)
    features = _features_tuple(args.features)
    region = RegionSpec(cfg.get("region_side", 64.0))
    models = default_cost_models(
        parts, head_size=head_size, temporal_features=features, region=region
    )
    if getattr(args, "temporal_model", None):
        models = dataclasses.replace(models, temporal=formats.parse_model(args.temporal_model))
    if getattr(args, "cross_model", None):
        models = dataclasses.replace(models, cross_type=formats.parse_model(args.cross_model))
    if getattr(args, "cross_regressor", None):
        regressor, _ = formats.parse_regressor(args.cross_regressor)
        models = dataclasses.replace(models, cross_regressor=regressor)
    return models


def _sequence_config(args, cfg: dict) -> SequenceConfig:
    thresholds = dict(DEFAULT_SCORE_THRESHOLDS)
    for variant, key in (
        ("bu-full", "score_threshold_bu_full"),
        ("bu-sparse", "score_threshold_bu_sparse"),
        ("tdbu", "score_threshold_tdbu"),
    ):
        if key in cfg:
            thresholds[variant] = cfg[key]
    solver = SolverParams(
        max_exact_nodes=cfg.get("max_exact_nodes", 10),
        move_budget=cfg.get("move_budget", 200_000),
        seed=args.seed,
    )
    return SequenceConfig(
        model=args.model,
        window=cfg.get("window", 41),
        margin=cfg.get("margin", 10),
        solver=solver,
        score_thresholds=thresholds,
        temporal_gate=cfg.get("temporal_gate"),
        paper_sign=args.paper_sign,
    )


def _load_sidecars(args, frames) -> SidecarData:
    sidecars = SidecarData()
    if getattr(args, "descriptors", None):
        sidecars.descriptors = formats.parse_descriptors(args.descriptors)
    if getattr(args, "correspondences", None):
        sidecars.correspondences = formats.parse_correspondences(args.correspondences)
    if getattr(args, "attachments", None):
        sidecars.attachments = formats.parse_attachments(args.attachments)
    formats.validate_sidecars(frames, sidecars)
    return sidecars


def _summary_path(out_path) -> Path:
    out = Path(out_path)
    if out.is_dir():
        return out / "summary.json"
    return out.with_suffix(out.suffix + ".summary.json")


# -- subcommand implementations -------------------------------------------------


def _cmd_synth_generate(args):
    cfg = SynthConfig(
        persons=args.persons,
        frames=args.frames,
        head_size=args.head_size,
        spacing=args.spacing,
        motion_amplitude=args.amplitude,
        noise_sigma=args.sigma,
        miss_rate=args.miss,
        clutter_rate=args.clutter,
        grid_step=args.grid_step,
        seed=args.seed,
    )
    t0 = time.perf_counter()
    scene = synth_generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_detections(out / "detections.txt", scene.frames, scene.parts)
    formats.write_descriptors(out / "descriptors.txt", scene.sidecars.descriptors)
    formats.write_correspondences(
        out / "correspondences.txt", scene.sidecars.correspondences
    )
    formats.write_attachments(out / "attachments.txt", scene.sidecars.attachments)
    formats.write_groundtruth(out / "groundtruth.txt", scene.gt)
    formats.write_summary(
        _summary_path(out),
        {
            "command": "synth-generate",
            "seed": args.seed,
            "persons": args.persons,
            "frames": args.frames,
            "detections": sum(len(f) for f in scene.frames),
            "timings": {"total_s": time.perf_counter() - t0},
        },
    )
    print(f"wrote scene with {sum(len(f) for f in scene.frames)} detections to {out}")
    return EXIT_OK


def _build_graph_from_args(args, cfg, frames, parts, sidecars):
    models = _build_models(args, cfg, parts)
    seq = _sequence_config(args, cfg)
    if args.model == "tdbu":
        person_part = next((p for p in parts if p.name == seq.person_part), None)
        if person_part is None:
            raise ConfigError(
                f"part vocabulary lacks the person part {seq.person_part!r}"
            )
        roots = [d for dets in frames for d in dets if d.part.id == person_part.id]
        from .builder import build_tdbu

        return build_tdbu(
            frames,
            roots,
            sidecars.attachments,
            models,
            temporal_gate=seq.temporal_gate,
            sidecars=sidecars,
            paper_sign=args.paper_sign,
            unary=cfg.get("tdbu_unary", 0.0),
        )
    from .builder import SparsityPattern, build_bu

    pattern = None
    if args.model == "bu-sparse":
        pattern = SparsityPattern.kinematic_tree(parts)
    return build_bu(
        frames,
        models,
        pattern=pattern,
        temporal_gate=seq.temporal_gate,
        sidecars=sidecars,
        paper_sign=args.paper_sign,
    )


def _cmd_build_graph(args):
    cfg = _load_run_config(args.config)
    t0 = time.perf_counter()
    frames, parts = formats.parse_detections(args.detections)
    sidecars = _load_sidecars(args, frames)
    t_parse = time.perf_counter() - t0
    t0 = time.perf_counter()
    graph = _build_graph_from_args(args, cfg, frames, parts, sidecars)
    t_build = time.perf_counter() - t0
    formats.write_graph(args.out, graph, parts)
    formats.write_summary(
        _summary_path(args.out),
        {
            "command": "build-graph",
            "model": args.model,
            "seed": args.seed,
            "nodes": len(graph),
            "edges": len(graph.edges),
            "must_cut": len(graph.must_cut),
            "timings": {"proposal_s": t_parse + t_build, "graph_s": 0.0,
                        "total_s": t_parse + t_build},
        },
    )
    print(f"wrote graph with {len(graph)} nodes, {len(graph.edges)} edges to {args.out}")
    return EXIT_OK


def _cmd_solve(args):
    cfg = _load_run_config(args.config)
    t0 = time.perf_counter()
    graph, _parts = formats.parse_graph(args.graph)
    t_parse = time.perf_counter() - t0
    params = SolverParams(
        max_exact_nodes=cfg.get("max_exact_nodes", 10),
        move_budget=cfg.get("move_budget", 200_000),
        seed=args.seed,
    )
    t0 = time.perf_counter()
    sol = solve_local_search(graph, params)
    t_solve = time.perf_counter() - t0
    violations = validate(graph, sol)
    if violations:
        raise RuntimeError(f"solver produced an infeasible solution: {violations[0].message}")
    obj = objective(graph, sol)
    formats.write_solution(args.out, sol, obj)
    formats.write_summary(
        _summary_path(args.out),
        {
            "command": "solve",
            "seed": args.seed,
            "objective": obj,
            "clusters": len(sol.clusters),
            "selected": len(sol.selected),
            "timings": {"proposal_s": t_parse, "graph_s": t_solve,
                        "total_s": t_parse + t_solve},
        },
    )
    print(f"objective {obj} with {len(sol.clusters)} clusters -> {args.out}")
    return EXIT_OK


def _cmd_oracle_check(args):
    cfg = _load_run_config(args.config)
    graph, _parts = formats.parse_graph(args.graph)
    params = SolverParams(
        max_exact_nodes=cfg.get("max_exact_nodes", 10),
        move_budget=cfg.get("move_budget", 200_000),
        seed=args.seed,
    )
    t0 = time.perf_counter()
    result = oracle_gap(graph, params)
    elapsed = time.perf_counter() - t0
    out = {
        "command": "oracle-check",
        "seed": args.seed,
        **result,
        "timings": {"total_s": elapsed},
    }
    target = args.out or str(Path(args.graph).with_suffix(".oracle.summary.json"))
    formats.write_summary(target, out)
    print(
        f"exact {result['objective_exact']} local {result['objective_local']} "
        f"gap {result['gap']}"
    )
    return EXIT_OK


def _cmd_track(args):
    cfg = _load_run_config(args.config)
    t0 = time.perf_counter()
    frames, parts = formats.parse_detections(args.detections)
    sidecars = _load_sidecars(args, frames)
    models = _build_models(args, cfg, parts)
    seq = _sequence_config(args, cfg)
    t_parse = time.perf_counter() - t0

    t0 = time.perf_counter()
    filtered = filter_by_score(frames, seq.threshold)
    heads = seed_head_tracks(filtered, models, seq, sidecars)
    stats = {}
    tracks = track_full(filtered, heads, seq, models, sidecars, stats=stats)
    t_solve = time.perf_counter() - t0

    formats.write_tracks(args.out, tracks, parts)
    formats.write_summary(
        _summary_path(args.out),
        {
            "command": "track",
            "model": args.model,
            "seed": args.seed,
            "features": args.features,
            "persons": len(tracks),
            "head_tracks": len(heads),
            "detections": sum(len(f) for f in frames),
            "objective": stats.get("objective", 0.0),
            "windows": stats.get("windows", 0),
            "timings": {"proposal_s": t_parse, "graph_s": t_solve,
                        "total_s": t_parse + t_solve},
        },
    )
    print(f"tracked {len(tracks)} persons -> {args.out}")
    return EXIT_OK


def _cmd_eval_ap(args):
    cfg = _load_run_config(args.config)
    t0 = time.perf_counter()
    tracks, _parts = formats.parse_tracks(args.tracks)
    gt = formats.parse_groundtruth(args.gt)
    report = ap_per_part(tracks, gt, alpha=cfg.get("pckh_alpha", args.alpha))
    elapsed = time.perf_counter() - t0

    lines = ["#format ap-report v1", "part gt ap"]
    for pid in sorted(report.per_part):
        val = report.per_part[pid]
        lines.append(
            f"{report.part_names[pid]} {report.gt_counts.get(pid, 0)} "
            f"{'nan' if val is None else repr(val)}"
        )
    lines.append(f"mean - {report.mean!r}")
    Path(args.out).write_text("\n".join(lines) + "\n")

    figure = None
    if not args.no_figures:
        from .report import render_ap_figure

        figure_path = Path(args.out).with_suffix(".png")
        render_ap_figure(report, figure_path)
        figure = figure_path.name
    formats.write_summary(
        _summary_path(args.out),
        {
            "command": "eval-ap",
            "mean_ap": report.mean,
            "per_part": {report.part_names[p]: report.per_part[p] for p in report.per_part},
            "figure": figure,
            "timings": {"total_s": elapsed},
        },
    )
    print(f"mean AP {report.mean:.4f} -> {args.out}")
    return EXIT_OK


def _cmd_eval_mota(args):
    cfg = _load_run_config(args.config)
    t0 = time.perf_counter()
    tracks, _parts = formats.parse_tracks(args.tracks)
    gt = formats.parse_groundtruth(args.gt)
    report = mota(tracks, gt, alpha=cfg.get("pckh_alpha", args.alpha), hungarian=args.hungarian)
    elapsed = time.perf_counter() - t0

    lines = ["#format mota-report v1", "part gt fn fp idsw mota"]
    for pid in sorted(report.rows):
        row = report.rows[pid]
        lines.append(
            f"{row.part} {row.gt} {row.fn} {row.fp} {row.idsw} {row.mota!r}"
        )
    avg = report.average
    lines.append(
        f"average {avg.gt} {avg.fn} {avg.fp} {avg.idsw} {report.mean_mota!r}"
    )
    Path(args.out).write_text("\n".join(lines) + "\n")

    figure = None
    if not args.no_figures:
        from .report import render_mota_figure

        figure_path = Path(args.out).with_suffix(".png")
        render_mota_figure(report, figure_path)
        figure = figure_path.name
    formats.write_summary(
        _summary_path(args.out),
        {
            "command": "eval-mota",
            "mean_mota": report.mean_mota,
            "counts": {"fn": avg.fn, "fp": avg.fp, "idsw": avg.idsw, "gt": avg.gt},
            "hungarian": args.hungarian,
            "figure": figure,
            "timings": {"total_s": elapsed},
        },
    )
    print(f"mean MOTA {report.mean_mota:.4f} -> {args.out}")
    return EXIT_OK


def _cmd_train_pairwise(args):
    cfg = _load_run_config(args.config)
    t0 = time.perf_counter()
    frames, parts = formats.parse_detections(args.detections)
    gt = formats.parse_groundtruth(args.gt)
    sidecars = _load_sidecars(args, frames)
    models = _build_models(args, cfg, parts)
    if args.kind == "temporal":
        model = fit_temporal_model(
            frames, sidecars, gt, models,
            features=_features_tuple(args.features),
            l2=args.l2, steps=args.steps, lr=args.lr,
        )
        formats.write_model(args.out, model)
        extra = {"schema": model.schema}
    else:
        regressor, model = fit_cross_type(
            frames, gt, models, l2=args.l2, steps=args.steps, lr=args.lr
        )
        formats.write_model(args.out, model)
        regressor_path = str(Path(args.out).with_suffix(".regressor.txt"))
        formats.write_regressor(regressor_path, regressor, parts)
        extra = {"schema": model.schema, "regressor": regressor_path}
    formats.write_summary(
        _summary_path(args.out),
        {
            "command": "train-pairwise",
            "kind": args.kind,
            "seed": args.seed,
            **extra,
            "timings": {"total_s": time.perf_counter() - t0},
        },
    )
    print(f"trained {args.kind} model -> {args.out}")
    return EXIT_OK


def _cmd_export_overlay(args):
    t0 = time.perf_counter()
    tracks, parts = formats.parse_tracks(args.tracks)
    formats.write_overlay(args.out, tracks, parts)
    formats.write_summary(
        _summary_path(args.out),
        {
            "command": "export-overlay",
            "persons": len(tracks),
            "frames": tracks.n_frames,
            "timings": {"total_s": time.perf_counter() - t0},
        },
    )
    print(f"wrote overlay geometry -> {args.out}")
    return EXIT_OK


# -- argument wiring --------------------------------------------------------------


def _make_parser() -> _Parser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--model", choices=["bu-full", "bu-sparse", "tdbu"],
                        default="bu-sparse", help="graph model variant")
    shared.add_argument("--config", default=None, help="run configuration file")
    shared.add_argument("--seed", type=int, default=0, help="random seed")
    shared.add_argument("--features", default="l2,sift,dm",
                        help="temporal feature subset, comma-separated")
    shared.add_argument("--paper-sign", action="store_true",
                        help="use the literal log-odds cost orientation")
    shared.add_argument("--hungarian", action="store_true",
                        help="optimal assignment in MOTA matching")

    parser = _Parser(prog="limbtrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-generate", parents=[shared],
                       help="generate a synthetic scene with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--persons", type=int, default=3)
    p.add_argument("--frames", type=int, default=21)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--miss", type=float, default=0.0)
    p.add_argument("--clutter", type=float, default=0.0)
    p.add_argument("--head-size", type=float, default=16.0)
    p.add_argument("--spacing", type=float, default=120.0)
    p.add_argument("--amplitude", type=float, default=14.0)
    p.add_argument("--grid-step", type=float, default=16.0)
    p.set_defaults(func=_cmd_synth_generate)

    p = sub.add_parser("build-graph", parents=[shared],
                       help="build a problem graph from detections")
    p.add_argument("--detections", required=True)
    p.add_argument("--descriptors")
    p.add_argument("--correspondences")
    p.add_argument("--attachments")
    p.add_argument("--temporal-model")
    p.add_argument("--cross-model")
    p.add_argument("--cross-regressor")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_graph)

    p = sub.add_parser("solve", parents=[shared], help="solve a problem graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("oracle-check", parents=[shared],
                       help="compare local search against the exact oracle")
    p.add_argument("--graph", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_oracle_check)

    p = sub.add_parser("track", parents=[shared],
                       help="run end-to-end articulated tracking")
    p.add_argument("--detections", required=True)
    p.add_argument("--descriptors")
    p.add_argument("--correspondences")
    p.add_argument("--attachments")
    p.add_argument("--temporal-model")
    p.add_argument("--cross-model")
    p.add_argument("--cross-regressor")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("eval-ap", parents=[shared], help="pose AP against ground truth")
    p.add_argument("--tracks", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_eval_ap)

    p = sub.add_parser("eval-mota", parents=[shared],
                       help="per-joint tracking MOTA against ground truth")
    p.add_argument("--tracks", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_eval_mota)

    p = sub.add_parser("train-pairwise", parents=[shared],
                       help="train pairwise cost models on annotated data")
    p.add_argument("--detections", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--descriptors")
    p.add_argument("--correspondences")
    p.add_argument("--attachments")
    p.add_argument("--kind", choices=["temporal", "cross-type"], default="temporal")
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_pairwise)

    p = sub.add_parser("export-overlay", parents=[shared],
                       help="emit per-frame pose geometry records for plotting")
    p.add_argument("--tracks", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_overlay)

    return parser


def main(argv=None) -> int:
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, ConfigError, GraphStructureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InfeasibleConstraintsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SystemExit:
        raise
    except Exception as exc:  # single-line diagnostic, internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
