"""Command-line pipeline: detect, build-dataset, fit, evaluate, synthesize,
pipeline.

Every numeric assumption comes from the resolved configuration: defaults,
overridden by a JSON config file (--config), overridden by explicit flags.
Exit codes: 0 on success, 2 for input errors, 3 for fit failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import figures, io, report
from .config import PipelineConfig
from .conflict import ConflictInstant, detect_conflict_instants, group_conflicts
from .errors import DegenerateFit, InvalidInput, NotConverged, PipelineError
from .evaluation import confusion, misclassification_rate, split, timeline
from .labeling import CLASS_ORDER, ReactionLabel, classify, label_conflict_instants
from .mnl import (
    DEFAULT_PREDICTORS,
    ModelSpec,
    backward_select,
    fit,
    goodness_of_fit,
    load_model,
    save_model,
)
from .predictors import PREDICTOR_COLUMNS, build_predictor_table, vector_from_columns
from .synthesize import demo_scene, synthesize_scene
from .trajectory import UserKind

log = logging.getLogger("pvconflict")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FIT = 3

_CONFIG_FLAGS = {
    "step": float,
    "horizon": float,
    "n_history": int,
    "conflict_threshold": float,
    "reaction_delay_steps": int,
    "k_threshold": float,
    "subgrid": float,
    "group_max_gap": int,
    "car_ahead_mode": str,
    "car_ahead_range": float,
    "car_ahead_lateral_tol": float,
    "prediction_smoothing": float,
    "labeling_smoothing": float,
    "train_frac": float,
    "split_seed": int,
    "mle_tol": float,
    "mle_max_iter": int,
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    group = parser.add_argument_group("config overrides (flags beat the config file)")
    for name, typ in _CONFIG_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        group.add_argument(flag, type=typ, default=None, dest=f"cfg_{name}")


def _resolve_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    overrides = {
        name: getattr(args, f"cfg_{name}")
        for name in _CONFIG_FLAGS
        if getattr(args, f"cfg_{name}", None) is not None
    }
    return cfg.replace(**overrides) if overrides else cfg


def _detection_kwargs(cfg: PipelineConfig) -> dict:
    return dict(
        n_history=cfg.n_history,
        smoothing=cfg.prediction_smoothing,
        subgrid=cfg.subgrid,
    )


def cmd_detect(args) -> int:
    cfg = _resolve_config(args)
    trajs = io.read_trajectories(args.trajectories, expected_step=cfg.step)
    stats: dict = {}
    cis = detect_conflict_instants(
        trajs, cfg.conflict_threshold, cfg.horizon, stats=stats, **_detection_kwargs(cfg)
    )
    io.write_conflict_instants(args.out, cis)
    situations = group_conflicts(cis, cfg.group_max_gap)
    print(
        f"{len(cis)} conflict instants in {len(situations)} situations "
        f"({stats['pairs_evaluated']} pair evaluations, "
        f"{stats['pairs_skipped_history']} skipped for missing history) -> {args.out}"
    )
    return EXIT_OK


def cmd_build_dataset(args) -> int:
    cfg = _resolve_config(args)
    trajs = io.read_trajectories(args.trajectories, expected_step=cfg.step)
    cis = io.read_conflict_instants(args.conflicts)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    table = build_predictor_table(cis, trajs, cfg)
    vectors = {ci.key: vec for ci, vec in table}
    labels, drops = label_conflict_instants(cis, trajs, cfg)

    for kind in (UserKind.PEDESTRIAN, UserKind.VEHICLE):
        rows = [
            (lab.ci, vectors[lab.ci.key], lab)
            for lab in labels
            if lab.user_kind is kind
        ]
        path = outdir / f"dataset_{_kind_name(kind)}.csv"
        io.write_dataset(path, rows)
        print(f"{len(rows)} {_kind_name(kind)} rows -> {path}")
        if not args.no_figures:
            fig_path = outdir / f"k_hist_{_kind_name(kind)}.png"
            figures.save_k_histogram(
                fig_path, [lab.k for lab in labels if lab.user_kind is kind],
                cfg.k_threshold, _kind_name(kind),
            )
    dropped = sum(drops.values())
    print(
        f"dropped {dropped} instant-user rows "
        f"(window: {drops['subject_window']}, other path: {drops['other_path']}, "
        f"no crossing: {drops['no_crossing']})"
    )
    return EXIT_OK


def _kind_name(kind: UserKind) -> str:
    return "pedestrian" if kind is UserKind.PEDESTRIAN else "vehicle"


def _parse_predictors(arg: str | None, kind: UserKind) -> tuple[str, ...]:
    if arg is None:
        return DEFAULT_PREDICTORS[kind]
    names = tuple(n.strip() for n in arg.split(",") if n.strip())
    unknown = [n for n in names if n not in PREDICTOR_COLUMNS]
    if unknown:
        raise InvalidInput(f"unknown predictor(s): {', '.join(unknown)}")
    return names


def cmd_fit(args) -> int:
    cfg = _resolve_config(args)
    data = io.read_dataset(args.dataset)
    spec = ModelSpec(data.user_kind, _parse_predictors(args.predictors, data.user_kind))
    if args.backward_select:
        spec = backward_select(
            data, spec, args.select_criterion, tol=cfg.mle_tol, max_iter=cfg.mle_max_iter
        )
        print(f"backward selection kept: {', '.join(spec.predictor_names)}")
    model = fit(data, spec, cfg.mle_tol, cfg.mle_max_iter)
    save_model(model, args.out)
    chi2, df, _ = goodness_of_fit(model)
    print(
        f"fitted {_kind_name(data.user_kind)} model on {model.n_obs} rows: "
        f"deviance {model.deviance:.2f}, chi2 {chi2:.2f} (df {df}) -> {args.out}"
    )
    report_path = args.report or Path(args.out).with_suffix(".report.txt")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report.format_fit_report(model, cfg))
    print(f"report -> {report_path}")
    if not args.no_figures:
        fig_path = Path(args.out).with_suffix(".coefficients.png")
        figures.save_coefficient_figure(fig_path, model)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _resolve_config(args)
    model = load_model(args.model)
    data = io.read_dataset(args.dataset)
    if data.user_kind is not model.spec.user_kind:
        raise InvalidInput(
            f"model is for {model.spec.user_kind.value!r} rows but the dataset "
            f"holds {data.user_kind.value!r} rows"
        )
    if args.use_test_split:
        _, data = split(data, cfg.train_frac, cfg.split_seed)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _evaluate_into(model, data, cfg, outdir, args.timeline_figures, not args.no_figures)
    return EXIT_OK


def _evaluate_into(model, data, cfg, outdir: Path, n_timeline_figures: int,
                   render: bool) -> float:
    kind = _kind_name(model.spec.user_kind)
    cm = confusion(model, data)
    io.write_confusion(outdir / f"confusion_{kind}.csv", cm)
    rate = misclassification_rate(cm)
    with open(outdir / f"evaluation_{kind}.txt", "w", encoding="utf-8") as fh:
        fh.write(report.format_confusion_report(cm, kind))
    with open(outdir / f"metrics_{kind}.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "user_kind": model.spec.user_kind.value,
                "n_rows": len(data),
                "misclassification_rate": rate,
                "diagonal_fraction": cm.diagonal_fraction,
            },
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")

    timelines = _build_timelines(model, data, cfg)
    io.write_timelines_csv(outdir / f"timelines_{kind}.csv", timelines, cfg.step)
    io.write_timelines_json(outdir / f"timelines_{kind}.json", timelines, cfg.step)
    if render:
        figures.save_confusion_figure(outdir / f"confusion_{kind}.png", cm, kind)
        by_length = sorted(timelines, key=lambda tl: (-len(tl.steps), tl.ped_id, tl.veh_id))
        for tl in by_length[:n_timeline_figures]:
            figures.save_timeline_figure(
                outdir / f"timeline_{kind}_{tl.ped_id}_{tl.veh_id}.png", tl, cfg.step, kind
            )
    print(
        f"{kind}: {len(data)} rows, misclassification rate {rate:.3f}, "
        f"{len(timelines)} timelines -> {outdir}"
    )
    return rate


def _build_timelines(model, data, cfg):
    """Reconstruct situations from dataset rows and predict their timelines."""
    cis, vectors, labels = [], {}, {}
    names = data.predictor_names
    for row in range(len(data)):
        ts, ped_id, veh_id = data.keys[row]
        values = dict(zip(names, data.X[row]))
        ci = ConflictInstant(
            ts=ts, ped_id=ped_id, veh_id=veh_id,
            min_dist=values["MinDist"], time_min_dist=values["TimeMinDist"],
        )
        cis.append(ci)
        vectors[ci.key] = vector_from_columns(names, data.X[row])
        k = float(data.k_values[row]) if data.k_values is not None else float("nan")
        labels[ci.key] = ReactionLabel(
            ci=ci, user_kind=model.spec.user_kind, k=k,
            reaction=classify(k, cfg.k_threshold) if np.isfinite(k)
            else CLASS_ORDER[int(data.y[row])],
        )
    situations = group_conflicts(cis, cfg.group_max_gap)
    return [timeline(model, sit, vectors, labels) for sit in situations]


def cmd_synthesize(args) -> int:
    cfg = _resolve_config(args)
    scenario = _load_scenario(args, cfg)
    trajs = synthesize_scene(scenario, step=cfg.step)
    io.write_trajectories(args.out, trajs)
    print(f"{len(trajs)} agents -> {args.out}")
    return EXIT_OK


def _load_scenario(args, cfg: PipelineConfig) -> dict:
    if args.scenario is not None:
        try:
            with open(args.scenario, "r", encoding="utf-8") as fh:
                return json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"cannot read scenario {args.scenario}: {exc}") from exc
    return demo_scene(seed=args.seed, noise_std=args.noise, n_cells=args.cells)


def cmd_pipeline(args) -> int:
    cfg = _resolve_config(args)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg.save(outdir / "resolved_config.json")

    if args.trajectories is not None:
        trajs = io.read_trajectories(args.trajectories, expected_step=cfg.step)
    else:
        trajs = synthesize_scene(_load_scenario(args, cfg), step=cfg.step)
        io.write_trajectories(outdir / "trajectories.csv", trajs)

    stats: dict = {}
    cis = detect_conflict_instants(
        trajs, cfg.conflict_threshold, cfg.horizon, stats=stats, **_detection_kwargs(cfg)
    )
    io.write_conflict_instants(outdir / "conflict_instants.csv", cis)
    situations = group_conflicts(cis, cfg.group_max_gap)
    print(f"{len(cis)} conflict instants in {len(situations)} situations")

    table = build_predictor_table(cis, trajs, cfg)
    vectors = {ci.key: vec for ci, vec in table}
    labels, drops = label_conflict_instants(cis, trajs, cfg)

    summary = {
        "n_users": len(trajs),
        "n_conflict_instants": len(cis),
        "n_situations": len(situations),
        "label_drops": drops,
        "detection": stats,
        "models": {},
    }
    render = not args.no_figures
    for kind in (UserKind.PEDESTRIAN, UserKind.VEHICLE):
        kind_name = _kind_name(kind)
        rows = [(lab.ci, vectors[lab.ci.key], lab) for lab in labels if lab.user_kind is kind]
        ds_path = outdir / f"dataset_{kind_name}.csv"
        io.write_dataset(ds_path, rows)
        if render:
            figures.save_k_histogram(
                outdir / f"k_hist_{kind_name}.png",
                [lab.k for lab in labels if lab.user_kind is kind],
                cfg.k_threshold, kind_name,
            )
        if not rows:
            print(f"{kind_name}: no labeled rows, skipping model")
            summary["models"][kind_name] = None
            continue
        data = io.read_dataset(ds_path)
        train, test = split(data, cfg.train_frac, cfg.split_seed)
        spec = ModelSpec(kind, _parse_predictors(args.predictors, kind))
        model = fit(train, spec, cfg.mle_tol, cfg.mle_max_iter)
        save_model(model, outdir / f"model_{kind_name}.json")
        with open(outdir / f"report_{kind_name}.txt", "w", encoding="utf-8") as fh:
            fh.write(report.format_fit_report(model, cfg))
        if render:
            figures.save_coefficient_figure(outdir / f"coefficients_{kind_name}.png", model)
        rate = _evaluate_into(model, test, cfg, outdir, args.timeline_figures, render)
        chi2, df, _ = goodness_of_fit(model)
        summary["models"][kind_name] = {
            "n_train": len(train),
            "n_test": len(test),
            "deviance": model.deviance,
            "null_deviance": model.null_deviance,
            "chi2": chi2,
            "df": df,
            "misclassification_rate": rate,
        }
    with open(outdir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"pipeline artifacts -> {outdir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pvconflict",
        description=(
            "Detect pedestrian-vehicle conflicts in tracked trajectories, "
            "extract predictors, label evasive actions and calibrate the "
            "reaction-choice model."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="scan trajectories for conflict instants")
    p.add_argument("--trajectories", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("build-dataset", help="predictors + reaction labels per instant")
    p.add_argument("--trajectories", type=Path, required=True)
    p.add_argument("--conflicts", type=Path, required=True)
    p.add_argument("--outdir", type=Path, required=True)
    p.add_argument("--no-figures", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("fit", help="estimate the reaction-choice model")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="model JSON path")
    p.add_argument("--report", type=Path, default=None)
    p.add_argument("--predictors", type=str, default=None,
                   help="comma-separated predictor columns (default: full set)")
    p.add_argument("--backward-select", action="store_true")
    p.add_argument("--select-criterion", type=float, default=0.985)
    p.add_argument("--no-figures", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="confusion matrix, rates and timelines")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--outdir", type=Path, required=True)
    p.add_argument("--use-test-split", action="store_true",
                   help="evaluate on the seeded test share of the dataset")
    p.add_argument("--timeline-figures", type=int, default=3)
    p.add_argument("--no-figures", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synthesize", help="generate a scripted trajectory scene")
    p.add_argument("--scenario", type=Path, default=None, help="scenario JSON")
    p.add_argument("--demo", action="store_true", help="built-in mixed demo scene")
    p.add_argument("--cells", type=int, default=7, help="demo scene corridor cells (7 = 20 agents)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("pipeline", help="run every stage end to end")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trajectories", type=Path, default=None)
    src.add_argument("--scenario", type=Path, default=None)
    src.add_argument("--demo", action="store_true")
    p.add_argument("--cells", type=int, default=7, help="demo scene corridor cells (7 = 20 agents)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--predictors", type=str, default=None)
    p.add_argument("--timeline-figures", type=int, default=3)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--outdir", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synthesize" and args.scenario is None and not args.demo:
        parser.error("synthesize needs --scenario or --demo")
    try:
        return args.func(args)
    except (DegenerateFit, NotConverged) as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        if isinstance(exc, DegenerateFit) and exc.columns:
            print(f"offending columns: {', '.join(exc.columns)}", file=sys.stderr)
        return EXIT_FIT
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
