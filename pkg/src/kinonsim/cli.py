"""Batch command line: run a config, sweep parameters, render snapshots,
analyze series.

Artifact trees are a pure function of (config, engine version): canonical
config and manifest JSON, PGM/PNG frames at the frame stride, contour JSON
at the contour stride, an overlay PNG of successive contour rings over the
final frame, the series CSV, a final-state snapshot and a summary.  Exit
codes: 0 success, 1 validation failure, 2 runtime audit failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .analysis import detect_stasis, shape_metrics
from .io import (
    ConfigError,
    StateSnapshot,
    config_to_data,
    encode_pgm,
    encode_png,
    frame_pixels,
    isolines_to_data,
    overlay_contours,
    parse_config_data,
    render_frame,
    series_from_csv,
    series_to_csv,
)
from .run import AuditError, SimulationRun, config_digest

SWEEP_LIMIT = 100_000


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _frame_name(cycle: int, image_format: str) -> str:
    return f"cycle_{cycle:06d}.{image_format}"


def _frame_cycles(total: int, stride: int) -> set[int]:
    cycles = {0, total}
    if stride > 0:
        cycles.update(range(0, total + 1, stride))
    return cycles


def execute_run(config, out_dir: Path, workers: int = 1) -> dict:
    """Run one config into an artifact directory; returns the summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "frames").mkdir(exist_ok=True)
    (out_dir / "contours").mkdir(exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(config_to_data(config), indent=2, sort_keys=True) + "\n")

    run = SimulationRun(config, workers=workers)
    _write_json(out_dir / "manifest.json", run.manifest())
    sched = config.schedule
    frame_cycles = _frame_cycles(sched.max_cycles, sched.frame_stride)
    fmt = config.render.image_format
    contour_sets = []

    def emit(r: SimulationRun) -> None:
        if r.cycle in frame_cycles:
            data = render_frame(r.field_snapshot(), config.render.scale, fmt,
                                config.render.upscale)
            (out_dir / "frames" / _frame_name(r.cycle, fmt)).write_bytes(data)
        if sched.contour_stride > 0 and r.cycle % sched.contour_stride == 0:
            isolines = r.contours()
            contour_sets.append(isolines)
            _write_json(out_dir / "contours" / f"cycle_{r.cycle:06d}.json",
                        isolines_to_data(isolines))

    emit(run)
    run.run_schedule(on_cycle=emit)

    # final frame and contours regardless of stride alignment
    if run.cycle not in frame_cycles:
        data = render_frame(run.field_snapshot(), config.render.scale, fmt,
                            config.render.upscale)
        (out_dir / "frames" / _frame_name(run.cycle, fmt)).write_bytes(data)
    if not contour_sets or contour_sets[-1].cycle != run.cycle:
        isolines = run.contours()
        contour_sets.append(isolines)
        _write_json(out_dir / "contours" / f"cycle_{run.cycle:06d}.json",
                    isolines_to_data(isolines))

    (out_dir / "series.csv").write_text(series_to_csv(run.series))
    base = frame_pixels(run.field_snapshot().values, run.network.width,
                        run.network.height, config.render.scale)
    (out_dir / "overlay.png").write_bytes(
        overlay_contours(contour_sets, base, config.render.upscale))
    (out_dir / "final.snap").write_bytes(run.snapshot().to_bytes())

    report = detect_stasis(run.series)
    metrics = shape_metrics(run.field_snapshot(), run.contour_level)
    last = run.series.records[-1] if run.series.records else None
    summary = {
        "cycles": run.cycle,
        "classification": report.kind,
        "stasis_cycle": run.stasis_cycle,
        "max_drift": run.max_drift,
        "final_ke": last.ke if last else 0.0,
        "final_kt": last.kt if last else 0.0,
        "level": run.contour_level,
        "support_area": metrics.support_area,
        "components": metrics.components,
        "asymmetry": metrics.asymmetry,
        "marks": dict(sorted(run.series.marks.items())),
        "config_sha256": config_digest(config),
    }
    _write_json(out_dir / "summary.json", summary)
    return summary


def _load_config_file(path: str, overrides):
    data = json.loads(Path(path).read_text())
    config = parse_config_data(data)
    return _apply_overrides(config, overrides)


def _apply_overrides(config, overrides):
    sched = config.schedule
    if overrides.get("until_stasis"):
        sched = dataclasses.replace(sched, stop_on_stasis=True)
    if overrides.get("frames") is not None:
        sched = dataclasses.replace(sched, frame_stride=overrides["frames"])
    if overrides.get("contours") is not None:
        sched = dataclasses.replace(sched, contour_stride=overrides["contours"])
    return dataclasses.replace(config, schedule=sched)


def cmd_run(args) -> int:
    try:
        config = _load_config_file(args.config, {
            "until_stasis": args.until_stasis,
            "frames": args.frames,
            "contours": args.contours,
        })
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        summary = execute_run(config, Path(args.out), workers=args.workers)
    except AuditError as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


# -- sweep -------------------------------------------------------------------


def _set_by_path(data: dict, path: str, value) -> None:
    keys = path.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError([(path, "path does not address an object")])
    node[keys[-1]] = value


def _combo_name(index: int, assignment) -> str:
    parts = [f"{path.split('.')[-1]}={value!r}".replace("'", "")
             for path, value in assignment]
    return f"run{index:05d}_" + "_".join(parts)


def _sweep_combo(payload) -> dict:
    base_data, assignment, out_dir, workers, index = payload
    data = json.loads(json.dumps(base_data))
    for path, value in assignment:
        _set_by_path(data, path, value)
    name = _combo_name(index, assignment)
    row = {"run": name}
    row.update({path: value for path, value in assignment})
    try:
        config = parse_config_data(data)
        summary = execute_run(config, Path(out_dir) / name, workers=workers)
    except (ConfigError, AuditError) as exc:
        row.update({"status": "failed", "error": str(exc)})
        return row
    row.update({
        "status": "ok",
        "cycles": summary["cycles"],
        "stasis_cycle": summary["stasis_cycle"],
        "final_ke": summary["final_ke"],
        "support_area": summary["support_area"],
        "components": summary["components"],
    })
    return row


def cmd_sweep(args) -> int:
    try:
        plan = json.loads(Path(args.plan).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not isinstance(plan, dict) or "base" not in plan or "axes" not in plan:
        print("error: plan must be an object with 'base' and 'axes'", file=sys.stderr)
        return 1
    axes = plan["axes"]
    if not isinstance(axes, list) or not axes:
        print("error: axes must be a non-empty list", file=sys.stderr)
        return 1
    for axis in axes:
        if not isinstance(axis, dict) or "path" not in axis or not axis.get("values"):
            print("error: each axis needs a 'path' and non-empty 'values'",
                  file=sys.stderr)
            return 1
    total = 1
    for axis in axes:
        total *= len(axis["values"])
    if total > SWEEP_LIMIT:
        print(f"error: sweep of {total} runs exceeds the {SWEEP_LIMIT} run guard",
              file=sys.stderr)
        return 1
    try:
        parse_config_data(plan["base"])
    except ConfigError as exc:
        print(f"error: base config invalid: {exc}", file=sys.stderr)
        return 1

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    combos = list(itertools.product(*[
        [(axis["path"], value) for value in axis["values"]] for axis in axes
    ]))
    payloads = [(plan["base"], assignment, str(out_dir), args.workers, idx)
                for idx, assignment in enumerate(combos)]
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            rows = list(pool.map(_sweep_combo, payloads))
    else:
        rows = [_sweep_combo(p) for p in payloads]

    axis_paths = [axis["path"] for axis in axes]
    columns = ["run", *axis_paths, "status", "cycles", "stasis_cycle",
               "final_ke", "support_area", "components"]
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_csv_cell(row.get(col)) for col in columns))
    (out_dir / "index.csv").write_text("\n".join(lines) + "\n")
    failures = [row for row in rows if row.get("status") != "ok"]
    print(f"{len(rows) - len(failures)}/{len(rows)} runs succeeded")
    return 1 if failures else 0


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


# -- render / analyze ---------------------------------------------------------


def cmd_render(args) -> int:
    try:
        snap = StateSnapshot.from_bytes(Path(args.snapshot).read_bytes())
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    values = snap.field_values("storage" if args.storage_only else "total")
    pixels = frame_pixels(values, snap.width, snap.height, args.scale, args.upscale)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(encode_png(pixels) if args.format == "png" else encode_pgm(pixels))
    print(f"wrote {out}")
    return 0


def cmd_analyze(args) -> int:
    try:
        series = series_from_csv(Path(args.series).read_text())
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report = detect_stasis(series, tolerance=args.tolerance, window=args.window)
    last = series.records[-1] if series.records else None
    print(json.dumps({
        "records": len(series.records),
        "classification": report.kind,
        "stasis_cycle": report.cycle,
        "final_ke": last.ke if last else 0.0,
        "final_kt": last.kt if last else 0.0,
        "max_drift": max((r.drift for r in series.records), default=0.0),
    }, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinonsim",
        description="Deterministic kinetic-automaton network simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration")
    p_run.add_argument("config", help="path to a run config JSON")
    p_run.add_argument("--out", required=True, help="artifact directory")
    p_run.add_argument("--until-stasis", action="store_true",
                       help="stop as soon as stasis is detected")
    p_run.add_argument("--frames", type=int, default=None, metavar="N",
                       help="frame stride override")
    p_run.add_argument("--contours", type=int, default=None, metavar="N",
                       help="contour stride override")
    p_run.add_argument("--workers", type=int, default=1,
                       help="within-cycle worker stripes (results identical)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep plan")
    p_sweep.add_argument("plan", help="path to a sweep plan JSON")
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--parallel", type=int, default=1, metavar="K",
                         help="concurrent runs")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_render = sub.add_parser("render", help="re-render a stored state snapshot")
    p_render.add_argument("snapshot", help="path to a .snap state file")
    p_render.add_argument("--out", required=True, help="output image path")
    p_render.add_argument("--scale", type=float, default=1.0)
    p_render.add_argument("--upscale", type=int, default=1)
    p_render.add_argument("--format", choices=("pgm", "png"), default="pgm")
    p_render.add_argument("--storage-only", action="store_true",
                          help="render storage instead of total local mass")
    p_render.set_defaults(func=cmd_render)

    p_an = sub.add_parser("analyze", help="classify a series CSV")
    p_an.add_argument("series", help="path to series.csv")
    p_an.add_argument("--tolerance", type=float, default=1e-9)
    p_an.add_argument("--window", type=int, default=20)
    p_an.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
