import json
from pathlib import Path

from kinonsim.cli import main

from .test_io import minimal_config


def write_config(tmp_path, name="config.json", **overrides):
    path = tmp_path / name
    path.write_text(json.dumps(minimal_config(**overrides)))
    return path


def tree_bytes(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


def test_run_produces_artifact_tree(tmp_path, capsys):
    config = write_config(tmp_path, schedule={"max_cycles": 25, "frame_stride": 10,
                                              "contour_stride": 10})
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["cycles"] == 25
    assert summary["max_drift"] <= 1e-9
    assert (out / "manifest.json").exists()
    assert (out / "series.csv").read_text().startswith("cycle,Ke,Kt,drift\n")
    frames = sorted(p.name for p in (out / "frames").iterdir())
    assert frames == ["cycle_000000.pgm", "cycle_000010.pgm", "cycle_000020.pgm",
                      "cycle_000025.pgm"]
    contours = sorted(p.name for p in (out / "contours").iterdir())
    assert contours == ["cycle_000000.json", "cycle_000010.json",
                        "cycle_000020.json", "cycle_000025.json"]
    assert (out / "overlay.png").exists()
    assert (out / "final.snap").exists()
    printed = json.loads(capsys.readouterr().out)
    assert printed == summary


def test_duplicate_runs_are_byte_identical(tmp_path):
    config = write_config(tmp_path, schedule={"max_cycles": 15, "frame_stride": 5})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(config), "--out", str(a)]) == 0
    assert main(["run", str(config), "--out", str(b)]) == 0
    assert tree_bytes(a) == tree_bytes(b)


def test_zero_cycle_schedule_initial_frame_only(tmp_path):
    config = write_config(tmp_path, schedule={"max_cycles": 0})
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out)]) == 0
    assert [p.name for p in (out / "frames").iterdir()] == ["cycle_000000.pgm"]
    assert (out / "series.csv").read_text() == "cycle,Ke,Kt,drift\n"


def test_run_flag_overrides(tmp_path):
    config = write_config(tmp_path, schedule={"max_cycles": 4000},
                          params={"kappa": 3.0, "lambda": 1.0, "theta": 0.3})
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out), "--until-stasis",
                 "--frames", "0", "--contours", "0"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["stasis_cycle"] is not None
    assert summary["cycles"] < 4000


def test_invalid_config_exits_one(tmp_path, capsys):
    config = write_config(tmp_path, params={"kappa": -1.0})
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out)]) == 1
    assert "params.kappa" in capsys.readouterr().err


def test_render_reproduces_final_frame(tmp_path):
    config = write_config(tmp_path, schedule={"max_cycles": 12, "frame_stride": 12})
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out)]) == 0
    rendered = tmp_path / "re.pgm"
    assert main(["render", str(out / "final.snap"), "--out", str(rendered)]) == 0
    assert rendered.read_bytes() == (out / "frames" / "cycle_000012.pgm").read_bytes()


def test_render_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.snap"
    bad.write_bytes(b"nope")
    assert main(["render", str(bad), "--out", str(tmp_path / "x.pgm")]) == 1


def test_analyze_classifies_series(tmp_path, capsys):
    config = write_config(tmp_path, schedule={"max_cycles": 3000,
                                              "stop_on_stasis": True},
                          params={"kappa": 3.0, "lambda": 1.0, "theta": 0.3})
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["analyze", str(out / "series.csv")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["classification"] == "stasis"
    assert report["stasis_cycle"] is not None


def test_analyze_all_zero_series(tmp_path, capsys):
    path = tmp_path / "series.csv"
    lines = ["cycle,Ke,Kt,drift"] + [f"{i},0.0,0.0,0.0" for i in range(25)]
    path.write_text("\n".join(lines) + "\n")
    assert main(["analyze", str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["classification"] == "stasis"
    assert report["stasis_cycle"] == 0


def test_analyze_constant_series_is_coherent(tmp_path, capsys):
    path = tmp_path / "series.csv"
    lines = ["cycle,Ke,Kt,drift"] + [f"{i},0.3,0.25,0.0" for i in range(25)]
    path.write_text("\n".join(lines) + "\n")
    assert main(["analyze", str(path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["classification"] == "coherent"


def test_analyze_malformed_series(tmp_path):
    path = tmp_path / "series.csv"
    path.write_text("bogus\n")
    assert main(["analyze", str(path)]) == 1


# -- sweep -------------------------------------------------------------------------

def write_plan(tmp_path, axes, **overrides):
    plan = {"base": minimal_config(**overrides), "axes": axes}
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan))
    return path


def test_sweep_runs_cartesian_product(tmp_path, capsys):
    plan = write_plan(
        tmp_path,
        axes=[{"path": "params.kappa", "values": [2.0, 3.0]},
              {"path": "params.eta", "values": [0.0, 0.1]}],
        schedule={"max_cycles": 8},
    )
    out = tmp_path / "sweep"
    assert main(["sweep", str(plan), "--out", str(out)]) == 0
    index = (out / "index.csv").read_text().strip().splitlines()
    assert index[0] == ("run,params.kappa,params.eta,status,cycles,stasis_cycle,"
                        "final_ke,support_area,components")
    assert len(index) == 5
    run_dirs = [p for p in out.iterdir() if p.is_dir()]
    assert len(run_dirs) == 4
    for d in run_dirs:
        assert (d / "summary.json").exists()


def test_sweep_empty_axes_rejected(tmp_path):
    plan = write_plan(tmp_path, axes=[])
    assert main(["sweep", str(plan), "--out", str(tmp_path / "s")]) == 1


def test_sweep_guard_limit(tmp_path):
    plan = write_plan(tmp_path, axes=[
        {"path": "params.kappa", "values": list(range(400))},
        {"path": "params.eta", "values": [i / 1000 for i in range(400)]},
    ])
    assert main(["sweep", str(plan), "--out", str(tmp_path / "s")]) == 1


def test_sweep_records_partial_failures(tmp_path):
    plan = write_plan(
        tmp_path,
        axes=[{"path": "params.lambda", "values": [0.5, 2.0]}],
        schedule={"max_cycles": 5},
    )
    out = tmp_path / "sweep"
    assert main(["sweep", str(plan), "--out", str(out)]) == 1
    rows = (out / "index.csv").read_text().strip().splitlines()[1:]
    statuses = sorted(row.split(",")[2] for row in rows)
    assert statuses == ["failed", "ok"]


def test_sweep_parallel_matches_serial(tmp_path):
    axes = [{"path": "params.kappa", "values": [2.0, 3.0, 4.0]}]
    plan = write_plan(tmp_path, axes=axes, schedule={"max_cycles": 6})
    serial, parallel = tmp_path / "serial", tmp_path / "parallel"
    assert main(["sweep", str(plan), "--out", str(serial)]) == 0
    assert main(["sweep", str(plan), "--out", str(parallel), "--parallel", "3"]) == 0
    assert tree_bytes(serial) == tree_bytes(parallel)
