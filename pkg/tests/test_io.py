import io as stdio
import json

import numpy as np
import pytest
from PIL import Image

from kinonsim.analysis import MacroRecord, MacroSeries
from kinonsim.core import ModelParams, PsiSpec
from kinonsim.io import (
    ConfigError,
    StateSnapshot,
    apply_param_update,
    config_to_data,
    decode_pgm,
    encode_pgm,
    extract_isolines,
    frame_pixels,
    isolines_from_data,
    isolines_to_data,
    overlay_contours,
    parse_config,
    parse_config_data,
    render_frame,
    serialize_config,
    series_from_csv,
    series_to_csv,
)
from kinonsim.network import FieldSnapshot, build_grid, init_singularity

from .oracles import edge_crossings_reference


def minimal_config(**overrides):
    data = {
        "topology": {"degree_class": 4, "width": 8, "height": 8},
        "omega": 32.0,
        "params": {"kappa": 3.0},
        "schedule": {"max_cycles": 10},
    }
    data.update(overrides)
    return data


# -- config ---------------------------------------------------------------------

def test_minimal_config_defaults():
    config = parse_config_data(minimal_config())
    assert config.topology.boundary == "periodic"
    assert config.seed == (3, 3)
    assert config.params == ModelParams(kappa=3.0)
    assert config.schedule.contour_stride == 20
    assert config.render.image_format == "pgm"
    assert config.param_changes == ()


def test_bounded_growth_regime_round_trips():
    data = minimal_config(
        topology={"degree_class": 4, "width": 65, "height": 65, "boundary": "bordered"},
        omega=2112.5,
        params={"kappa": 6.0, "lambda": 0.8, "theta": 0.4, "eta": 0.5},
    )
    config = parse_config_data(data)
    assert config.params == ModelParams(kappa=6.0, lam=0.8, eta=0.5, theta=0.4)
    text = serialize_config(config)
    assert parse_config(text) == config
    # canonical serialization is stable
    assert serialize_config(parse_config(text)) == text


def test_config_round_trip_with_changes_and_psi():
    data = minimal_config(
        params={"kappa": 3.0, "psi": {"kind": "power", "gamma": 1.5}},
        param_changes=[{"at_cycle": 5, "set": {"kappa": 4.0, "lambda": 1.0}}],
        render={"scale": 2.0, "image_format": "png", "quantity": "storage",
                "upscale": 3},
        seed=[1, 2],
    )
    config = parse_config_data(data)
    assert config.params.psi == PsiSpec("power", gamma=1.5)
    assert parse_config(serialize_config(config)) == config


def test_unknown_fields_rejected_with_path():
    with pytest.raises(ConfigError) as err:
        parse_config_data(minimal_config(extra=1))
    assert ("extra", "unknown field") in err.value.problems
    with pytest.raises(ConfigError) as err:
        parse_config_data(minimal_config(
            topology={"degree_class": 4, "width": 8, "height": 8, "wrap": True}))
    assert any(p == "topology.wrap" for p, _ in err.value.problems)


def test_out_of_range_values_rejected_with_field_path():
    with pytest.raises(ConfigError) as err:
        parse_config_data(minimal_config(params={"kappa": 3.0, "lambda": 1.5}))
    assert any(p == "params.lambda" for p, _ in err.value.problems)
    with pytest.raises(ConfigError) as err:
        parse_config_data(minimal_config(params={"kappa": -0.5}))
    assert any(p == "params.kappa" for p, _ in err.value.problems)
    with pytest.raises(ConfigError) as err:
        parse_config_data(minimal_config(omega=-3))
    assert any(p == "omega" for p, _ in err.value.problems)


def test_theta_equal_to_omega_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config_data(minimal_config(params={"kappa": 3.0, "theta": 32.0}))
    assert any(p == "params.theta" for p, _ in err.value.problems)
    # just inside the bound is accepted
    parse_config_data(minimal_config(params={"kappa": 3.0, "theta": 0.32}))


def test_seed_validation():
    with pytest.raises(ConfigError):
        parse_config_data(minimal_config(seed=[8, 0]))
    with pytest.raises(ConfigError):
        parse_config_data(minimal_config(seed="corner"))
    config = parse_config_data(minimal_config(
        topology={"degree_class": 2, "width": 9}, seed=[4]))
    assert config.seed == (4, 0)
    assert config.topology.height == 1


def test_apply_param_update():
    params = ModelParams(kappa=3.0)
    updated = apply_param_update(params, {"kappa": 4.0, "eta": 0.25}, 100.0)
    assert updated == ModelParams(kappa=4.0, eta=0.25)
    with pytest.raises(ConfigError) as err:
        apply_param_update(params, {"theta": 50.0}, 100.0)
    assert any(p == "params.theta" for p, _ in err.value.problems)
    with pytest.raises(ConfigError):
        apply_param_update(params, {"speed": 1.0}, 100.0)


# -- frames ------------------------------------------------------------------------

def test_uniform_half_field_is_mid_grey():
    pixels = frame_pixels(np.full(16, 0.5), 4, 4, scale=1.0)
    assert (pixels == 128).all()


def test_zero_field_is_black_and_saturation_white():
    assert (frame_pixels(np.zeros(9), 3, 3) == 0).all()
    assert (frame_pixels(np.full(9, 7.3), 3, 3) == 255).all()


def test_singularity_frame_single_white_pixel():
    net = build_grid(4, 5, 5)
    state = init_singularity(net, 12.5, "center")
    snap = FieldSnapshot(net, 0, state.field_values())
    data = render_frame(snap)
    pixels = decode_pgm(data)
    assert pixels.shape == (5, 5)
    assert pixels[2, 2] == 255
    assert pixels.sum() == 255


def test_pgm_round_trip_and_header():
    pixels = frame_pixels(np.linspace(0, 1, 12), 4, 3)
    data = encode_pgm(pixels)
    assert data.startswith(b"P5\n4 3\n255\n")
    assert np.array_equal(decode_pgm(data), pixels)


def test_png_matches_pgm_pixels():
    values = np.linspace(0, 1.2, 25)
    net = build_grid(4, 5, 5)
    snap = FieldSnapshot(net, 0, values)
    pgm = decode_pgm(render_frame(snap, image_format="pgm"))
    png = np.asarray(Image.open(stdio.BytesIO(render_frame(snap, image_format="png"))))
    assert np.array_equal(pgm, png)


def test_rendering_is_pure():
    net = build_grid(4, 6, 6)
    values = np.random.default_rng(2).uniform(0, 1, 36)
    snap = FieldSnapshot(net, 3, values)
    assert render_frame(snap, 1.5, "png", 2) == render_frame(snap, 1.5, "png", 2)


def test_upscale_repeats_pixels():
    pixels = frame_pixels(np.array([0.0, 1.0, 1.0, 0.0]), 2, 2, upscale=2)
    assert pixels.shape == (4, 4)
    assert (pixels[:2, 2:] == 255).all()
    assert (pixels[:2, :2] == 0).all()


# -- isolines ----------------------------------------------------------------------

def _snapshot(values, width, height, boundary="bordered", degree=4):
    net = build_grid(degree, width, height, boundary)
    return FieldSnapshot(net, 0, np.asarray(values, dtype=float).reshape(-1))


def test_isolines_empty_below_level():
    snap = _snapshot(np.full(25, 0.2), 5, 5)
    assert extract_isolines(snap, 1.0).polylines == ()


def test_isolines_single_plateau_cell():
    values = np.zeros((5, 5))
    values[2, 2] = 2.0
    isolines = extract_isolines(_snapshot(values, 5, 5), 1.0)
    assert len(isolines.polylines) == 1
    line = isolines.polylines[0]
    assert line[0] == line[-1]            # closed loop
    assert len(line) == 5                  # four crossings around the peak
    xs = [p[0] for p in line]
    ys = [p[1] for p in line]
    assert min(xs) == 1.5 and max(xs) == 2.5
    assert min(ys) == 1.5 and max(ys) == 2.5


def test_isoline_vertices_match_edge_crossing_oracle():
    rng = np.random.default_rng(5)
    for _ in range(20):
        grid = rng.uniform(0, 1, (6, 7))
        level = float(rng.uniform(0.2, 0.8))
        isolines = extract_isolines(_snapshot(grid, 7, 6), level)
        got = {pt for line in isolines.polylines for pt in line}
        expected = edge_crossings_reference(grid, level)
        assert got == expected


def test_isolines_commute_with_square_symmetries():
    # symmetric centered blob: the contour point set maps to itself under
    # every symmetry of the square
    n = 9
    yy, xx = np.mgrid[0:n, 0:n]
    blob = np.exp(-((xx - 4) ** 2 + (yy - 4) ** 2) / 6.0)
    isolines = extract_isolines(_snapshot(blob, n, n), 0.35)
    points = sorted({pt for line in isolines.polylines for pt in line})

    def canon(pts):
        return sorted((round(x, 9), round(y, 9)) for x, y in pts)

    base = canon(points)
    transforms = [
        lambda x, y: (8 - x, y), lambda x, y: (x, 8 - y),
        lambda x, y: (y, x), lambda x, y: (8 - y, 8 - x),
        lambda x, y: (8 - y, x), lambda x, y: (y, 8 - x),
        lambda x, y: (8 - x, 8 - y),
    ]
    for tf in transforms:
        assert canon(tf(x, y) for x, y in points) == base


def test_isolines_deterministic_and_serializable():
    rng = np.random.default_rng(9)
    grid = rng.uniform(0, 1, (8, 8))
    a = extract_isolines(_snapshot(grid, 8, 8), 0.5)
    b = extract_isolines(_snapshot(grid, 8, 8), 0.5)
    assert a.polylines == b.polylines
    data = json.loads(json.dumps(isolines_to_data(a)))
    assert isolines_from_data(data) == a


def test_isolines_reject_bad_level():
    with pytest.raises(ValueError):
        extract_isolines(_snapshot(np.zeros(25), 5, 5), 0.0)


# -- overlay -----------------------------------------------------------------------

def test_overlay_without_contours_is_base_frame():
    base = frame_pixels(np.linspace(0, 1, 16), 4, 4)
    data = overlay_contours([], base)
    decoded = np.asarray(Image.open(stdio.BytesIO(data)).convert("L"))
    assert np.array_equal(decoded, base)


def test_overlay_dimension_mismatch_rejected():
    base = frame_pixels(np.zeros(16), 4, 4)
    values = np.zeros((5, 5))
    values[2, 2] = 2.0
    isolines = extract_isolines(_snapshot(values, 5, 5), 1.0)
    with pytest.raises(ValueError):
        overlay_contours([isolines], base)


def test_overlay_draws_contours():
    values = np.zeros((5, 5))
    values[2, 2] = 2.0
    isolines = extract_isolines(_snapshot(values, 5, 5), 1.0)
    base = frame_pixels(values.reshape(-1), 5, 5)
    data = overlay_contours([isolines], base, upscale=4)
    rgb = np.asarray(Image.open(stdio.BytesIO(data)))
    assert rgb.shape == (20, 20, 3)
    # some pixels are colored (channels differ)
    assert (rgb[..., 0] != rgb[..., 1]).any()


# -- series CSV ---------------------------------------------------------------------

def test_empty_series_is_header_only():
    assert series_to_csv(MacroSeries()) == "cycle,Ke,Kt,drift\n"


def test_series_round_trip_full_precision():
    series = MacroSeries()
    series.append(MacroRecord(1, 1.0 / 3.0, 0.1234567890123456789, 1e-17))
    series.append(MacroRecord(2, 0.0, 5e-324, 0.25))
    text = series_to_csv(series)
    back = series_from_csv(text)
    assert back.records == series.records


def test_series_rejects_bad_header():
    with pytest.raises(ValueError):
        series_from_csv("cycle,ke,kt\n1,0,0\n")


# -- snapshots ----------------------------------------------------------------------

def test_snapshot_round_trip():
    net = build_grid(8, 5, 4, "bordered")
    state = init_singularity(net, 10.0, (2, 2))
    rng = np.random.default_rng(3)
    state.outputs[net.live] = rng.uniform(0, 1, int(net.live.sum()))
    state.potentials[:, 0] = rng.uniform(0, 2, net.n_nodes)
    snap = StateSnapshot(
        degree_class=8, width=5, height=4, boundary="bordered", cycle=17,
        omega=10.0, storage=state.storage, inputs=state.inputs,
        outputs=state.outputs, potentials=state.potentials,
    )
    back = StateSnapshot.from_bytes(snap.to_bytes())
    assert (back.degree_class, back.width, back.height) == (8, 5, 4)
    assert back.boundary == "bordered"
    assert (back.cycle, back.omega) == (17, 10.0)
    for name in ("storage", "inputs", "outputs", "potentials"):
        assert np.array_equal(getattr(back, name), getattr(snap, name))
    network, restored = back.restore()
    assert network.same_geometry(net)
    assert np.array_equal(restored.storage, state.storage)


def test_snapshot_rejects_garbage():
    with pytest.raises(ValueError):
        StateSnapshot.from_bytes(b"not a snapshot")
    net = build_grid(4, 3, 3)
    state = init_singularity(net, 1.0, (0, 0))
    snap = StateSnapshot(4, 3, 3, "periodic", 0, 1.0, state.storage,
                         state.inputs, state.outputs, state.potentials)
    data = snap.to_bytes()
    with pytest.raises(ValueError):
        StateSnapshot.from_bytes(data[:-8])


def test_config_digest_changes_with_content():
    from kinonsim.run import config_digest

    a = parse_config_data(minimal_config())
    b = parse_config_data(minimal_config(omega=33.0))
    assert config_digest(a) != config_digest(b)
    assert config_digest(a) == config_digest(parse_config_data(minimal_config()))
