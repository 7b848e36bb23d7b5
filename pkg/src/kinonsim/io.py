"""Run configuration and the bit-exact file surfaces.

One JSON document describes a run: topology, total quantity, seed position,
model parameters, schedule and render options, plus an optional list of
boundary-applied parameter changes.  Parsing is strict: unknown fields and
out-of-range values are rejected with their field path.  Serialization is
canonical, so parse/serialize round-trips are identities and config hashes
are stable.

Frames are 8-bit greyscale, intensity ``round(255 * clamp(v * scale, 0, 1))``
per node; binary PGM (P5) is the golden format, PNG the presentation one.
Isolines come from marching squares with linear edge interpolation and a
deterministic vertex order.  Series export is a fixed-header CSV with
full-precision (shortest round-trip) decimal floats.  State snapshots are a
small header plus flat little-endian float64 arrays, sufficient to
re-render or resume a run byte-exactly.
"""

from __future__ import annotations

import io as _stdio
import json
import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, ImageDraw

from .analysis import MacroRecord, MacroSeries
from .core import ModelParams, PsiSpec
from .network import (
    BOUNDARIES,
    DEGREE_CLASSES,
    FieldSnapshot,
    LatticeState,
    Network,
    build_grid,
    node_mass,
)


class ConfigError(ValueError):
    """Validation failure; carries (field path, message) pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in self.problems))


@dataclass(frozen=True)
class Topology:
    degree_class: int
    width: int
    height: int
    boundary: str = "periodic"


@dataclass(frozen=True)
class Schedule:
    max_cycles: int
    frame_stride: int = 0
    contour_stride: int = 20
    stop_on_stasis: bool = False


@dataclass(frozen=True)
class RenderOptions:
    scale: float = 1.0
    image_format: str = "pgm"
    quantity: str = "total"
    upscale: int = 1


@dataclass(frozen=True)
class ParamChange:
    """Partial parameter update applied at the boundary before the collision
    of cycle ``at_cycle``."""

    at_cycle: int
    updates: dict

    def __post_init__(self):
        object.__setattr__(self, "updates", dict(self.updates))


@dataclass(frozen=True)
class RunConfig:
    topology: Topology
    omega: float
    seed: tuple[int, int]
    params: ModelParams
    schedule: Schedule
    render: RenderOptions = field(default_factory=RenderOptions)
    param_changes: tuple[ParamChange, ...] = ()

    def build_network(self) -> Network:
        t = self.topology
        return build_grid(t.degree_class, t.width,
                          None if t.degree_class == 2 else t.height, t.boundary)


# ---------------------------------------------------------------------------
# parsing


def _require(obj: dict, key: str, path: str, problems: list) -> object:
    if key not in obj:
        problems.append((f"{path}.{key}" if path else key, "missing required field"))
    return obj.get(key)


def _check_unknown(obj: dict, allowed, path: str, problems: list) -> None:
    for key in obj:
        if key not in allowed:
            problems.append((f"{path}.{key}" if path else key, "unknown field"))


def _as_number(value, path: str, problems: list) -> float | None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append((path, "expected a number"))
        return None
    return float(value)


def _as_int(value, path: str, problems: list) -> int | None:
    if isinstance(value, bool) or not isinstance(value, int):
        problems.append((path, "expected an integer"))
        return None
    return value


def _parse_psi(obj, path: str, problems: list) -> PsiSpec:
    if not isinstance(obj, dict):
        problems.append((path, "expected an object"))
        return PsiSpec()
    _check_unknown(obj, {"kind", "gamma"}, path, problems)
    kind = obj.get("kind", "identity")
    gamma = obj.get("gamma")
    if gamma is not None:
        gamma = _as_number(gamma, f"{path}.gamma", problems)
    try:
        return PsiSpec(kind=kind, gamma=gamma)
    except ValueError as exc:
        problems.append((path, str(exc)))
        return PsiSpec()


def _parse_params(obj, path: str, omega: float | None, problems: list) -> ModelParams:
    if not isinstance(obj, dict):
        problems.append((path, "expected an object"))
        return ModelParams(kappa=1.0)
    _check_unknown(obj, {"kappa", "lambda", "eta", "theta", "psi"}, path, problems)
    kappa = _require(obj, "kappa", path, problems)
    if kappa is not None:
        kappa = _as_number(kappa, f"{path}.kappa", problems)
    lam = _as_number(obj.get("lambda", 0.0), f"{path}.lambda", problems)
    eta = _as_number(obj.get("eta", 0.0), f"{path}.eta", problems)
    theta = _as_number(obj.get("theta", 0.0), f"{path}.theta", problems)
    psi = _parse_psi(obj.get("psi", {"kind": "identity"}), f"{path}.psi", problems)
    checks = (
        ("kappa", kappa, kappa is not None and kappa >= 0, "must be >= 0"),
        ("lambda", lam, lam is not None and 0 <= lam <= 1, "must be in [0, 1]"),
        ("eta", eta, eta is not None and 0 <= eta <= 1, "must be in [0, 1]"),
        ("theta", theta, theta is not None and theta >= 0, "must be >= 0"),
    )
    for name, value, ok, msg in checks:
        if value is not None and not ok:
            problems.append((f"{path}.{name}", msg))
    if theta is not None and omega is not None and theta > omega / 100.0:
        problems.append((f"{path}.theta",
                         f"must be << total quantity (at most omega/100 = {omega / 100.0})"))
    if problems:
        return ModelParams(kappa=1.0)
    return ModelParams(kappa=kappa, lam=lam, eta=eta, theta=theta, psi=psi)


def apply_param_update(params: ModelParams, updates: dict, omega: float | None,
                       path: str = "params") -> ModelParams:
    """Merge a partial parameter update into existing params, validating
    ranges per field.  Raises ConfigError listing every violation."""
    if not isinstance(updates, dict):
        raise ConfigError([(path, "expected an object")])
    merged = {
        "kappa": params.kappa,
        "lambda": params.lam,
        "eta": params.eta,
        "theta": params.theta,
        "psi": psi_to_data(params.psi),
    }
    problems: list = []
    _check_unknown(updates, set(merged), path, problems)
    if problems:
        raise ConfigError(problems)
    merged.update(updates)
    result = _parse_params(merged, path, omega, problems)
    if problems:
        raise ConfigError(problems)
    return result


def parse_config_data(data) -> RunConfig:
    """Validate a decoded JSON document into a RunConfig."""
    problems: list = []
    if not isinstance(data, dict):
        raise ConfigError([("", "expected a JSON object")])
    _check_unknown(data, {"topology", "omega", "seed", "params", "schedule",
                          "render", "param_changes"}, "", problems)

    topo_obj = _require(data, "topology", "", problems)
    degree_class, width, height, boundary = 4, 3, 3, "periodic"
    if isinstance(topo_obj, dict):
        _check_unknown(topo_obj, {"degree_class", "width", "height", "boundary"},
                       "topology", problems)
        degree_class = _require(topo_obj, "degree_class", "topology", problems)
        if degree_class is not None:
            degree_class = _as_int(degree_class, "topology.degree_class", problems)
        width = _require(topo_obj, "width", "topology", problems)
        if width is not None:
            width = _as_int(width, "topology.width", problems)
        height = topo_obj.get("height")
        if height is not None:
            height = _as_int(height, "topology.height", problems)
        boundary = topo_obj.get("boundary", "periodic")
        if degree_class is not None and degree_class not in DEGREE_CLASSES:
            problems.append(("topology.degree_class", f"must be one of {DEGREE_CLASSES}"))
            degree_class = 4
        if boundary not in BOUNDARIES:
            problems.append(("topology.boundary", f"must be one of {BOUNDARIES}"))
            boundary = "periodic"
        if width is not None and width < 3:
            problems.append(("topology.width", "must be >= 3"))
        if degree_class == 2:
            if height not in (None, 1):
                problems.append(("topology.height", "d2 networks are one-dimensional"))
            height = 1
        else:
            if height is None:
                height = width
            if height is not None and height < 3:
                problems.append(("topology.height", "must be >= 3"))
    elif topo_obj is not None:
        problems.append(("topology", "expected an object"))

    omega = _require(data, "omega", "", problems)
    if omega is not None:
        omega = _as_number(omega, "omega", problems)
        if omega is not None and not omega > 0:
            problems.append(("omega", "must be positive"))
            omega = None

    width_ok = isinstance(width, int) and width >= 3
    height_ok = isinstance(height, int) and height >= 1
    seed_obj = data.get("seed", "center")
    seed = (0, 0)
    if seed_obj == "center":
        if width_ok and height_ok:
            seed = ((width - 1) // 2, (height - 1) // 2)
    elif isinstance(seed_obj, list) and len(seed_obj) in (1, 2) and all(
            isinstance(v, int) and not isinstance(v, bool) for v in seed_obj):
        seed = (seed_obj[0], seed_obj[1] if len(seed_obj) == 2 else 0)
        if width_ok and height_ok and not (
                0 <= seed[0] < width and 0 <= seed[1] < height):
            problems.append(("seed", f"position {seed} outside {width}x{height} grid"))
    else:
        problems.append(("seed", 'expected "center" or an [x, y] integer pair'))

    params = _parse_params(_require(data, "params", "", problems) or {},
                           "params", omega, problems)

    sched_obj = _require(data, "schedule", "", problems)
    max_cycles, frame_stride, contour_stride, stop_on_stasis = 0, 0, 20, False
    if isinstance(sched_obj, dict):
        _check_unknown(sched_obj, {"max_cycles", "frame_stride", "contour_stride",
                                   "stop_on_stasis"}, "schedule", problems)
        max_cycles = _require(sched_obj, "max_cycles", "schedule", problems)
        if max_cycles is not None:
            max_cycles = _as_int(max_cycles, "schedule.max_cycles", problems)
            if max_cycles is not None and max_cycles < 0:
                problems.append(("schedule.max_cycles", "must be >= 0"))
        frame_stride = _as_int(sched_obj.get("frame_stride", 0),
                               "schedule.frame_stride", problems)
        contour_stride = _as_int(sched_obj.get("contour_stride", 20),
                                 "schedule.contour_stride", problems)
        for name, value in (("frame_stride", frame_stride),
                            ("contour_stride", contour_stride)):
            if value is not None and value < 0:
                problems.append((f"schedule.{name}", "must be >= 0"))
        stop_on_stasis = sched_obj.get("stop_on_stasis", False)
        if not isinstance(stop_on_stasis, bool):
            problems.append(("schedule.stop_on_stasis", "expected a boolean"))
            stop_on_stasis = False
    elif sched_obj is not None:
        problems.append(("schedule", "expected an object"))

    render_obj = data.get("render", {})
    scale, image_format, quantity, upscale = 1.0, "pgm", "total", 1
    if isinstance(render_obj, dict):
        _check_unknown(render_obj, {"scale", "image_format", "quantity", "upscale"},
                       "render", problems)
        scale = _as_number(render_obj.get("scale", 1.0), "render.scale", problems)
        if scale is not None and not scale > 0:
            problems.append(("render.scale", "must be positive"))
        image_format = render_obj.get("image_format", "pgm")
        if image_format not in ("pgm", "png"):
            problems.append(("render.image_format", 'must be "pgm" or "png"'))
            image_format = "pgm"
        quantity = render_obj.get("quantity", "total")
        if quantity not in ("total", "storage"):
            problems.append(("render.quantity", 'must be "total" or "storage"'))
            quantity = "total"
        upscale = _as_int(render_obj.get("upscale", 1), "render.upscale", problems)
        if upscale is not None and upscale < 1:
            problems.append(("render.upscale", "must be >= 1"))
    else:
        problems.append(("render", "expected an object"))

    changes: list[ParamChange] = []
    changes_obj = data.get("param_changes", [])
    if isinstance(changes_obj, list):
        rolling = params
        for idx, entry in enumerate(changes_obj):
            epath = f"param_changes[{idx}]"
            if not isinstance(entry, dict):
                problems.append((epath, "expected an object"))
                continue
            _check_unknown(entry, {"at_cycle", "set"}, epath, problems)
            at_cycle = _require(entry, "at_cycle", epath, problems)
            if at_cycle is not None:
                at_cycle = _as_int(at_cycle, f"{epath}.at_cycle", problems)
                if at_cycle is not None and at_cycle < 1:
                    problems.append((f"{epath}.at_cycle", "must be >= 1"))
            updates = entry.get("set")
            if not isinstance(updates, dict):
                problems.append((f"{epath}.set", "expected an object"))
                continue
            try:
                rolling = apply_param_update(rolling, updates, omega, f"{epath}.set")
            except ConfigError as exc:
                problems.extend(exc.problems)
                continue
            if at_cycle is not None:
                changes.append(ParamChange(at_cycle=at_cycle, updates=updates))
    else:
        problems.append(("param_changes", "expected a list"))

    if problems:
        raise ConfigError(problems)
    return RunConfig(
        topology=Topology(degree_class, width, height, boundary),
        omega=omega,
        seed=seed,
        params=params,
        schedule=Schedule(max_cycles, frame_stride, contour_stride, stop_on_stasis),
        render=RenderOptions(scale, image_format, quantity, upscale),
        param_changes=tuple(changes),
    )


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([("", f"invalid JSON: {exc}")]) from exc
    return parse_config_data(data)


def psi_to_data(psi: PsiSpec) -> dict:
    data = {"kind": psi.kind}
    if psi.gamma is not None:
        data["gamma"] = psi.gamma
    return data


def params_to_data(params: ModelParams) -> dict:
    return {
        "kappa": params.kappa,
        "lambda": params.lam,
        "eta": params.eta,
        "theta": params.theta,
        "psi": psi_to_data(params.psi),
    }


def config_to_data(config: RunConfig) -> dict:
    data = {
        "topology": {
            "degree_class": config.topology.degree_class,
            "width": config.topology.width,
            "height": config.topology.height,
            "boundary": config.topology.boundary,
        },
        "omega": config.omega,
        "seed": list(config.seed),
        "params": params_to_data(config.params),
        "schedule": {
            "max_cycles": config.schedule.max_cycles,
            "frame_stride": config.schedule.frame_stride,
            "contour_stride": config.schedule.contour_stride,
            "stop_on_stasis": config.schedule.stop_on_stasis,
        },
        "render": {
            "scale": config.render.scale,
            "image_format": config.render.image_format,
            "quantity": config.render.quantity,
            "upscale": config.render.upscale,
        },
    }
    if config.param_changes:
        data["param_changes"] = [
            {"at_cycle": c.at_cycle, "set": dict(sorted(c.updates.items()))}
            for c in config.param_changes
        ]
    return data


def serialize_config(config: RunConfig) -> str:
    return json.dumps(config_to_data(config), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# frames


def frame_pixels(values: np.ndarray, width: int, height: int,
                 scale: float = 1.0, upscale: int = 1) -> np.ndarray:
    """Quantize a mass field to 8-bit grey: round(255 * clamp(v*scale, 0, 1)).

    Mass 0.5 at scale 1 lands on mid-grey 128; mass >= 1 saturates white.
    ``upscale`` repeats pixels (nearest neighbor) for presentation.
    """
    grid = np.asarray(values, dtype=np.float64).reshape(height, width)
    pixels = np.rint(255.0 * np.clip(grid * scale, 0.0, 1.0)).astype(np.uint8)
    if upscale > 1:
        pixels = np.kron(pixels, np.ones((upscale, upscale), dtype=np.uint8))
    return pixels


def encode_pgm(pixels: np.ndarray) -> bytes:
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    if not data.startswith(b"P5"):
        raise ValueError("not a binary PGM (P5) file")
    parts = data.split(b"\n", 3)
    if len(parts) < 4:
        raise ValueError("truncated PGM header")
    w, h = (int(v) for v in parts[1].split())
    raster = parts[3][: w * h]
    if len(raster) != w * h:
        raise ValueError("truncated PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w)


def encode_png(pixels: np.ndarray) -> bytes:
    buf = _stdio.BytesIO()
    Image.fromarray(pixels, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def render_frame(snapshot: FieldSnapshot, scale: float = 1.0,
                 image_format: str = "pgm", upscale: int = 1) -> bytes:
    """Greyscale image bytes of a field snapshot; a pure function of its
    arguments, so identical inputs give byte-identical files."""
    pixels = frame_pixels(snapshot.values, snapshot.network.width,
                          snapshot.network.height, scale, upscale)
    if image_format == "png":
        return encode_png(pixels)
    if image_format == "pgm":
        return encode_pgm(pixels)
    raise ValueError(f"unknown image format {image_format!r}")


# ---------------------------------------------------------------------------
# isolines (marching squares)

# Segment table: per 4-bit corner case (bit0=top-left, bit1=top-right,
# bit2=bottom-right, bit3=bottom-left; bit set = corner >= level), the pairs
# of cell edges (0=top, 1=right, 2=bottom, 3=left) joined by contour
# segments.  Saddles (cases 5 and 10) are resolved by the cell-center mean.
_SEGMENTS = {
    0: (), 15: (),
    1: ((3, 0),), 14: ((3, 0),),
    2: ((0, 1),), 13: ((0, 1),),
    4: ((1, 2),), 11: ((1, 2),),
    8: ((2, 3),), 7: ((2, 3),),
    3: ((3, 1),), 12: ((3, 1),),
    6: ((0, 2),), 9: ((0, 2),),
}
_SADDLE = {
    # case: (segments when center >= level, segments when center < level)
    5: (((3, 0), (1, 2)), ((0, 1), (2, 3))),
    10: (((0, 1), (2, 3)), ((3, 0), (1, 2))),
}


@dataclass(frozen=True)
class IsolineSet:
    """Contour polylines of a field at one level, in node coordinates.

    A polyline whose first and last vertices coincide is a closed loop;
    anything else terminates on the grid boundary.
    """

    level: float
    width: int
    height: int
    cycle: int
    polylines: tuple[tuple[tuple[float, float], ...], ...]


def _edge_point(edge: int, x: int, y: int, corners, level: float) -> tuple[float, float]:
    (ax, ay, av), (bx, by, bv) = {
        0: (corners[0], corners[1]),
        1: (corners[1], corners[2]),
        2: (corners[3], corners[2]),
        3: (corners[0], corners[3]),
    }[edge]
    t = (level - av) / (bv - av)
    return (ax + t * (bx - ax), ay + t * (by - ay))


def extract_isolines(snapshot: FieldSnapshot, level: float) -> IsolineSet:
    """Marching-squares contours of the mass field at the given level."""
    if not level > 0:
        raise ValueError("level must be positive")
    net = snapshot.network
    grid = snapshot.values.reshape(net.height, net.width)
    segments: list[tuple[tuple[float, float], tuple[float, float]]] = []
    inside = grid >= level
    for y in range(net.height - 1):
        for x in range(net.width - 1):
            case = (
                (1 if inside[y, x] else 0)
                | (2 if inside[y, x + 1] else 0)
                | (4 if inside[y + 1, x + 1] else 0)
                | (8 if inside[y + 1, x] else 0)
            )
            if case in (0, 15):
                continue
            corners = (
                (float(x), float(y), float(grid[y, x])),
                (float(x + 1), float(y), float(grid[y, x + 1])),
                (float(x + 1), float(y + 1), float(grid[y + 1, x + 1])),
                (float(x), float(y + 1), float(grid[y + 1, x])),
            )
            if case in _SADDLE:
                center = (corners[0][2] + corners[1][2] + corners[2][2] + corners[3][2]) / 4.0
                pairs = _SADDLE[case][0 if center >= level else 1]
            else:
                pairs = _SEGMENTS[case]
            for e0, e1 in pairs:
                segments.append((_edge_point(e0, x, y, corners, level),
                                 _edge_point(e1, x, y, corners, level)))
    return IsolineSet(level=level, width=net.width, height=net.height,
                      cycle=snapshot.cycle, polylines=_chain_segments(segments))


def _chain_segments(segments) -> tuple:
    """Join shared-endpoint segments into polylines, deterministically.

    Adjacent cells compute a shared edge crossing with identical arithmetic,
    so endpoints match exactly and plain tuple keys suffice.
    """
    by_point: dict[tuple[float, float], list[int]] = {}
    for idx, (a, b) in enumerate(segments):
        by_point.setdefault(a, []).append(idx)
        by_point.setdefault(b, []).append(idx)
    used = [False] * len(segments)

    def walk(start_point, seg_idx):
        used[seg_idx] = True
        a, b = segments[seg_idx]
        nxt = b if a == start_point else a
        chain = [start_point, nxt]
        while True:
            options = [i for i in by_point.get(nxt, ()) if not used[i]]
            if not options:
                break
            i = min(options)
            used[i] = True
            a, b = segments[i]
            nxt = b if a == nxt else a
            chain.append(nxt)
        return chain

    open_starts = sorted(
        (point for point, ids in by_point.items()
         if len(ids) % 2 == 1),
        key=lambda p: (p[1], p[0]),
    )
    polylines = []
    for point in open_starts:
        for seg_idx in sorted(by_point[point]):
            if not used[seg_idx]:
                polylines.append(walk(point, seg_idx))
    # remaining segments form closed loops
    for idx in range(len(segments)):
        if not used[idx]:
            start = min(segments[idx])
            chain = walk(start, idx)
            polylines.append(chain)
    polylines.sort(key=lambda ch: (ch[0][1], ch[0][0], len(ch)))
    return tuple(tuple(ch) for ch in polylines)


def isolines_to_data(isolines: IsolineSet) -> dict:
    return {
        "cycle": isolines.cycle,
        "level": isolines.level,
        "width": isolines.width,
        "height": isolines.height,
        "polylines": [[[x, y] for x, y in line] for line in isolines.polylines],
    }


def isolines_from_data(data: dict) -> IsolineSet:
    return IsolineSet(
        level=float(data["level"]),
        width=int(data["width"]),
        height=int(data["height"]),
        cycle=int(data["cycle"]),
        polylines=tuple(tuple((float(x), float(y)) for x, y in line)
                        for line in data["polylines"]),
    )


# Contour overlay colors, cycled by stride index (oldest ring first).
_CONTOUR_COLORS = (
    (230, 120, 30), (210, 60, 60), (180, 40, 120), (120, 60, 180),
    (60, 100, 210), (40, 160, 180), (60, 190, 110), (150, 190, 60),
)


def overlay_contours(isoline_sets, base_pixels: np.ndarray,
                     upscale: int = 1) -> bytes:
    """Composite PNG: contour rings of successive strides drawn over a base
    greyscale frame.  Dimensions of every contour set must match the base."""
    h, w = base_pixels.shape
    pixels = base_pixels
    if upscale > 1:
        pixels = np.kron(pixels, np.ones((upscale, upscale), dtype=np.uint8))
    image = Image.fromarray(pixels, mode="L").convert("RGB")
    draw = ImageDraw.Draw(image)
    for idx, isolines in enumerate(isoline_sets):
        if (isolines.width, isolines.height) != (w, h):
            raise ValueError(
                f"contour set {isolines.width}x{isolines.height} does not match "
                f"base frame {w}x{h}"
            )
        color = _CONTOUR_COLORS[idx % len(_CONTOUR_COLORS)]
        for line in isolines.polylines:
            points = [(x * upscale + (upscale - 1) / 2.0,
                       y * upscale + (upscale - 1) / 2.0) for x, y in line]
            if len(points) >= 2:
                draw.line(points, fill=color, width=1)
    buf = _stdio.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# series CSV

SERIES_HEADER = "cycle,Ke,Kt,drift"


def series_to_csv(series: MacroSeries) -> str:
    """Fixed-header CSV; floats use shortest round-trip decimal encoding."""
    lines = [SERIES_HEADER]
    for r in series.records:
        lines.append(f"{r.cycle},{r.ke!r},{r.kt!r},{r.drift!r}")
    return "\n".join(lines) + "\n"


def series_from_csv(text: str) -> MacroSeries:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != SERIES_HEADER:
        raise ValueError(f"expected header {SERIES_HEADER!r}")
    series = MacroSeries()
    for ln in lines[1:]:
        cycle, ke, kt, drift = ln.split(",")
        series.append(MacroRecord(int(cycle), float(ke), float(kt), float(drift)))
    return series


# ---------------------------------------------------------------------------
# state snapshots

SNAPSHOT_MAGIC = b"KINSNAP1"
_BOUNDARY_CODES = {"periodic": 0, "bordered": 1}
_BOUNDARY_NAMES = {v: k for k, v in _BOUNDARY_CODES.items()}


@dataclass(eq=False)
class StateSnapshot:
    """Persistence-format state at a post-collision instant.

    Flat little-endian float64 arrays after a fixed header; enough to
    re-render byte-exactly or to resume a run (propagate, then continue).
    """

    degree_class: int
    width: int
    height: int
    boundary: str
    cycle: int
    omega: float
    storage: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    potentials: np.ndarray

    def to_bytes(self) -> bytes:
        header = SNAPSHOT_MAGIC + struct.pack(
            "<IIIIQd", self.degree_class, self.width, self.height,
            _BOUNDARY_CODES[self.boundary], self.cycle, self.omega,
        )
        blobs = [arr.astype("<f8").tobytes()
                 for arr in (self.storage, self.inputs, self.outputs, self.potentials)]
        return header + b"".join(blobs)

    @classmethod
    def from_bytes(cls, data: bytes) -> "StateSnapshot":
        if not data.startswith(SNAPSHOT_MAGIC):
            raise ValueError("not a state snapshot (bad magic)")
        offset = len(SNAPSHOT_MAGIC)
        degree_class, width, height, bcode, cycle, omega = struct.unpack_from(
            "<IIIIQd", data, offset)
        offset += struct.calcsize("<IIIIQd")
        if bcode not in _BOUNDARY_NAMES:
            raise ValueError(f"unknown boundary code {bcode}")
        n = width * height
        d = {2: 2, 4: 4, 8: 8}.get(degree_class)
        if d is None:
            raise ValueError(f"unknown degree class {degree_class}")
        sizes = (n, n * d, n * d, n * (d + 1))
        if len(data) != offset + 8 * sum(sizes):
            raise ValueError("truncated state snapshot")
        arrays = []
        for count in sizes:
            arrays.append(np.frombuffer(data, dtype="<f8", count=count,
                                        offset=offset).astype(np.float64))
            offset += 8 * count
        storage, inputs, outputs, potentials = arrays
        return cls(
            degree_class=degree_class, width=width, height=height,
            boundary=_BOUNDARY_NAMES[bcode], cycle=cycle, omega=omega,
            storage=storage,
            inputs=inputs.reshape(n, d),
            outputs=outputs.reshape(n, d),
            potentials=potentials.reshape(n, d + 1),
        )

    def restore(self) -> tuple[Network, LatticeState]:
        network = build_grid(self.degree_class, self.width,
                             None if self.degree_class == 2 else self.height,
                             self.boundary)
        state = LatticeState(
            network=network,
            storage=self.storage.copy(),
            inputs=self.inputs.copy(),
            outputs=self.outputs.copy(),
            potentials=self.potentials.copy(),
        )
        return network, state

    def field_values(self, quantity: str = "total") -> np.ndarray:
        if quantity == "storage":
            return self.storage.copy()
        return node_mass(self.storage, self.outputs)
