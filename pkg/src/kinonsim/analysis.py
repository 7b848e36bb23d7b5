"""Macrodynamic indices, stasis detection and shape metrics.

Two scalar indices summarize the whole network per cycle.  The exchange
rate is the share of the total quantity sitting in output buffers; the
turnover rate is half of the normalized absolute change of all storages and
exchange buffers over the cycle.  Both live in [0, 1].  Stasis is the
terminal regime where both indices are zero; a constant nonzero plateau is
a coherent dynamic state, not stasis, and is reported separately.

All measurements use the post-collision instant of a cycle, where output
buffers are populated and inputs consumed; the turnover compares against
the inputs the previous cycle's propagation delivered.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .network import FieldSnapshot, LatticeState, Network, gather_arrivals

try:
    from scipy import ndimage as _ndimage
except ImportError:  # pragma: no cover - scipy is a hard dependency
    _ndimage = None


@dataclass(frozen=True)
class MacroRecord:
    cycle: int
    ke: float
    kt: float
    drift: float


@dataclass
class MacroSeries:
    """Per-cycle (exchange rate, turnover rate, conservation drift) records
    plus named event marks such as stasis onset or border hit."""

    records: list[MacroRecord] = field(default_factory=list)
    marks: dict[str, int] = field(default_factory=dict)

    def append(self, record: MacroRecord) -> None:
        self.records.append(record)

    def mark(self, name: str, cycle: int) -> None:
        self.marks.setdefault(name, cycle)

    def __len__(self) -> int:
        return len(self.records)


def exchange_rate(state: LatticeState, omega: float) -> float:
    """Share of the total quantity held in output buffers (post-collision)."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    return float(np.sum(state.outputs)) / omega


def turnover_rate(prev: LatticeState, cur: LatticeState, omega: float) -> float:
    """Normalized absolute change of storages and exchange buffers between
    consecutive post-collision states.

    The storage delta spans the cycle; the buffer delta contrasts what the
    previous propagation delivered into each slot with what the current
    collision put back into it.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    if not prev.network.same_geometry(cur.network):
        raise ValueError("states come from different networks")
    arrived = gather_arrivals(prev.network, prev.outputs)
    ds = np.sum(np.abs(cur.storage - prev.storage))
    de = np.sum(np.abs(arrived - cur.outputs))
    return float(ds + de) / (2.0 * omega)


@dataclass(frozen=True)
class StasisReport:
    kind: str                # "stasis" | "coherent" | "active"
    cycle: int | None = None


def detect_stasis(series: MacroSeries, tolerance: float = 1e-9,
                  window: int = 20, coherence_band: float = 1e-9) -> StasisReport:
    """Find the first cycle from which both indices stay within tolerance
    for a full window.

    A trailing window where both indices are (near-)constant but nonzero is
    classified as a coherent dynamic state rather than stasis.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    if window < 1:
        raise ValueError("window must be >= 1")
    streak = 0
    for idx, rec in enumerate(series.records):
        if rec.ke <= tolerance and rec.kt <= tolerance:
            streak += 1
            if streak >= window:
                return StasisReport("stasis", series.records[idx - window + 1].cycle)
        else:
            streak = 0
    if len(series.records) >= window:
        tail = series.records[-window:]
        kes = [r.ke for r in tail]
        kts = [r.kt for r in tail]
        steady = (max(kes) - min(kes) <= coherence_band
                  and max(kts) - min(kts) <= coherence_band)
        if steady and (max(kes) > tolerance or max(kts) > tolerance):
            return StasisReport("coherent", None)
    return StasisReport("active", None)


@dataclass(frozen=True)
class ShapeMetrics:
    support_area: int
    components: int
    asymmetry: float


def count_components(network: Network, mask: np.ndarray) -> int:
    """Connected components of a node mask under the lattice adjacency."""
    if not mask.any():
        return 0
    if _ndimage is not None and network.boundary in ("periodic", "bordered"):
        return _count_components_grid(network, mask)
    return _count_components_bfs(network, mask)


def _count_components_grid(network: Network, mask: np.ndarray) -> int:
    grid = mask.reshape(network.height, network.width)
    if network.degree_class == 8:
        structure = np.ones((3, 3), dtype=bool)
    else:
        structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    labels, count = _ndimage.label(grid, structure=structure)
    if network.boundary != "periodic":
        return int(count)
    # merge labels across the wrap seams
    parent = list(range(count + 1))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    flat = labels.reshape(-1)
    live = network.live
    neighbors = network.neighbors
    h, w = network.height, network.width
    seam_nodes = set()
    if h > 1:
        seam_nodes.update(range(w))                       # top row
        seam_nodes.update(range((h - 1) * w, h * w))      # bottom row
    seam_nodes.update(y * w for y in range(h))            # left column
    seam_nodes.update(y * w + (w - 1) for y in range(h))  # right column
    for i in seam_nodes:
        if not flat[i]:
            continue
        for j in range(network.link_slots):
            if not live[i, j]:
                continue
            t = int(neighbors[i, j])
            if flat[t]:
                union(int(flat[i]), int(flat[t]))
    roots = {find(l) for l in range(1, count + 1)}
    return len(roots)


def _count_components_bfs(network: Network, mask: np.ndarray) -> int:
    seen = np.zeros(network.n_nodes, dtype=bool)
    count = 0
    for start in np.flatnonzero(mask):
        if seen[start]:
            continue
        count += 1
        seen[start] = True
        queue = deque([int(start)])
        while queue:
            i = queue.popleft()
            for j in range(network.link_slots):
                if network.live[i, j]:
                    t = int(network.neighbors[i, j])
                    if mask[t] and not seen[t]:
                        seen[t] = True
                        queue.append(t)
    return count


def dihedral_asymmetry(snapshot: FieldSnapshot) -> float:
    """Worst normalized mismatch of the field against its own lattice
    symmetries: the square's 8-element group on square grids, the rectangle
    subgroup otherwise, mirror reflection in one dimension."""
    net = snapshot.network
    values = snapshot.values
    total = float(np.sum(values))
    if total <= 0:
        return 0.0
    if net.height == 1:
        images = [values[::-1]]
    else:
        grid = values.reshape(net.height, net.width)
        if net.width == net.height:
            images = [
                np.rot90(grid, 1), np.rot90(grid, 2), np.rot90(grid, 3),
                np.fliplr(grid), np.flipud(grid),
                grid.T, np.rot90(grid.T, 2),
            ]
        else:
            images = [np.fliplr(grid), np.flipud(grid), np.rot90(grid, 2)]
        values = grid
    worst = 0.0
    for img in images:
        worst = max(worst, float(np.sum(np.abs(values - img))))
    return worst / total


def shape_metrics(snapshot: FieldSnapshot, level: float) -> ShapeMetrics:
    """Support size, connected-component count and dihedral asymmetry of the
    mass field at the given level."""
    if not level > 0:
        raise ValueError("level must be positive")
    mask = snapshot.values >= level
    return ShapeMetrics(
        support_area=int(mask.sum()),
        components=count_components(snapshot.network, mask),
        asymmetry=dihedral_asymmetry(snapshot),
    )
