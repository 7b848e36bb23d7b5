"""Balanced-digraph topologies and the synchronous two-phase engine.

Regular grids come in three families: d2 (one-dimensional chain or ring),
d4 (square grid, orthogonal neighbors) and d8 (square grid, orthogonal plus
diagonal neighbors).  Boundaries are either periodic (torus) or bordered,
where out-of-range links are permanently eliminated and boundary nodes
simply have fewer channels.

Every directed link stores the reciprocal slot index at its target, which
makes propagation a pure permutation of buffer contents: each input slot
has exactly one writer.  A cycle is collision (node-local, order
independent) followed by propagation (the permutation), so the whole update
is deterministic and safe to evaluate in parallel stripes; worker striping
is bit-identical to the serial path by construction.

The engine stores node vectors in rectangular arrays with a live-channel
mask.  Dead channels hold exact zeros everywhere, and the sorted channel
reductions from ``_numeric`` are unaffected by extra zeros, so a node
computed here matches the shrunk-vector scalar pipeline in ``core`` bit for
bit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._numeric import comp_sum_cols, comp_sum_cols_parts
from .core import KinonState, ModelParams, PsiSpec

DEGREE_CLASSES = (2, 4, 8)
BOUNDARIES = ("periodic", "bordered")

# Channel slot order per degree class; output patterns depend only on this
# convention staying consistent between builder, engine and scalar views.
_DIRECTIONS = {
    2: ("E", "W"),
    4: ("N", "E", "S", "W"),
    8: ("N", "E", "S", "W", "NE", "SE", "SW", "NW"),
}
_DELTAS = {
    "N": (0, -1), "E": (1, 0), "S": (0, 1), "W": (-1, 0),
    "NE": (1, -1), "SE": (1, 1), "SW": (-1, 1), "NW": (-1, -1),
}
_OPPOSITE = {
    "N": "S", "S": "N", "E": "W", "W": "E",
    "NE": "SW", "SW": "NE", "SE": "NW", "NW": "SE",
}


@dataclass(eq=False)
class Network:
    """Static topology: per-node ordered neighbor slots with reciprocity.

    ``neighbors[i, j]`` is the target node of slot j of node i (-1 when the
    link was eliminated), ``reciprocal[i, j]`` the slot index this link
    occupies at the target.
    """

    degree_class: int
    width: int
    height: int
    boundary: str
    neighbors: np.ndarray
    reciprocal: np.ndarray
    live: np.ndarray

    def __post_init__(self):
        d = self.neighbors.shape[1]
        flat_self = np.arange(self.neighbors.size, dtype=np.int64)
        src = self.neighbors.astype(np.int64) * d + self.reciprocal.astype(np.int64)
        # dead slots gather from themselves; their buffers are always zero
        self.gather_index = np.where(self.live.reshape(-1), src.reshape(-1), flat_self)
        self.degrees = self.live.sum(axis=1).astype(np.int64)

    @property
    def n_nodes(self) -> int:
        return self.neighbors.shape[0]

    @property
    def link_slots(self) -> int:
        return self.neighbors.shape[1]

    def node_index(self, x: int, y: int) -> int:
        return y * self.width + x

    def same_geometry(self, other: "Network") -> bool:
        return (
            self.degree_class == other.degree_class
            and self.width == other.width
            and self.height == other.height
            and self.boundary == other.boundary
        )


def build_grid(degree_class: int, width: int, height: int | None = None,
               boundary: str = "periodic") -> Network:
    """Build a regular grid network.

    d2 is one-dimensional (height forced to 1); d4/d8 default to a square
    when height is omitted.  Bordered grids drop out-of-range links, so a
    bordered d4 corner has degree 2 and a bordered d8 corner degree 3.
    """
    if degree_class not in DEGREE_CLASSES:
        raise ValueError(f"unsupported degree class {degree_class}, expected one of {DEGREE_CLASSES}")
    if boundary not in BOUNDARIES:
        raise ValueError(f"unknown boundary {boundary!r}, expected one of {BOUNDARIES}")
    if degree_class == 2:
        if height not in (None, 1):
            raise ValueError("d2 networks are one-dimensional")
        height = 1
    else:
        if height is None:
            height = width
        if height < 3:
            raise ValueError("height must be >= 3")
    if width < 3:
        raise ValueError("width must be >= 3")

    dirs = _DIRECTIONS[degree_class]
    d = len(dirs)
    opposite_slot = [dirs.index(_OPPOSITE[name]) for name in dirs]
    n = width * height
    neighbors = np.full((n, d), -1, dtype=np.int64)
    reciprocal = np.full((n, d), -1, dtype=np.int64)
    for y in range(height):
        for x in range(width):
            i = y * width + x
            for j, name in enumerate(dirs):
                dx, dy = _DELTAS[name]
                nx, ny = x + dx, y + dy
                if boundary == "periodic":
                    nx %= width
                    ny %= height
                elif not (0 <= nx < width and 0 <= ny < height):
                    continue
                neighbors[i, j] = ny * width + nx
                reciprocal[i, j] = opposite_slot[j]
    live = neighbors >= 0
    return Network(degree_class, width, height, boundary, neighbors, reciprocal, live)


@dataclass(frozen=True)
class BalanceReport:
    ok: bool
    problems: tuple[str, ...]


def validate_balanced(network: Network, max_problems: int = 20) -> BalanceReport:
    """Diagnostic check of the balance and reciprocity invariants."""
    problems: list[str] = []
    n, d = network.neighbors.shape
    live = network.live
    in_degree = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in range(d):
            if not live[i, j]:
                continue
            t = int(network.neighbors[i, j])
            r = int(network.reciprocal[i, j])
            if not 0 <= t < n:
                problems.append(f"node {i} slot {j}: target {t} out of range")
                continue
            in_degree[t] += 1
            if not 0 <= r < d or not live[t, r]:
                problems.append(f"node {i} slot {j}: no reciprocal link at node {t} slot {r}")
                continue
            if int(network.neighbors[t, r]) != i or int(network.reciprocal[t, r]) != j:
                problems.append(
                    f"node {i} slot {j}: reciprocal of node {t} slot {r} points elsewhere"
                )
    out_degree = live.sum(axis=1)
    for i in np.flatnonzero(in_degree != out_degree):
        problems.append(
            f"node {int(i)}: in-degree {int(in_degree[i])} != out-degree {int(out_degree[i])}"
        )
    return BalanceReport(ok=not problems, problems=tuple(problems[:max_problems]))


@dataclass(eq=False)
class LatticeState:
    """Array-of-node state: storage, exchange buffers, channel potentials.

    Dead channels (bordered grids) hold exact zeros in every array and never
    acquire nonzero values.
    """

    network: Network
    storage: np.ndarray      # (N,)
    inputs: np.ndarray       # (N, d)
    outputs: np.ndarray      # (N, d)
    potentials: np.ndarray   # (N, d+1); column 0 is the storage channel

    @classmethod
    def zeros(cls, network: Network) -> "LatticeState":
        n, d = network.n_nodes, network.link_slots
        return cls(
            network=network,
            storage=np.zeros(n, dtype=np.float64),
            inputs=np.zeros((n, d), dtype=np.float64),
            outputs=np.zeros((n, d), dtype=np.float64),
            potentials=np.zeros((n, d + 1), dtype=np.float64),
        )

    def copy(self) -> "LatticeState":
        return LatticeState(
            network=self.network,
            storage=self.storage.copy(),
            inputs=self.inputs.copy(),
            outputs=self.outputs.copy(),
            potentials=self.potentials.copy(),
        )

    def field_values(self) -> np.ndarray:
        """Per-node mass: storage plus output buffers (post-collision view).

        Measured with the package's channel-reduction scheme so the view is
        invariant under channel permutations, like the dynamics."""
        return node_mass(self.storage, self.outputs)

    def total_mass(self) -> float:
        return float(np.sum(self.storage) + np.sum(self.inputs) + np.sum(self.outputs))

    def node_state(self, i: int) -> KinonState:
        """Extract node i as a shrunk-vector scalar state (live slots only)."""
        idx = np.flatnonzero(self.network.live[i])
        return KinonState(
            degree=len(idx),
            inputs=[float(v) for v in self.inputs[i, idx]],
            outputs=[float(v) for v in self.outputs[i, idx]],
            storage_out=float(self.storage[i]),
            potentials=[float(self.potentials[i, 0])]
            + [float(v) for v in self.potentials[i, idx + 1]],
        )

    def set_node_state(self, i: int, node: KinonState) -> None:
        idx = np.flatnonzero(self.network.live[i])
        if len(idx) != node.degree:
            raise ValueError(f"node {i} has degree {len(idx)}, state has {node.degree}")
        self.storage[i] = node.storage_out
        self.inputs[i, :] = 0.0
        self.inputs[i, idx] = node.inputs
        self.outputs[i, :] = 0.0
        self.outputs[i, idx] = node.outputs
        self.potentials[i, :] = 0.0
        self.potentials[i, 0] = node.potentials[0]
        self.potentials[i, idx + 1] = node.potentials[1:]


@dataclass(eq=False)
class FieldSnapshot:
    """Per-node mass values at one cycle, for rendering and analytics."""

    network: Network
    cycle: int
    values: np.ndarray


@dataclass(eq=False)
class CycleStats:
    """Per-cycle totals: the macrodynamic index numerators, the conservation
    measurement after propagation, and the post-collision mass field."""

    output_total: float
    turnover_abs: float
    measured_total: float
    field: np.ndarray


def init_singularity(network: Network, omega: float, position="center") -> LatticeState:
    """All quantity in one node's storage; everything else zero."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    if position == "center":
        position = ((network.width - 1) // 2, (network.height - 1) // 2)
    if isinstance(position, int):
        position = (position, 0)
    x, y = int(position[0]), int(position[1])
    if not (0 <= x < network.width and 0 <= y < network.height):
        raise ValueError(f"seed position {position} outside {network.width}x{network.height} grid")
    state = LatticeState.zeros(network)
    state.storage[network.node_index(x, y)] = omega
    return state


def node_mass(storage: np.ndarray, outputs: np.ndarray) -> np.ndarray:
    stacked = np.empty((storage.shape[0], outputs.shape[1] + 1), dtype=np.float64)
    stacked[:, 0] = storage
    stacked[:, 1:] = outputs
    return comp_sum_cols(stacked)


def _psi_array(spec: PsiSpec, potentials: np.ndarray) -> np.ndarray:
    if spec.kind == "identity":
        return potentials
    if spec.kind == "log1p":
        return np.log1p(potentials)
    return np.power(potentials, spec.gamma)


def _collide_rows(lo: int, hi: int, gathered: np.ndarray, measured: np.ndarray,
                  live: np.ndarray, params: ModelParams,
                  storage: np.ndarray, inputs: np.ndarray, outputs: np.ndarray) -> None:
    """Collision for a contiguous row stripe; all operations are row-local."""
    x = gathered[lo:hi]
    psi = measured[lo:hi]
    lv = live[lo:hi]
    s_in = comp_sum_cols(x)
    total = comp_sum_cols(psi)
    ranks = np.zeros_like(psi)
    np.divide(psi, total[:, None], out=ranks, where=total[:, None] > 0.0)
    rates = np.maximum(0.0, 1.0 - params.kappa * ranks)
    rates[:, 1:][~lv] = 0.0
    s_shunt = params.eta * s_in
    s_dist = s_in - s_shunt
    d_total = comp_sum_cols(rates)
    raw = np.zeros_like(lv, dtype=np.float64)
    np.divide(rates[:, 1:] * s_dist[:, None], d_total[:, None],
              out=raw, where=d_total[:, None] > 0.0)
    outs = np.where(raw >= params.theta, raw, 0.0)
    dist_sum, dist_corr = comp_sum_cols_parts(outs)
    new_storage = (s_in - dist_sum) - dist_corr
    np.maximum(new_storage, 0.0, out=new_storage)
    storage[lo:hi] = new_storage
    inputs[lo:hi] = 0.0
    outputs[lo:hi] = outs


_pools: dict[int, ThreadPoolExecutor] = {}


def _pool(workers: int) -> ThreadPoolExecutor:
    pool = _pools.get(workers)
    if pool is None:
        pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="kinon-stripe")
        _pools[workers] = pool
    return pool


def _stripes(n: int, workers: int) -> list[tuple[int, int]]:
    base, extra = divmod(n, workers)
    out, lo = [], 0
    for w in range(workers):
        hi = lo + base + (1 if w < extra else 0)
        if hi > lo:
            out.append((lo, hi))
        lo = hi
    return out


def collide_all(state: LatticeState, params: ModelParams, workers: int = 1) -> None:
    """Collision phase: every node's conservative rank transform, in place.

    Channel potentials get their once-per-cycle leaky update here.  With
    ``workers`` > 1 the rows are processed in contiguous stripes on a thread
    pool; results are bit-identical to the serial path because every
    operation is row-local and value-deterministic.
    """
    net = state.network
    n, d = net.n_nodes, net.link_slots
    gathered = np.empty((n, d + 1), dtype=np.float64)
    gathered[:, 0] = state.storage
    gathered[:, 1:] = state.inputs
    state.potentials *= params.lam
    state.potentials += gathered
    measured = _psi_array(params.psi, state.potentials)
    if workers <= 1:
        _collide_rows(0, n, gathered, measured, net.live, params,
                      state.storage, state.inputs, state.outputs)
        return
    pool = _pool(workers)
    futures = [
        pool.submit(_collide_rows, lo, hi, gathered, measured, net.live, params,
                    state.storage, state.inputs, state.outputs)
        for lo, hi in _stripes(n, workers)
    ]
    for f in futures:
        f.result()


def propagate(state: LatticeState) -> None:
    """Propagation phase: move every output into the reciprocal input slot.

    A pure permutation of buffer contents; each input slot has exactly one
    writer by reciprocity, so total quantity is conserved bit-exactly.
    """
    flat_out = state.outputs.reshape(-1)
    state.inputs.reshape(-1)[:] = flat_out[state.network.gather_index]
    state.outputs[:] = 0.0


def gather_arrivals(network: Network, outputs: np.ndarray) -> np.ndarray:
    """The inputs that propagation would deliver for the given outputs."""
    return outputs.reshape(-1)[network.gather_index].reshape(outputs.shape)


def step(state: LatticeState, params: ModelParams, workers: int = 1) -> CycleStats:
    """One synchronous cycle: collide every node, then propagate.

    The returned stats are evaluated at the post-collision instant (output
    buffers populated, inputs consumed), except ``measured_total`` which
    audits the grand total after propagation.  All reductions here run on
    the full assembled arrays, so they are identical with and without worker
    striping.
    """
    storage_before = state.storage.copy()
    inputs_before = state.inputs.copy()
    collide_all(state, params, workers)
    output_total = float(np.sum(state.outputs))
    turnover = float(
        np.sum(np.abs(state.storage - storage_before))
        + np.sum(np.abs(inputs_before - state.outputs))
    )
    field = node_mass(state.storage, state.outputs)
    propagate(state)
    measured = float(np.sum(state.storage) + np.sum(state.inputs))
    return CycleStats(
        output_total=output_total,
        turnover_abs=turnover,
        measured_total=measured,
        field=field,
    )


def collide_each(state: LatticeState, params: ModelParams, order) -> None:
    """Collide nodes one at a time through the scalar pipeline, in the given
    evaluation order.  Exists to assert order independence and scalar/array
    equivalence; results are bit-identical to ``collide_all``."""
    from .core import collide

    for i in order:
        node = state.node_state(int(i))
        collide(node, params)
        state.set_node_state(int(i), node)
