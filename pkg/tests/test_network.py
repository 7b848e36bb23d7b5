import numpy as np
import pytest

from kinonsim.core import ModelParams, PsiSpec
from kinonsim.network import (
    LatticeState,
    Network,
    build_grid,
    collide_all,
    collide_each,
    gather_arrivals,
    init_singularity,
    node_mass,
    propagate,
    step,
    validate_balanced,
)


def random_state(net, seed=0, potentials=True):
    rng = np.random.default_rng(seed)
    state = LatticeState.zeros(net)
    state.storage[:] = rng.uniform(0, 10, net.n_nodes)
    state.inputs[net.live] = rng.uniform(0, 5, int(net.live.sum()))
    if potentials:
        state.potentials[:, 0] = rng.uniform(0, 3, net.n_nodes)
        live_cols = np.concatenate(
            [np.ones((net.n_nodes, 1), dtype=bool), net.live], axis=1)
        state.potentials[~live_cols] = 0.0
    return state


# -- construction ---------------------------------------------------------------

def test_d4_periodic_is_regular():
    net = build_grid(4, 3, 3, "periodic")
    assert net.n_nodes == 9
    assert (net.degrees == 4).all()
    assert validate_balanced(net).ok


def test_d4_bordered_degrees():
    net = build_grid(4, 3, 3, "bordered")
    degrees = net.degrees.reshape(3, 3)
    assert degrees[0, 0] == degrees[0, 2] == degrees[2, 0] == degrees[2, 2] == 2
    assert degrees[0, 1] == degrees[1, 0] == degrees[1, 2] == degrees[2, 1] == 3
    assert degrees[1, 1] == 4
    assert validate_balanced(net).ok


def test_d8_degrees():
    periodic = build_grid(8, 4, 4, "periodic")
    assert (periodic.degrees == 8).all()
    assert validate_balanced(periodic).ok
    bordered = build_grid(8, 5, 5, "bordered")
    degrees = bordered.degrees.reshape(5, 5)
    assert degrees[0, 0] == 3
    assert degrees[0, 2] == 5
    assert degrees[2, 2] == 8
    assert validate_balanced(bordered).ok


def test_d2_segment_and_ring():
    seg = build_grid(2, 5, boundary="bordered")
    assert list(seg.degrees) == [1, 2, 2, 2, 1]
    assert validate_balanced(seg).ok
    ring = build_grid(2, 5, boundary="periodic")
    assert (ring.degrees == 2).all()


def test_build_grid_rejections():
    with pytest.raises(ValueError):
        build_grid(6, 5, 5)
    with pytest.raises(ValueError):
        build_grid(4, 2, 5)
    with pytest.raises(ValueError):
        build_grid(4, 5, 2)
    with pytest.raises(ValueError):
        build_grid(2, 5, 5)
    with pytest.raises(ValueError):
        build_grid(4, 5, 5, "reflecting")


def test_validate_balanced_reports_dangling_link():
    net = build_grid(4, 3, 3, "bordered")
    broken = Network(
        net.degree_class, net.width, net.height, net.boundary,
        net.neighbors.copy(), net.reciprocal.copy(), net.live.copy(),
    )
    # sever one side of a reciprocal pair
    broken.live[4, 0] = False
    report = validate_balanced(broken)
    assert not report.ok
    assert any("reciprocal" in p or "in-degree" in p for p in report.problems)


def _two_node_pair():
    neighbors = np.array([[1], [0]], dtype=np.int64)
    reciprocal = np.zeros((2, 1), dtype=np.int64)
    live = np.ones((2, 1), dtype=bool)
    return Network(2, 2, 1, "bordered", neighbors, reciprocal, live)


# -- propagation ----------------------------------------------------------------

def test_propagate_swaps_node_pair():
    net = _two_node_pair()
    assert validate_balanced(net).ok
    state = LatticeState.zeros(net)
    state.outputs[:, 0] = [5.0, 5.0]
    propagate(state)
    assert list(state.inputs[:, 0]) == [5.0, 5.0]
    assert not state.outputs.any()


def test_propagate_zero_outputs_is_noop():
    net = build_grid(4, 4, 4)
    state = random_state(net)
    state.outputs[:] = 0.0
    before = state.inputs.copy()
    propagate(state)
    assert np.array_equal(state.inputs, before * 0.0 + state.inputs)
    assert not state.outputs.any()


def test_propagate_is_exact_permutation():
    net = build_grid(8, 5, 6, "bordered")
    state = LatticeState.zeros(net)
    state.storage[:] = np.random.default_rng(3).uniform(0, 10, net.n_nodes)
    state.outputs[net.live] = np.random.default_rng(7).uniform(0, 4, int(net.live.sum()))
    before = np.sort(state.outputs[net.live])
    total_before = state.total_mass()
    propagate(state)
    assert np.array_equal(np.sort(state.inputs[net.live]), before)
    assert state.total_mass() == total_before


def test_gather_arrivals_is_involution():
    net = build_grid(4, 5, 5, "bordered")
    rng = np.random.default_rng(11)
    outputs = np.zeros((net.n_nodes, net.link_slots))
    outputs[net.live] = rng.uniform(0, 1, int(net.live.sum()))
    assert np.array_equal(gather_arrivals(net, gather_arrivals(net, outputs)), outputs)


# -- initialization ---------------------------------------------------------------

def test_singularity_density():
    net = build_grid(4, 200, 200)
    state = init_singularity(net, 20000.0, "center")
    assert state.total_mass() == 20000.0
    assert state.storage.sum() / net.n_nodes == 0.5
    small = init_singularity(build_grid(4, 64, 64), 0.5 * 64 * 64, "center")
    assert small.storage.sum() / (64 * 64) == 0.5


def test_singularity_rejections():
    net = build_grid(4, 5, 5)
    with pytest.raises(ValueError):
        init_singularity(net, 0.0, "center")
    with pytest.raises(ValueError):
        init_singularity(net, 10.0, (5, 0))
    with pytest.raises(ValueError):
        init_singularity(net, 10.0, (0, -1))


# -- stepping ---------------------------------------------------------------------

def test_uniform_field_stays_uniform():
    net = build_grid(4, 6, 6, "periodic")
    state = LatticeState.zeros(net)
    state.storage[:] = 0.5
    params = ModelParams(kappa=3.0, lam=0.5, eta=0.1, theta=0.01)
    for cyc in range(5):
        stats = step(state, params)
        assert np.all(stats.field == stats.field[0])


def test_locality_from_singularity():
    net = build_grid(4, 21, 21, "periodic")
    state = init_singularity(net, 100.0, (10, 10))
    params = ModelParams(kappa=3.0, lam=1.0)
    xs, ys = np.meshgrid(np.arange(21), np.arange(21))
    manhattan = np.abs(xs - 10) + np.abs(ys - 10)
    torus = np.minimum(manhattan, 21 - np.abs(xs - 10) + np.abs(ys - 10))
    for cycle in range(1, 8):
        stats = step(state, params)
        beyond = stats.field.reshape(21, 21)[torus > cycle]
        assert not beyond.any()


def test_one_step_reaches_only_neighbors():
    net = build_grid(4, 9, 9, "periodic")
    state = init_singularity(net, 10.0, (4, 4))
    step(state, ModelParams(kappa=3.0))
    # kappa=3 zeroes the saturated storage rate, so the whole quantity moves
    # into the four neighbor slots in one cycle
    holders = np.flatnonzero(state.storage + state.inputs.sum(axis=1) > 0)
    expected = {net.node_index(4, 3), net.node_index(4, 5),
                net.node_index(3, 4), net.node_index(5, 4)}
    assert set(holders.tolist()) == expected
    assert np.allclose(state.inputs[sorted(expected)].sum(axis=1), 2.5)


def test_identical_runs_produce_identical_stats():
    net = build_grid(8, 8, 8, "bordered")
    params = ModelParams(kappa=5.0, lam=0.9, eta=0.2, theta=0.05)

    def run():
        state = init_singularity(net, 32.0, "center")
        return [step(state, params) for _ in range(30)]

    a, b = run(), run()
    for sa, sb in zip(a, b):
        assert sa.output_total == sb.output_total
        assert sa.turnover_abs == sb.turnover_abs
        assert sa.measured_total == sb.measured_total
        assert np.array_equal(sa.field, sb.field)


@pytest.mark.parametrize("psi", [PsiSpec(), PsiSpec("log1p")])
def test_scalar_and_array_paths_agree(psi):
    net = build_grid(8, 6, 5, "bordered")
    params = ModelParams(kappa=4.0, lam=0.6, eta=0.15, theta=0.2, psi=psi)
    base = random_state(net, seed=5)
    vec = base.copy()
    collide_all(vec, params)
    for order_seed in (0, 1):
        seq = base.copy()
        order = np.random.default_rng(order_seed).permutation(net.n_nodes)
        collide_each(seq, params, order)
        assert np.array_equal(vec.storage, seq.storage)
        assert np.array_equal(vec.outputs, seq.outputs)
        assert np.array_equal(vec.potentials, seq.potentials)


def test_worker_striping_is_bit_identical():
    net = build_grid(4, 16, 16)
    params = ModelParams(kappa=3.0, lam=0.5, eta=0.1, theta=0.01)
    serial = init_singularity(net, 128.0, "center")
    striped = serial.copy()
    for _ in range(20):
        a = step(serial, params, workers=1)
        b = step(striped, params, workers=3)
        assert np.array_equal(a.field, b.field)
        assert a.measured_total == b.measured_total
    assert np.array_equal(serial.storage, striped.storage)
    assert np.array_equal(serial.inputs, striped.inputs)


def test_node_state_round_trip():
    net = build_grid(4, 4, 4, "bordered")
    state = random_state(net, seed=9)
    state.outputs[net.live] = 1.5
    for i in (0, 5, 15):
        node = state.node_state(i)
        clone = state.copy()
        clone.set_node_state(i, node)
        assert np.array_equal(clone.storage, state.storage)
        assert np.array_equal(clone.inputs, state.inputs)
        assert np.array_equal(clone.outputs, state.outputs)
        assert np.array_equal(clone.potentials, state.potentials)


def test_node_mass_matches_field_values():
    net = build_grid(4, 4, 4)
    state = random_state(net, seed=13)
    state.outputs[net.live] = 0.25
    assert np.array_equal(state.field_values(),
                          node_mass(state.storage, state.outputs))
