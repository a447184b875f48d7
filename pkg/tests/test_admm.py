import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from csiadmm import admm, coding, data
from csiadmm.admm import (HyperParams, batch_loss, dgd_step, effective_batch, extra_step,
                          local_gradient, metropolis_weights, schedules, validate_params,
                          x_objective, x_update, y_update, z_update)
from csiadmm.data import Dataset
from csiadmm.errors import BadMixingMatrix, EmptyBatch, IndivisibleBatch
from csiadmm.experiments import build_setup
from csiadmm.metrics import Reference, solve_reference
from csiadmm.simkernel import LatencyModel
from csiadmm.topology import Cycle, Graph

from conftest import convergence_config


def fd_gradient(x, batch, ds, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (batch_loss(x + e, batch, ds) - batch_loss(x - e, batch, ds)) / (2 * h)
    return g


def test_gradient_zero_at_exact_solution():
    ds, x_o = data.synthesize_least_squares(30, 0.0, seed=1)
    np.testing.assert_allclose(local_gradient(x_o, np.arange(10), ds), 0, atol=1e-14)


def test_gradient_single_sample():
    ds = Dataset(np.array([[1.0, 0, 0]]), np.array([2.0]))
    np.testing.assert_array_equal(local_gradient(np.zeros((3, 1)), [0], ds), [[-2], [0], [0]])


def test_empty_batch():
    ds = Dataset(np.ones((2, 3)), np.ones(2))
    with pytest.raises(EmptyBatch):
        local_gradient(np.zeros((3, 1)), [], ds)


def test_gradient_matches_finite_differences_multi_output():
    rng = np.random.default_rng(2)
    ds = Dataset(rng.standard_normal((50, 4)), rng.standard_normal((50, 3)))
    x = rng.standard_normal((4, 3))
    batch = rng.choice(50, 17, replace=False)
    g = local_gradient(x, batch, ds)
    np.testing.assert_allclose(g, fd_gradient(x, batch, ds), rtol=1e-5, atol=1e-8)


def test_x_update_examples():
    rng = np.random.default_rng(3)
    x, z, G = (rng.standard_normal((3, 2)) for _ in range(3))
    zero = np.zeros((3, 2))
    np.testing.assert_allclose(x_update(x, zero, z, zero, 0.7, 0.0), z)
    np.testing.assert_allclose(x_update(x, G, x, G, 1.0, 1.0), x)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), rho=st.floats(0.05, 3), tau=st.floats(0, 3))
def test_x_update_minimises_objective(seed, rho, tau):
    rng = np.random.default_rng(seed)
    x, y, z, G = (rng.standard_normal((3, 2)) for _ in range(4))
    best = x_update(x, y, z, G, rho, tau)
    f0 = x_objective(best, x, y, z, G, rho, tau)
    for _ in range(100):
        pert = best + 1e-3 * rng.standard_normal(best.shape)
        assert f0 <= x_objective(pert, x, y, z, G, rho, tau)
    res = minimize(lambda v: x_objective(v.reshape(3, 2), x, y, z, G, rho, tau),
                   np.zeros(6), method="BFGS", options={"gtol": 1e-11})
    assert np.linalg.norm(best - res.x.reshape(3, 2)) <= 1e-5 * (1 + np.linalg.norm(best))


def test_y_update_examples():
    rng = np.random.default_rng(4)
    y, z = rng.standard_normal((2, 3, 1))
    np.testing.assert_array_equal(y_update(y, z, z, 0.5, 2.0), y)
    np.testing.assert_array_equal(y_update(y, z, z + 1, 0.5, 0.0), y)
    E = np.ones((3, 1))
    np.testing.assert_array_equal(y_update(np.zeros((3, 1)), E, np.zeros((3, 1)), 2.0, 0.5), E)


def test_z_update_examples():
    rng = np.random.default_rng(5)
    z, dx = rng.standard_normal((2, 3, 1))
    zero = np.zeros((3, 1))
    np.testing.assert_array_equal(z_update(z, zero, zero, 4, 0.3), z)
    np.testing.assert_allclose(z_update(z, dx, zero, 1, 1.0), z + dx)


def test_schedules():
    assert schedules(1, 0.3, 7.0) == (0.3, 7.0)
    N = 5
    tau, gamma = schedules(4, 1 / N, N)
    assert tau == pytest.approx(2 / N) and gamma == pytest.approx(N / 2)
    assert schedules(100, 0.5, 1.0)[0] == pytest.approx(5.0)


def test_validate_params_examples():
    ok = HyperParams(rho=0.1, c_tau=0.1, c_gamma=5, M=1, mu_estimate=1.0)
    assert validate_params(ok, 5) == []
    weak = HyperParams(rho=0.1, c_tau=0.1, c_gamma=5, M=1, mu_estimate=0.2)
    assert any("mu > 3*rho" in v for v in validate_params(weak, 5))
    boundary = HyperParams(rho=0.1, c_tau=2 / 30, c_gamma=5, M=1, mu_estimate=1.0)
    assert any("c_tau" in v for v in validate_params(boundary, 5))
    big_gamma = HyperParams(rho=0.1, c_tau=0.1, c_gamma=10, M=1, mu_estimate=1.0)
    assert any("c_gamma < 1/rho" in v for v in validate_params(big_gamma, 5))
    small_gamma = HyperParams(rho=0.1, c_tau=0.1, c_gamma=1.4, M=1, mu_estimate=1.0)
    assert any("1/(mu-3rho)" in v for v in validate_params(small_gamma, 5))


def test_effective_batch():
    assert effective_batch(40, 1) == 20
    assert effective_batch(40, 0) == 40
    assert effective_batch(40, 3) == 10
    with pytest.raises(IndivisibleBatch):
        effective_batch(40, 2)


# --- runs ----------------------------------------------------------------------

def test_zero_iterations_empty_trace(small_cfg):
    s = build_setup(small_cfg.replace(iterations=0))
    assert len(s.run()) == 0


def test_single_agent_full_batch_converges():
    ds, x_o = data.synthesize_least_squares(60, 0.0, seed=6)
    shard = data.allocate(ds, 1)
    hp = HyperParams(rho=0.2, c_tau=0.5, c_gamma=3.0, M=60, iterations=2000)
    trace = admm.run_si_admm(None, Cycle((1,), "hamiltonian"), [shard], hp,
                             reference=Reference(x_o))
    assert trace[-1].accuracy <= 1e-3


def test_comm_units_equal_iterations(small_cfg):
    trace = build_setup(small_cfg).run()
    np.testing.assert_array_equal(trace.column("comm_units"), np.arange(1, len(trace) + 1))
    assert np.all(np.diff(trace.column("sim_time_s")) > 0)


def test_relay_hops_cost_units_but_do_not_update():
    ds, x_o = data.synthesize_least_squares(300, 0.0, seed=7)
    parts = data.split_across_agents(ds, 3, seed=0)
    shards = [data.allocate(p, 2, agent=i + 1) for i, p in enumerate(parts)]
    g = Graph.from_edges(3, [(1, 2), (1, 3)])
    from csiadmm.topology import shortest_path_cycle
    cycle = shortest_path_cycle(g)
    hp = HyperParams(0.2, 0.5, 3.0, 10, iterations=8)
    updates = []
    for rec, state in admm.iterate(cycle, shards, hp, reference=solve_reference(parts), graph=g):
        updates.append(state.updates)
        assert rec.comm_units == rec.iteration
    # walk 1,2,(1),3 repeated: relay at positions 3 and 7
    assert updates == [1, 2, 2, 3, 4, 5, 5, 6]


def test_z_identity_and_inactive_freeze(small_cfg):
    s = build_setup(small_cfg.replace(iterations=200))
    prev_x = prev_y = None
    rho = s.hp.rho
    for rec, state in admm.iterate(s.cycle, s.shards, s.hp, reference=s.reference):
        assert state.z_identity_gap(rho) <= 1e-9 * (1 + np.linalg.norm(state.z))
        if prev_x is not None:
            others = [j for j in range(5) if j != rec.active_agent - 1]
            assert np.array_equal(prev_x[others], state.x[others])
            assert np.array_equal(prev_y[others], state.y[others])
        prev_x, prev_y = state.x.copy(), state.y.copy()


def test_coded_identity_matches_uncoded_bitwise(small_cfg):
    base = build_setup(small_cfg)
    coded = build_setup(small_cfg.replace(algorithm="csi-admm", S=0))
    assert base.run().records == coded.run().records


def test_coded_gradient_matches_uncoded_average():
    ds, _ = data.synthesize_least_squares(900, 0.5, seed=8)
    parts = data.split_across_agents(ds, 3, seed=1)
    plan = coding.preset_k3_s1()
    shards = [data.allocate(p, 3, 1, coded=True, agent=i + 1) for i, p in enumerate(parts)]
    hp = HyperParams(0.2, 0.5, 3.0, M=24, M_bar=12, iterations=30)
    cycle = Cycle((1, 2, 3), "hamiltonian")
    prev_x = np.zeros((3, 3, 1))
    for rec, state in admm.iterate(cycle, shards, hp, plan, reference=solve_reference(parts)):
        i = rec.active_agent - 1
        batch = data.select_batch(rec.cycle, shards[i], 12)
        samples = np.concatenate(batch.sub_batches)
        direct = local_gradient(prev_x[i], samples, shards[i].data)
        np.testing.assert_allclose(state.last_gradient, direct, rtol=1e-9, atol=1e-12)
        prev_x = state.x.copy()


@pytest.mark.parametrize("scheme", ["cyclic", "fractional"])
def test_coded_time_independent_of_straggler_delay(small_cfg, scheme):
    cfg = small_cfg.replace(algorithm="csi-admm", K=4, S=1, M=16, scheme=scheme, n_stragglers=1)
    times = {eps: build_setup(cfg.replace(epsilon=eps)).run()[-1].sim_time_s
             for eps in (0.01, 10.0)}
    assert times[0.01] == times[10.0]


def test_uncoded_time_grows_with_straggler_delay(small_cfg):
    cfg = small_cfg.replace(n_stragglers=1)
    t = [build_setup(cfg.replace(epsilon=e)).run()[-1].sim_time_s for e in (0.0, 0.01, 0.1)]
    assert t[0] < t[1] < t[2]


def test_random_straggler_policy_runs(small_cfg):
    cfg = small_cfg.replace(algorithm="csi-admm", K=3, S=1, M=12, n_stragglers=1,
                            straggler_policy="random")
    a = build_setup(cfg.replace(epsilon=0.05)).run()[-1].sim_time_s
    b = build_setup(cfg.replace(epsilon=5.0)).run()[-1].sim_time_s
    assert a == b


# --- baselines -------------------------------------------------------------------

def test_metropolis_weights_doubly_stochastic():
    g = Graph.from_edges(4, [(1, 2), (2, 3), (3, 4), (1, 3)])
    W = metropolis_weights(g)
    np.testing.assert_allclose(W.sum(axis=0), 1)
    np.testing.assert_allclose(W, W.T)
    assert W[0, 3] == 0


def test_dgd_identity_is_noop():
    X = np.random.default_rng(9).standard_normal((3, 2, 1))
    g = Graph.from_edges(3, [(1, 2), (2, 3)])
    np.testing.assert_array_equal(dgd_step(X, g, np.eye(3), 0.0, np.zeros_like(X)), X)


def test_dgd_fixed_point_at_consensus():
    g = Graph.from_edges(3, [(1, 2), (2, 3)])
    X = np.broadcast_to(np.array([[1.0], [2.0]]), (3, 2, 1)).copy()
    out = dgd_step(X, g, metropolis_weights(g), 0.3, np.zeros_like(X))
    np.testing.assert_allclose(out, X, atol=1e-15)


def test_dgd_two_agents_average():
    g = Graph.from_edges(2, [(1, 2)])
    X = np.array([[[1.0]], [[3.0]]])
    out = dgd_step(X, g, np.full((2, 2), 0.5), 0.0, np.zeros_like(X))
    np.testing.assert_array_equal(out, [[[2.0]], [[2.0]]])


def test_bad_mixing_matrix():
    g = Graph.from_edges(3, [(1, 2), (2, 3)])
    with pytest.raises(BadMixingMatrix):
        dgd_step(np.zeros((3, 1, 1)), g, np.full((3, 3), 0.5), 0.1, np.zeros((3, 1, 1)))
    with pytest.raises(BadMixingMatrix):
        dgd_step(np.zeros((3, 1, 1)), g, np.full((3, 3), 1 / 3), 0.1, np.zeros((3, 1, 1)))


def test_extra_first_step_is_dgd_and_fixed_point():
    g = Graph.from_edges(3, [(1, 2), (2, 3)])
    W = metropolis_weights(g)
    Wt = (np.eye(3) + W) / 2
    rng = np.random.default_rng(10)
    X, G = rng.standard_normal((2, 3, 2, 1))
    np.testing.assert_array_equal(extra_step(X, W, Wt, 0.2, G), dgd_step(X, g, W, 0.2, G))
    C = np.broadcast_to(np.array([[1.0], [-1.0]]), (3, 2, 1)).copy()
    zero = np.zeros_like(C)
    np.testing.assert_allclose(extra_step(C, W, Wt, 0.2, zero, prev=(C, zero)), C, atol=1e-15)


def test_extra_converges_on_two_agents():
    ds, x_o = data.synthesize_least_squares(400, 0.0, seed=11)
    parts = data.split_across_agents(ds, 2, seed=0)
    g = Graph.from_edges(2, [(1, 2)])
    trace = admm.run_extra(g, parts, alpha=0.05, iterations=5000, reference=Reference(x_o))
    assert trace[-1].accuracy <= 1e-6


def test_gossip_comm_accounting():
    cfg = convergence_config(algorithm="dgd", iterations=5, n_samples=2000, n_test=100)
    s = build_setup(cfg)
    trace = s.run()
    np.testing.assert_array_equal(trace.column("comm_units"),
                                  2 * s.graph.n_edges * np.arange(1, 6))
