import logging

import numpy as np
import pytest

from piac import (ControllerState, DegenerateModel, GainConstraintError,
                  GainSchedule, NoControllers, Node, NodeKind, PowerNetwork,
                  ShapeError, decpiac_rhs, dpiac_rhs, gbpiac_rhs,
                  marginal_costs, optimal_dispatch, synchronized_frequency)
from conftest import make_machine_net


def two_node(alpha=(1.0, 1.0), injections=None):
    return make_machine_net(2, alpha=list(alpha), edges=[(1, 2, 1.0)],
                            injections=injections)


def test_gain_schedule_constraints():
    with pytest.raises(GainConstraintError):
        GainSchedule(k1=1.0, k2=3.9)
    with pytest.raises(GainConstraintError):
        GainSchedule(k1=0.0, k2=1.0)
    with pytest.raises(GainConstraintError):
        GainSchedule(k1=1.0, k2=4.0, k3=-1.0)
    g = GainSchedule.analytic(0.5, 2.0)
    assert g.k2 == 2.0 and g.analytic_mode
    assert not GainSchedule(k1=1.0, k2=5.0).analytic_mode


def test_gain_schedule_permissive_logs(caplog):
    with caplog.at_level(logging.WARNING):
        g = GainSchedule(k1=1.0, k2=3.0, strict=False)
    assert g.k2 == 3.0
    assert any("permissive" in r.message for r in caplog.records)


def test_gbpiac_equilibrium_is_fixed():
    net, _ = two_node()
    st = ControllerState.zeros("gbpiac", 2)
    d_eta, d_xi, u = gbpiac_rhs(st, np.zeros(2), net, GainSchedule.analytic(1.0))
    assert d_eta[0] == 0.0 and d_xi[0] == 0.0
    assert np.array_equal(u, [0.0, 0.0])


def test_gbpiac_direct_evaluation():
    net, _ = two_node()
    g = GainSchedule(k1=1.0, k2=4.0)
    st = ControllerState(eta=np.zeros(1), xi=np.zeros(1))
    d_eta, d_xi, u = gbpiac_rhs(st, np.array([0.1, 0.1]), net, g)
    assert d_eta[0] == pytest.approx(0.2, abs=1e-15)
    assert d_xi[0] == pytest.approx(-0.2, abs=1e-15)
    assert np.array_equal(u, [0.0, 0.0])


def test_gbpiac_broadcast_share():
    # alpha_s = 1/2, so u_i = (1/2) * 4 * xi_s = 2 each at xi_s = 1
    net, _ = two_node()
    g = GainSchedule(k1=1.0, k2=4.0)
    st = ControllerState(eta=np.zeros(1), xi=np.ones(1))
    _, _, u = gbpiac_rhs(st, np.array([0.1, 0.1]), net, g)
    assert np.allclose(u, [2.0, 2.0])
    mc = net.prices * u
    assert mc[0] == mc[1]


def test_gbpiac_equal_marginal_costs_heterogeneous_prices():
    # equal by construction: u_i carries 1/alpha_i, so alpha_i * u_i agree
    # to the last rounding of the product
    net, _ = two_node(alpha=(1.0, 3.0))
    g = GainSchedule.analytic(0.7)
    st = ControllerState(eta=np.array([0.3]), xi=np.array([-1.2]))
    _, _, u = gbpiac_rhs(st, np.array([0.01, -0.02]), net, g)
    mc = net.prices * u
    assert abs(mc[0] - mc[1]) <= 4 * np.finfo(float).eps * abs(mc[0])


def test_dpiac_consensus_term():
    net, comm = two_node()
    g = GainSchedule(k1=1.0, k2=4.0, k3=1.0)
    st = ControllerState(eta=np.zeros(2), xi=np.array([1.0, 0.0]))
    d_eta, d_xi, u = dpiac_rhs(st, np.zeros(2), net, comm, g)
    assert np.allclose(d_eta, [4.0, -4.0])
    assert np.allclose(u, [4.0, 0.0])


def test_dpiac_consensus_sums_to_zero():
    rng = np.random.default_rng(3)
    net, comm = make_machine_net(5, edges=[(1, 2, 1.3), (2, 3, 0.4), (3, 4, 2.0),
                                           (4, 5, 1.1), (1, 5, 0.7)],
                                 alpha=[1.0, 2.0, 0.5, 1.5, 1.0])
    g = GainSchedule(k1=0.5, k2=2.0, k3=3.0)
    st = ControllerState(eta=rng.normal(size=5), xi=rng.normal(size=5))
    om = rng.normal(size=5)
    d_eta, _, _ = dpiac_rhs(st, om, net, comm, g)
    d_eta0, _, _ = decpiac_rhs(st, om, net, g)
    # coordination reshuffles the accumulated imbalance, never creates any
    assert abs(np.sum(d_eta) - np.sum(d_eta0)) <= 1e-12


def test_dpiac_k3_zero_equals_decpiac():
    rng = np.random.default_rng(11)
    net, comm = make_machine_net(4, m=[1.0, 2.0, 0.5, 1.5], d=[1.0, 0.3, 2.0, 1.0],
                                 alpha=[1.0, 2.0, 1.0, 0.5],
                                 edges=[(1, 2, 1.0), (2, 3, 2.0), (3, 4, 0.5)])
    g0 = GainSchedule(k1=0.5, k2=2.0, k3=0.0)
    for _ in range(5):
        st = ControllerState(eta=rng.normal(size=4), xi=rng.normal(size=4))
        om = rng.normal(size=4)
        a = dpiac_rhs(st, om, net, comm, g0)
        b = decpiac_rhs(st, om, net, g0)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)


def test_rhs_shape_errors():
    net, comm = two_node()
    g = GainSchedule.analytic(1.0)
    st = ControllerState.zeros("dpiac", 2)
    with pytest.raises(ShapeError):
        dpiac_rhs(st, np.zeros(3), net, comm, g)
    with pytest.raises(ShapeError):
        gbpiac_rhs(st, np.zeros(2), net, g)   # central state must be scalar


def test_optimal_dispatch_examples():
    net, _ = two_node(alpha=(1.0, 2.0), injections=[2.0, 1.0])   # P_s = 3
    u = optimal_dispatch(net)
    assert np.allclose(u, [-2.0, -1.0])
    net0, _ = two_node(injections=[0.5, -0.5])
    assert np.allclose(optimal_dispatch(net0), [0.0, 0.0])
    net3, _ = make_machine_net(3, injections=[1.0, 1.0, 1.0],
                               edges=[(1, 2, 1.0), (2, 3, 1.0)])
    assert np.allclose(optimal_dispatch(net3), [-1.0, -1.0, -1.0])


def test_optimal_dispatch_kkt():
    rng = np.random.default_rng(7)
    for _ in range(10):
        n = int(rng.integers(2, 8))
        alpha = np.exp(rng.uniform(-1, 1, size=n))
        inj = rng.normal(size=n)
        net, _ = make_machine_net(n, alpha=alpha, injections=inj)
        u = optimal_dispatch(net)
        mc = alpha * u
        p_s = inj.sum()
        assert np.abs(mc - mc[0]).max() <= 1e-12 * max(1.0, np.abs(mc[0]))
        assert abs(u.sum() + p_s) <= 1e-12 * max(1.0, abs(p_s))


def test_dispatch_no_controllers():
    net = PowerNetwork(nodes=(Node(id=1, kind=NodeKind.PASSIVE),
                              Node(id=2, kind=NodeKind.PASSIVE)),
                       edges=((1, 2, 1.0),))
    with pytest.raises(NoControllers):
        optimal_dispatch(net)


def test_synchronized_frequency():
    net, _ = two_node(injections=[1.0, -0.5])
    assert synchronized_frequency(net, np.zeros(2)) == pytest.approx(0.25)
    u = optimal_dispatch(net)
    assert synchronized_frequency(net, u) == pytest.approx(0.0, abs=1e-15)
    net0, _ = two_node()
    assert synchronized_frequency(net0, np.zeros(2)) == 0.0


def test_synchronized_frequency_degenerate():
    net = PowerNetwork(nodes=(Node(id=1, kind=NodeKind.PASSIVE),
                              Node(id=2, kind=NodeKind.PASSIVE)),
                       edges=((1, 2, 1.0),))
    with pytest.raises(DegenerateModel):
        synchronized_frequency(net, np.zeros(0))


def test_marginal_costs():
    net, _ = two_node(alpha=(1.0, 2.0))
    g = GainSchedule(k1=1.0, k2=4.0)
    assert np.array_equal(marginal_costs(np.zeros(2), net, g), [0.0, 0.0])
    assert np.allclose(marginal_costs(np.array([1.0, 0.5]), net, g), [4.0, 4.0])
    net1, _ = two_node()
    assert np.allclose(marginal_costs(np.array([1.0, 0.0]), net1, g), [4.0, 0.0])
    with pytest.raises(ShapeError):
        marginal_costs(np.zeros(3), net, g)
