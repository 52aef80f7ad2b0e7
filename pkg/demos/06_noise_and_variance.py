"""The stochastic meaning of the squared H2 norm: under white-noise load
disturbances of strength sigma at every node, the stationary variance of
the frequency deviations is sigma^2 times the norm.

Run: python demos/06_noise_and_variance.py   (about half a minute)
"""

from piac import (CommunicationGraph, GainSchedule, Node, NodeKind,
                  OutputSelector, PowerNetwork, Scenario, build_laplacian,
                  h2_dpiac_analytic, simulate_stochastic, spectral_decompose)

nodes = tuple(Node(id=i, kind=NodeKind.MACHINE, inertia=1.0, damping=1.0,
                   price=1.0) for i in range(1, 6))
edges = tuple((i, i % 5 + 1, 1.0) for i in range(1, 6))
net = PowerNetwork(nodes=nodes, edges=edges)
comm = CommunicationGraph(weights=edges)
gains = GainSchedule.analytic(1.0, 1.0)
spec = spectral_decompose(build_laplacian(net))

sigma = 0.01
scen = Scenario.white_noise({i: sigma for i in range(1, 6)}, seed=7,
                            t_end=250.0, h=1e-3, paths=10, burn_in=50.0)
print(f"Euler-Maruyama, {scen.paths} paths x {scen.t_end} s, "
      f"burn-in {scen.burn_in} s, step {scen.h} s, seed {scen.seed}")
traces, met = simulate_stochastic(net, comm, "dpiac", gains, scen,
                                  model="linear")

pred_s = sigma ** 2 * h2_dpiac_analytic(
    spec, 1, 1, 1, 1, OutputSelector.FREQUENCY_DEVIATION).value
pred_c = 0.5 * sigma ** 2 * h2_dpiac_analytic(
    spec, 1, 1, 1, 1, OutputSelector.CONTROL_INPUT).value
print(f"\nE[w'w]  measured {met.E_S:.4e} +/- {met.E_S_se:.1e}")
print(f"        predicted  {pred_s:.4e}  (sigma^2 * frequency norm)")
print(f"E_C     measured {met.E_C:.4e} +/- {met.E_C_se:.1e}")
print(f"        predicted  {pred_c:.4e}  (sigma^2 * input norm / 2)")
print(f"\nagreement: {abs(met.E_S - pred_s) / met.E_S_se:.2f} standard errors")
