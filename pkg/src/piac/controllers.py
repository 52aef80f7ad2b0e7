"""Secondary frequency control laws and dispatch diagnostics.

Three laws share the same two-stage integrator structure; they differ in
how the estimated power imbalance is allocated:

* gather-broadcast (``gbpiac``): one central pair of states, allocation by
  inverse price,
* distributed (``dpiac``): local pairs with a consensus term on the
  marginal costs over a communication graph,
* decentralized (``decpiac``): local pairs, no coordination.

All right-hand-side functions are pure: they map (state, frequency
deviations, network, gains) to derivatives plus the control input.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateModel, GainConstraintError, NoControllers,
                     ShapeError)
from .netmodel import CommunicationGraph, NodeKind, PowerNetwork

__all__ = [
    "GainSchedule",
    "ControllerState",
    "LAWS",
    "gbpiac_rhs",
    "dpiac_rhs",
    "decpiac_rhs",
    "optimal_dispatch",
    "synchronized_frequency",
    "marginal_costs",
]

log = logging.getLogger(__name__)

LAWS = ("gbpiac", "dpiac", "decpiac")


@dataclass(frozen=True)
class GainSchedule:
    """Control gains k1 > 0, k2 > 0, k3 >= 0.

    The two-stage integrator avoids input overshoot when ``k2 >= 4*k1``;
    strict mode (default) rejects schedules below that line, permissive mode
    only logs. The closed-form transient results additionally require
    ``k2 == 4*k1`` exactly, exposed here as ``analytic_mode``.
    """

    k1: float
    k2: float
    k3: float = 0.0
    strict: bool = True

    def __post_init__(self):
        if not self.k1 > 0:
            raise GainConstraintError(f"k1 must be positive, got {self.k1}")
        if not self.k2 > 0:
            raise GainConstraintError(f"k2 must be positive, got {self.k2}")
        if self.k3 < 0:
            raise GainConstraintError(f"k3 must be non-negative, got {self.k3}")
        if self.k2 < 4.0 * self.k1:
            if self.strict:
                raise GainConstraintError(
                    f"k2 = {self.k2} violates k2 >= 4*k1 = {4.0 * self.k1}")
            log.warning("gain schedule with k2=%g < 4*k1=%g accepted in permissive mode",
                        self.k2, 4.0 * self.k1)

    @classmethod
    def analytic(cls, k1: float, k3: float = 0.0) -> "GainSchedule":
        """Schedule with k2 pinned to 4*k1, as the closed forms assume."""
        return cls(k1=k1, k2=4.0 * k1, k3=k3)

    @property
    def analytic_mode(self) -> bool:
        return self.k2 == 4.0 * self.k1


@dataclass(frozen=True)
class ControllerState:
    """Controller integrator pair.

    Central law: ``eta``/``xi`` have shape (1,). Local laws: shape
    (n_controllers,), aligned with ``net.controller_ids``.
    """

    eta: np.ndarray
    xi: np.ndarray

    @classmethod
    def zeros(cls, law: str, n_controllers: int) -> "ControllerState":
        # zero start encodes "no accumulated imbalance yet"
        k = 1 if law == "gbpiac" else n_controllers
        return cls(eta=np.zeros(k), xi=np.zeros(k))


def _check_omega(omega, net: PowerNetwork) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    nk = len(net.controller_ids)
    if omega.shape != (nk,):
        raise ShapeError(f"omega must have shape ({nk},), got {omega.shape}")
    return omega


def gbpiac_rhs(state: ControllerState, omega, net: PowerNetwork, gains: GainSchedule):
    """Gather-broadcast update.

    ``omega`` runs over the controller set in ``net.controller_ids`` order.
    Returns ``(d_eta, d_xi, u)`` with scalar-shaped derivative arrays and the
    per-node input ``u_i = (alpha_s / alpha_i) * k2 * xi_s``, which makes the
    marginal costs identical across nodes by construction.
    """
    omega = _check_omega(omega, net)
    if state.eta.shape != (1,) or state.xi.shape != (1,):
        raise ShapeError("central controller state must have shape (1,)")
    is_machine = np.array([net.node(i).kind is NodeKind.MACHINE
                           for i in net.controller_ids])
    M = np.array([net.node(i).inertia if net.node(i).kind is NodeKind.MACHINE else 0.0
                  for i in net.controller_ids])
    d_eta = np.array([float(net.dampings @ omega)])
    d_xi = np.array([-gains.k1 * (float(M[is_machine] @ omega[is_machine]) + state.eta[0])
                     - gains.k2 * state.xi[0]])
    u = (net.alpha_s / net.prices) * gains.k2 * state.xi[0]
    return d_eta, d_xi, u


def dpiac_rhs(state: ControllerState, omega, net: PowerNetwork,
              comm: CommunicationGraph, gains: GainSchedule):
    """Distributed update with marginal-cost consensus.

    The eta integrator accumulates both local damping power and the weighted
    disagreement of marginal costs ``k3 * L_comm @ (k2 * alpha * xi)``; that
    term sums to zero over the network, so coordination never distorts the
    total imbalance bookkeeping.
    """
    omega = _check_omega(omega, net)
    nk = len(net.controller_ids)
    if state.eta.shape != (nk,) or state.xi.shape != (nk,):
        raise ShapeError(f"local controller state must have shape ({nk},)")
    L = comm.laplacian(net.controller_ids)
    M = np.array([net.node(i).inertia if net.node(i).kind is NodeKind.MACHINE else 0.0
                  for i in net.controller_ids])
    mc = gains.k2 * net.prices * state.xi
    d_eta = net.dampings * omega + gains.k3 * (L @ mc)
    d_xi = -gains.k1 * (M * omega + state.eta) - gains.k2 * state.xi
    u = gains.k2 * state.xi
    return d_eta, d_xi, u


def decpiac_rhs(state: ControllerState, omega, net: PowerNetwork, gains: GainSchedule):
    """Decentralized update: the distributed law with the consensus term removed."""
    omega = _check_omega(omega, net)
    nk = len(net.controller_ids)
    if state.eta.shape != (nk,) or state.xi.shape != (nk,):
        raise ShapeError(f"local controller state must have shape ({nk},)")
    M = np.array([net.node(i).inertia if net.node(i).kind is NodeKind.MACHINE else 0.0
                  for i in net.controller_ids])
    d_eta = net.dampings * omega
    d_xi = -gains.k1 * (M * omega + state.eta) - gains.k2 * state.xi
    u = gains.k2 * state.xi
    return d_eta, d_xi, u


def optimal_dispatch(net: PowerNetwork) -> np.ndarray:
    """Cost-optimal steady-state inputs over the controller set.

    Solves min sum_i alpha_i u_i^2 / 2 subject to total balance: equal
    marginal costs give ``u_i = -P_s * alpha_s / alpha_i``. Capacity limits
    are deliberately not modeled.
    """
    if not net.controller_ids:
        raise NoControllers("network has no controller nodes")
    p_total = float(np.sum(net.injections))
    return -p_total * net.alpha_s / net.prices


def synchronized_frequency(net: PowerNetwork, u) -> float:
    """Common steady frequency deviation for inputs ``u`` over the controllers."""
    u = np.asarray(u, dtype=float)
    nk = len(net.controller_ids)
    if u.shape != (nk,):
        raise ShapeError(f"u must have shape ({nk},), got {u.shape}")
    total_damping = float(np.sum(net.dampings))
    if total_damping <= 0:
        raise DegenerateModel("total damping must be positive")
    return (float(np.sum(net.injections)) + float(np.sum(u))) / total_damping


def marginal_costs(xi, net: PowerNetwork, gains: GainSchedule) -> np.ndarray:
    """Marginal cost alpha_i * u_i = k2 * alpha_i * xi_i per controller node."""
    xi = np.asarray(xi, dtype=float)
    nk = len(net.controller_ids)
    if xi.shape != (nk,):
        raise ShapeError(f"xi must have shape ({nk},), got {xi.shape}")
    return gains.k2 * net.prices * xi
