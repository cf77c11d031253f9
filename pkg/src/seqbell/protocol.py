"""Sequential weak-measurement evolution of the shared two-qubit state.

Bob's side measures a chain of variable-strength generalized measurements
of sigma_x; after each outcome both sides apply local rebalancing unitaries
so the surviving entanglement is again Schmidt-diagonal and outcome
balanced.  The full outcome tree is materialized: depth k holds the 2^k
history-conditioned branches together with the ideal protocol angle
theta_{k+1} used by the next certification step.

The rebalancing unitaries are always derived from the ideal noiseless
protocol (honest devices are programmed for it) and applied to whatever
state the noisy source actually produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DegenerateBranchError, DomainError
from .noise import NoiseParams, make_state
from .qcore import (
    IDENTITY,
    SIGMA_X,
    QubitOperator,
    TwoQubitState,
    _schmidt_matrices,
    schmidt_vector,
    tensor,
)

PI4 = np.pi / 4

History = tuple[int, ...]

MIN_BRANCH_PROBABILITY = 1e-14


@dataclass(frozen=True)
class ProtocolConfig:
    """Initial angle, per-step measurement strengths and source noise.

    A strength of 0 denotes a projective step (usually the last one);
    pi/4 denotes a non-interactive step.
    """

    theta1: float
    strengths: tuple[float, ...]
    noise: NoiseParams = field(default_factory=NoiseParams)

    def __post_init__(self):
        object.__setattr__(self, "strengths", tuple(float(x) for x in self.strengths))
        if not 0.0 <= self.theta1 <= PI4:
            raise DomainError(f"theta1 must lie in [0, pi/4], got {self.theta1}")
        for k, xi in enumerate(self.strengths):
            if not 0.0 <= xi <= PI4:
                raise DomainError(f"strength {k + 1} must lie in [0, pi/4], got {xi}")

    @property
    def n_steps(self) -> int:
        return len(self.strengths)

    def ideal_thetas(self) -> tuple[float, ...]:
        """Ideal protocol angles theta_1 .. theta_{n+1} (recursion values)."""
        thetas = [float(self.theta1)]
        for xi in self.strengths:
            thetas.append(_ideal_step(thetas[-1], float(xi), +1)[4])
        return tuple(thetas)


@dataclass(frozen=True)
class BranchNode:
    """One history-conditioned branch: its weight, state and ideal angle."""

    history: History
    probability: float
    state: TwoQubitState
    ideal_theta: float


def kraus_pair(xi: float) -> tuple[QubitOperator, QubitOperator]:
    """Kraus operators of the strength-xi generalized sigma_x measurement.

    K_pm = ((cos xi + sin xi)*I +/- (cos xi - sin xi)*sigma_x) / 2; the pair
    satisfies the completeness relation and interpolates from the sigma_x
    projectors (xi = 0) to multiples of the identity (xi = pi/4).
    """
    kp, km = _kraus_matrices(_check_strength(xi))
    return QubitOperator(kp), QubitOperator(km)


def weak_branch(
    state: TwoQubitState, xi: float, outcome: int
) -> tuple[float, TwoQubitState]:
    """Condition the joint state on one weak-measurement outcome on Bob.

    Returns the outcome probability and the normalized post-measurement
    state.  Conditioning on an outcome of probability below 1e-14 raises
    :class:`DegenerateBranchError`.
    """
    prob, rho = _branch_raw(state.rho, _check_strength(xi), _check_outcome(outcome))
    return prob, TwoQubitState._trusted(rho)


def rebalance_unitaries(
    ideal_theta: float, xi: float, outcome: int
) -> tuple[QubitOperator, QubitOperator, float]:
    """Local correction frames after a weak measurement, and the next angle.

    Computed on the ideal pure state: apply the outcome's Kraus operator to
    Bob's half of cos(theta)|00> + sin(theta)|11>, normalize and take the
    Schmidt decomposition.  The returned angle does not depend on the
    outcome and satisfies sin(2*theta') = sin(2*theta) * sin(2*xi); at
    xi = 0 it collapses to 0 (separable, no further certification).
    """
    if not 0.0 <= ideal_theta <= PI4:
        raise DomainError(f"ideal_theta must lie in [0, pi/4], got {ideal_theta}")
    ua, ub, _, _, theta_next = _ideal_step(
        float(ideal_theta), _check_strength(xi), _check_outcome(outcome)
    )
    return QubitOperator(ua), QubitOperator(ub), theta_next


def evolve_tree(config: ProtocolConfig) -> list[list[BranchNode]]:
    """Full branch tree of the protocol, depth 0 .. n_steps.

    Depth 0 is the source state; each deeper level conditions every branch
    on both outcomes of the next weak measurement and rebalances it with
    the ideal-protocol unitaries.  Branch probabilities multiply along the
    path and sum to one at every depth.
    """
    levels = _evolve_levels(config)
    out: list[list[BranchNode]] = []
    for nodes, theta in levels:
        out.append(
            [
                BranchNode(
                    history=hist,
                    probability=prob,
                    state=TwoQubitState._trusted(rho),
                    ideal_theta=theta,
                )
                for hist, prob, rho in nodes
            ]
        )
    return out


# ---------------------------------------------------------------------------
# internal fast paths (shared with the optimizer; values are identical to the
# public operations, just without the dataclass wrapping per node)
# ---------------------------------------------------------------------------


def _check_strength(xi: float) -> float:
    xi = float(xi)
    if not 0.0 <= xi <= PI4:
        raise DomainError(f"xi must lie in [0, pi/4], got {xi}")
    return xi


def _check_outcome(outcome: int) -> int:
    if outcome not in (+1, -1):
        raise DomainError(f"outcome must be +1 or -1, got {outcome!r}")
    return int(outcome)


@lru_cache(maxsize=1024)
def _kraus_matrices(xi: float) -> tuple[np.ndarray, np.ndarray]:
    plus = np.cos(xi) + np.sin(xi)
    minus = np.cos(xi) - np.sin(xi)
    kp = 0.5 * (plus * IDENTITY + minus * SIGMA_X)
    km = 0.5 * (plus * IDENTITY - minus * SIGMA_X)
    kp.setflags(write=False)
    km.setflags(write=False)
    return kp, km


@lru_cache(maxsize=4096)
def _ideal_step(theta: float, xi: float, outcome: int = +1):
    """(u_alice, u_bob, embed, correction, theta_next) for one ideal branch.

    ``embed`` is I (x) K_outcome and ``correction`` the 4x4 rebalancing
    unitary (U_A (x) U_B)^dagger, both ready to apply to a density matrix.
    """
    kp, km = _kraus_matrices(xi)
    k = kp if outcome == +1 else km
    branch = (schmidt_vector(theta).reshape(2, 2) @ k.T).reshape(4)
    norm = np.linalg.norm(branch)
    if norm < 1e-12:
        raise DegenerateBranchError(
            f"ideal branch for outcome {outcome:+d} at theta={theta}, xi={xi} vanishes"
        )
    theta_next, ua, ub = _schmidt_matrices(branch / norm)
    embed = tensor(IDENTITY, k)
    correction = tensor(ua, ub).conj().T
    embed.setflags(write=False)
    correction.setflags(write=False)
    return ua, ub, embed, correction, theta_next


def _branch_raw(rho: np.ndarray, xi: float, outcome: int) -> tuple[float, np.ndarray]:
    kp, km = _kraus_matrices(xi)
    k = kp if outcome == +1 else km
    embed = tensor(IDENTITY, k)
    raw = embed @ rho @ embed.conj().T
    prob = float(raw.trace().real)
    if prob < MIN_BRANCH_PROBABILITY:
        raise DegenerateBranchError(
            f"outcome {outcome:+d} has probability {prob:.3e}; cannot condition on it"
        )
    return prob, raw / prob


_LevelNodes = list[tuple[History, float, np.ndarray]]


def _evolve_levels(
    config: ProtocolConfig, max_depth: int | None = None
) -> list[tuple[_LevelNodes, float]]:
    """Raw branch tree: per depth a list of (history, probability, rho).

    ``max_depth`` trims the evolution; certification of step k only needs
    depth k-1, so evaluating an n-step protocol stops one level short.
    """
    steps = config.strengths if max_depth is None else config.strengths[:max_depth]
    rho0 = make_state(config.noise, config.theta1).rho
    levels: list[tuple[_LevelNodes, float]] = [([((), 1.0, rho0)], float(config.theta1))]
    for xi in steps:
        nodes, theta = levels[-1]
        step = {o: _ideal_step(theta, float(xi), o) for o in (+1, -1)}
        children: _LevelNodes = []
        for hist, prob, rho in nodes:
            for outcome in (+1, -1):
                _, _, embed, correction, theta_next = step[outcome]
                raw = embed @ rho @ embed.conj().T
                p_branch = float(raw.trace().real)
                if p_branch < MIN_BRANCH_PROBABILITY:
                    raise DegenerateBranchError(
                        f"outcome {outcome:+d} after history {hist} has probability "
                        f"{p_branch:.3e}; cannot condition on it"
                    )
                rebalanced = correction @ (raw / p_branch) @ correction.conj().T
                children.append((hist + (outcome,), prob * p_branch, rebalanced))
        levels.append((children, step[+1][4]))
    return levels
