"""Tilted CHSH certificates: Bell value, guessing bound and min-entropy.

For a protocol step with Schmidt angle ``theta`` and measurement strength
``xi`` the certified quantities are::

    beta  = 2*cos(2*theta) / sqrt(1 + sin(2*theta)^2)
    I     = beta*<B0> + <A0 B0> + <A0 B1> + <A1 B0> - <A1 B1>
    I_max = sqrt(2*(4 + beta^2))          (quantum bound; local bound is beta+2)
    G_max = 1/2 + sqrt(I_max^2 - I^2) / (2*(2 - beta))
    H_min = -log2(G_max)                  (bits per outcome)

Alice's observables are cos(mu)*sigma_z +/- sin(mu)*sigma_x with
mu = arctan(sin(2*theta)); Bob's are sigma_z (strong) and the effective
weak-measurement observable cos(2*xi)*sigma_x.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CertificationUndefinedError, DomainError
from .qcore import IDENTITY, SIGMA_X, SIGMA_Z, QubitOperator, TwoQubitState, tensor

PI4 = np.pi / 4

# Treat a Bell value within this distance of the quantum bound as maximal.
# Double precision cannot resolve smaller gaps through the correlator sums,
# and the accuracy contract for the guessing bound starts at 1e-12 anyway.
SATURATION_ATOL = 1e-12

# Certificates this close to the separable limit are numerically fragile
# (the bound divides by 2 - beta); they are flagged, not refused.
LOW_CONFIDENCE_BETA = 1.99


@dataclass(frozen=True)
class Correlators:
    """The five expectation values entering the Bell quantity."""

    b0: float
    a0b0: float
    a0b1: float
    a1b0: float
    a1b1: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.b0, self.a0b0, self.a0b1, self.a1b0, self.a1b1)


@dataclass(frozen=True)
class BellCertificate:
    """Everything certified at one protocol step for one history."""

    beta: float
    correlators: Correlators
    i_value: float
    i_max: float
    g_max: float
    h_min: float
    overshoot: bool = False
    low_confidence: bool = False


def beta_of(theta: float) -> float:
    """Tilt coefficient of the Bell expression; 2 at theta=0, 0 at pi/4."""
    if not 0.0 <= theta <= PI4:
        raise DomainError(f"theta must lie in [0, pi/4], got {theta}")
    s2 = np.sin(2.0 * theta)
    return float(2.0 * np.cos(2.0 * theta) / np.sqrt(1.0 + s2 * s2))


def quantum_bound(beta: float) -> float:
    """I_max = sqrt(2*(4 + beta^2)), between 2 and 2*sqrt(2) reversed in beta."""
    return float(np.sqrt(2.0 * (4.0 + beta * beta)))


def observables(theta: float, xi: float):
    """Alice's two settings and Bob's strong/effective observables.

    B1 is the effective correlation observable of the weak measurement:
    <A (x) B1> equals the expectation of the product of Alice's outcome and
    Bob's weak outcome.
    """
    if not 0.0 <= theta <= PI4:
        raise DomainError(f"theta must lie in [0, pi/4], got {theta}")
    if not 0.0 <= xi <= PI4:
        raise DomainError(f"xi must lie in [0, pi/4], got {xi}")
    mu = np.arctan(np.sin(2.0 * theta))
    a0 = np.cos(mu) * SIGMA_Z + np.sin(mu) * SIGMA_X
    a1 = np.cos(mu) * SIGMA_Z - np.sin(mu) * SIGMA_X
    b1 = np.cos(2.0 * xi) * SIGMA_X
    return (QubitOperator(a0), QubitOperator(a1), QubitOperator(SIGMA_Z), QubitOperator(b1))


def guess_bound(i_value: float, beta: float) -> float:
    """Adversarial guessing probability certified by a Bell value.

    Uses the factored difference (I_max - I)*(I_max + I) so the bound stays
    accurate near the quantum bound, and snaps to exactly 1/2 once the gap
    falls below ``SATURATION_ATOL``.  Values at or below the local bound
    clamp to 1 (no certified randomness).
    """
    if beta < 0.0 or beta > 2.0:
        raise DomainError(f"beta must lie in [0, 2], got {beta}")
    if beta >= 2.0:
        raise CertificationUndefinedError(
            "beta = 2 corresponds to a separable protocol state; nothing to certify"
        )
    i_max = quantum_bound(beta)
    gap = i_max - i_value
    if gap <= SATURATION_ATOL:
        return 0.5
    g = 0.5 + np.sqrt(gap * (i_max + i_value)) / (2.0 * (2.0 - beta))
    return float(min(1.0, g))


@lru_cache(maxsize=4096)
def _step_kernel(theta: float, xi: float):
    """Flattened observables and constants for fast repeated evaluation.

    Returns (beta, i_max, obs) where obs is a 5x16 real-imag-pairable array
    of transposed-and-flattened 4x4 observables, ordered to match
    :class:`Correlators`.  Tr(rho O) = rho.ravel() . O.T.ravel().
    """
    a0, a1, b0, b1 = observables(theta, xi)
    beta = beta_of(theta)
    i_max = quantum_bound(beta)
    obs4 = (
        tensor(IDENTITY, b0),
        tensor(a0, b0),
        tensor(a0, b1),
        tensor(a1, b0),
        tensor(a1, b1),
    )
    flat = np.stack([o.T.ravel() for o in obs4])
    flat.setflags(write=False)
    return beta, i_max, flat


def _correlators_of(rho: np.ndarray, flat_obs: np.ndarray) -> np.ndarray:
    vals = flat_obs @ rho.ravel()
    return vals.real


def _certificate(rho: np.ndarray, theta: float, xi: float) -> BellCertificate:
    beta, i_max, flat_obs = _step_kernel(theta, xi)
    if beta >= 2.0:
        raise CertificationUndefinedError(
            "beta = 2 corresponds to a separable protocol state; nothing to certify"
        )
    c = _correlators_of(rho, flat_obs)
    i_value = float(beta * c[0] + c[1] + c[2] + c[3] - c[4])

    overshoot = i_value > i_max
    gap = i_max - i_value
    if gap <= SATURATION_ATOL:
        # maximal violation within numerical resolution: full bit certified
        g = 0.5
        h = 1.0
    elif i_value <= 2.0 + beta:
        # no violation of the local bound: no certified randomness
        g = 1.0
        h = 0.0
    else:
        g = guess_bound(i_value, beta)
        h = max(0.0, float(-np.log2(g)))
    return BellCertificate(
        beta=beta,
        correlators=Correlators(*(float(v) for v in c)),
        i_value=i_value,
        i_max=i_max,
        g_max=g,
        h_min=h,
        overshoot=overshoot,
        low_confidence=beta > LOW_CONFIDENCE_BETA,
    )


def bell_value(state: TwoQubitState, theta: float, xi: float) -> BellCertificate:
    """Certificate for one step: correlators, Bell value, bound and entropy.

    A statistical estimate can exceed the quantum bound; that clamps the
    guessing probability to 1/2 and sets the ``overshoot`` flag rather than
    raising.  A separable protocol angle (theta = 0, beta = 2) raises
    :class:`CertificationUndefinedError`.
    """
    return _certificate(state.rho, float(theta), float(xi))


def certificate_from_correlators(
    corr: Correlators, theta: float, *, low_confidence_extra: bool = False
) -> BellCertificate:
    """Assemble a certificate from externally estimated correlators.

    Used by the counting-statistics estimator, where the five expectation
    values come from coincidence counts instead of a density matrix.
    """
    beta = beta_of(theta)
    if beta >= 2.0:
        raise CertificationUndefinedError(
            "beta = 2 corresponds to a separable protocol state; nothing to certify"
        )
    i_max = quantum_bound(beta)
    i_value = float(beta * corr.b0 + corr.a0b0 + corr.a0b1 + corr.a1b0 - corr.a1b1)
    overshoot = i_value > i_max
    gap = i_max - i_value
    if gap <= SATURATION_ATOL:
        g, h = 0.5, 1.0
    elif i_value <= 2.0 + beta:
        g, h = 1.0, 0.0
    else:
        g = guess_bound(i_value, beta)
        h = max(0.0, float(-np.log2(g)))
    return BellCertificate(
        beta=beta,
        correlators=corr,
        i_value=i_value,
        i_max=i_max,
        g_max=g,
        h_min=h,
        overshoot=overshoot,
        low_confidence=beta > LOW_CONFIDENCE_BETA or low_confidence_extra,
    )
