"""Source imperfection model and its visibility parametrization.

The imperfect source emits a convex mixture of the ideal pure state, white
noise (depolarization weight ``p``) and a dephased diagonal term
(decoherence weight ``c``).  Both weights are directly measurable through
the two-basis correlation visibilities V_Z and V_X.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, ModelViolationError
from .qcore import SIGMA_X, SIGMA_Z, TwoQubitState, expect, schmidt_vector, tensor

PI4 = np.pi / 4


@dataclass(frozen=True)
class NoiseParams:
    """Depolarization weight p and decoherence weight c, p + c <= 1."""

    p: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.c <= 1.0):
            raise DomainError(f"noise weights must lie in [0, 1], got p={self.p}, c={self.c}")
        if self.p + self.c > 1.0 + 1e-15:
            raise DomainError(f"noise weights must satisfy p + c <= 1, got {self.p + self.c}")


@dataclass(frozen=True)
class Visibilities:
    """Correlation visibilities in the Z and X bases, with v_z >= v_x."""

    v_z: float
    v_x: float

    def __post_init__(self):
        if not (-1.0 <= self.v_z <= 1.0 and -1.0 <= self.v_x <= 1.0):
            raise DomainError("visibilities must lie in [-1, 1]")
        if self.v_x > self.v_z + 1e-15:
            raise DomainError(f"model assumes v_z >= v_x, got v_z={self.v_z}, v_x={self.v_x}")


@lru_cache(maxsize=256)
def make_state(params: NoiseParams, theta1: float) -> TwoQubitState:
    """Initial two-qubit state of the imperfect source.

    Mixes the pure state cos(theta1)|00> + sin(theta1)|11> with the
    maximally mixed state (weight p) and with the dephased diagonal
    (|00><00| + |11><11|)/2 (weight c).  States are immutable, so caching
    repeated parameter combinations is safe.
    """
    if not 0.0 <= theta1 <= PI4:
        raise DomainError(f"theta1 must lie in [0, pi/4], got {theta1}")
    psi = schmidt_vector(theta1)
    pure = np.outer(psi, psi.conj())
    dephased = np.diag([0.5, 0.0, 0.0, 0.5]).astype(complex)
    rho = (
        (1.0 - params.p - params.c) * pure
        + params.p * np.eye(4, dtype=complex) / 4.0
        + params.c * dephased
    )
    return TwoQubitState(rho)


def visibilities_of(state: TwoQubitState) -> Visibilities:
    """Measure V_Z = <sigma_z x sigma_z> and V_X = <sigma_x x sigma_x>."""
    return Visibilities(
        v_z=expect(state, tensor(SIGMA_Z, SIGMA_Z)),
        v_x=expect(state, tensor(SIGMA_X, SIGMA_X)),
    )


def params_from_visibilities(vis: Visibilities) -> NoiseParams:
    """Invert the visibility relations: p = 1 - v_z, c = v_z - v_x.

    The inversion assumes the source targets the maximally entangled state
    (theta1 = pi/4); round-trips with ``visibilities_of(make_state(...))``
    at that angle to 1e-12.  Visibility pairs with v_x > v_z are outside
    the model and rejected rather than projected.
    """
    if vis.v_x > vis.v_z:
        raise ModelViolationError(
            f"v_x={vis.v_x} > v_z={vis.v_z} cannot come from this source model"
        )
    p = 1.0 - vis.v_z
    c = vis.v_z - vis.v_x
    if p < 0:
        raise ModelViolationError(f"v_z={vis.v_z} > 1 implies negative depolarization")
    return NoiseParams(p=p, c=c)
