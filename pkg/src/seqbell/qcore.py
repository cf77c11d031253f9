"""Dense linear algebra for one- and two-qubit objects.

Conventions used throughout the package:

* Two-qubit basis order is |00>, |01>, |10>, |11> with Alice's qubit first,
  so an amplitude vector reshaped to 2x2 has Alice on the rows and Bob on
  the columns.
* Construction tolerances are 1e-12; derived quantities are checked against
  1e-10 elsewhere.

All values are immutable after construction (arrays are marked read-only),
so they are safe to share between threads and cache freely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

ATOL_CONSTRUCT = 1e-12
ATOL_DERIVED = 1e-10

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
for _m in (IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z):
    _m.setflags(write=False)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QubitOperator:
    """A single-qubit operator (observable, Kraus operator or unitary)."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.shape != (2, 2):
            raise DomainError(f"qubit operator must be 2x2, got {entries.shape}")
        object.__setattr__(self, "entries", _readonly(entries))

    def is_hermitian(self, atol: float = ATOL_CONSTRUCT) -> bool:
        return bool(np.abs(self.entries - self.entries.conj().T).max() <= atol)

    def is_unitary(self, atol: float = ATOL_CONSTRUCT) -> bool:
        defect = self.entries.conj().T @ self.entries - IDENTITY
        return bool(np.abs(defect).max() <= atol)

    def dagger(self) -> "QubitOperator":
        return QubitOperator(self.entries.conj().T)


class TwoQubitState:
    """Trace-one density matrix of the joint Alice/Bob pair.

    The public constructor enforces the full set of state invariants
    (Hermitian, unit trace, positive semidefinite up to -1e-10).  Internal
    evolution code uses :meth:`_trusted` for states that are valid by
    construction; the property tests exercise those invariants instead.
    """

    __slots__ = ("rho",)

    def __init__(self, rho):
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (4, 4):
            raise DomainError(f"density matrix must be 4x4, got {rho.shape}")
        if np.abs(rho - rho.conj().T).max() > ATOL_CONSTRUCT:
            raise DomainError("density matrix is not Hermitian within 1e-12")
        if abs(rho.trace() - 1.0) > ATOL_CONSTRUCT:
            raise DomainError("density matrix trace differs from 1 beyond 1e-12")
        if np.linalg.eigvalsh(rho).min() < -ATOL_DERIVED:
            raise DomainError("density matrix has an eigenvalue below -1e-10")
        self.rho = _readonly(rho)

    @classmethod
    def _trusted(cls, rho: np.ndarray) -> "TwoQubitState":
        # caller guarantees the invariants (e.g. unitary image of a valid state)
        obj = object.__new__(cls)
        obj.rho = _readonly(rho)
        return obj

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.rho).min())

    def __repr__(self) -> str:
        return f"TwoQubitState(trace={self.rho.trace().real:.6f}, purity={self.purity():.6f})"


@dataclass(frozen=True)
class PureTwoQubit:
    """Normalized two-qubit state vector in the |00>,|01>,|10>,|11> basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (4,):
            raise DomainError(f"pure state needs 4 amplitudes, got shape {amps.shape}")
        if abs(np.linalg.norm(amps) - 1.0) > ATOL_CONSTRUCT:
            raise DomainError("pure state is not normalized within 1e-12")
        object.__setattr__(self, "amplitudes", _readonly(amps))

    def density(self) -> TwoQubitState:
        return TwoQubitState(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class SchmidtForm:
    """Result of a Schmidt decomposition: local frames and the angle.

    Reconstruction contract: (u_alice (x) u_bob) applied to
    cos(theta)|00> + sin(theta)|11> returns the decomposed vector up to a
    global phase, with cos(theta) >= sin(theta) >= 0.
    """

    theta: float
    u_alice: QubitOperator
    u_bob: QubitOperator

    def reconstruct(self) -> np.ndarray:
        diag = schmidt_vector(self.theta)
        return tensor(self.u_alice, self.u_bob) @ diag


def schmidt_vector(theta: float) -> np.ndarray:
    """The Schmidt-diagonal vector cos(theta)|00> + sin(theta)|11>."""
    v = np.zeros(4, dtype=complex)
    v[0] = np.cos(theta)
    v[3] = np.sin(theta)
    return v


def tensor(a, b) -> np.ndarray:
    """Kronecker product with Alice's factor first."""
    ea = a.entries if isinstance(a, QubitOperator) else np.asarray(a, dtype=complex)
    eb = b.entries if isinstance(b, QubitOperator) else np.asarray(b, dtype=complex)
    if ea.shape == (2, 2) and eb.shape == (2, 2):
        # broadcasting beats np.kron by an order of magnitude at this size
        return (ea[:, None, :, None] * eb[None, :, None, :]).reshape(4, 4)
    return np.kron(ea, eb)


def expect(state: TwoQubitState, obs: np.ndarray) -> float:
    """Expectation value trace(rho * obs) of a Hermitian 4x4 observable."""
    obs = np.asarray(obs, dtype=complex)
    if obs.shape != (4, 4):
        raise DomainError(f"observable must be 4x4, got {obs.shape}")
    if np.abs(obs - obs.conj().T).max() > ATOL_DERIVED:
        raise DomainError("observable is not Hermitian within 1e-10")
    value = np.trace(state.rho @ obs)
    if abs(value.imag) > ATOL_DERIVED:
        raise DomainError("expectation value has a non-real residue above 1e-10")
    return float(value.real)


def apply_unitary(state: TwoQubitState, u4: np.ndarray) -> TwoQubitState:
    """Sandwich U rho U^dagger; preserves all state invariants."""
    u4 = np.asarray(u4, dtype=complex)
    if np.abs(u4.conj().T @ u4 - np.eye(4)).max() > ATOL_CONSTRUCT:
        raise DomainError("4x4 operator is not unitary within 1e-12")
    return TwoQubitState._trusted(u4 @ state.rho @ u4.conj().T)


def schmidt(psi: PureTwoQubit) -> SchmidtForm:
    """Schmidt decomposition of a two-qubit pure state.

    Singular values are sorted descending so theta lands in [0, pi/4].  The
    local unitaries are fixed to determinant +1; where the amplitude matrix
    is real with non-negative determinant they are plain rotations and the
    reconstruction is exact (no global phase).
    """
    theta, ua, ub = _schmidt_matrices(psi.amplitudes)
    return SchmidtForm(theta=theta, u_alice=QubitOperator(ua), u_bob=QubitOperator(ub))


def _schmidt_matrices(amplitudes: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    m = np.asarray(amplitudes, dtype=complex).reshape(2, 2)
    u, s, vh = np.linalg.svd(m)
    u = u.copy()
    vh = vh.copy()

    # det(u) -> +1, compensated on vh so u @ diag(s) @ vh is unchanged
    du = np.linalg.det(u)
    u[:, 1] *= du.conjugate()
    vh[1, :] *= du
    # rank-deficient inputs leave the second Bob vector free: flip its sign
    # rather than introducing a complex phase on a real input
    if s[1] <= 1e-15 and np.linalg.det(vh).real < 0:
        vh[1, :] = -vh[1, :]
    # det(u_bob) -> +1 via a uniform phase; shows up as a global phase only
    dv = np.linalg.det(vh)
    w = np.exp(-0.5j * np.angle(dv))
    ub = vh.T * w
    theta = float(np.arctan2(s[1], s[0]))
    return theta, u, ub
