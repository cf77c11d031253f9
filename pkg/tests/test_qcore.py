import numpy as np
import pytest

from seqbell.errors import DomainError
from seqbell.qcore import (
    IDENTITY,
    SIGMA_X,
    SIGMA_Z,
    PureTwoQubit,
    QubitOperator,
    TwoQubitState,
    apply_unitary,
    expect,
    schmidt,
    schmidt_vector,
    tensor,
)

from conftest import random_density_matrix, random_hermitian, random_pure_vector, random_unitary

PHI_PLUS = schmidt_vector(np.pi / 4)


def kraus_plus(xi):
    return 0.5 * ((np.cos(xi) + np.sin(xi)) * IDENTITY + (np.cos(xi) - np.sin(xi)) * SIGMA_X)


class TestTensor:
    def test_identity(self):
        np.testing.assert_allclose(tensor(IDENTITY, IDENTITY), np.eye(4), atol=1e-15)

    def test_zz_diagonal(self):
        np.testing.assert_allclose(
            tensor(SIGMA_Z, SIGMA_Z), np.diag([1, -1, -1, 1]), atol=1e-15
        )

    def test_xx_antidiagonal(self):
        np.testing.assert_allclose(
            tensor(SIGMA_X, SIGMA_X), np.fliplr(np.eye(4)), atol=1e-15
        )

    def test_mixed_product_rule(self, rng):
        for _ in range(50):
            a, b, c, d = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(4))
            lhs = tensor(a, b) @ tensor(c, d)
            rhs = tensor(a @ c, b @ d)
            assert np.abs(lhs - rhs).max() < 1e-12

    def test_accepts_qubit_operators(self):
        op = QubitOperator(SIGMA_Z)
        np.testing.assert_allclose(tensor(op, op), np.diag([1, -1, -1, 1]), atol=1e-15)

    def test_matches_kron(self, rng):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        np.testing.assert_array_equal(tensor(a, b), np.kron(a, b))


class TestExpect:
    def test_bell_pair_zz(self):
        state = PureTwoQubit(PHI_PLUS).density()
        assert expect(state, tensor(SIGMA_Z, SIGMA_Z)) == pytest.approx(1.0, abs=1e-12)

    def test_maximally_mixed_traceless(self):
        state = TwoQubitState(np.eye(4) / 4)
        for obs in (tensor(SIGMA_X, SIGMA_X), tensor(SIGMA_Z, IDENTITY)):
            assert expect(state, obs) == pytest.approx(0.0, abs=1e-12)

    def test_depolarized_xx_visibility(self):
        # admixing 10% white noise scales the XX correlation to 0.9
        psi = np.outer(PHI_PLUS, PHI_PLUS.conj())
        state = TwoQubitState(0.9 * psi + 0.1 * np.eye(4) / 4)
        assert expect(state, tensor(SIGMA_X, SIGMA_X)) == pytest.approx(0.9, abs=1e-12)

    def test_rejects_non_hermitian(self, rng):
        state = TwoQubitState(np.eye(4) / 4)
        obs = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        with pytest.raises(DomainError):
            expect(state, obs)

    def test_linear_in_observable_and_state(self, rng):
        for _ in range(25):
            rho1 = random_density_matrix(rng)
            rho2 = random_density_matrix(rng)
            o1 = random_hermitian(rng)
            o2 = random_hermitian(rng)
            a, b = rng.uniform(-2, 2, size=2)
            s1, s2 = TwoQubitState(rho1), TwoQubitState(rho2)
            lhs = expect(s1, a * o1 + b * o2)
            assert lhs == pytest.approx(a * expect(s1, o1) + b * expect(s1, o2), abs=1e-10)
            w = rng.uniform(0, 1)
            mix = TwoQubitState(w * rho1 + (1 - w) * rho2)
            assert expect(mix, o1) == pytest.approx(
                w * expect(s1, o1) + (1 - w) * expect(s2, o1), abs=1e-10
            )


class TestStateInvariants:
    def test_rejects_non_hermitian(self):
        bad = np.eye(4, dtype=complex) / 4
        bad[0, 1] = 0.1
        with pytest.raises(DomainError):
            TwoQubitState(bad)

    def test_rejects_wrong_trace(self):
        with pytest.raises(DomainError):
            TwoQubitState(np.eye(4) / 2)

    def test_rejects_negative_eigenvalue(self):
        bad = np.diag([0.6, 0.5, -0.1, 0.0]).astype(complex)
        with pytest.raises(DomainError):
            TwoQubitState(bad)

    def test_arrays_read_only(self):
        state = TwoQubitState(np.eye(4) / 4)
        with pytest.raises(ValueError):
            state.rho[0, 0] = 1.0

    def test_unitary_sandwich_preserves_invariants(self, rng):
        for _ in range(20):
            state = TwoQubitState(random_density_matrix(rng))
            u = random_unitary(rng)
            out = apply_unitary(state, u)
            assert np.abs(out.rho - out.rho.conj().T).max() < 1e-12
            assert abs(out.rho.trace() - 1.0) < 1e-12
            assert out.min_eigenvalue() > -1e-10

    def test_pure_state_normalization_enforced(self):
        with pytest.raises(DomainError):
            PureTwoQubit(np.array([1.0, 1.0, 0.0, 0.0]))


class TestSchmidt:
    def test_bell_pair(self):
        form = schmidt(PureTwoQubit(PHI_PLUS))
        assert form.theta == pytest.approx(np.pi / 4, abs=1e-12)
        self._check_form(form, PHI_PLUS)

    def test_product_state(self):
        psi = np.array([0, 1, 0, 0], dtype=complex)
        form = schmidt(PureTwoQubit(psi))
        assert form.theta == pytest.approx(0.0, abs=1e-12)
        self._check_form(form, psi)

    def test_weak_branch_angle(self):
        # conditioning the Bell pair on one outcome of a strength-0.4
        # measurement leaves sin(2 theta) = sin(0.8)
        branch = (PHI_PLUS.reshape(2, 2) @ kraus_plus(0.4).T).reshape(4)
        branch = branch / np.linalg.norm(branch)
        form = schmidt(PureTwoQubit(branch))
        assert np.sin(2 * form.theta) == pytest.approx(0.7173560908995228, abs=1e-12)
        self._check_form(form, branch)

    def test_random_reconstruction(self, rng):
        for _ in range(200):
            psi = random_pure_vector(rng)
            self._check_form(schmidt(PureTwoQubit(psi)), psi)

    def test_real_input_gives_real_rotations(self, rng):
        for _ in range(50):
            psi = rng.normal(size=4)
            psi /= np.linalg.norm(psi)
            form = schmidt(PureTwoQubit(psi))
            if np.linalg.det(psi.reshape(2, 2)) >= 0:
                assert np.abs(form.u_alice.entries.imag).max() < 1e-12
                assert np.abs(form.u_bob.entries.imag).max() < 1e-12

    @staticmethod
    def _check_form(form, psi):
        assert 0.0 <= form.theta <= np.pi / 4 + 1e-12
        assert np.cos(form.theta) >= np.sin(form.theta) >= -1e-15
        assert form.u_alice.is_unitary(1e-12)
        assert form.u_bob.is_unitary(1e-12)
        assert np.linalg.det(form.u_alice.entries) == pytest.approx(1.0, abs=1e-10)
        assert np.linalg.det(form.u_bob.entries) == pytest.approx(1.0, abs=1e-10)
        rebuilt = form.reconstruct()
        # compare up to global phase
        phase = np.vdot(rebuilt, psi)
        phase = phase / abs(phase) if abs(phase) > 1e-12 else 1.0
        assert np.linalg.norm(psi - phase * rebuilt) < 1e-10
