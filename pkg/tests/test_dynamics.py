"""Switching profiles and adiabatic propagation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linres.errors import DomainError, IntegrationError
from linres.lattice import FockBasis, LatticeGeometry, TORUS, number_operator
from linres import spectral as spl
from linres.dynamics import (
    DrivingProtocol,
    bump_switch,
    heisenberg_expectation,
    propagate,
    ramp_switch,
    reference_propagate,
)
from linres.interactions import dimerized_chain_hamiltonian, potential_operator, sawtooth_potential


@pytest.fixture(scope="module")
def small_chain():
    basis = FockBasis(LatticeGeometry.chain(4, TORUS), s=1, N=2)
    H = dimerized_chain_hamiltonian(basis)
    V = potential_operator(sawtooth_potential(), basis)
    spec = spl.diagonalize(H)
    psi0, _ = spl.ground_state(spec)
    return basis, H, V, spec, psi0


class TestSwitchingFunctions:
    @pytest.mark.parametrize("f", [bump_switch(), ramp_switch(2), ramp_switch(4)])
    def test_endpoints(self, f):
        assert f(-1.0) == 0.0
        assert f(0.0) == 1.0
        assert f(-5.0) == 0.0
        assert f(3.0) == 1.0

    def test_bump_symmetry(self):
        f = bump_switch()
        assert f(-0.5) == pytest.approx(0.5, abs=1e-10)
        assert f(-0.75) + f(-0.25) == pytest.approx(1.0, abs=1e-10)

    def test_ramp_midpoint_and_derivative(self):
        f = ramp_switch(2)
        assert f(-0.5) == pytest.approx(0.5, abs=1e-12)
        h = 1e-6
        assert (f(-1 + h) - f(-1)) / h == pytest.approx(0.0, abs=1e-4)
        assert (f(0.0) - f(-h)) / h == pytest.approx(0.0, abs=1e-4)

    def test_ramp_power_validated(self):
        with pytest.raises(DomainError):
            ramp_switch(1)

    @given(t1=st.floats(-1, 0), t2=st.floats(-1, 0))
    @settings(max_examples=50, deadline=None)
    def test_bump_monotone(self, t1, t2):
        f = bump_switch()
        lo, hi = sorted((t1, t2))
        assert f(lo) <= f(hi) + 1e-12


class TestPropagate:
    def test_unperturbed_eigenstate_is_stationary(self, small_chain):
        basis, H, V, spec, psi0 = small_chain
        proto = DrivingProtocol(H, V, eps=0.0, eta=0.5, f=bump_switch())
        _, states = propagate(proto, psi0, 3.0, tol=1e-10)
        val = np.real(states[-1].conj() @ (V.matrix @ states[-1]))
        assert val == pytest.approx(spec.expectation(V), abs=1e-8)

    def test_commuting_drive_preserves_occupations(self, small_chain):
        basis, H, V, spec, psi0 = small_chain
        N = number_operator(basis)
        proto = DrivingProtocol(H, N, eps=0.3, eta=0.5, f=bump_switch())
        before = [float(np.real(psi0.conj() * basis.occupations(m) @ psi0))
                  for m in range(basis.modes)]
        _, states = propagate(proto, psi0, 2.0, tol=1e-10)
        after = [float(np.real(states[-1].conj() * basis.occupations(m) @ states[-1]))
                 for m in range(basis.modes)]
        np.testing.assert_allclose(after, before, atol=1e-7)

    def test_fidelity_against_matrix_exponential_reference(self, small_chain):
        basis, H, V, spec, psi0 = small_chain
        proto = DrivingProtocol(H, V, eps=0.05, eta=0.25, f=bump_switch())
        _, states = propagate(proto, psi0, 0.0, tol=1e-10)
        ref = reference_propagate(proto, psi0, 0.0, 20000)
        assert abs(np.vdot(ref, states[-1])) >= 1.0 - 1e-8

    def test_norm_certificate(self, small_chain):
        basis, H, V, spec, psi0 = small_chain
        proto = DrivingProtocol(H, V, eps=0.1, eta=0.5, f=bump_switch())
        _, states = propagate(proto, psi0, 1.0, tol=1e-10)
        assert abs(np.linalg.norm(states[-1]) - 1.0) <= 1e-9

    def test_gauge_shift_of_perturbation(self, small_chain):
        # V -> V + c Id changes only a global phase
        import scipy.sparse as sp
        from linres.lattice import ManyBodyOperator

        basis, H, V, spec, psi0 = small_chain
        c = 2.7
        Vc = ManyBodyOperator(
            basis, (V.matrix + c * sp.identity(basis.dimension)).tocsr(),
            hermitian=True)
        a = V
        e1 = heisenberg_expectation(
            DrivingProtocol(H, V, eps=0.1, eta=0.5, f=bump_switch()), a, 0.5,
            tol=1e-10, psi0=psi0)
        e2 = heisenberg_expectation(
            DrivingProtocol(H, Vc, eps=0.1, eta=0.5, f=bump_switch()), a, 0.5,
            tol=1e-10, psi0=psi0)
        assert e1 == pytest.approx(e2, abs=1e-9)

    def test_time_scale_consistency(self, small_chain):
        # halving eta doubles all physical times but leaves the profile values
        # crossed during the switch identical
        basis, H, V, spec, psi0 = small_chain
        f = bump_switch()
        p1 = DrivingProtocol(H, V, eps=0.1, eta=0.5, f=f)
        p2 = DrivingProtocol(H, V, eps=0.1, eta=0.25, f=f)
        for s in np.linspace(-1, 0, 7):
            assert f(p1.eta * (s / p1.eta)) == f(p2.eta * (s / p2.eta))

    def test_t_end_before_start_rejected(self, small_chain):
        basis, H, V, spec, psi0 = small_chain
        proto = DrivingProtocol(H, V, eps=0.1, eta=0.5, f=bump_switch())
        with pytest.raises(DomainError):
            propagate(proto, psi0, -10.0)

    def test_unnormalized_start_rejected(self, small_chain):
        basis, H, V, spec, psi0 = small_chain
        proto = DrivingProtocol(H, V, eps=0.1, eta=0.5, f=bump_switch())
        with pytest.raises(DomainError):
            propagate(proto, 2.0 * psi0, 0.0)


class TestHeisenbergExpectation:
    def test_eps_zero_gives_ground_expectation(self, small_chain):
        basis, H, V, spec, psi0 = small_chain
        proto = DrivingProtocol(H, V, eps=0.0, eta=0.5, f=bump_switch())
        val = heisenberg_expectation(proto, V, 1.3, tol=1e-10, psi0=psi0)
        assert val == pytest.approx(spec.expectation(V), abs=1e-8)

    def test_identity_observable(self, small_chain):
        import scipy.sparse as sp
        from linres.lattice import ManyBodyOperator

        basis, H, V, spec, psi0 = small_chain
        eye = ManyBodyOperator(basis, sp.identity(basis.dimension, format="csr"),
                               hermitian=True)
        proto = DrivingProtocol(H, V, eps=0.2, eta=0.5, f=bump_switch())
        assert heisenberg_expectation(proto, eye, 0.7, psi0=psi0) == pytest.approx(1.0, abs=1e-9)

    def test_total_number_conserved(self, small_chain):
        basis, H, V, spec, psi0 = small_chain
        N = number_operator(basis)
        proto = DrivingProtocol(H, V, eps=0.2, eta=0.5, f=bump_switch())
        assert heisenberg_expectation(proto, N, 1.0, psi0=psi0) == pytest.approx(2.0, abs=1e-8)
