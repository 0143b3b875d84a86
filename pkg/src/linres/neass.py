"""First-order non-equilibrium almost-stationary states.

The rotated state psi_eps = exp(-i*eps*S1) psi_0 reproduces the linear
response coefficient as its expectation slope and is almost stationary under
the perturbed Hamiltonian, with defects of order eps^2 since only the
first-order generator is constructed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DomainError
from .lattice import ManyBodyOperator
from .spectral import SpectralData, inverse_liouvillian, liouvillian_apply, _as_dense, _as_matrix


def build_S1(spec: SpectralData, V) -> np.ndarray:
    """Hermitian generator of the first-order NEASS rotation.

    In the eigenbasis of H0 the only nonzero entries couple the ground state
    to excited states: (S1)_{n0} = -i V_{n0} / (E_n - E_0) and the conjugate
    transpose entries. Equivalently, -i[S1, rho_0] inverts the Liouvillian on
    the commutator [V, rho_0] (sign fixed by that defining property)."""
    spec.require_complete("NEASS generator")
    if not spec.ground_simple:
        from .errors import GapError
        raise GapError(f"gap {spec.gap:.3e} below tolerance {spec.degeneracy_tol:.3e}")
    v_eig = spec.to_eigenbasis(V)
    dim = spec.dimension
    s_eig = np.zeros((dim, dim), dtype=complex)
    omega = spec.energies[1:] - spec.energies[0]
    s_eig[1:, 0] = -1j * v_eig[1:, 0] / omega
    s_eig[0, 1:] = s_eig[1:, 0].conj()
    return spec.from_eigenbasis(s_eig)


@dataclass(frozen=True)
class NEASS:
    """Rotated almost-stationary state at strength eps."""

    S1: np.ndarray
    eps: float
    psi: np.ndarray
    spec: SpectralData

    def expectation(self, A) -> float:
        m = _as_matrix(A)
        return float(np.real(self.psi.conj() @ (m @ self.psi)))

    def expectation_rotated_observable(self, A) -> float:
        """Same number via the automorphism picture: rho_0(e^{i eps S1} A e^{-i eps S1})."""
        u = _rotation(self.S1, self.eps)
        a_rot = u.conj().T @ _as_dense(A) @ u
        g = self.spec.ground_vector
        return float(np.real(g.conj() @ (a_rot @ g)))


def _rotation(S1: np.ndarray, eps: float) -> np.ndarray:
    """exp(-i*eps*S1) through the eigendecomposition of the Hermitian S1."""
    w, u = np.linalg.eigh(S1)
    return (u * np.exp(-1j * eps * w)) @ u.conj().T


def neass_state(spec: SpectralData, S1: np.ndarray, eps: float) -> NEASS:
    psi = _rotation(S1, eps) @ spec.ground_vector
    psi = psi / np.linalg.norm(psi)
    return NEASS(S1=S1, eps=eps, psi=psi, spec=spec)


def kubo_coefficient_K1(spec: SpectralData, V, A) -> float:
    """First response coefficient sigma_{A,1} = tr( L^{-1}([rho_0, V]) A ).

    Equals the eps-slope of the NEASS expectation of A and the eta -> 0 limit
    of the regularized evaluator."""
    rho = spec.rho0
    v = _as_dense(V)
    b = rho @ v - v @ rho
    x = inverse_liouvillian(spec, b)
    return float(np.real(np.trace(x @ _as_dense(A))))


def s1_residual(spec: SpectralData, S1: np.ndarray, V) -> float:
    """Norm of the defining-property defect -i[S1, rho_0] + L^{-1}([V, rho_0])."""
    rho = spec.rho0
    v = _as_dense(V)
    lhs = -1j * (S1 @ rho - rho @ S1)
    rhs = -inverse_liouvillian(spec, v @ rho - rho @ v)
    return float(np.linalg.norm(lhs - rhs, 2))


def stationarity_defect(neass: NEASS, A, t: float, perturbation=None) -> float:
    """|<psi_eps(t)|A|psi_eps(t)> - <psi_eps|A|psi_eps>| under H_eps = H0 + eps V.

    The evolution uses exact diagonalization of H_eps so the measured defect
    contains no integrator error. `perturbation` defaults to reconstructing V
    from S1 is not possible, so it must be supplied for eps != 0."""
    if neass.eps == 0.0:
        return 0.0
    if perturbation is None:
        raise DomainError("stationarity_defect needs the perturbation V for eps != 0")
    h_eps = _as_dense(neass.spec.h) + neass.eps * _as_dense(perturbation)
    w, u = np.linalg.eigh((h_eps + h_eps.conj().T) / 2.0)
    phases = np.exp(-1j * w * t)
    psi_t = u @ (phases * (u.conj().T @ neass.psi))
    m = _as_matrix(A)
    before = float(np.real(neass.psi.conj() @ (m @ neass.psi)))
    after = float(np.real(psi_t.conj() @ (m @ psi_t)))
    return abs(after - before)


def s1_locality_curve(spec: SpectralData, S1: np.ndarray, center_mode: int = 0):
    """Empirical decay of S1 in the occupation basis: for each basis-state
    pair connected by S1, bucket |S1_ab| by the farthest site on which the
    two occupation words differ, measured from the box center. Returns
    (distances, max |element| per distance); reported as a curve, no rate is
    asserted."""
    basis = spec.basis
    if basis is None:
        raise DomainError("locality curve needs a lattice basis attached to the spectrum")
    geometry = basis.geometry
    center = tuple(0 for _ in range(geometry.d))
    states = basis.states
    dim = len(states)
    buckets: dict[int, float] = {}
    absS = np.abs(S1)
    thresh = absS.max() * 1e-14
    idx_a, idx_b = np.nonzero(absS > thresh)
    for a, b in zip(idx_a, idx_b):
        if a >= b:
            continue
        diff = int(states[a]) ^ int(states[b])
        dist = 0
        pos = 0
        while diff:
            if diff & 1:
                site = geometry.sites[pos // basis.s]
                dist = max(dist, geometry.metric(site, center))
            diff >>= 1
            pos += 1
        buckets[dist] = max(buckets.get(dist, 0.0), float(absS[a, b]))
    dists = sorted(buckets)
    return np.array(dists), np.array([buckets[r] for r in dists])
