"""Exact diagonalization, gap certification, Liouvillian inversion, and the
regularized response coefficient.

Sign convention used throughout the package: for a static perturbation
eps*V switched on adiabatically, the linear response coefficient of an
observable A is

    sigma_A = d/d(eps) <A> |_{eps=0} = tr( L^{-1}([rho_0, V]) A ),

which for a simple gapped ground state equals the value obtained from
first-order perturbation theory of the ground state. The eta-regularized
evaluator reproduces the Laplace-transformed switching integral and tends to
sigma_A as eta -> 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.integrate
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, GapError, QuadratureError, ResourceError
from .lattice import ManyBodyOperator

DENSE_CAP = 4000
HERMITICITY_TOL = 1e-12


def _as_matrix(op) -> np.ndarray | sp.spmatrix:
    if isinstance(op, ManyBodyOperator):
        return op.matrix
    return op


def _as_dense(op) -> np.ndarray:
    m = _as_matrix(op)
    if sp.issparse(m):
        return m.toarray()
    return np.asarray(m)


def _check_hermitian(mat, what="operator"):
    if sp.issparse(mat):
        defect = abs(mat - mat.conj().T)
        defect_max = defect.max() if defect.nnz else 0.0
        scale = max(1.0, abs(mat).max() if mat.nnz else 0.0)
    else:
        arr = np.asarray(mat)
        defect_max = float(abs(arr - arr.conj().T).max()) if arr.size else 0.0
        scale = max(1.0, float(abs(arr).max()) if arr.size else 0.0)
    if defect_max > HERMITICITY_TOL * scale:
        raise DomainError(f"{what} is not Hermitian (defect {defect_max:.3e})")


@dataclass
class SpectralData:
    """Eigen-decomposition of a Hermitian operator with ground-state data.

    `energies` ascending. When the dense path was used, `vectors` holds the
    full unitary; the iterative path stores only the lowest few eigenpairs
    and `complete` is False.
    """

    energies: np.ndarray
    vectors: np.ndarray
    h: np.ndarray | sp.spmatrix
    complete: bool
    degeneracy_tol: float
    basis: object = None

    @property
    def dimension(self) -> int:
        return self.h.shape[0]

    @property
    def E0(self) -> float:
        return float(self.energies[0])

    @property
    def gap(self) -> float:
        if len(self.energies) < 2:
            return math.inf
        return float(self.energies[1] - self.energies[0])

    @property
    def ground_simple(self) -> bool:
        return self.gap > self.degeneracy_tol

    @property
    def ground_vector(self) -> np.ndarray:
        return self.vectors[:, 0]

    @property
    def rho0(self) -> np.ndarray:
        v = self.ground_vector
        return np.outer(v, v.conj())

    def require_complete(self, what: str):
        if not self.complete:
            raise ResourceError(
                f"{what} needs the full spectrum; dimension {self.dimension} "
                f"was diagonalized iteratively"
            )

    def to_eigenbasis(self, op) -> np.ndarray:
        self.require_complete("eigenbasis transform")
        return self.vectors.conj().T @ _as_dense(op) @ self.vectors

    def from_eigenbasis(self, mat: np.ndarray) -> np.ndarray:
        self.require_complete("eigenbasis transform")
        return self.vectors @ mat @ self.vectors.conj().T

    def expectation(self, op) -> float:
        v = self.ground_vector
        m = _as_matrix(op)
        return float(np.real(v.conj() @ (m @ v)))


def diagonalize(
    H,
    dense_cap: int = DENSE_CAP,
    num_states: int = 6,
    degeneracy_tol: Optional[float] = None,
) -> SpectralData:
    """Eigen-decompose a Hermitian operator.

    Dense full decomposition up to `dense_cap`; above that, a Lanczos solve
    for the `num_states` lowest states (operations that need the full
    spectrum then raise ResourceError). The default degeneracy tolerance is
    1e-8 * ||H||.
    """
    mat = _as_matrix(H)
    _check_hermitian(mat, "Hamiltonian")
    dim = mat.shape[0]
    if dim <= dense_cap:
        energies, vectors = np.linalg.eigh(_as_dense(mat))
        complete = True
    else:
        k = min(num_states, dim - 1)
        # fixed start vector keeps repeated runs bit-identical
        v0 = np.full(dim, 1.0 / math.sqrt(dim))
        energies, vectors = spla.eigsh(
            mat.tocsc() if sp.issparse(mat) else mat, k=k, which="SA", v0=v0
        )
        order = np.argsort(energies)
        energies = energies[order]
        vectors = vectors[:, order]
        complete = False
    norm_h = float(abs(energies).max()) if len(energies) else 0.0
    tol = degeneracy_tol if degeneracy_tol is not None else 1e-8 * max(1.0, norm_h)
    basis = H.basis if isinstance(H, ManyBodyOperator) else None
    return SpectralData(
        energies=energies,
        vectors=vectors,
        h=mat,
        complete=complete,
        degeneracy_tol=tol,
        basis=basis,
    )


def ground_state(spec_or_h, degeneracy_tol: Optional[float] = None):
    """Normalized ground vector and gap; errors out on a degenerate ground state."""
    spec = spec_or_h if isinstance(spec_or_h, SpectralData) else diagonalize(spec_or_h)
    tol = degeneracy_tol if degeneracy_tol is not None else spec.degeneracy_tol
    if spec.dimension == 1:
        return spec.ground_vector, math.inf
    if spec.gap < tol:
        raise GapError(
            f"ground state degenerate: E1 - E0 = {spec.gap:.3e} < tolerance {tol:.3e}"
        )
    return spec.ground_vector, spec.gap


def liouvillian_apply(H, A) -> np.ndarray:
    """Commutator [H, A]."""
    hm = _as_matrix(H)
    am = _as_matrix(A)
    if hm.shape != am.shape:
        raise DomainError(f"shape mismatch {hm.shape} vs {am.shape}")
    if isinstance(H, ManyBodyOperator) and isinstance(A, ManyBodyOperator):
        if H.basis is not A.basis and H.basis != A.basis:
            raise DomainError("operators live on different bases")
    out = hm @ am - am @ hm
    return out.toarray() if sp.issparse(out) else out


def inverse_liouvillian(
    spec: SpectralData,
    B,
    diagonal_tol: float = 1e-8,
) -> np.ndarray:
    """Solve [H, X] = B on the off-diagonal block of the eigenbasis.

    B must have (relatively) vanishing diagonal in the eigenbasis, as is the
    case for commutators with the ground-state projector. Matrix elements on
    pairs closer than the degeneracy tolerance are annihilated rather than
    amplified.
    """
    spec.require_complete("inverse Liouvillian")
    b_eig = spec.to_eigenbasis(B)
    scale = np.linalg.norm(b_eig)
    diag_mass = np.linalg.norm(np.diag(b_eig))
    if scale > 0 and diag_mass > diagonal_tol * scale:
        raise DomainError(
            f"input has diagonal mass {diag_mass:.3e} > {diagonal_tol:.1e} * ||B||"
        )
    omega = spec.energies[:, None] - spec.energies[None, :]
    invertible = np.abs(omega) > spec.degeneracy_tol
    x_eig = np.zeros_like(b_eig)
    x_eig[invertible] = b_eig[invertible] / omega[invertible]
    return spec.from_eigenbasis(x_eig)


def kubo_regularized(spec: SpectralData, V, A, eta: float, full: bool = False):
    """eta-regularized response coefficient.

    Evaluates tr( (L_H - i*eta)^{-1}([rho_0, V]) A ) in the eigenbasis. At
    eta = 0 the exact spectral inverse on the off-diagonal block is used, so
    the value coincides with `neass.kubo_coefficient_K1`. Returns the real
    part by default; with full=True the complex trace (both parts carry
    physical content at finite eta).
    """
    if eta < 0:
        raise DomainError(f"eta must be >= 0, got {eta}")
    spec.require_complete("regularized response")
    v_eig = spec.to_eigenbasis(V)
    a_eig = spec.to_eigenbasis(A)
    rho = np.zeros((spec.dimension, spec.dimension))
    rho[0, 0] = 1.0
    b_eig = rho @ v_eig - v_eig @ rho
    omega = spec.energies[:, None] - spec.energies[None, :]
    kernel = np.zeros(omega.shape, dtype=complex)
    if eta == 0.0:
        offdiag = np.abs(omega) > spec.degeneracy_tol
        kernel[offdiag] = 1.0 / omega[offdiag]
    else:
        kernel = 1.0 / (omega - 1j * eta)
    sigma = complex(np.sum(b_eig * kernel * a_eig.T))
    return sigma if full else float(sigma.real)


def weighted_inverse_liouvillian(
    spec: SpectralData,
    B,
    gap_parameter: float,
    time_cutoff: float,
    tol: float = 1e-4,
) -> np.ndarray:
    """Time-integral inverse Liouvillian with a gap-filtered weight.

    Uses the Gaussian-damped odd weight w with w(t) = exp(-(t/tau)^2)/2 for
    t > 0, tau = time_cutoff/4, and evaluates -i * integral over
    [-time_cutoff, time_cutoff] of w(t) exp(iHt) B exp(-iHt) dt, whose
    eigenbasis kernel is the quadrature of integral_0^T exp(-(t/tau)^2)
    sin(omega t) dt. For |omega| >= gap_parameter this approximates 1/omega
    with relative error about 2/(gap_parameter*tau)^2; a predicted error
    above `tol` raises QuadratureError.
    """
    spec.require_complete("weighted inverse Liouvillian")
    if gap_parameter <= 0:
        raise DomainError("gap_parameter must be positive")
    if gap_parameter > spec.gap + spec.degeneracy_tol:
        raise DomainError(
            f"declared gap {gap_parameter} exceeds actual gap {spec.gap:.6g}"
        )
    tau = time_cutoff / 4.0
    predicted = 2.0 / (gap_parameter * tau) ** 2 + math.exp(-((time_cutoff / tau) ** 2))
    if predicted > tol:
        raise QuadratureError(
            f"time cutoff {time_cutoff} too small: predicted relative error "
            f"{predicted:.3e} > tol {tol:.1e}"
        )
    b_eig = spec.to_eigenbasis(B)
    omega = spec.energies[:, None] - spec.energies[None, :]

    kernel_cache: dict[float, float] = {}

    def kernel(w: float) -> float:
        key = round(w, 12)
        if key not in kernel_cache:
            if key == 0.0:
                kernel_cache[key] = 0.0
            else:
                val, _ = scipy.integrate.quad(
                    lambda t: math.exp(-((t / tau) ** 2)),
                    0.0,
                    time_cutoff,
                    weight="sin",
                    wvar=abs(key),
                    limit=2000,
                )
                kernel_cache[key] = math.copysign(val, key)
        return kernel_cache[key]

    x_eig = np.zeros_like(b_eig)
    dim = spec.dimension
    for n in range(dim):
        for m in range(dim):
            if n == m:
                continue
            x_eig[n, m] = b_eig[n, m] * kernel(float(omega[n, m]))
    return spec.from_eigenbasis(x_eig)


def random_gapped_instance(rng: np.random.Generator, dim: int, gap: float = 1.0):
    """Random dense Hermitian H with a simple gapped ground state, plus a
    random Hermitian V. Test/benchmark helper."""
    raw = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (raw + raw.conj().T) / 2.0
    energies, vectors = np.linalg.eigh(h)
    energies = np.sort(rng.uniform(gap, 10.0 * gap, size=dim))
    energies[0] = 0.0
    energies[1] = max(energies[1], gap)
    h = (vectors * energies) @ vectors.conj().T
    h = (h + h.conj().T) / 2.0
    raw_v = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    v = (raw_v + raw_v.conj().T) / 2.0
    return h, v
