"""Interactions as per-volume term generators, the exponential-localization
norm, Lipschitz perturbing potentials, and thermodynamic-limit diagnostics.

An interaction yields, for every box radius k, a finite list of terms with
explicit support sets. Keeping the generator per-k (instead of one global
map) makes torus wrap bonds and k-dependent boundary terms expressible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, ValidationError
from .lattice import (
    CUBE,
    TORUS,
    FockBasis,
    LatticeGeometry,
    ManyBodyOperator,
    bilinear,
    full_fock_annihilator,
)

Site = tuple[int, ...]


def _as_matrix(value, s: int) -> np.ndarray:
    mat = np.atleast_2d(np.asarray(value, dtype=complex))
    if mat.shape != (s, s):
        raise ValidationError(f"expected {s}x{s} block, got shape {mat.shape}")
    return mat


# ---------------------------------------------------------------------------
# Terms

@dataclass(frozen=True)
class Term:
    """One self-adjoint, number-conserving term of an interaction.

    kind: 'onsite' (a* M a on one site), 'hopping' (a* T a + h.c. between two
    sites), or 'density' (n W n between two sites). The support is the sorted
    site tuple; local matrices are built on the full Fock space of the
    support with internal index fastest, which makes terms on a common
    support directly comparable.
    """

    kind: str
    sites: tuple[Site, ...]
    block: np.ndarray  # s x s coefficient block (hashable copies are not needed)

    @property
    def support(self) -> tuple[Site, ...]:
        return self.sites

    @property
    def s(self) -> int:
        return self.block.shape[0]

    def local_matrix(self) -> np.ndarray:
        """Dense matrix on the full Fock space of the support."""
        s = self.s
        n_modes = s * len(self.sites)
        ann = [full_fock_annihilator(n_modes, m).toarray().astype(complex)
               for m in range(n_modes)]
        cre = [a.conj().T for a in ann]
        dim = 1 << n_modes
        out = np.zeros((dim, dim), dtype=complex)
        if self.kind == "onsite":
            for i in range(s):
                for j in range(s):
                    if self.block[i, j] != 0:
                        out += self.block[i, j] * cre[i] @ ann[j]
        elif self.kind == "hopping":
            # modes 0..s-1 on the smaller site, s..2s-1 on the larger
            for i in range(s):
                for j in range(s):
                    if self.block[i, j] != 0:
                        out += self.block[i, j] * cre[i] @ ann[s + j]
            out = out + out.conj().T
        elif self.kind == "density":
            for i in range(s):
                for j in range(s):
                    if self.block[i, j] != 0:
                        ni = cre[i] @ ann[i]
                        nj = cre[s + j] @ ann[s + j]
                        out += self.block[i, j] * ni @ nj
        else:
            raise ValidationError(f"unknown term kind {self.kind!r}")
        return out

    def local_norm(self) -> float:
        return float(np.linalg.norm(self.local_matrix(), ord=2))

    def add_to(self, basis: FockBasis, accum):
        """Accumulate the sector matrix of this term into `accum` (csr sum list)."""
        s = basis.s
        if self.kind == "onsite":
            (x,) = self.sites
            for i in range(s):
                for j in range(s):
                    c = self.block[i, j]
                    if c != 0:
                        accum.append(c * bilinear(basis, (x, i), (x, j)).matrix)
        elif self.kind == "hopping":
            x, y = self.sites
            for i in range(s):
                for j in range(s):
                    c = self.block[i, j]
                    if c != 0:
                        b = bilinear(basis, (x, i), (y, j)).matrix
                        accum.append(c * b)
                        accum.append(np.conj(c) * b.conj().T)
        elif self.kind == "density":
            x, y = self.sites
            diag = np.zeros(basis.dimension)
            for i in range(s):
                for j in range(s):
                    c = self.block[i, j]
                    if c != 0:
                        occ = basis.occupations(basis.mode_index(x, i)) * \
                            basis.occupations(basis.mode_index(y, j))
                        diag = diag + np.real(c) * occ
            accum.append(sp.diags(diag).tocsr())
        else:
            raise ValidationError(f"unknown term kind {self.kind!r}")


def onsite_term(x: Site, block, s: int = 1) -> Term:
    mat = _as_matrix(block, s)
    if not np.allclose(mat, mat.conj().T, atol=1e-14):
        raise ValidationError("onsite block must be self-adjoint")
    return Term("onsite", (tuple(x),), mat)


def hopping_term(x: Site, y: Site, block, s: int = 1) -> Term:
    x, y = tuple(x), tuple(y)
    if x == y:
        raise DomainError("hopping term needs two distinct sites")
    if y < x:
        x, y = y, x
        block = np.asarray(_as_matrix(block, s)).conj().T
    return Term("hopping", (x, y), _as_matrix(block, s))


def density_term(x: Site, y: Site, block, s: int = 1) -> Term:
    x, y = tuple(x), tuple(y)
    if y < x:
        x, y = y, x
        block = np.asarray(_as_matrix(block, s)).T
    mat = _as_matrix(block, s)
    if not np.allclose(mat.imag, 0.0, atol=1e-14):
        raise ValidationError("density-density block must be real")
    return Term("density", (x, y), mat)


# ---------------------------------------------------------------------------
# Interactions

@dataclass(frozen=True)
class Interaction:
    """Family {Phi^{Lambda(k)}} given by a per-k term generator."""

    term_generator: Callable[[int], list[Term]]
    rate: float
    geometry_factory: Callable[[int], LatticeGeometry]

    def terms(self, k: int) -> list[Term]:
        return list(self.term_generator(k))

    def geometry(self, k: int) -> LatticeGeometry:
        return self.geometry_factory(k)


def _weighted_sup(terms: Sequence[tuple[tuple[Site, ...], float]],
                  geometry: LatticeGeometry, a: float, n: int) -> float:
    """sup over site pairs of the diameter- and distance-weighted term sums."""
    pair_sums: dict[tuple[Site, Site], float] = {}
    for support, norm in terms:
        if norm == 0.0:
            continue
        diam = geometry.diameter(support)
        for x in support:
            for y in support:
                weight = (diam ** n if n > 0 else 1.0) * np.exp(a * geometry.metric(x, y))
                key = (x, y)
                pair_sums[key] = pair_sums.get(key, 0.0) + weight * norm
    return max(pair_sums.values(), default=0.0)


def interaction_norm(phi: Interaction, a: float, n: int, k: int) -> float:
    """Exact evaluation of the localization norm on the finite box."""
    if n < 0:
        raise DomainError("n must be >= 0")
    geometry = phi.geometry(k)
    weighted = [(t.support, t.local_norm()) for t in phi.terms(k)]
    return _weighted_sup(weighted, geometry, a, n)


def _restrict_and_group(phi: Interaction, k: int, window: set[Site]) -> dict:
    """Terms of Phi^{Lambda(k)} with support inside the window, summed per support."""
    grouped: dict[tuple[Site, ...], np.ndarray] = {}
    for t in phi.terms(k):
        if not all(x in window for x in t.support):
            continue
        mat = t.local_matrix()
        key = (t.support, t.s)
        if key in grouped:
            grouped[key] = grouped[key] + mat
        else:
            grouped[key] = mat
    return grouped


def cauchy_diagnostic(phi: Interaction, M: int, k1: int, k2: int,
                      a: float, n: int) -> float:
    """Localization norm of (Phi^{Lambda(k1)} - Phi^{Lambda(k2)}) restricted
    to the window Lambda(M). A sequence of these over growing k certifies the
    thermodynamic-limit property empirically."""
    if M > min(k1, k2):
        raise DomainError(f"window radius M={M} exceeds min(k1, k2)={min(k1, k2)}")
    d = phi.geometry(max(k1, k2)).d
    window_geo = LatticeGeometry.box(M, d, CUBE)
    window = set(window_geo.sites)
    g1 = _restrict_and_group(phi, k1, window)
    g2 = _restrict_and_group(phi, k2, window)
    weighted = []
    for key in set(g1) | set(g2):
        support, s = key
        dim = 1 << (s * len(support))
        m1 = g1.get(key, np.zeros((dim, dim)))
        m2 = g2.get(key, np.zeros((dim, dim)))
        weighted.append((support, float(np.linalg.norm(m1 - m2, ord=2))))
    return _weighted_sup(weighted, window_geo, a, n)


# ---------------------------------------------------------------------------
# The kinetic/potential/pair-interaction example model

@dataclass(frozen=True)
class ModelParameters:
    """Kinetic stencil, on-site potential, pair coupling, chemical potential.

    t_stencil maps displacement tuples to s x s blocks with T(-x) = T(x)*;
    phi is an s x s self-adjoint block or a site -> block callable; w maps
    distances (>= 1) to s x s real blocks; mu shifts by -mu N.
    """

    s: int
    t_stencil: Mapping[tuple[int, ...], object]
    phi: object = 0.0
    w: Optional[Mapping[int, object]] = None
    mu: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "t_stencil", {
            tuple(k): _as_matrix(v, self.s) for k, v in self.t_stencil.items()
        })
        for disp, block in self.t_stencil.items():
            neg = tuple(-c for c in disp)
            if neg not in self.t_stencil:
                raise ValidationError(f"stencil misses the reverse displacement {neg}")
            if not np.allclose(self.t_stencil[neg], block.conj().T, atol=1e-12):
                raise ValidationError(f"T({neg}) != T({disp})^* : kinetic term not Hermitian")
        if self.w is not None:
            object.__setattr__(self, "w", {
                int(dk): _as_matrix(v, self.s) for dk, v in self.w.items()
            })

    def phi_block(self, site: Site) -> np.ndarray:
        if callable(self.phi):
            return _as_matrix(self.phi(site), self.s)
        return _as_matrix(self.phi, self.s)

    def check_decay(self, rate: float, geometry: LatticeGeometry) -> float:
        """Empirical decay validation: max over sampled displacements of
        ||T(x)|| * exp(rate*|x|) (and likewise for w); finite means consistent
        with the declared rate on this box."""
        worst = 0.0
        for disp, block in self.t_stencil.items():
            r = sum(abs(c) for c in disp)
            worst = max(worst, float(np.linalg.norm(block, 2)) * float(np.exp(rate * r)))
        if self.w:
            for dist, block in self.w.items():
                worst = max(worst, float(np.linalg.norm(block, 2)) * float(np.exp(rate * dist)))
        return worst


def model_terms(params: ModelParameters, geometry: LatticeGeometry) -> list[Term]:
    """Term list of the example Hamiltonian on one box (chemical potential
    folded into the on-site blocks)."""
    s = params.s
    terms: list[Term] = []
    sites = geometry.sites
    mu_block = params.mu * np.eye(s)
    for x in sites:
        terms.append(onsite_term(x, params.phi_block(x) - mu_block, s))
    seen = set()
    for x in sites:
        for y in sites:
            if x == y:
                continue
            disp = geometry.displacement(x, y)
            block = params.t_stencil.get(disp)
            if block is not None and frozenset((x, y)) not in seen:
                seen.add(frozenset((x, y)))
                # one term per unordered bond; h.c. included by the term kind
                bx, by = (x, y) if x < y else (y, x)
                bond = block if x < y else block.conj().T
                terms.append(hopping_term(bx, by, bond, s))
    if params.w:
        for i, x in enumerate(sites):
            for y in sites[i + 1:]:
                dist = geometry.metric(x, y)
                block = params.w.get(dist)
                if block is not None:
                    terms.append(density_term(x, y, block, s))
    return terms


def build_example_hamiltonian(params: ModelParameters, basis: FockBasis) -> ManyBodyOperator:
    """Assemble the kinetic + potential + pair-interaction Hamiltonian on a
    fixed-number sector; Hermitian and number conserving by construction."""
    if basis.s != params.s:
        raise ValidationError(f"basis has s={basis.s}, parameters have s={params.s}")
    accum: list[sp.spmatrix] = []
    for term in model_terms(params, basis.geometry):
        term.add_to(basis, accum)
    dim = basis.dimension
    total = sp.csr_matrix((dim, dim), dtype=complex)
    for mat in accum:
        total = total + mat
    total = (total + total.conj().T) * 0.5
    return ManyBodyOperator(basis, total.tocsr(), hermitian=True)


def interaction_from_params(params: ModelParameters, d: int, boundary: str,
                            rate: float = 1.0) -> Interaction:
    return Interaction(
        term_generator=lambda k: model_terms(params, LatticeGeometry.box(k, d, boundary)),
        rate=rate,
        geometry_factory=lambda k: LatticeGeometry.box(k, d, boundary),
    )


def dimerized_chain_hamiltonian(basis: FockBasis, t_strong: float = 1.0,
                                t_weak: float = 0.3) -> ManyBodyOperator:
    """Alternating-bond chain: bond x -> x+1 carries -t_strong for even x,
    -t_weak for odd x (parity of the absolute coordinate, so the pattern is
    k-consistent). Gapped at half filling for t_strong != t_weak and even
    length."""
    geometry = basis.geometry
    if geometry.d != 1:
        raise DomainError("dimerized chain is one-dimensional")
    accum: list[sp.spmatrix] = []
    (L,) = geometry.lengths
    xs = list(geometry.axis_range(0))
    bonds = [(x, x + 1) for x in xs[:-1]]
    if geometry.boundary == TORUS and L > 2:
        bonds.append((xs[-1], xs[0]))
    for x, y in bonds:
        t = t_strong if x % 2 == 0 else t_weak
        b = bilinear(basis, ((x,), 0), ((y,), 0)).matrix
        accum.append(-t * b)
        accum.append(-t * b.conj().T)
    dim = basis.dimension
    total = sp.csr_matrix((dim, dim), dtype=complex)
    for mat in accum:
        total = total + mat
    return ManyBodyOperator(basis, total.tocsr(), hermitian=True)


def bond_current(basis: FockBasis, x, y, orbital: int = 0) -> ManyBodyOperator:
    """Particle current through the bond x -> y for unit hopping,
    i (c_x^dag c_y - c_y^dag c_x). Purely imaginary in the occupation basis,
    which makes it the natural probe for dissipative response components."""
    b = bilinear(basis, (tuple(x), orbital), (tuple(y), orbital)).matrix
    return ManyBodyOperator(basis, (1j * (b - b.conj().T)).tocsr(),
                            hermitian=True)


def ladder_model(delta: float = 1.0, t: float = 0.2, w: float = 0.1,
                 w_range: int = 2, mu: float = 0.0, t_mix: float = 0.15) -> ModelParameters:
    """Translation-invariant gapped two-orbital chain: on-site orbital
    splitting +-delta, nearest-neighbor hopping -t within each orbital and
    -t_mix between orbitals (the mixing keeps local densities fluctuating),
    and an exponentially decaying density-density coupling w * 2^{-(r-1)} up
    to w_range. Gapped at one particle per site for 2*delta > 4*(t+t_mix)."""
    phi = np.diag([-delta, delta])
    bond = -np.array([[t, t_mix], [t_mix, t]])
    stencil = {(1,): bond, (-1,): bond}
    wmap = {r: w * (0.5 ** (r - 1)) * np.ones((2, 2)) for r in range(1, w_range + 1)} if w else None
    return ModelParameters(s=2, t_stencil=stencil, phi=phi, w=wmap, mu=mu)


# ---------------------------------------------------------------------------
# Lipschitz potentials

@dataclass(frozen=True)
class LipschitzPotential:
    """Per-volume real potential family with a uniformly bounded discrete slope."""

    name: str
    boundary: str
    evaluator: Callable[[Site, LatticeGeometry], float]

    def values(self, geometry: LatticeGeometry) -> np.ndarray:
        return np.array([self.evaluator(x, geometry) for x in geometry.sites])


def linear_potential(axis: int = 0) -> LipschitzPotential:
    """v(x) = x_axis on the open box."""
    return LipschitzPotential(
        name=f"linear[{axis}]",
        boundary=CUBE,
        evaluator=lambda x, geo: float(x[axis]),
    )


def sawtooth_potential(axis: int = 0) -> LipschitzPotential:
    """Torus-compatible saw tooth: x_axis on the central half of the box,
    reflected toward zero on the outer quarters so the wrap is seamless.
    Branch boundaries at half the box radius, closed on the central branch."""

    def _eval(x: Site, geo: LatticeGeometry) -> float:
        half = geo.lengths[axis] // 2
        xi = x[axis]
        if -half / 2 <= xi <= half / 2:
            return float(xi)
        if xi > half / 2:
            return float(half - xi)
        return float(-half - xi)

    return LipschitzPotential(name=f"sawtooth[{axis}]", boundary=TORUS, evaluator=_eval)


def constant_potential(c: float) -> LipschitzPotential:
    return LipschitzPotential(name=f"const[{c}]", boundary=CUBE,
                              evaluator=lambda x, geo: float(c))


def potential_operator(v: LipschitzPotential, basis: FockBasis) -> ManyBodyOperator:
    """Diagonal operator sum_x v(x) a*_x a_x on the sector."""
    vals = v.values(basis.geometry)
    diag = np.zeros(basis.dimension)
    for idx, _ in enumerate(basis.geometry.sites):
        site_occ = np.zeros(basis.dimension)
        for i in range(basis.s):
            site_occ += basis.occupations(idx * basis.s + i)
        diag += vals[idx] * site_occ
    return ManyBodyOperator(basis, sp.diags(diag).tocsr(), hermitian=True)


def lipschitz_constant(v: LipschitzPotential, k_range: Sequence[int], d: int = 1) -> float:
    """Exact supremum of |v(x)-v(y)| / d(x,y) over all site pairs of the
    listed boxes."""
    if not k_range:
        raise DomainError("k_range must be nonempty")
    best = 0.0
    for k in k_range:
        geometry = LatticeGeometry.box(k, d, v.boundary)
        vals = v.values(geometry)
        sites = geometry.sites
        for i, x in enumerate(sites):
            for j in range(i + 1, len(sites)):
                dist = geometry.metric(x, sites[j])
                if dist > 0:
                    best = max(best, abs(vals[i] - vals[j]) / dist)
    return best


@dataclass(frozen=True)
class PotentialLimitReport:
    stabilized: bool
    v_inf: dict[Site, float]
    max_tail: float


def potential_limit_check(v: LipschitzPotential, M: int, k_range: Sequence[int],
                          d: int = 1, tol: float = 1e-9) -> PotentialLimitReport:
    """Check that v^{Lambda(k)} restricted to Lambda(M) stabilizes over the
    listed k and report the stabilized window values."""
    ks = sorted(k_range)
    if not ks or ks[0] < M:
        raise DomainError("k_range must be nonempty with min(k_range) >= M")
    window = LatticeGeometry.box(M, d, CUBE).sites
    samples = []
    for k in ks:
        geometry = LatticeGeometry.box(k, d, v.boundary)
        samples.append(np.array([v.evaluator(x, geometry) for x in window]))
    tails = [float(np.max(np.abs(b - a))) for a, b in zip(samples, samples[1:])]
    max_tail = max(tails) if tails else 0.0
    return PotentialLimitReport(
        stabilized=max_tail <= tol,
        v_inf={x: float(val) for x, val in zip(window, samples[-1])},
        max_tail=max_tail,
    )
