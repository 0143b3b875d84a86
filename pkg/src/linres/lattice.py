"""Finite lattice boxes, fixed-number fermionic bases, and second-quantized bilinears.

Conventions fixed once and used everywhere:

* sites are ordered lexicographically by coordinate tuple, internal index
  fastest, and every fermionic sign derives from that single mode order;
* a fixed-particle-number sector is primary, the full Fock space appears only
  inside the small-system CAR verification.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, ResourceError
from .kernels import bilinear_elements

CUBE = "cube"
TORUS = "torus"

_MAX_WORD_MODES = 64  # occupation words are machine words


@dataclass(frozen=True)
class LatticeGeometry:
    """Finite box with a cube (open) or torus (periodic) metric.

    The canonical box of radius k has side length 2k+1 per axis with
    coordinates -k..k. Even side lengths are also supported (coordinates
    -L/2 .. L/2-1) because several shipped models live on even chains.
    """

    lengths: tuple[int, ...]
    boundary: str = CUBE

    def __post_init__(self):
        if not self.lengths or any(L < 1 for L in self.lengths):
            raise DomainError(f"invalid side lengths {self.lengths}")
        if self.boundary not in (CUBE, TORUS):
            raise DomainError(f"boundary must be 'cube' or 'torus', got {self.boundary!r}")

    @classmethod
    def box(cls, k: int, d: int, boundary: str = CUBE) -> "LatticeGeometry":
        """Canonical box of radius k in dimension d, side 2k+1."""
        if k < 0 or d < 1:
            raise DomainError(f"need k >= 0 and d >= 1, got k={k}, d={d}")
        return cls(lengths=(2 * k + 1,) * d, boundary=boundary)

    @classmethod
    def chain(cls, n_sites: int, boundary: str = CUBE) -> "LatticeGeometry":
        return cls(lengths=(n_sites,), boundary=boundary)

    @property
    def d(self) -> int:
        return len(self.lengths)

    @property
    def k(self) -> int:
        """Box radius; defined for odd side lengths only."""
        L = self.lengths[0]
        if any(Li != L for Li in self.lengths) or L % 2 == 0:
            raise DomainError("box radius defined only for odd cubic boxes")
        return L // 2

    def axis_range(self, axis: int) -> range:
        L = self.lengths[axis]
        lo = -(L // 2)
        return range(lo, lo + L)

    @cached_property
    def sites(self) -> tuple[tuple[int, ...], ...]:
        return tuple(itertools.product(*(self.axis_range(a) for a in range(self.d))))

    @cached_property
    def site_index(self) -> dict[tuple[int, ...], int]:
        return {x: i for i, x in enumerate(self.sites)}

    @property
    def n_sites(self) -> int:
        n = 1
        for L in self.lengths:
            n *= L
        return n

    def _check_site(self, x) -> tuple[int, ...]:
        x = tuple(int(c) for c in np.atleast_1d(x))
        if x not in self.site_index:
            raise DomainError(f"site {x} outside box {self.lengths}")
        return x

    def metric(self, x, y) -> int:
        """l1 distance; per-axis wrapped for the torus."""
        x = self._check_site(x)
        y = self._check_site(y)
        dist = 0
        for a in range(self.d):
            delta = abs(x[a] - y[a])
            if self.boundary == TORUS:
                delta = min(delta, self.lengths[a] - delta)
            dist += delta
        return dist

    def displacement(self, x, y) -> tuple[int, ...]:
        """x - y, per axis; reduced to the symmetric representative on the torus."""
        x = self._check_site(x)
        y = self._check_site(y)
        out = []
        for a in range(self.d):
            delta = x[a] - y[a]
            if self.boundary == TORUS:
                L = self.lengths[a]
                delta = (delta + L // 2) % L - L // 2
            out.append(delta)
        return tuple(out)

    def diameter(self, sites) -> int:
        sites = list(sites)
        if not sites:
            return 0
        return max(self.metric(x, y) for x in sites for y in sites)


def _binom_table(modes: int, n: int) -> np.ndarray:
    table = np.zeros((modes + 1, n + 2), dtype=np.int64)
    for m in range(modes + 1):
        for j in range(min(m, n + 1) + 1):
            table[m, j] = comb(m, j)
    return table


def _sector_words(modes: int, n: int) -> np.ndarray:
    """All words with n of `modes` bits set, ascending (Gosper's hack)."""
    dim = comb(modes, n)
    out = np.empty(dim, dtype=np.uint64)
    if n == 0:
        out[0] = 0
        return out
    w = (1 << n) - 1
    for i in range(dim):
        out[i] = w
        c = w & -w
        r = w + c
        w = (((r ^ w) >> 2) // c) | r
    return out


@dataclass(frozen=True)
class FockBasis:
    """Occupation-number basis of the N-particle sector over a finite box.

    Mode order: site index (lexicographic coordinates) times s plus internal
    index, so the internal index runs fastest. States are stored as 64-bit
    words in ascending integer order.
    """

    geometry: LatticeGeometry
    s: int
    N: int

    def __post_init__(self):
        if self.s < 1:
            raise DomainError(f"need s >= 1, got {self.s}")
        if not 0 <= self.N <= self.modes:
            raise DomainError(f"N={self.N} outside [0, {self.modes}]")
        if self.modes > _MAX_WORD_MODES:
            raise ResourceError(
                f"{self.modes} modes exceed the machine-word limit of {_MAX_WORD_MODES}"
            )

    @property
    def modes(self) -> int:
        return self.s * self.geometry.n_sites

    @property
    def dimension(self) -> int:
        return comb(self.modes, self.N)

    @property
    def density(self) -> float:
        return self.N / self.geometry.n_sites

    @cached_property
    def states(self) -> np.ndarray:
        return _sector_words(self.modes, self.N)

    @cached_property
    def binom(self) -> np.ndarray:
        return _binom_table(self.modes, self.N)

    def mode_index(self, site, internal: int = 0) -> int:
        if not 0 <= internal < self.s:
            raise DomainError(f"internal index {internal} outside [0, {self.s})")
        site = self.geometry._check_site(site)
        return self.geometry.site_index[site] * self.s + internal

    def occupations(self, mode: int) -> np.ndarray:
        """0/1 occupation of `mode` in every basis state, as a float vector."""
        if not 0 <= mode < self.modes:
            raise DomainError(f"mode {mode} outside [0, {self.modes})")
        return ((self.states >> np.uint64(mode)) & np.uint64(1)).astype(float)


@dataclass(frozen=True)
class ManyBodyOperator:
    """Sparse operator on a fixed-number sector, with an optional hermiticity flag."""

    basis: FockBasis
    matrix: sp.spmatrix
    hermitian: bool = False

    def __post_init__(self):
        dim = self.basis.dimension
        if self.matrix.shape != (dim, dim):
            raise DomainError(
                f"matrix shape {self.matrix.shape} does not match basis dimension {dim}"
            )
        if self.hermitian:
            defect = abs(self.matrix - self.matrix.conj().T)
            if defect.nnz and defect.max() > 1e-12 * max(1.0, abs(self.matrix).max()):
                raise DomainError("operator flagged hermitian is not")

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __add__(self, other):
        if isinstance(other, ManyBodyOperator):
            return ManyBodyOperator(
                self.basis,
                (self.matrix + other.matrix).tocsr(),
                hermitian=self.hermitian and other.hermitian,
            )
        return NotImplemented


def bilinear(basis: FockBasis, creator, annihilator) -> ManyBodyOperator:
    """Sector matrix of a*_{creator} a_{annihilator}.

    Each argument is a mode: either a plain mode index or a (site, internal)
    pair. The fermionic sign is the parity of the occupied modes crossed by
    the two Jordan-Wigner strings.
    """
    p = _as_mode(basis, creator)
    q = _as_mode(basis, annihilator)
    rows, cols, signs = bilinear_elements(basis.states, p, q, basis.binom)
    mat = sp.coo_matrix(
        (signs.astype(float), (rows, cols)),
        shape=(basis.dimension, basis.dimension),
    ).tocsr()
    return ManyBodyOperator(basis, mat, hermitian=(p == q))


def _as_mode(basis: FockBasis, mode) -> int:
    if isinstance(mode, (int, np.integer)):
        if not 0 <= mode < basis.modes:
            raise DomainError(f"mode {mode} outside [0, {basis.modes})")
        return int(mode)
    site, internal = mode
    return basis.mode_index(site, internal)


def number_operator(basis: FockBasis) -> ManyBodyOperator:
    diag = np.zeros(basis.dimension)
    for m in range(basis.modes):
        diag += basis.occupations(m)
    return ManyBodyOperator(basis, sp.diags(diag).tocsr(), hermitian=True)


def enumerate_basis(geometry: LatticeGeometry, s: int, N: int) -> FockBasis:
    """Deterministic ordered basis of the N-particle sector."""
    return FockBasis(geometry=geometry, s=s, N=N)


# ---------------------------------------------------------------------------
# Full Fock space (small systems only): CAR verification and sign oracle.

def full_fock_annihilator(modes: int, p: int, broken_sign: bool = False) -> sp.csr_matrix:
    """a_p on the 2^modes-dimensional Fock space, integer entries.

    `broken_sign` drops the Jordan-Wigner string; it exists purely as a
    negative control for the CAR verification.
    """
    if not 0 <= p < modes:
        raise DomainError(f"mode {p} outside [0, {modes})")
    dim = 1 << modes
    rows = []
    cols = []
    vals = []
    bit = 1 << p
    below = bit - 1
    for w in range(dim):
        if w & bit:
            sign = 1
            if not broken_sign and bin(w & below).count("1") & 1:
                sign = -1
            rows.append(w ^ bit)
            cols.append(w)
            vals.append(sign)
    return sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim), dtype=np.int64).tocsr()


@dataclass(frozen=True)
class CARReport:
    modes: int
    passed: bool
    max_violation: int
    failures: tuple[str, ...]


def car_check(modes: int, broken_sign: bool = False) -> CARReport:
    """Verify all canonical anticommutators exactly on the full Fock space.

    Integer matrices throughout, so 'exactly' means zero violation, not a
    tolerance. Limited to 12 modes (dense-equivalent 2^modes space).
    """
    if modes < 1:
        raise DomainError(f"need modes >= 1, got {modes}")
    if modes > 12:
        raise ResourceError(f"car_check limited to 12 modes, got {modes}")
    dim = 1 << modes
    eye = sp.identity(dim, dtype=np.int64, format="csr")
    ann = [full_fock_annihilator(modes, p, broken_sign=broken_sign) for p in range(modes)]
    cre = [a.T for a in ann]  # real integer matrices: adjoint is the transpose

    failures = []
    max_violation = 0

    def _record(label, mat):
        nonlocal max_violation
        dev = int(abs(mat).max()) if mat.nnz else 0
        if dev:
            failures.append(label)
            max_violation = max(max_violation, dev)

    for p in range(modes):
        for q in range(p, modes):
            _record(f"{{a_{p}, a_{q}}}", ann[p] @ ann[q] + ann[q] @ ann[p])
            _record(f"{{a*_{p}, a*_{q}}}", cre[p] @ cre[q] + cre[q] @ cre[p])
            mixed = ann[p] @ cre[q] + cre[q] @ ann[p]
            if p == q:
                mixed = mixed - eye
            _record(f"{{a_{p}, a*_{q}}}", mixed)
    return CARReport(
        modes=modes,
        passed=not failures,
        max_violation=max_violation,
        failures=tuple(failures),
    )
