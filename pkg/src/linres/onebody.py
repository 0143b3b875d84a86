"""One-body magnetic lattice models and quantized Hall diagnostics.

Three independent routes to the same integer: a windowed real-space
double-commutator trace, a Brillouin-zone plaquette (field-strength) Chern
number, and a flux derivative of the integrated density of states. Hall
values are reported in 2*pi-normalized units so a gapped bulk reads as an
integer.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd, pi

import numpy as np

from .errors import DomainError, GapError
from .lattice import CUBE, TORUS, LatticeGeometry


@dataclass(frozen=True)
class OneBodyHamiltonian:
    """Hermitian one-body matrix on the site space of a 2d box."""

    geometry: LatticeGeometry
    matrix: np.ndarray
    flux_p: int = 0
    flux_q: int = 1
    staggered: float = 0.0

    @property
    def flux(self) -> float:
        return self.flux_p / self.flux_q


def _positions(geometry: LatticeGeometry) -> tuple[np.ndarray, np.ndarray]:
    coords = np.array(geometry.sites, dtype=float)
    return coords[:, 0], coords[:, 1]


def hofstadter(k: int | LatticeGeometry, p: int, q: int,
               staggered: float = 0.0, boundary: str = TORUS) -> OneBodyHamiltonian:
    """Square-lattice nearest-neighbor model with flux p/q per plaquette.

    Landau gauge: hopping -1 on horizontal bonds, -exp(2*pi*i*(p/q)*x) on the
    vertical bond leaving (x, y) upward; optional staggered on-site term
    staggered * (-1)^(x+y). On the torus the flux must wind an integer number
    of times around each cycle, so q has to divide the side length."""
    if isinstance(k, LatticeGeometry):
        geometry = k
    else:
        geometry = LatticeGeometry.box(k, 2, boundary)
    if geometry.d != 2:
        raise DomainError("magnetic model needs a two-dimensional box")
    if q < 1:
        raise DomainError(f"need q >= 1, got q={q}")
    Lx, Ly = geometry.lengths
    if geometry.boundary == TORUS and p % q != 0 and Lx % q != 0:
        raise DomainError(
            f"flux {p}/{q} incompatible with torus side {Lx}: q must divide the side"
        )
    n = geometry.n_sites
    H = np.zeros((n, n), dtype=complex)
    phi = p / q
    index = geometry.site_index
    for (x, y), i in index.items():
        H[i, i] = staggered * ((-1) ** (x + y))
        for axis, step in ((0, 1), (1, 1)):
            target = list((x, y))
            target[axis] += step
            tx, ty = target
            if geometry.boundary == TORUS:
                rng_x = geometry.axis_range(0)
                rng_y = geometry.axis_range(1)
                tx = (tx - rng_x.start) % Lx + rng_x.start
                ty = (ty - rng_y.start) % Ly + rng_y.start
            if (tx, ty) not in index:
                continue
            j = index[(tx, ty)]
            amp = -1.0 if axis == 0 else -np.exp(2j * pi * phi * x)
            H[j, i] += amp
            H[i, j] += np.conj(amp)
    return OneBodyHamiltonian(geometry=geometry, matrix=H, flux_p=p, flux_q=q,
                              staggered=staggered)


@dataclass(frozen=True)
class FermiProjection:
    P: np.ndarray
    mu: float
    gap_margin: float
    geometry: LatticeGeometry

    @property
    def rank(self) -> int:
        return int(round(np.real(np.trace(self.P))))


def fermi_projection(H: OneBodyHamiltonian, mu: float,
                     gap_tol: float = 1e-8) -> FermiProjection:
    """Spectral projector onto energies below mu; mu must sit in a gap."""
    w, u = np.linalg.eigh(H.matrix)
    margin = float(np.min(np.abs(w - mu))) if len(w) else np.inf
    if margin < gap_tol:
        raise GapError(f"mu = {mu} within {margin:.3e} of the spectrum")
    below = w < mu
    ub = u[:, below]
    P = ub @ ub.conj().T
    return FermiProjection(P=P, mu=mu, gap_margin=margin, geometry=H.geometry)


def gap_midpoint(H: OneBodyHamiltonian, filled: int) -> float:
    """Chemical potential centered in the gap above the `filled` lowest states."""
    w = np.linalg.eigh(H.matrix)[0]
    if not 0 < filled < len(w):
        raise DomainError(f"filled={filled} outside (0, {len(w)})")
    return float((w[filled - 1] + w[filled]) / 2.0)


def dcf_conductivity(P: FermiProjection, window_fraction: float) -> float:
    """Windowed double-commutator Hall value 2*pi*i/|W| * tr(1_W P[[P,X1],[P,X2]] 1_W).

    Positions are unwrapped box coordinates even on the torus; the central
    window of the given linear fraction hides the coordinate seam."""
    if not 0.0 < window_fraction <= 1.0:
        raise DomainError(f"window_fraction must be in (0, 1], got {window_fraction}")
    geometry = P.geometry
    x1, x2 = _positions(geometry)
    p = P.P
    c1 = p * x1[None, :] - x1[:, None] * p  # [P, X1] elementwise: X diagonal
    c2 = p * x2[None, :] - x2[:, None] * p
    inner = c1 @ c2 - c2 @ c1
    core = p @ inner
    mask = _central_window(geometry, window_fraction)
    val = 1j * np.sum(np.diag(core)[mask]) / int(np.sum(mask))
    return float(2.0 * pi * np.real(val))


def _central_window(geometry: LatticeGeometry, fraction: float) -> np.ndarray:
    half = [fraction * L / 2.0 for L in geometry.lengths]
    coords = np.array(geometry.sites, dtype=float)
    mask = np.ones(len(coords), dtype=bool)
    for a in range(geometry.d):
        mask &= np.abs(coords[:, a] + 0.5 * (1 - geometry.lengths[a] % 2)) <= half[a]
    if not mask.any():
        raise DomainError("observation window contains no sites")
    return mask


def naive_dk1(P: FermiProjection) -> float:
    """-i tr(P [X1, X2]); identically zero because positions commute."""
    x1, x2 = _positions(P.geometry)
    comm = np.diag(x1 * x2 - x2 * x1)  # exact zero, kept for transparency
    return float(np.real(-1j * np.trace(P.P @ comm)))


def offdiagonal_position(P: FermiProjection, axis: int = 0) -> np.ndarray:
    """X^OD = P X (1-P) + (1-P) X P; same commutator with P as the full X."""
    x = _positions(P.geometry)[axis]
    p = P.P
    xm = np.diag(x)
    q = np.eye(len(x)) - p
    return p @ xm @ q + q @ xm @ p


# ---------------------------------------------------------------------------
# Momentum space: magnetic Bloch Hamiltonian and plaquette Chern numbers.

def _magnetic_cell(q: int, staggered: float) -> tuple[int, int]:
    qx = q
    qy = 1
    if staggered != 0.0:
        qx = qx if qx % 2 == 0 else 2 * qx
        qy = 2
    return qx, qy


def bloch_hamiltonian(p: int, q: int, staggered: float, kx: float, ky: float) -> np.ndarray:
    """H(k) on the magnetic unit cell, 2*pi-periodic in both k components."""
    qx, qy = _magnetic_cell(q, staggered)
    n = qx * qy
    H = np.zeros((n, n), dtype=complex)
    phi = p / q

    def idx(a, b):
        return (a % qx) + qx * (b % qy)

    for a in range(qx):
        for b in range(qy):
            i = idx(a, b)
            H[i, i] += staggered * ((-1) ** (a + b))
            # +x hop
            j = idx(a + 1, b)
            phase = np.exp(1j * kx) if a + 1 == qx else 1.0
            amp = -1.0 * phase
            H[j, i] += amp
            H[i, j] += np.conj(amp)
            # +y hop with Landau phase
            j = idx(a, b + 1)
            phase = np.exp(1j * ky) if b + 1 == qy else 1.0
            amp = -np.exp(2j * pi * phi * a) * phase
            H[j, i] += amp
            H[i, j] += np.conj(amp)
    return H


def tknn_chern(p: int, q: int, bands, Nk: int = 24, staggered: float = 0.0) -> int:
    """Chern number of the selected bands by plaquette field strengths.

    Link variables are determinants of band-overlap matrices on an Nk x Nk
    mesh of the magnetic Brillouin zone; the result is an exact integer
    whenever every plaquette phase stays below pi, and a band crossing inside
    the selection raises a gap error."""
    if Nk < 2:
        raise DomainError(f"need Nk >= 2, got {Nk}")
    bands = sorted(set(int(b) for b in bands))
    qx, qy = _magnetic_cell(q, staggered)
    nb = qx * qy
    if any(not 0 <= b < nb for b in bands):
        raise DomainError(f"band indices {bands} outside [0, {nb})")
    ks = 2.0 * pi * np.arange(Nk) / Nk
    vecs = np.empty((Nk, Nk, nb, len(bands)), dtype=complex)
    sel_gap = np.inf
    for i, kx in enumerate(ks):
        for j, ky in enumerate(ks):
            w, u = np.linalg.eigh(bloch_hamiltonian(p, q, staggered, kx, ky))
            vecs[i, j] = u[:, bands]
            for b in bands:
                if b + 1 < nb and (b + 1) not in bands:
                    sel_gap = min(sel_gap, w[b + 1] - w[b])
                if b - 1 >= 0 and (b - 1) not in bands:
                    sel_gap = min(sel_gap, w[b] - w[b - 1])
    if sel_gap < 1e-8:
        raise GapError(f"band selection touches its complement: gap {sel_gap:.3e}")

    def link(i, j, di, dj):
        m = vecs[i, j].conj().T @ vecs[(i + di) % Nk, (j + dj) % Nk]
        det = np.linalg.det(m)
        if abs(det) < 1e-12:
            raise GapError("vanishing link determinant: mesh too coarse")
        return det / abs(det)

    total = 0.0
    max_phase = 0.0
    for i in range(Nk):
        for j in range(Nk):
            u1 = link(i, j, 1, 0)
            u2 = link((i + 1) % Nk, j, 0, 1)
            u3 = link(i, (j + 1) % Nk, 1, 0)
            u4 = link(i, j, 0, 1)
            f = np.angle(u1 * u2 / (u3 * u4))
            max_phase = max(max_phase, abs(f))
            total += f
    if max_phase > 0.98 * pi:
        raise GapError(f"plaquette phase {max_phase:.3f} near pi: refine the mesh")
    chern = total / (2.0 * pi)
    rounded = int(round(chern))
    if abs(chern - rounded) > 1e-6:
        raise GapError(f"field-strength sum {chern} not integer")
    return rounded


def berry_curvature_chern(p: int, q: int, bands, Nk: int = 30,
                          staggered: float = 0.0) -> float:
    """Independent coarse oracle: finite-difference Berry curvature of the
    band projector integrated over the Brillouin zone. Returns a float close
    to (not exactly) the integer; cross-check for tknn_chern only."""
    bands = sorted(set(int(b) for b in bands))
    ks = 2.0 * pi * np.arange(Nk) / Nk
    dk = 2.0 * pi / Nk

    def projector(kx, ky):
        _, u = np.linalg.eigh(bloch_hamiltonian(p, q, staggered, kx, ky))
        ub = u[:, bands]
        return ub @ ub.conj().T

    total = 0.0
    for kx in ks:
        for ky in ks:
            pr = projector(kx, ky)
            dpx = (projector(kx + dk / 2, ky) - projector(kx - dk / 2, ky)) / dk
            dpy = (projector(kx, ky + dk / 2) - projector(kx, ky - dk / 2)) / dk
            curv = np.trace(pr @ (dpx @ dpy - dpy @ dpx))
            total += np.imag(curv) * dk * dk
    return float(total / (2.0 * pi))


# ---------------------------------------------------------------------------
# Flux derivative of the integrated density of states.

def _reduced_flux(m: int, side: int) -> tuple[int, int]:
    if m == 0:
        return 0, 1
    g = gcd(abs(m), side)
    return m // g, side // g


def streda(side: int, mu: float, phi0: float, staggered: float = 0.0,
           gap_tol: float = 1e-6) -> float:
    """Flux derivative of the particle density at fixed chemical potential.

    Counts eigenvalues below mu on a side x side torus at the two admissible
    rational fluxes m/side nearest to phi0 on either side and returns the
    central difference of density per site over flux, in the same
    2*pi-normalized units as dcf_conductivity. mu must stay in a spectral
    gap at both flux values."""
    geometry = LatticeGeometry(lengths=(side, side), boundary=TORUS)
    lower = (int(np.floor(phi0 * side - 1e-12))) / side
    upper = (int(np.floor(phi0 * side - 1e-12)) + 1) / side
    if abs(phi0 - lower) < 1e-12:
        lower -= 1.0 / side
        upper -= 1.0 / side  # phi0 itself admissible: straddle it symmetrically
        upper += 2.0 / side
    densities = []
    for f in (lower, upper):
        p, q = _reduced_flux(round(f * side), side)
        H = hofstadter(geometry, p, q, staggered=staggered)
        w = np.linalg.eigh(H.matrix)[0]
        margin = float(np.min(np.abs(w - mu)))
        if margin < gap_tol:
            raise GapError(
                f"mu = {mu} within {margin:.3e} of the spectrum at flux {p}/{q}"
            )
        densities.append(float(np.sum(w < mu)) / geometry.n_sites)
    return float((densities[1] - densities[0]) / (upper - lower))
