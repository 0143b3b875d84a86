"""Term machinery, localization norms, potentials, model Hamiltonians."""

import math

import numpy as np
import pytest

from linres.errors import DomainError, ValidationError
from linres.lattice import CUBE, TORUS, FockBasis, LatticeGeometry, number_operator
from linres import spectral as spl
from linres.interactions import (
    Interaction,
    ModelParameters,
    build_example_hamiltonian,
    cauchy_diagnostic,
    constant_potential,
    density_term,
    dimerized_chain_hamiltonian,
    hopping_term,
    interaction_from_params,
    interaction_norm,
    ladder_model,
    linear_potential,
    lipschitz_constant,
    model_terms,
    onsite_term,
    potential_limit_check,
    potential_operator,
    sawtooth_potential,
)


def chain_geo(k, boundary=CUBE):
    return LatticeGeometry.box(k, 1, boundary)


class TestTerms:
    def test_hopping_local_norm_unit(self):
        t = hopping_term((0,), (1,), [[1.0]], s=1)
        assert t.local_norm() == pytest.approx(1.0, abs=1e-12)

    def test_onsite_needs_self_adjoint(self):
        with pytest.raises(ValidationError):
            onsite_term((0,), [[1j]], s=1)

    def test_density_term_site_ordering(self):
        a = density_term((1,), (0,), [[2.0]], s=1)
        assert a.sites == ((0,), (1,))


class TestModelParameters:
    def test_stencil_must_be_reversible(self):
        with pytest.raises(ValidationError):
            ModelParameters(s=1, t_stencil={(1,): [[1.0]]})

    def test_stencil_adjointness_enforced(self):
        with pytest.raises(ValidationError):
            ModelParameters(s=1, t_stencil={(1,): [[1j]], (-1,): [[1j]]})

    def test_decay_check_finite(self):
        params = ladder_model()
        assert params.check_decay(0.1, chain_geo(3)) < 10.0


class TestHamiltonianAssembly:
    def test_commutes_with_number(self):
        basis = FockBasis(chain_geo(2), s=2, N=5)
        H = build_example_hamiltonian(ladder_model(), basis)
        N = number_operator(basis)
        comm = H.matrix @ N.matrix - N.matrix @ H.matrix
        assert abs(comm).max() <= 1e-12

    def test_hermitian(self):
        basis = FockBasis(chain_geo(2), s=2, N=5)
        H = build_example_hamiltonian(ladder_model(), basis)
        assert H.hermitian

    def test_dimerized_chain_gap_matches_free_fermions(self):
        # one-body oracle: alternating bonds, half filling; the many-body gap
        # equals the smallest particle-hole excitation of the band problem
        t1, t2 = 1.0, 0.3
        L = 8
        basis = FockBasis(LatticeGeometry.chain(L, TORUS), s=1, N=L // 2)
        H = dimerized_chain_hamiltonian(basis, t1, t2)
        spec = spl.diagonalize(H)
        h1 = np.zeros((L, L))
        for x in range(L):
            t = t1 if (x - L // 2) % 2 == 0 else t2
            h1[x, (x + 1) % L] = -t
            h1[(x + 1) % L, x] = -t
        w = np.linalg.eigvalsh(h1)
        assert spec.gap == pytest.approx(w[L // 2] - w[L // 2 - 1], abs=1e-10)

    def test_ladder_is_gapped(self):
        basis = FockBasis(chain_geo(2), s=2, N=5)
        spec = spl.diagonalize(build_example_hamiltonian(ladder_model(), basis))
        assert spec.gap > 1.0


class TestInteractionNorm:
    def _nn_chain(self, k):
        geo = chain_geo(k)
        terms = [hopping_term(x, (x[0] + 1,), [[1.0]], s=1)
                 for x in geo.sites[:-1]]
        return terms

    def test_nearest_neighbor_unit_chain(self):
        phi = Interaction(term_generator=self._nn_chain, rate=1.0,
                          geometry_factory=lambda k: chain_geo(k))
        for a in (0.0, 0.5, 1.0):
            expect = max(2.0, math.exp(a))
            assert interaction_norm(phi, a, 1, 3) == pytest.approx(expect, rel=1e-12)

    def test_onsite_vanishes_for_positive_n(self):
        phi = Interaction(
            term_generator=lambda k: [onsite_term(x, [[1.0]], s=1)
                                      for x in chain_geo(k).sites],
            rate=1.0,
            geometry_factory=lambda k: chain_geo(k),
        )
        assert interaction_norm(phi, 0.7, 1, 3) == 0.0
        assert interaction_norm(phi, 0.0, 0, 3) == 1.0

    def test_monotone_in_a_and_n(self):
        phi = interaction_from_params(ladder_model(), d=1, boundary=CUBE)
        base = interaction_norm(phi, 0.2, 1, 2)
        assert interaction_norm(phi, 0.4, 1, 2) >= base
        assert interaction_norm(phi, 0.2, 2, 2) >= base

    def test_decay_rate_threshold(self):
        # two-body coupling decaying like e^{-b r}: norms at a < b flat in k,
        # at a > b growing
        b = math.log(2.0)
        wmap = {r: [[math.exp(-b * r)]] for r in range(1, 10)}

        def terms(k):
            geo = chain_geo(k)
            out = []
            for i, x in enumerate(geo.sites):
                for y in geo.sites[i + 1:]:
                    out.append(density_term(x, y, wmap[geo.metric(x, y)], s=1))
            return out

        phi = Interaction(term_generator=terms, rate=b,
                          geometry_factory=lambda k: chain_geo(k))
        lo = [interaction_norm(phi, 0.5 * b, 0, k) for k in (2, 3, 4)]
        hi = [interaction_norm(phi, 1.5 * b, 0, k) for k in (2, 3, 4)]
        assert lo[-1] / lo[0] < 1.5
        assert hi[-1] > 1.5 * hi[0]


class TestCauchyDiagnostic:
    def test_translation_invariant_cube_restriction_is_zero(self):
        phi = interaction_from_params(ladder_model(), d=1, boundary=CUBE)
        assert cauchy_diagnostic(phi, 1, 2, 3, 0.5, 1) == 0.0

    def test_torus_wrap_terms_leave_the_window(self):
        phi = interaction_from_params(ladder_model(w=0.0), d=1, boundary=TORUS)
        assert cauchy_diagnostic(phi, 1, 3, 4, 0.5, 1) == 0.0

    def test_decaying_boundary_field_gives_decreasing_sequence(self):
        # on-site field sourced at the box edge, penetrating as e^{-(k-|x|)}
        def terms(k):
            geo = chain_geo(k)
            return [onsite_term(x, [[math.exp(-(k - abs(x[0])))]], s=1)
                    for x in geo.sites]

        phi = Interaction(term_generator=terms, rate=1.0,
                          geometry_factory=lambda k: chain_geo(k))
        seq = [cauchy_diagnostic(phi, 1, k, k + 1, 0.3, 0) for k in (2, 3, 4, 5)]
        assert all(a > b > 0 for a, b in zip(seq, seq[1:]))

    def test_window_must_fit(self):
        phi = interaction_from_params(ladder_model(), d=1, boundary=CUBE)
        with pytest.raises(DomainError):
            cauchy_diagnostic(phi, 4, 2, 3, 0.5, 1)


class TestPotentials:
    def test_linear_values(self):
        geo = chain_geo(2)
        np.testing.assert_allclose(linear_potential().values(geo),
                                   [-2, -1, 0, 1, 2])

    def test_sawtooth_matches_three_branch_formula_odd_box(self):
        geo = LatticeGeometry.box(4, 1, TORUS)  # sites -4..4, half-length 4
        vals = sawtooth_potential().values(geo)
        np.testing.assert_allclose(vals, [0, -1, -2, -1, 0, 1, 2, 1, 0])

    def test_sawtooth_seamless_on_torus(self):
        geo = LatticeGeometry.chain(8, TORUS)
        v = sawtooth_potential()
        vals = dict(zip(geo.sites, v.values(geo)))
        for x in geo.sites:
            for y in geo.sites:
                if geo.metric(x, y) == 1:
                    assert abs(vals[x] - vals[y]) <= 1.0

    def test_lipschitz_constants_are_one(self):
        assert lipschitz_constant(linear_potential(), [2, 3]) == pytest.approx(1.0)
        assert lipschitz_constant(sawtooth_potential(), [2, 3]) == pytest.approx(1.0)

    def test_constant_potential_zero_slope(self):
        assert lipschitz_constant(constant_potential(3.0), [2]) == 0.0

    def test_limit_check_stabilizes(self):
        rep = potential_limit_check(linear_potential(), M=1, k_range=[3, 5, 7])
        assert rep.stabilized
        assert rep.v_inf[(1,)] == pytest.approx(1.0)
        rep2 = potential_limit_check(sawtooth_potential(), M=1, k_range=[3, 5, 7])
        assert rep2.stabilized
        assert rep2.v_inf == rep.v_inf

    def test_shrinking_potential_flagged_with_zero_limit(self):
        from linres.interactions import LipschitzPotential

        v = LipschitzPotential(
            name="x-over-k", boundary=CUBE,
            evaluator=lambda x, geo: x[0] / geo.k,
        )
        rep = potential_limit_check(v, M=1, k_range=[50, 100, 200], tol=0.05)
        assert rep.stabilized
        assert all(abs(val) < 0.05 for val in rep.v_inf.values())

    def test_potential_operator_diagonal(self):
        basis = FockBasis(LatticeGeometry.chain(8, TORUS), s=1, N=4)
        V = potential_operator(sawtooth_potential(), basis)
        import scipy.sparse as sp

        off = V.matrix - sp.diags(V.matrix.diagonal())
        assert abs(off).max() == 0

    def test_local_commutator_agreement(self):
        # restricted to observables in the central window, the two potential
        # families generate identical commutators once the box is large enough
        M = 1
        for k in (2, 3):
            geo_c = chain_geo(k, CUBE)
            geo_t = chain_geo(k, TORUS)
            basis_c = FockBasis(geo_c, s=1, N=k)
            basis_t = FockBasis(geo_t, s=1, N=k)
            window_vals_c = {x: v for x, v in
                             zip(geo_c.sites, linear_potential().values(geo_c))
                             if abs(x[0]) <= M}
            window_vals_t = {x: v for x, v in
                             zip(geo_t.sites, sawtooth_potential().values(geo_t))
                             if abs(x[0]) <= M}
            assert window_vals_c == window_vals_t
