"""Acceptance suite: ten desk-scale criteria, one pass/fail line each.

Each test prints a single summary line (visible with pytest -s, or in the
captured output of a failing run) and then asserts the stated tolerance.
"""

import numpy as np
import pytest
import scipy.sparse as sp

from linres.lattice import (
    CUBE,
    TORUS,
    FockBasis,
    LatticeGeometry,
    ManyBodyOperator,
    bilinear,
    car_check,
    full_fock_annihilator,
)
from linres import spectral as spl
from linres import onebody as ob
from linres.dynamics import bump_switch, ramp_switch
from linres.interactions import (
    bond_current,
    dimerized_chain_hamiltonian,
    potential_operator,
    sawtooth_potential,
)
from linres.neass import (
    build_S1,
    kubo_coefficient_K1,
    neass_state,
    stationarity_defect,
)
from linres.response import fit_exponent, response_sweep, switching_independence


def report(num, label, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:2d} {label}: {status} ({detail})")
    assert ok, f"criterion {num} ({label}): {detail}"


@pytest.fixture(scope="module")
def chain8():
    basis = FockBasis(LatticeGeometry.chain(8, TORUS), s=1, N=4)
    H = dimerized_chain_hamiltonian(basis)
    V = potential_operator(sawtooth_potential(), basis)
    spec = spl.diagonalize(H)
    return basis, H, V, spec


def density_observable(basis, site=(1,)):
    diag = basis.occupations(basis.mode_index(site, 0))
    return ManyBodyOperator(basis, sp.diags(diag).tocsr(), hermitian=True)


def test_criterion_01_car_suite():
    worst = 0
    for modes in range(1, 13):
        rep = car_check(modes)
        worst = max(worst, rep.max_violation)
        if not rep.passed:
            report(1, "CAR suite", False, f"violation at {modes} modes")
    mismatches = 0
    for modes in range(1, 7):
        for N in range(modes + 1):
            basis = FockBasis(LatticeGeometry.chain(modes), s=1, N=N)
            words = basis.states.astype(np.int64)
            for p in range(modes):
                for q in range(modes):
                    sector = bilinear(basis, p, q).matrix.toarray()
                    full = (full_fock_annihilator(modes, p).T @
                            full_fock_annihilator(modes, q)).toarray()
                    oracle = full[np.ix_(words, words)].astype(float)
                    if not np.array_equal(sector, oracle):
                        mismatches += 1
    ok = worst == 0 and mismatches == 0
    report(1, "CAR suite", ok,
           f"max violation {worst}, sector mismatches {mismatches}")


def test_criterion_02_spectral_consistency():
    rng = np.random.default_rng(2024)
    worst_res = 0.0
    worst_diff = 0.0
    for _ in range(50):
        dim = int(rng.integers(10, 201))
        h, v = spl.random_gapped_instance(rng, dim)
        spec = spl.diagonalize(h)
        rho = spec.rho0
        b = rho @ v - v @ rho
        x = spl.inverse_liouvillian(spec, b)
        res = np.linalg.norm(h @ x - x @ h - b) / np.linalg.norm(b)
        worst_res = max(worst_res, res)
        a_raw = rng.standard_normal((dim, dim))
        a = (a_raw + a_raw.T) / 2
        a /= np.linalg.norm(a, 2)  # unit observable: absolute tol is meaningful
        diff = abs(spl.kubo_regularized(spec, v, a, 0.0)
                   - kubo_coefficient_K1(spec, v, a))
        worst_diff = max(worst_diff, diff)
    ok = worst_res <= 1e-10 and worst_diff <= 1e-12
    report(2, "spectral consistency", ok,
           f"worst residual {worst_res:.2e}, worst K1 diff {worst_diff:.2e}")


def test_criterion_03_kubo_eta_limit(chain8):
    basis, H, V, spec = chain8
    J = bond_current(basis, (0,), (1,))
    sigma0 = spl.kubo_regularized(spec, V, J, 0.0)
    etas = [1e-1, 1e-2, 1e-3, 1e-4]
    devs = [abs(spl.kubo_regularized(spec, V, J, e, full=True) - sigma0)
            for e in etas]
    slope = float(np.polyfit(np.log(etas), np.log(devs), 1)[0])
    bound = all(d <= 1.0 * e for d, e in zip(devs, etas))
    ok = bound and 0.8 <= slope <= 1.2
    report(3, "kubo eta-limit", ok, f"slope {slope:.4f}, target 1.0 +- 0.2")


def test_criterion_04_neass_expansion(chain8):
    basis, H, V, spec = chain8
    A = density_observable(basis)
    S1 = build_S1(spec, V)
    sigma1 = kubo_coefficient_K1(spec, V, A)
    rho0_A = spec.expectation(A)
    eps_list = [1e-1, 4.6e-2, 2.2e-2, 1e-2, 4.6e-3, 2.2e-3, 1e-3]
    rs = [abs(neass_state(spec, S1, e).expectation(A) - rho0_A - e * sigma1)
          for e in eps_list]
    slope, _ = fit_exponent(eps_list, rs)
    ok = slope >= 1.9
    report(4, "neass expansion", ok, f"exponent {slope:.3f} >= 1.9")


def test_criterion_05_neass_almost_invariance(chain8):
    basis, H, V, spec = chain8
    A = density_observable(basis)
    S1 = build_S1(spec, V)
    eps_list = [1e-1, 4.6e-2, 2.2e-2, 1e-2]
    slopes = []
    for t in (1.0, 5.0):
        ds = [stationarity_defect(neass_state(spec, S1, e), A, t, perturbation=V)
              for e in eps_list]
        slopes.append(fit_exponent(eps_list, ds)[0])
    ok = all(s >= 1.9 for s in slopes)
    report(5, "neass almost-invariance", ok,
           "defect exponents " + ", ".join(f"{s:.3f}" for s in slopes) + " >= 1.9")


def test_criterion_06_adiabatic_response(chain8):
    basis, H, V, spec = chain8
    A = density_observable(basis)
    eps_list = [0.04, 0.02, 0.01, 0.004]
    rep = response_sweep(H, V, A, eps_list=eps_list, tol=1e-10)
    dev_ok = (not rep.incomplete) and rep.deviation_exponent >= 1.7
    diffs = [switching_independence(H, V, A, e, np.sqrt(e),
                                    (bump_switch(), ramp_switch(2)), 0.0,
                                    tol=1e-10)
             for e in eps_list]
    sw_slope, _ = fit_exponent(eps_list, diffs)
    ok = dev_ok and sw_slope >= 1.7
    report(6, "adiabatic response", ok,
           f"deviation exponent {rep.deviation_exponent:.3f}, "
           f"switching exponent {sw_slope:.3f}, both >= 1.7")


def test_criterion_07_naive_total_response():
    worst = 0.0
    cases = []
    for side, p, q, stag in ((9, 1, 3, 0.0), (15, 1, 3, 0.0), (9, 0, 1, 0.5)):
        geometry = LatticeGeometry(lengths=(side, side), boundary=TORUS)
        H = ob.hofstadter(geometry, p, q, staggered=stag)
        mu = ob.gap_midpoint(H, side * side // 3) if p else 0.0
        proj = ob.fermi_projection(H, mu)
        cases.append(abs(ob.naive_dk1(proj)))
    worst = max(cases)
    ok = worst <= 1e-12
    report(7, "naive total response", ok, f"max |value| {worst:.2e} <= 1e-12")


def test_criterion_08_hall_triangle():
    chern = ob.tknn_chern(1, 3, [0], Nk=24)
    geometry = LatticeGeometry(lengths=(15, 15), boundary=TORUS)
    H = ob.hofstadter(geometry, 1, 3)
    mu = ob.gap_midpoint(H, 75)
    P = ob.fermi_projection(H, mu)
    dcf = ob.dcf_conductivity(P, 1.0 / 3.0)
    st = ob.streda(15, mu, 1.0 / 3.0)
    vals = {"tknn": float(chern), "dcf": dcf, "streda": st}
    abs_ok = chern == 1 and abs(dcf - 1.0) <= 0.05 and abs(st - 1.0) <= 0.05
    pair_ok = all(abs(vals[a] - vals[b]) <= 0.07 for a in vals for b in vals)

    chern0 = ob.tknn_chern(0, 1, [0, 1], staggered=0.5)
    geo0 = LatticeGeometry(lengths=(15, 15), boundary=CUBE)
    P0 = ob.fermi_projection(ob.hofstadter(geo0, 0, 1, staggered=0.5), 0.0)
    dcf0 = ob.dcf_conductivity(P0, 1.0 / 3.0)
    st0 = ob.streda(15, 0.0, 1.0 / 15.0, staggered=0.5)
    triv_ok = chern0 == 0 and abs(dcf0) <= 1e-2 and abs(st0) <= 1e-2
    ok = abs_ok and pair_ok and triv_ok
    report(8, "hall triangle", ok,
           f"tknn {chern}, dcf {dcf:.4f}, streda {st:.4f}; "
           f"trivial {chern0}, {dcf0:.1e}, {st0:.1e}")


def test_criterion_09_thermodynamic_limit(tmp_path):
    from linres import cli

    cfg = {
        "kind": "thermo",
        "seed": 0,
        "model": {"w": 0.1},
        "thermo": {"k_list": [1, 2, 3, 4], "site": [1], "orbital": 0,
                   "compare_potentials": True},
    }
    summary = cli.run_thermo(cfg, tmp_path)
    diffs = summary["cauchy_diffs"]
    ok = summary["strictly_decreasing"] and summary["cross_within_tail"]
    report(9, "thermodynamic limit", ok,
           "cauchy diffs " + ", ".join(f"{d:.1e}" for d in diffs)
           + f"; cross-geometry diff {summary['cross_geometry_diff']:.1e}"
           + f" <= tail {summary['response_tail']:.1e}")


def test_criterion_10_determinism(tmp_path):
    from linres import cli

    blobs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        rc = cli.main(["run", "--config", "kubo_chain", "--out", str(out)])
        assert rc == 0
        blobs.append((out / "results.csv").read_bytes())
    ok = blobs[0] == blobs[1]
    report(10, "determinism", ok,
           f"two runs, {len(blobs[0])} bytes, byte-identical {ok}")
