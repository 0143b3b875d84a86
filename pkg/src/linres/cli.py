"""Experiment runner: TOML configs in, CSV tables and JSON summaries out.

Exit codes: 0 success, 1 runtime failure, 2 configuration error,
3 a pass/fail threshold declared in the config was not met.
"""

from __future__ import annotations

import argparse
import json
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, LinresError
from .lattice import CUBE, TORUS, FockBasis, LatticeGeometry, ManyBodyOperator

FLOAT_FORMAT = "%.17g"
EXAMPLES_PACKAGE = "linres.examples"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_summary(path: Path, summary: dict):
    path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# Config loading and validation

def _require(cfg: dict, key: str, context: str):
    if key not in cfg:
        raise ConfigError(f"missing field '{context}.{key}'" if context else f"missing field '{key}'")
    return cfg[key]


def load_config(path_or_name: str) -> dict:
    path = Path(path_or_name)
    if not path.exists():
        candidate = example_path(path_or_name)
        if candidate is not None:
            path = candidate
        else:
            raise ConfigError(f"config file not found: {path_or_name}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def example_path(name: str) -> Path | None:
    from importlib import resources

    stem = name.removesuffix(".toml")
    root = resources.files(EXAMPLES_PACKAGE)
    candidate = root / f"{stem}.toml"
    return Path(str(candidate)) if candidate.is_file() else None


def list_examples() -> list[str]:
    from importlib import resources

    root = resources.files(EXAMPLES_PACKAGE)
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".toml"))


KNOWN_KINDS = ("kubo", "sweep", "neass", "hall", "thermo")


def validate_config(cfg: dict) -> dict:
    kind = _require(cfg, "kind", "")
    if kind not in KNOWN_KINDS:
        raise ConfigError(f"field 'kind': unknown kind {kind!r}, expected one of {KNOWN_KINDS}")
    cfg.setdefault("seed", 0)
    if not isinstance(cfg["seed"], int):
        raise ConfigError("field 'seed': must be an integer")
    if kind in ("kubo", "sweep", "neass"):
        model = _require(cfg, "model", "")
        mtype = _require(model, "type", "model")
        if mtype not in ("dimerized_chain", "ladder"):
            raise ConfigError(f"field 'model.type': unknown type {mtype!r}")
        _validated_many_body_sizes(model)
        _require(cfg, "perturbation", "")
        pot = _require(cfg["perturbation"], "potential", "perturbation")
        if pot not in ("sawtooth", "linear", "constant"):
            raise ConfigError(f"field 'perturbation.potential': unknown potential {pot!r}")
    if kind == "sweep":
        proto = _require(cfg, "protocol", "")
        m = proto.get("window_m", 2.0)
        if m < 1:
            raise ConfigError(f"field 'protocol.window_m': must be >= 1, got {m}")
        eps = _require(proto, "eps", "protocol")
        if not eps or any(e == 0 for e in eps):
            raise ConfigError("field 'protocol.eps': nonempty, nonzero values required")
    if kind == "neass":
        blk = _require(cfg, "neass", "")
        if not blk.get("eps"):
            raise ConfigError("field 'neass.eps': nonempty list required")
    if kind == "hall":
        blk = _require(cfg, "hall", "")
        p = _require(blk, "flux_p", "hall")
        q = _require(blk, "flux_q", "hall")
        if q < 1:
            raise ConfigError("field 'hall.flux_q': must be >= 1")
        sizes = _require(blk, "sizes", "hall")
        boundary = blk.get("boundary", "torus")
        if boundary not in (CUBE, TORUS):
            raise ConfigError(f"field 'hall.boundary': must be 'cube' or 'torus'")
        if boundary == TORUS and p % q != 0:
            for L in sizes:
                if L % q != 0:
                    raise ConfigError(
                        f"field 'hall.sizes': flux {p}/{q} on a torus needs q | side, got {L}"
                    )
        w = blk.get("window", 1.0 / 3.0)
        if not 0 < w <= 1:
            raise ConfigError(f"field 'hall.window': must be in (0, 1], got {w}")
        gap_tol = blk.get("gap_tol", 1e-8)
        if gap_tol <= 0:
            raise ConfigError("field 'hall.gap_tol': must be positive")
    if kind == "thermo":
        blk = _require(cfg, "thermo", "")
        ks = _require(blk, "k_list", "thermo")
        if sorted(ks) != list(ks) or len(ks) < 2:
            raise ConfigError("field 'thermo.k_list': need an increasing list of >= 2 radii")
    return cfg


def _validated_many_body_sizes(model: dict):
    if model["type"] == "dimerized_chain":
        n = _require(model, "n_sites", "model")
        s = 1
        modes = n
        N = model.get("N", n // 2)
    else:
        k = _require(model, "k", "model")
        n = 2 * k + 1
        s = 2
        modes = s * n
        N = model.get("N", n)
    if not 0 <= N <= modes:
        raise ConfigError(f"field 'model.N': N={N} outside [0, modes={modes}]")


# ---------------------------------------------------------------------------
# Builders

def build_model(model: dict):
    from .interactions import build_example_hamiltonian, dimerized_chain_hamiltonian, ladder_model

    if model["type"] == "dimerized_chain":
        n = model["n_sites"]
        boundary = model.get("boundary", TORUS)
        geometry = LatticeGeometry.chain(n, boundary)
        basis = FockBasis(geometry, s=1, N=model.get("N", n // 2))
        H = dimerized_chain_hamiltonian(
            basis, t_strong=model.get("t_strong", 1.0), t_weak=model.get("t_weak", 0.3)
        )
        return basis, H
    params = ladder_model(
        delta=model.get("delta", 1.0),
        t=model.get("t", 0.2),
        w=model.get("w", 0.1),
        w_range=model.get("w_range", 2),
        t_mix=model.get("t_mix", 0.15),
    )
    geometry = LatticeGeometry.box(model["k"], 1, model.get("boundary", TORUS))
    basis = FockBasis(geometry, s=2, N=model.get("N", geometry.n_sites))
    return basis, build_example_hamiltonian(params, basis)


def build_potential(pert: dict, basis: FockBasis) -> ManyBodyOperator:
    from .interactions import (constant_potential, linear_potential,
                               potential_operator, sawtooth_potential)

    name = pert["potential"]
    axis = pert.get("axis", 0)
    if name == "sawtooth":
        v = sawtooth_potential(axis)
    elif name == "linear":
        v = linear_potential(axis)
    else:
        v = constant_potential(pert.get("value", 1.0))
    return potential_operator(v, basis)


def build_observable(cfg: dict, basis: FockBasis, V: ManyBodyOperator) -> ManyBodyOperator:
    obs = cfg.get("observable", {"type": "potential"})
    if obs.get("type", "potential") == "potential":
        return V
    if obs["type"] == "site_density":
        site = tuple(obs.get("site", [0] * basis.geometry.d))
        diag = np.zeros(basis.dimension)
        if "orbital" in obs:
            diag = basis.occupations(basis.mode_index(site, obs["orbital"]))
        else:
            for i in range(basis.s):
                diag += basis.occupations(basis.mode_index(site, i))
        return ManyBodyOperator(basis, sp.diags(diag).tocsr(), hermitian=True)
    raise ConfigError(f"field 'observable.type': unknown type {obs['type']!r}")


def _switch_by_name(name: str):
    from .dynamics import bump_switch, ramp_switch

    if name == "bump":
        return bump_switch()
    if name.startswith("ramp"):
        return ramp_switch(int(name[4:]))
    raise ConfigError(f"unknown switching function {name!r}")


# ---------------------------------------------------------------------------
# Experiment kinds

def run_kubo(cfg: dict, out: Path) -> dict:
    from . import spectral as spl
    from .neass import kubo_coefficient_K1

    basis, H = build_model(cfg["model"])
    V = build_potential(cfg["perturbation"], basis)
    A = build_observable(cfg, basis, V)
    spec = spl.diagonalize(H)
    sigma1 = kubo_coefficient_K1(spec, V, A)
    sigma0 = spl.kubo_regularized(spec, V, A, 0.0)
    etas = cfg.get("kubo", {}).get("eta", [1e-1, 1e-2, 1e-3, 1e-4])
    rows = []
    for eta in etas:
        val = spl.kubo_regularized(spec, V, A, float(eta), full=True)
        rows.append((float(eta), val.real, val.imag, abs(val - sigma1)))
    write_csv(out / "results.csv", ["eta", "sigma_re", "sigma_im", "abs_dev_from_sigma1"], rows)
    threshold = 1e-12
    consistency = abs(sigma0 - sigma1)
    summary = {
        "kind": "kubo",
        "sigma_A_1": sigma1,
        "kubo_eta_zero": sigma0,
        "consistency_abs_diff": consistency,
        "consistency_threshold": threshold,
        "gap": spec.gap,
        "passed": consistency <= threshold,
    }
    return summary


def run_sweep(cfg: dict, out: Path, budget_seconds: float | None) -> dict:
    from .response import response_sweep, sqrt_eta_rule

    basis, H = build_model(cfg["model"])
    V = build_potential(cfg["perturbation"], basis)
    A = build_observable(cfg, basis, V)
    proto = cfg["protocol"]
    f_list = [_switch_by_name(n) for n in proto.get("switching", ["bump"])]
    report = response_sweep(
        H, V, A,
        eps_list=[float(e) for e in proto["eps"]],
        eta_rule=sqrt_eta_rule,
        f_list=f_list,
        t_list=[float(t) for t in proto.get("times", [0.0])],
        window_m=float(proto.get("window_m", 2.0)),
        tol=float(proto.get("tol", 1e-9)),
        budget_seconds=budget_seconds,
    )
    report.to_csv(out / "results.csv")
    summary = {"kind": "sweep", **report.summary()}
    return summary


def run_neass(cfg: dict, out: Path) -> dict:
    from . import spectral as spl
    from .neass import build_S1, neass_state, kubo_coefficient_K1, stationarity_defect, s1_residual
    from .response import fit_exponent

    basis, H = build_model(cfg["model"])
    V = build_potential(cfg["perturbation"], basis)
    A = build_observable(cfg, basis, V)
    spec = spl.diagonalize(H)
    S1 = build_S1(spec, V)
    sigma1 = kubo_coefficient_K1(spec, V, A)
    rho0_A = spec.expectation(A)
    blk = cfg["neass"]
    eps_list = [float(e) for e in blk["eps"]]
    times = [float(t) for t in blk.get("times", [1.0])]
    rows = []
    residuals = []
    defects = {t: [] for t in times}
    for eps in eps_list:
        state = neass_state(spec, S1, eps)
        r = abs(state.expectation(A) - rho0_A - eps * sigma1)
        residuals.append(r)
        for t in times:
            d = stationarity_defect(state, A, t, perturbation=V)
            defects[t].append(d)
            rows.append((eps, t, state.expectation(A), r, d))
    write_csv(out / "results.csv",
              ["epsilon", "t", "neass_expectation", "expansion_residual", "stationarity_defect"],
              rows)
    exp_fit, exp_err = fit_exponent(eps_list, [max(r, 1e-300) for r in residuals])
    threshold = 1.9
    defect_exponents = {}
    ok = exp_fit >= threshold
    for t in times:
        dfit, derr = fit_exponent(eps_list, [max(d, 1e-300) for d in defects[t]])
        defect_exponents[f"t={t:g}"] = dfit
        ok = ok and dfit >= threshold
    summary = {
        "kind": "neass",
        "sigma_A_1": sigma1,
        "s1_residual": s1_residual(spec, S1, V),
        "expansion_exponent": exp_fit,
        "expansion_exponent_err": exp_err,
        "defect_exponents": defect_exponents,
        "exponent_threshold": threshold,
        "passed": bool(ok),
    }
    return summary


def run_hall(cfg: dict, out: Path) -> dict:
    from . import onebody as ob

    blk = cfg["hall"]
    p, q = blk["flux_p"], blk["flux_q"]
    staggered = float(blk.get("staggered", 0.0))
    sizes = [int(L) for L in blk["sizes"]]
    window = float(blk.get("window", 1.0 / 3.0))
    boundary = blk.get("boundary", TORUS)
    bands = blk.get("bands", list(range(max(1, q) if p % q else 1)))
    tol_abs = float(blk.get("tolerance_abs", 0.05))
    tol_pair = float(blk.get("tolerance_pairwise", 0.07))
    target = float(blk.get("target", 1.0 if p % q else 0.0))

    rows = []
    chern = ob.tknn_chern(p, q, bands, Nk=int(blk.get("nk", 24)), staggered=staggered)
    rows.append((0, p, q, 0.0, "tknn", float(chern), 1.0))
    dcf_last = None
    streda_last = None
    for L in sizes:
        geometry = LatticeGeometry(lengths=(L, L), boundary=boundary)
        H = ob.hofstadter(geometry, p, q, staggered=staggered, boundary=boundary)
        if staggered and p % q == 0:
            mu = float(blk.get("mu", 0.0))
        else:
            mu = ob.gap_midpoint(H, round(L * L * p / q))
        P = ob.fermi_projection(H, mu)
        dcf_last = ob.dcf_conductivity(P, window)
        rows.append((L, p, q, mu, "dcf", dcf_last, window))
        streda_last = ob.streda(L, mu, p / q, staggered=staggered)
        rows.append((L, p, q, mu, "streda", streda_last, 1.0))
    write_csv(out / "results.csv",
              ["size", "flux_p", "flux_q", "mu", "method", "value", "window_fraction"],
              rows)
    vals = {"tknn": float(chern), "dcf": dcf_last, "streda": streda_last}
    abs_ok = all(abs(v - target) <= max(tol_abs, tol_abs * abs(target)) for v in vals.values())
    pair_ok = all(
        abs(vals[a] - vals[b]) <= max(tol_pair, tol_pair * abs(target))
        for a in vals for b in vals
    )
    summary = {
        "kind": "hall",
        "flux": f"{p}/{q}",
        "staggered": staggered,
        "target": target,
        "values": vals,
        "tolerance_abs": tol_abs,
        "tolerance_pairwise": tol_pair,
        "passed": bool(abs_ok and pair_ok),
    }
    return summary


def run_thermo(cfg: dict, out: Path) -> dict:
    from . import spectral as spl
    from .interactions import (build_example_hamiltonian, ladder_model,
                               linear_potential, potential_operator, sawtooth_potential)

    blk = cfg["thermo"]
    model = cfg.get("model", {})
    params = ladder_model(
        delta=model.get("delta", 1.0), t=model.get("t", 0.2),
        w=model.get("w", 0.1), w_range=model.get("w_range", 2),
        t_mix=model.get("t_mix", 0.15),
    )
    boundary = blk.get("boundary", TORUS)
    site = tuple(blk.get("site", [1]))
    orbital = int(blk.get("orbital", 0))
    k_list = [int(k) for k in blk["k_list"]]
    compare = bool(blk.get("compare_potentials", False))
    eps_fd = float(blk.get("eps_fd", 1e-4))
    dense_cap = int(blk.get("dense_cap", 100))

    def ground_density(hmat, basis):
        spec = spl.diagonalize(hmat, dense_cap=dense_cap, num_states=4)
        g = spec.ground_vector
        dens = basis.occupations(basis.mode_index(site, orbital))
        return float(np.real(np.sum(np.abs(g) ** 2 * dens))), spec.gap

    rows = []
    values = []
    sigma_d = []
    sigma_p = []
    prev = None
    for k in k_list:
        geometry = LatticeGeometry.box(k, 1, boundary)
        basis = FockBasis(geometry, s=2, N=geometry.n_sites)
        H = build_example_hamiltonian(params, basis)
        val, gap = ground_density(H.matrix, basis)
        values.append(val)
        cauchy = abs(val - prev) if prev is not None else float("nan")
        prev = val
        row = [k, basis.dimension, gap, val, cauchy]
        if compare:
            pair = []
            for bnd, pot in ((CUBE, linear_potential()), (TORUS, sawtooth_potential())):
                g2 = LatticeGeometry.box(k, 1, bnd)
                b2 = FockBasis(g2, s=2, N=g2.n_sites)
                h2 = build_example_hamiltonian(params, b2)
                v2 = potential_operator(pot, b2)
                plus, _ = ground_density(h2.matrix + eps_fd * v2.matrix, b2)
                minus, _ = ground_density(h2.matrix - eps_fd * v2.matrix, b2)
                pair.append((plus - minus) / (2 * eps_fd))
            sigma_d.append(pair[0])
            sigma_p.append(pair[1])
            row.extend(pair)
        rows.append(tuple(row))
    header = ["k", "dimension", "gap", "rho0_A", "cauchy_diff"]
    if compare:
        header += ["sigma_linear_cube", "sigma_sawtooth_torus"]
    write_csv(out / "results.csv", header, rows)
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    decreasing = all(a > b for a, b in zip(diffs, diffs[1:]))
    summary = {
        "kind": "thermo",
        "boundary": boundary,
        "rho0_values": values,
        "cauchy_diffs": diffs,
        "strictly_decreasing": bool(decreasing),
        "passed": bool(decreasing),
    }
    if compare:
        tail = max(abs(sigma_d[-1] - sigma_d[-2]), abs(sigma_p[-1] - sigma_p[-2])) \
            if len(sigma_d) >= 2 else float("nan")
        cross = abs(sigma_d[-1] - sigma_p[-1])
        summary["sigma_linear_cube"] = sigma_d
        summary["sigma_sawtooth_torus"] = sigma_p
        summary["response_tail"] = tail
        summary["cross_geometry_diff"] = cross
        summary["cross_within_tail"] = bool(cross <= tail)
        summary["passed"] = bool(decreasing and cross <= tail)
    return summary


# ---------------------------------------------------------------------------
# Plots (optional post-processing; never load-bearing)

def emit_plots(kind: str, out: Path, summary: dict) -> bool:
    try:
        import matplotlib
        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False
    csv_path = out / "results.csv"
    if not csv_path.exists():
        return False
    import csv as csv_mod

    with open(csv_path) as fh:
        reader = csv_mod.DictReader(fh)
        data = list(reader)
    fig, ax = plt.subplots(figsize=(5, 4))
    if kind in ("sweep", "neass"):
        xcol = "epsilon"
        ycol = "residual" if kind == "sweep" else "expansion_residual"
        xs = np.array([abs(float(r[xcol])) for r in data])
        ys = np.array([max(abs(float(r[ycol])), 1e-300) for r in data])
        ax.loglog(xs, ys, "o")
        if len(xs) >= 2:
            slope, icept = np.polyfit(np.log(xs), np.log(ys), 1)
            grid = np.array([xs.min(), xs.max()])
            ax.loglog(grid, np.exp(icept) * grid ** slope, "-",
                      label=f"slope {slope:.2f}")
            ax.legend()
        ax.set_xlabel(xcol)
        ax.set_ylabel(ycol)
    elif kind == "thermo":
        ks = [float(r["k"]) for r in data]
        ds = [float(r["cauchy_diff"]) for r in data if r["cauchy_diff"] != "nan"]
        ax.semilogy(ks[1:], ds, "o-")
        ax.set_xlabel("k")
        ax.set_ylabel("|rho0 difference|")
    else:
        ax.axis("off")
        ax.text(0.5, 0.5, json.dumps(summary.get("values", summary), indent=1,
                                     default=str)[:400],
                ha="center", va="center", fontsize=7)
    fig.tight_layout()
    fig.savefig(out / "plots.svg")
    plt.close(fig)
    return True


# ---------------------------------------------------------------------------
# Entry point

def _set_threads(n: int | None):
    if n is None:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except ImportError:
        pass


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="linres",
                                     description="linear-response lattice laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "run"):
        sp_ = sub.add_parser(name)
        sp_.add_argument("--config", required=True,
                         help="path to a TOML config, or the name of a shipped example")
        if name == "run":
            sp_.add_argument("--out", default="linres_out")
            sp_.add_argument("--threads", type=int, default=None)
            sp_.add_argument("--budget-seconds", type=float, default=None)
            sp_.add_argument("--seed", type=int, default=None)
            sp_.add_argument("--plots", action="store_true")
    sub.add_parser("list-examples")
    args = parser.parse_args(argv)

    if args.command == "list-examples":
        for name in list_examples():
            print(name)
        return 0

    try:
        cfg = validate_config(load_config(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(json.dumps(cfg, sort_keys=True, indent=2, default=str))
        return 0

    if args.seed is not None:
        cfg["seed"] = args.seed
    _set_threads(args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kind = cfg["kind"]
    try:
        if kind == "kubo":
            summary = run_kubo(cfg, out)
        elif kind == "sweep":
            summary = run_sweep(cfg, out, args.budget_seconds)
        elif kind == "neass":
            summary = run_neass(cfg, out)
        elif kind == "hall":
            summary = run_hall(cfg, out)
        else:
            summary = run_thermo(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LinresError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1
    summary["seed"] = cfg["seed"]
    if args.plots:
        summary["plots_emitted"] = emit_plots(kind, out, summary)
    write_summary(out / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True, default=str))
    if summary.get("incomplete"):
        return 0
    if not summary.get("passed", True):
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
