"""Batch driver: parse a scenario config, dispatch to the library, emit
machine-readable reports.

    causalfock COMMAND --config PATH [--out DIR] [--seed N] [--verbose]

Commands: wick-check, split, vacpol, adiabatic, ir-probe, gelfand-check,
decompose-1d.  Each writes `report.json` plus CSV tables into the output
directory.  Reports embed the sha256 of the canonical config bytes, the
library version and the seed, and identical config+seed produce byte-
identical outputs.  Exit codes: 0 success, 1 input error, 2 when a
scenario's verdict contradicts its declared expectation.

Config schemas are documented in the repository README.
"""

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import adiabatic, causal, gelfand, wick
from .fock import FockBasis
from .grids import SpinMomentumGrid
from .testfns import TestFunctionSpec


class ConfigError(ValueError):
    pass


def _canonical(doc):
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def _config_hash(doc):
    return hashlib.sha256(_canonical(doc)).hexdigest()


def _write_report(outdir, doc):
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "report.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


def _write_csv(outdir, name, header, rows):
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / name
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("%.17g" % x if isinstance(x, float)
                              else str(x) for x in row) + "\n")
    return path


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _test_spec(doc):
    doc = doc or {}
    return TestFunctionSpec(
        center=tuple(doc.get("center", (0, 0, 0, 0))),
        width=float(doc.get("width", 1.0)),
        poly=tuple((complex(c), tuple(p)) for c, p in doc.get("poly", ())),
        vanishes_at_zero=bool(doc.get("vanishes_at_zero", False)),
        vanish_scale=float(doc.get("vanish_scale", 0.5)))


DENSITIES = {
    "exp-decay": lambda s0, mass: causal.DensityModel(
        lambda s: np.exp(-np.minimum(s - s0, 700.0)), s0, kind="rational"),
    "sqrt-exp": lambda s0, mass: causal.DensityModel(
        lambda s: np.sqrt(np.maximum(1 - s0 / s, 0.0))
        * np.exp(-np.minimum(s - s0, 700.0)), s0, kind="threshold-sqrt"),
    "vacuum-polarization": lambda s0, mass:
        causal.vacuum_polarization_density(mass),
}


def _distribution(doc):
    name = doc.get("density", "exp-decay")
    _require(name in DENSITIES or isinstance(name, list),
             f"unknown density {name!r}")
    s0 = float(doc.get("s0", 1.0))
    mass = float(doc.get("mass", 1.0))
    if isinstance(name, list):
        table = np.asarray(name, dtype=float)

        def rho(s):
            return np.interp(s, table[:, 0], table[:, 1], left=0.0, right=0.0)
        density = causal.DensityModel(rho, s0, kind="rational")
    else:
        density = DENSITIES[name](s0, mass)
    return causal.CausalDistribution(
        density, alpha=int(doc.get("alpha", 0)),
        prescription=doc.get("prescription", "causal"),
        prefactor=doc.get("prefactor", 1.0),
        normalization=tuple(doc.get("normalization", ())))


# ---------------------------------------------------------------------------
# commands


def cmd_wick_check(cfg, outdir, seed, verbose):
    _require("grid" in cfg, "wick-check needs a 'grid' block")
    _require("pairs" in cfg and cfg["pairs"], "wick-check needs 'pairs'")
    grid = SpinMomentumGrid.from_json(cfg["grid"])
    eps = float(cfg.get("eps", 0.5))
    n_cmp = int(cfg.get("n_compare", 2))
    tol = float(cfg.get("tolerance", 1e-10))
    t_left = _test_spec(cfg.get("test_left"))
    t_right = _test_spec(cfg.get("test_right", {"center": (0.1, 0.2, 0, 0),
                                                "width": 1.5}))
    results = []
    rows = []
    for pair in cfg["pairs"]:
        mono_l = wick.parse_monomial(pair["left"])
        mono_r = wick.parse_monomial(pair["right"])
        w_l = wick.pointwise_wick_kernels(mono_l, grid, t_left)
        w_r = wick.pointwise_wick_kernels(mono_r, grid, t_right)
        head = max((k.l for _c, k in w_r.terms), default=0)
        dec = wick.wick_decompose_product(w_l, w_r, eps)
        basis = FockBasis(grid, n_cmp + head)
        m_right = w_r.matrix(basis, col_cap=n_cmp)
        m_left = w_l.matrix(basis, row_cap=n_cmp)
        m_dec = dec.matrix(basis, col_cap=n_cmp, row_cap=n_cmp)
        err = float(np.max(np.abs(m_left @ m_right - m_dec)))
        ok = err < tol
        results.append({"left": pair["left"], "right": pair["right"],
                        "max_abs_err": err, "pass": ok})
        rows.append((pair["left"], pair["right"], err, int(ok)))
        if verbose:
            print(f"  {pair['left']} * {pair['right']}: {err:.3e} "
                  f"{'PASS' if ok else 'FAIL'}")
    _write_csv(outdir, "wick_check.csv",
               ["left", "right", "max_abs_err", "pass"], rows)
    all_pass = all(r["pass"] for r in results)
    return {"pairs": results, "all_pass": all_pass}, (0 if all_pass else 2)


def cmd_split(cfg, outdir, seed, verbose):
    _require("distribution" in cfg, "split needs a 'distribution' block")
    dist = _distribution(cfg["distribution"])
    omega = causal.singularity_degree(dist)
    norm = tuple(cfg.get("split_normalization", ()))
    retarded, advanced = causal.split_retarded_advanced(dist, norm)
    samples = cfg.get("p2_samples")
    _require(samples, "split needs 'p2_samples'")
    rows = []
    max_resid = 0.0
    for p2 in samples:
        for sgn in (1, -1):
            r = complex(retarded.value(p2, sgn))
            a = complex(advanced.value(p2, sgn))
            j = complex(dist.jump(p2, sgn))
            resid = abs((r - a) - j)
            max_resid = max(max_resid, resid)
            rows.append((float(p2), sgn, r.real, r.imag, a.real, a.imag,
                         resid))
    _write_csv(outdir, "split.csv",
               ["p2", "p0_sign", "re_retarded", "im_retarded",
                "re_advanced", "im_advanced", "jump_residual"], rows)
    return {"singularity_degree": omega,
            "degree_retarded": causal.singularity_degree(retarded),
            "max_jump_residual": max_resid}, 0


def cmd_vacpol(cfg, outdir, seed, verbose):
    mass = float(cfg.get("mass", 1.0))
    _require(mass > 0, "vacpol requires mass > 0")
    dist = causal.vacuum_polarization(
        mass, cfg.get("prescription", "causal"),
        tuple(cfg.get("normalization", ())))
    p2_values = cfg.get("p2_values")
    if isinstance(p2_values, dict):
        p2_values = list(np.linspace(p2_values["min"], p2_values["max"],
                                     int(p2_values["n"])))
    _require(p2_values, "vacpol needs 'p2_values'")
    sgn = int(cfg.get("p0_sign", 1))
    rows = []
    for p2 in p2_values:
        v = complex(dist.value(float(p2), sgn))
        rows.append((float(p2), v.real, v.imag))
    _write_csv(outdir, "vacpol.csv", ["p2", "re", "im"], rows)
    v0 = complex(dist.value(0.0))
    return {"mass": mass, "value_at_zero": [v0.real, v0.imag],
            "singularity_degree": causal.singularity_degree(dist),
            "rows": len(rows)}, 0


def cmd_adiabatic(cfg, outdir, seed, verbose):
    _require("scenarios" in cfg, "adiabatic needs 'scenarios'")
    results = []
    rows = []
    exit_code = 0
    for sc in cfg["scenarios"]:
        name = sc.get("name", "scenario")
        expected = sc.get("expected")
        fields_ = {k: v for k, v in sc.items()
                   if k not in ("name", "expected", "refine_check")}
        if "eps_grid" in fields_:
            fields_["eps_grid"] = tuple(fields_["eps_grid"])
        if "normalization_poly" in fields_:
            fields_["normalization_poly"] = tuple(fields_["normalization_poly"])
        spec = adiabatic.ChainSpec(**fields_)
        fam = adiabatic.chain_family(spec)
        verdict = adiabatic.epsilon_verdict(fam)
        entry = {"name": name, "verdict": verdict["verdict"],
                 "ratios": verdict["ratios"],
                 "sequence": [[v.real, v.imag] for v in fam.values],
                 "eps": list(fam.eps), "meta": fam.meta}
        if verdict["verdict"] == "converged":
            entry["value"] = [verdict["value"].real, verdict["value"].imag]
            entry["error_estimate"] = verdict["error_estimate"]
        else:
            entry["growth_exponent"] = verdict["growth_exponent"]
        if sc.get("refine_check"):
            fam2 = adiabatic.chain_family(spec.refined())
            verdict2 = adiabatic.epsilon_verdict(fam2)
            entry["refined_verdict"] = verdict2["verdict"]
            entry["refinement_stable"] = \
                verdict2["verdict"] == verdict["verdict"]
        if expected and verdict["verdict"] != expected:
            entry["expected"] = expected
            exit_code = 2
        results.append(entry)
        for e, v in zip(fam.eps, fam.values):
            rows.append((name, e, v.real, v.imag))
        if verbose:
            print(f"  {name}: {verdict['verdict']}")
    _write_csv(outdir, "adiabatic.csv", ["scenario", "eps", "re", "im"], rows)
    return {"scenarios": results}, exit_code


def cmd_ir_probe(cfg, outdir, seed, verbose):
    kind = cfg.get("kernel", "psi-int")
    cutoffs = cfg.get("cutoffs", [0.3, 0.1, 0.03, 0.01, 0.003])
    n_r = int(cfg.get("n_radial", 160))
    r_lo, r_hi = 1e-4, float(cfg.get("r_max", 2.0))
    radii = np.geomspace(r_lo, r_hi, n_r)
    # radial weights of a log grid, r^2 dr
    edges = np.sqrt(radii[1:] * radii[:-1])
    edges = np.concatenate([[r_lo], edges, [r_hi]])
    wts = radii ** 2 * np.diff(edges)
    mass = float(cfg.get("mass", 1.0))
    if kind == "inverse-square":
        vals = 1.0 / radii ** 4        # |kernel|^2 for kernel 1/|p'|^2
    elif kind == "bounded":
        vals = np.exp(-radii ** 2)
    elif kind == "psi-int":
        phi = _test_spec(cfg.get("test_function"))
        p_e = np.array([0.4, 0.1, 0.2])
        vals = np.empty(n_r)
        for i, rp in enumerate(radii):
            pprime = np.array([rp, 0.0, 0.0])
            k = adiabatic.psi_int_first_order_kernel(
                1, pprime, 1, p_e, "annihilate-annihilate", phi, mass)
            vals[i] = abs(k) ** 2
    else:
        raise ConfigError(f"unknown ir-probe kernel {kind!r}")
    probe = adiabatic.ir_l2_probe(vals, radii, wts, cutoffs)
    rows = list(zip(probe["cutoffs"], probe["norms"]))
    _write_csv(outdir, "ir_probe.csv", ["cutoff", "norm2"], rows)
    return {"kernel": kind, "growth_exponent": probe["growth_exponent"],
            "norms": probe["norms"], "cutoffs": probe["cutoffs"]}, 0


def cmd_gelfand_check(cfg, outdir, seed, verbose):
    n_points = int(cfg.get("n_points", 400))
    r_max = float(cfg.get("r_max", 5.0))
    evs = gelfand.h1_eigenvalues(n_points, r_max)
    target = 2 * np.arange(len(evs)) + 2
    ev_err = float(np.max(np.abs(evs - target)))
    center = float(cfg.get("profile_center", 1.5))
    width = float(cfg.get("profile_width", 0.3))
    prof = lambda r: np.exp(-(r - center) ** 2 / (2 * width ** 2))
    res_h = gelfand.conjugation_residual(prof, n_points)
    res_h2 = gelfand.conjugation_residual(prof, 2 * n_points)
    grid = gelfand.RadialGrid(3000, 0.02, 14.0)
    f = lambda t: np.exp(-t ** 2 / 2)
    iso = abs(gelfand.norm_t_side(f, -40, 14)
              - gelfand.norm_r_side(gelfand.u_map(f, grid), grid))
    rows = [(int(k), float(e), float(e - t))
            for k, (e, t) in enumerate(zip(evs, target))]
    _write_csv(outdir, "gelfand_eigs.csv", ["k", "eigenvalue", "error"], rows)
    return {"eigenvalue_max_err": ev_err,
            "conjugation_residual": res_h,
            "conjugation_residual_halved": res_h2,
            "residual_ratio": res_h / res_h2 if res_h2 else None,
            "isometry_defect": iso}, 0


def cmd_decompose_1d(cfg, outdir, seed, verbose):
    _require("cases" in cfg, "decompose-1d needs 'cases'")
    results = []
    exit_code = 0
    for case in cfg["cases"]:
        test = causal.GaussianTest1D(case.get("test_center", 0.5),
                                     case.get("test_width", 0.7))
        kind = case.get("fhat", "gaussian")
        name = case.get("name", kind)
        if kind == "delta":       # F = delta: Fhat = const 1/sqrt(2pi)
            desc = {"kind": "function",
                    "fourier": lambda chi: 1.0 / math.sqrt(2 * math.pi)}
            direct = complex(test.value_1d(0.0))
        elif kind == "gaussian":  # F gaussian in t
            c = float(case.get("center", 0.2))
            w = float(case.get("width", 0.9))
            fpos = causal.GaussianTest1D(c, w)
            desc = {"kind": "function",
                    "fourier": lambda chi, fp=fpos:
                        fp.fourier_1d(-chi) / math.sqrt(2 * math.pi)}
            direct = adiabatic.direct_pairing_1d(fpos.value_1d, test,
                                                 lo=-12, hi=12)
        elif kind == "atoms":     # Fhat a pure point measure
            atoms = [(float(x), complex(a)) for x, a in case["atoms"]]
            desc = {"kind": "measure", "atoms": atoms, "density": None}
            direct = None
        elif kind == "delta-prime":
            desc = {"kind": "neither"}
            direct = None
        else:
            raise ConfigError(f"unknown fhat kind {kind!r}")
        try:
            spectral = adiabatic.decompose_1d(desc, test)
            entry = {"name": name,
                     "spectral": [spectral.real, spectral.imag]}
            if direct is not None:
                entry["direct"] = [complex(direct).real,
                                   complex(direct).imag]
                entry["two_route_error"] = abs(spectral - direct)
            entry["refused"] = False
        except adiabatic.DecompositionError as exc:
            entry = {"name": name, "refused": True, "reason": str(exc)}
        expected_refusal = bool(case.get("expect_refusal", False))
        if expected_refusal != entry["refused"]:
            exit_code = 2
        results.append(entry)
    return {"cases": results}, exit_code


COMMANDS = {
    "wick-check": cmd_wick_check,
    "split": cmd_split,
    "vacpol": cmd_vacpol,
    "adiabatic": cmd_adiabatic,
    "ir-probe": cmd_ir_probe,
    "gelfand-check": cmd_gelfand_check,
    "decompose-1d": cmd_decompose_1d,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="causalfock",
        description="batch driver for the causal Fock-space engine")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--out", type=Path, default=Path("causalfock-out"))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1

    np.random.seed(args.seed)
    try:
        body, code = COMMANDS[args.command](cfg, args.out, args.seed,
                                            args.verbose)
    except (ConfigError, KeyError) as exc:
        print(f"error: invalid config for {args.command}: {exc}",
              file=sys.stderr)
        return 1
    except (causal.SplittingError, adiabatic.AdiabaticError,
            wick.WickError, wick.RegularizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    report = {"command": args.command,
              "config_hash": _config_hash(cfg),
              "library_version": __version__,
              "seed": args.seed,
              "results": body}
    path = _write_report(args.out, report)
    if args.verbose:
        print(f"report written to {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
