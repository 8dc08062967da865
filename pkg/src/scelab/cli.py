"""Command-line driver: ``scelab <subcommand> [--config FILE] [--out DIR] [--seed S] ...``.

Parameters are resolved as built-in defaults, then the ``[subcommand]`` section of an INI
file given by ``--config``, then explicit flags. Every JSON artifact has the shape
``{config, results, invariant_report}`` and echoes the resolved configuration; outputs
contain no timestamps, so a fixed configuration and seed reproduce them byte for byte.

Exit codes: 0 success, 1 usage error, 2 validation failure (bad parameters or a failed
invariant).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import DegenerateInput, InvalidArgument, SupportError

EXIT_OK, EXIT_USAGE, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in str(text).split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# name -> (type, default, help); None default for "b" in sce means n - 1
SUBCOMMANDS: dict[str, dict[str, tuple]] = {
    "sce": {
        "n": (int, 3, "grid nodes"),
        "bodies": (int, 2, "number of marginals N"),
        "mu": (str, "uniform", "marginal: uniform | gaussian | random"),
        "a": (float, 0.0, "left end of the grid"),
        "b": (float, None, "right end of the grid (default n-1, unit spacing)"),
        "capped": (_bool, False, "use the capped cost instead of forbidding coincidences"),
        "check_oracle": (_bool, True, "compare with the exhaustive solver when small"),
    },
    "sweep": {
        "n": (int, 8, "grid nodes"),
        "bodies": (int, 2, "number of particles"),
        "mu": (str, "uniform", "marginal: uniform | gaussian"),
        "alphas": (_floats, "1,1e-1,1e-2,1e-3,1e-4", "strictly decreasing alpha values"),
        "epsilons": (_floats, "0.3,0.1,0.05,0.02,0.01", "smoothing widths per alpha"),
        "betas": (_floats, "0.2,0.1,0.05,0.02,0.01", "positivization weights per alpha"),
        "max_iter": (int, 2000, "bosonic optimiser iterations"),
    },
    "reinstate-demo": {
        "instances": (int, 200, "random instances"),
        "ns": (_floats, "2,4,8", "grid sizes to cycle through"),
        "bodies": (_floats, "2,3", "particle numbers to cycle through"),
    },
    "fermionize-demo": {
        "n": (int, 16, "grid nodes"),
        "deltas": (_floats, "4,2,1", "node widths in units of the grid spacing"),
    },
    "harriman": {
        "n": (int, 401, "grid nodes"),
        "N": (int, 3, "number of orbitals"),
        "density": (str, "uniform", "one-body shape: uniform | linear"),
        "kind": (str, "complex", "basis: complex | real"),
    },
    "lawrentiev": {
        "eps": (_floats, "1e-2", "comma-separated epsilon values"),
        "n": (int, 2001, "grid nodes"),
        "iterations": (int, 5000, "Levenberg-Marquardt iterations per start"),
    },
    "verify-all": {
        "quick": (_bool, False, "smaller instance counts and sweep"),
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scelab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True
    for name, opts in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", help="INI file; the [%s] section supplies parameters" % name)
        p.add_argument("--out", help="output directory (default: $OUTPUT_DIR or .)")
        p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
        for key, (typ, default, text) in opts.items():
            flag = "--" + key.replace("_", "-")
            if typ is _bool and default is False:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None, help=text)
            else:
                p.add_argument(flag, dest=key, type=typ, default=None, help=f"{text} (default {default})")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, overridden by the INI section, overridden by explicit flags."""
    opts = SUBCOMMANDS[args.command]
    cfg = {k: (typ(d) if d is not None and typ in (_floats, _bool) else d) for k, (typ, d, _) in opts.items()}
    cfg["seed"] = 0
    if args.config:
        ini = configparser.ConfigParser()
        if not ini.read(args.config):
            raise UsageError(f"cannot read config file {args.config}")
        if ini.has_section(args.command):
            for key, raw in ini.items(args.command):
                key = key.replace("-", "_")
                if key == "seed":
                    cfg["seed"] = int(raw)
                elif key in opts:
                    try:
                        cfg[key] = opts[key][0](raw)
                    except (ValueError, argparse.ArgumentTypeError) as exc:
                        raise InvalidArgument(f"config key {key}: {exc}") from exc
                else:
                    raise UsageError(f"unknown config key {key!r} in [{args.command}]")
    for key in opts:
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path: Path, config: dict, results, report: dict) -> None:
    payload = {"config": config, "results": results, "invariant_report": report}
    path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")


def _all_pass(report: dict) -> bool:
    """Top-level booleans are validation criteria; nested dicts hold diagnostics."""
    return all(v for v in report.values() if isinstance(v, bool))


# ----------------------------------------------------------------- subcommands

def run_sce(cfg: dict, out: Path) -> dict:
    from .discretization import make_grid
    from .plans import MarginalDensity, coulomb_cost
    from .sce import MmotProblem, brute_force_mmot, monge_diagnostic, solve_mmot

    n, N = cfg["n"], cfg["bodies"]
    b = cfg["b"] if cfg["b"] is not None else cfg["a"] + (n - 1)
    cfg["b"] = b
    g = make_grid(cfg["a"], b, n)
    if cfg["mu"] == "uniform":
        mu = MarginalDensity.uniform(g)
    elif cfg["mu"] == "gaussian":
        mid, width = (g.a + g.b) / 2, (g.b - g.a) / 4
        mu = MarginalDensity.from_function(g, lambda x: np.exp(-(((x - mid) / width) ** 2)))
    elif cfg["mu"] == "random":
        m = np.random.default_rng(cfg["seed"]).dirichlet(np.full(n, 5.0))
        mu = MarginalDensity.from_mass(g, m)
    else:
        raise InvalidArgument(f"unknown marginal {cfg['mu']!r}")
    problem = MmotProblem(mu, N, coulomb_cost(g, strict=not cfg["capped"]))
    sol = solve_mmot(problem)
    report = {"status": sol.status, "feasible": sol.status == "optimal"}
    results = {"value": sol.value, "status": sol.status, "n": n, "N": N}
    if sol.plan is not None:
        err = max(float(np.max(np.abs(m - mu.mass))) for m in sol.plan.marginal_masses())
        mon = monge_diagnostic(sol)
        results["plan_mass"] = sol.plan.mass.ravel().tolist()
        results["monge_maps"] = mon.maps.tolist() if mon.maps is not None else None
        report["marginals_ok"] = err < 1e-9
        report["max_marginal_error"] = err
        report["diagnostics"] = {"monge_like": bool(mon.is_monge_like)}
        if cfg["check_oracle"] and n**N <= 512:
            ref = brute_force_mmot(problem)
            report["oracle_value"] = ref.value
            report["matches_oracle"] = abs(ref.value - sol.value) <= 1e-9
    print(f"value = {sol.value!r} ({sol.status})")
    write_json(out / "sce.json", cfg, results, report)
    return report


def run_sweep(cfg: dict, out: Path) -> dict:
    from .semiclassical import OptimizerSettings, SweepConfig, semiclassical_sweep, sweep_summary, write_sweep_csv

    config = SweepConfig(alphas=cfg["alphas"], epsilons=cfg["epsilons"], betas=cfg["betas"], n=cfg["n"],
                         n_bodies=cfg["bodies"], mu_kind=cfg["mu"],
                         optimizer=OptimizerSettings(max_iter=cfg["max_iter"]))
    result = semiclassical_sweep(config)
    write_sweep_csv(result, out / "sweep.csv")
    summary = sweep_summary(config, result)
    report = summary["invariant_report"]
    for r in result.records:
        print(f"alpha={r.alpha:<8g} V_sce={r.V_sce:.6f} F_upper={r.F_alpha_upper:.6f} gap={r.gap:.3e}")
    print(f"{result.status}; final relative gap {report['final_relative_gap']:.4f}")
    write_json(out / "sweep.json", cfg, summary["results"], report)
    report = dict(report)
    report.pop("gap_shrinks")  # informative, not a validation criterion
    return report


def run_reinstate_demo(cfg: dict, out: Path) -> dict:
    from .reinstate import l1_stability_check, project, project_via_expansion
    from .verify import random_instances

    rng = np.random.default_rng(cfg["seed"])
    ns = tuple(int(v) for v in cfg["ns"])
    Ns = tuple(int(v) for v in cfg["bodies"])
    rows = []
    for k, (plan, muB) in enumerate(random_instances(rng, cfg["instances"], ns, Ns)):
        P = project(plan, muB)
        marg = max(float(np.max(np.abs(m - muB.mass))) for m in P.marginal_masses())
        lhs, rhs = l1_stability_check(plan, muB)
        exp = float(np.max(np.abs(project_via_expansion(plan, muB).mass - P.mass)))
        rows.append([k, plan.grid.n, plan.n_bodies, marg, lhs, rhs, exp])
    with open(out / "reinstate.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance", "n", "N", "marginal_error", "l1_change", "l1_bound", "expansion_diff"])
        w.writerows([r[:3] + [repr(v) for v in r[3:]] for r in rows])
    arr = np.array([r[3:] for r in rows])
    report = {
        "instances": len(rows),
        "marginals_restored": bool(np.all(arr[:, 0] < 1e-10)),
        "l1_bound_holds": bool(np.all(arr[:, 1] <= arr[:, 2] + 1e-14)),
        "expansion_equivalent": bool(np.all(arr[:, 3] < 1e-12)),
        "max_marginal_error": float(arr[:, 0].max()),
        "max_l1_ratio": float(np.max(arr[:, 1] / np.maximum(arr[:, 2], 1e-300))),
    }
    print(json.dumps(report))
    write_json(out / "reinstate.json", cfg, {"csv": "reinstate.csv"}, report)
    return report


def run_fermionize_demo(cfg: dict, out: Path) -> dict:
    from . import fermionize as fz
    from .discretization import make_grid
    from .plans import Wavefunction, coulomb_cost

    g = make_grid(0.0, 1.0, cfg["n"])
    cost = coulomb_cost(g)
    x1, x2 = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    raw = np.abs(x1 - x2) * np.exp(-((x1 - 0.5) ** 2 + (x2 - 0.5) ** 2) / 0.1)
    phi = Wavefunction(g, 2, 0.5 * (raw + raw.T)).normalized()
    v_phi = fz.wavefunction_vee(phi, cost)
    rows = []
    for k in cfg["deltas"]:
        nf = fz.make_node_functions(k * g.h)
        psi, rhoN = fz.insert_node(phi, nf)
        rp, php = fz.excess_density(phi, nf)
        pp = fz.represent_density(rp, g, 2)
        tilde = fz.match_wavefunctions(psi, pp)
        v_psi = fz.wavefunction_vee(psi, cost)
        rows.append({
            "delta": k * g.h,
            "Vee_psi": v_psi,
            "Vee_phi": v_phi,
            "abs_diff": abs(v_psi - v_phi),
            "identity_error": float(np.max(np.abs(nf.A(g, 2) ** 2 + nf.B(g, 2) ** 2 - 1))),
            "split_error": float(np.max(np.abs(php.amplitudes**2 + rhoN - phi.amplitudes**2))),
            "additivity_error": abs(fz.wavefunction_vee(tilde, cost) - v_psi - fz.wavefunction_vee(pp, cost)),
        })
    with open(out / "fermionize.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) for k, v in r.items()})
    diffs = [r["abs_diff"] for r in rows]
    report = {
        "identity_ok": max(r["identity_error"] for r in rows) < 1e-12,
        "split_ok": max(r["split_error"] for r in rows) < 1e-12,
        "additivity_ok": max(r["additivity_error"] for r in rows) < 1e-10,
        "monotone_convergence": all(a >= b for a, b in zip(diffs, diffs[1:])),
    }
    print(json.dumps(report))
    write_json(out / "fermionize.json", cfg, rows, report)
    return report


def run_harriman(cfg: dict, out: Path) -> dict:
    from .discretization import make_grid
    from .harriman import harriman_orbitals, regularity_check
    from .plans import MarginalDensity

    g = make_grid(0.0, 1.0, cfg["n"])
    shapes = {"uniform": np.ones_like, "linear": lambda y: 2 * y}
    if cfg["density"] not in shapes:
        raise InvalidArgument(f"unknown density {cfg['density']!r}")
    rho = MarginalDensity.from_function(g, shapes[cfg["density"]], cfg["N"])
    orb = harriman_orbitals(rho, cfg["N"], cfg["kind"])
    orb.to_csv(out / "orbitals.csv")
    reg = regularity_check(orb)
    results = {"orthonormality_error": orb.orthonormality_error(), "density_error": orb.density_error(),
               "gradient_formula_error": reg.gradient_formula_error, "kinetic": reg.kinetic}
    report = {"orthonormal": results["orthonormality_error"] < 1e-8,
              "density_ok": results["density_error"] < 1e-10,
              "gradient_formula_ok": results["gradient_formula_error"] < 1e-2}
    print(json.dumps(results))
    write_json(out / "harriman.json", cfg, results, report)
    return report


def run_lawrentiev(cfg: dict, out: Path) -> dict:
    from .lawrentiev import GAP_CONSTANT, gap_certificate, minimize_perturbed

    rows = []
    for eps in cfg["eps"]:
        r = minimize_perturbed(eps, cfg["n"], cfg["iterations"])
        cert = gap_certificate(r.u)
        rows.append({"epsilon": eps, "n": cfg["n"], "best_value": r.value, "x_star": cert.x_star,
                     "G_value": cert.G_value, "bound": cert.bound, "start": r.start,
                     "certificate_holds": cert.holds()})
    with open(out / "lawrentiev.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["epsilon", "n", "best_value", "x_star", "G_value", "bound"]
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
            print(",".join(f"{r[c]!r}" for c in cols))
    report = {"above_gap": all(r["best_value"] > 9.0e-4 for r in rows if r["epsilon"] > 0),
              "certificates_hold": all(r["certificate_holds"] for r in rows if r["epsilon"] > 0),
              "gap_constant": GAP_CONSTANT}
    write_json(out / "lawrentiev.json", cfg, rows, report)
    return report


def run_verify_all(cfg: dict, out: Path) -> dict:
    from .verify import run_suite

    suite = run_suite(quick=cfg["quick"], seed=cfg["seed"])
    for r in suite.results:
        print(r.line())
    counts = {lab: sum(r.label == lab for r in suite.results) for lab in ("PASS", "FAIL", "INFO")}
    print(f"{counts['PASS']} passed, {counts['FAIL']} failed, {counts['INFO']} report-only")
    results = [{"name": r.name, "label": r.label, "detail": r.detail} for r in suite.results]
    report = {"all_pass": suite.ok, **{k.lower(): v for k, v in counts.items()}}
    write_json(out / "verify.json", cfg, results, report)
    return report


RUNNERS = {
    "sce": run_sce,
    "sweep": run_sweep,
    "reinstate-demo": run_reinstate_demo,
    "fermionize-demo": run_fermionize_demo,
    "harriman": run_harriman,
    "lawrentiev": run_lawrentiev,
    "verify-all": run_verify_all,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except InvalidArgument as exc:
        print(f"scelab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    out = Path(args.out or os.environ.get("OUTPUT_DIR", "."))
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = RUNNERS[args.command](cfg, out)
    except (InvalidArgument, DegenerateInput, SupportError) as exc:
        print(f"scelab: validation failure: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK if _all_pass(report) else EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
