"""Acceptance criteria 1-10, each printed as a PASS/FAIL line at its stated tolerance."""
import time

import numpy as np
import pytest

from scelab import fermionize as fz
from scelab import harriman as hm
from scelab import lawrentiev as lw
from scelab.discretization import make_grid
from scelab.errors import InvalidArgument
from scelab.plans import MarginalDensity, TransportPlan, Wavefunction, coulomb_cost
from scelab.reinstate import l1_constant, l1_stability_check, project, project_via_expansion
from scelab.sce import MmotProblem, brute_force_mmot, solve_mmot
from scelab.semiclassical import SweepConfig, semiclassical_sweep
from scelab.verify import random_instances, run_suite


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def instances():
    return list(random_instances(np.random.default_rng(2024), 200))


@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    res = semiclassical_sweep(SweepConfig())
    return res, time.perf_counter() - t0


def test_criterion_01_marginal_restoration(capsys, instances):
    t0 = time.perf_counter()
    worst = 0.0
    for plan, muB in instances:
        P = project(plan, muB)
        worst = max(worst, max(float(np.max(np.abs(m - muB.mass))) for m in P.marginal_masses()))
    dt = time.perf_counter() - t0
    shapes = {(p.grid.n, p.n_bodies) for p, _ in instances}
    ok = worst < 1e-10 and dt < 10 and shapes == {(n, N) for n in (2, 4, 8) for N in (2, 3)}
    report(capsys, 1, ok, f"200 instances, max marginal error {worst:.1e}, {dt:.2f}s")


def test_criterion_02_l1_stability(capsys, instances):
    ratios = []
    for plan, muB in instances:
        lhs, rhs = l1_stability_check(plan, muB)
        ratios.append(lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf))
    ok = max(ratios) <= 1 + 1e-12 and l1_constant(2) == 2.5 and l1_constant(3) == 5.0
    report(capsys, 2, ok, f"max lhs/rhs {max(ratios):.4f}; constants 2.5 and 5")


def test_criterion_03_expansion_equivalence(capsys, instances):
    worst = 0.0
    count = 0
    for plan, muB in instances:
        if plan.grid.n**plan.n_bodies <= 4096:
            worst = max(worst, float(np.max(np.abs(project_via_expansion(plan, muB).mass - project(plan, muB).mass))))
            count += 1
    report(capsys, 3, worst < 1e-12 and count == 200, f"{count} instances, max difference {worst:.1e}")


def test_criterion_04_sce_exactness(capsys):
    rng = np.random.default_rng(7)
    cases = []
    for n, N in [(2, 2), (3, 2), (4, 2), (6, 2), (8, 2), (3, 3), (4, 3), (5, 3)]:
        g = make_grid(0.0, 1.0, n)
        cases.append(MmotProblem.coulomb(MarginalDensity.uniform(g), N))
        m = 0.5 * rng.dirichlet(np.full(n, 5.0)) + 0.5 / n
        cases.append(MmotProblem.coulomb(MarginalDensity.from_mass(g, m), N))
    worst = 0.0
    agree = True
    for prob in cases:
        a, b = solve_mmot(prob), brute_force_mmot(prob)
        agree &= a.status == b.status
        if a.status == "optimal":
            worst = max(worst, abs(a.value - b.value))
    v = solve_mmot(MmotProblem.coulomb(MarginalDensity.uniform(make_grid(0.0, 2.0, 3)), 2)).value
    ok = agree and worst < 1e-9 and abs(v - 5 / 6) < 1e-9
    report(capsys, 4, ok, f"{len(cases)} instances, max |LP - oracle| {worst:.1e}; 3-node value {v:.12f}")


def test_criterion_05_gap_closure(capsys, sweep):
    res, dt = sweep
    gaps = [r.gap for r in res.records]
    rel = gaps[-1] / res.V_sce
    ok = min(gaps) >= -1e-12 and rel < 0.05 and gaps[0] > gaps[-1] and dt < 300
    report(capsys, 5, ok, f"gaps {[float(f'{g:.4g}') for g in gaps]}, final relative {rel:.4f}, {dt:.1f}s")


def test_criterion_06_weak_convergence_proxy(capsys, sweep):
    res, _ = sweep
    m = np.array(res.records[-1].testfn_moments)
    lp = np.array(res.lp_moments)
    rel = float(np.max(np.abs(m - lp) / np.abs(lp)))
    ok = res.minimizer_match and rel < 0.05
    detail = f"{res.status}, max relative moment difference {rel:.4f}"
    if not res.minimizer_match:
        detail += f"; psi moments {m.tolist()} vs LP {lp.tolist()}"
    report(capsys, 6, ok, detail)


def test_criterion_07_fermionization(capsys):
    g = make_grid(0.0, 1.0, 16)
    cost = coulomb_cost(g)
    x1, x2 = np.meshgrid(g.nodes, g.nodes, indexing="ij")
    raw = np.abs(x1 - x2) * np.exp(-((x1 - 0.5) ** 2 + (x2 - 0.5) ** 2) / 0.1)
    phi = Wavefunction(g, 2, 0.5 * (raw + raw.T)).normalized()
    v_phi = fz.wavefunction_vee(phi, cost)
    ident = split = add = 0.0
    diffs = []
    for k in (4, 2, 1):
        nf = fz.make_node_functions(k * g.h)
        ident = max(ident, float(np.max(np.abs(nf.A(g, 2) ** 2 + nf.B(g, 2) ** 2 - 1))))
        psi, rhoN = fz.insert_node(phi, nf)
        rp, php = fz.excess_density(phi, nf)
        split = max(split, float(np.max(np.abs(php.amplitudes**2 + rhoN - phi.amplitudes**2))))
        pp = fz.represent_density(rp, g, 2)
        tilde = fz.match_wavefunctions(psi, pp)
        v_psi = fz.wavefunction_vee(psi, cost)
        add = max(add, abs(fz.wavefunction_vee(tilde, cost) - v_psi - fz.wavefunction_vee(pp, cost)))
        diffs.append(abs(v_psi - v_phi))
    mono = all(a >= b for a, b in zip(diffs, diffs[1:])) and diffs[0] > diffs[-1]
    ok = ident < 1e-12 and split < 1e-12 and add < 1e-10 and mono
    report(capsys, 7, ok, f"identity {ident:.1e}, split {split:.1e}, additivity {add:.1e}, "
                          f"|V(Psi)-V(Phi)| {[float(f'{d:.3g}') for d in diffs]}")


def test_criterion_08_harriman(capsys):
    g = make_grid(0.0, 1.0, 401)
    ortho = dens = grad = 0.0
    for f in (np.ones_like, lambda y: 2 * y):
        for N in range(1, 6):
            for kind in ("complex", "real"):
                o = hm.harriman_orbitals(MarginalDensity.from_function(g, f, N), N, kind)
                ortho = max(ortho, o.orthonormality_error())
                dens = max(dens, o.density_error())
                grad = max(grad, hm.regularity_check(o).gradient_formula_error)
    ok = ortho < 1e-8 and dens < 1e-10 and grad < 1e-2
    report(capsys, 8, ok, f"orthonormality {ortho:.1e}, density {dens:.1e}, gradient formula {grad:.1e}")


def test_criterion_09_lawrentiev(capsys):
    t0 = time.perf_counter()
    vals, certs = [], []
    for eps in (1e-3, 1e-2, 1e-1):
        r = lw.minimize_perturbed(eps, 2001)
        vals.append(r.value)
        certs.append(lw.gap_certificate(r.u).holds(tol=5e-2))
    J0 = lw.minimize_perturbed(0.0, 2001, extra_starts={"x^(1/3)": np.cbrt}).value
    dt = time.perf_counter() - t0
    ok = min(vals) > 9.0e-4 and J0 < 1e-3 and all(certs) and dt < 120
    report(capsys, 9, ok, f"minima {[float(f'{v:.5g}') for v in vals]}, J from cube root {J0:.1e}, "
                          f"certificates {certs}, {dt:.1f}s")


def test_criterion_10_desk_scale_scope(capsys):
    # three-dimensional electronic structure is out of reach; the tensor size guard and the
    # report-only tagging of 3-D inequalities make that explicit
    with pytest.raises(InvalidArgument):
        TransportPlan.product(MarginalDensity.uniform(make_grid(0.0, 1.0, 100)), 3)
    suite = run_suite(quick=True)
    info = [r.name for r in suite.results if r.report_only]
    ok = suite.ok and len(info) >= 3 and all("1-D" in name for name in info)
    report(capsys, 10, ok, f"3-D results not reproduced; {len(info)} checks reported as INFO: {info}")
