import numpy as np
import pytest

from scelab.discretization import make_grid
from scelab.errors import InvalidArgument
from scelab.plans import MarginalDensity, TransportPlan, Wavefunction, coulomb_cost, coulomb_energy, kinetic_energy
from scelab.sce import MmotProblem, solve_mmot
from scelab.semiclassical import (
    OptimizerSettings,
    SweepConfig,
    bosonic_energy,
    minimize_bosonic,
    moment_panel,
    moments_match,
    recovery_upper_bound,
    semiclassical_sweep,
    sweep_summary,
    write_sweep_csv,
)


def test_bosonic_energy_is_affine_in_alpha():
    g = make_grid(0, 1, 5)
    psi = Wavefunction.from_plan(TransportPlan.product(MarginalDensity.uniform(g), 2))
    cost = coulomb_cost(g)
    T = kinetic_energy(psi)
    assert bosonic_energy(psi, 0.7, cost) - bosonic_energy(psi, 0.2, cost) == pytest.approx(0.5 * T)
    assert bosonic_energy(psi, 0.0, cost) == pytest.approx(coulomb_energy(psi.to_plan(), cost))


def test_minimizer_lies_between_lp_value_and_product_energy():
    g = make_grid(0, 1, 6)
    mu = MarginalDensity.uniform(g)
    cost = coulomb_cost(g)
    res = minimize_bosonic(mu, 1e-2, settings=OptimizerSettings(max_iter=300))
    plan = res.psi.to_plan()
    assert np.allclose(plan.marginal_masses()[0], mu.mass, atol=1e-10)
    V = solve_mmot(MmotProblem.coulomb(mu, 2)).value
    start = bosonic_energy(Wavefunction.from_plan(TransportPlan.product(mu, 2)), 1e-2, cost)
    assert V <= res.value < start


def test_minimize_bosonic_rejects_bad_input():
    mu = MarginalDensity.uniform(make_grid(0, 1, 4))
    with pytest.raises(InvalidArgument):
        minimize_bosonic(mu, 0.0)
    with pytest.raises(InvalidArgument):
        minimize_bosonic(mu, 1.0, cost=coulomb_cost(mu.grid, strict=True))


def test_recovery_upper_bound_exceeds_lp_value():
    g = make_grid(0, 1, 6)
    mu = MarginalDensity.uniform(g)
    lp = solve_mmot(MmotProblem.coulomb(mu, 2))
    assert recovery_upper_bound(lp.symmetrized(), mu, 1e-3, 0.1, 0.05) >= lp.value


def test_moment_panel_of_product():
    g = make_grid(0, 1, 3)
    m = moment_panel(TransportPlan.product(MarginalDensity.uniform(g), 2))
    assert m[0] == pytest.approx(1.0)
    assert m[1] == pytest.approx(0.5)
    assert moments_match(m, m)
    assert not moments_match(m, 1.2 * m)


def test_sweep_config_validation():
    with pytest.raises(InvalidArgument):
        SweepConfig(alphas=(1e-2, 1.0))
    with pytest.raises(InvalidArgument):
        SweepConfig(alphas=(1.0, 0.1), epsilons=(0.1, 0.1, 0.1))
    with pytest.raises(InvalidArgument):
        SweepConfig(alphas=(1.0,), epsilons=(0.1,), betas=(1.5,))
    assert SweepConfig(alphas=(1.0, 0.5), epsilons=(0.2,), betas=(0.1,)).schedule("betas") == [0.1, 0.1]


def test_small_sweep_invariants(tmp_path):
    cfg = SweepConfig(alphas=(1.0, 1e-2, 1e-4), epsilons=(0.3, 0.05, 0.01), betas=(0.2, 0.05, 0.01), n=6)
    res = semiclassical_sweep(cfg)
    gaps = [r.gap for r in res.records]
    fs = [r.F_alpha_upper for r in res.records]
    assert min(gaps) >= -1e-9
    assert all(a >= b for a, b in zip(fs, fs[1:]))
    assert gaps[-1] < gaps[0]
    write_sweep_csv(res, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0].startswith("alpha,V_sce,F_alpha_upper,gap")
    summary = sweep_summary(cfg, res)
    assert set(summary) == {"config", "results", "invariant_report"}


@pytest.mark.slow
def test_small_alpha_minimum_close_to_sce_value():
    g = make_grid(0, 1, 8)
    mu = MarginalDensity.uniform(g)
    V = solve_mmot(MmotProblem.coulomb(mu, 2)).value
    res = minimize_bosonic(mu, 1e-4)
    assert V <= res.value <= 1.05 * V
