import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scelab.discretization import gaussian_mollifier, make_grid
from scelab.errors import InvalidArgument, SupportError
from scelab.plans import MarginalDensity, TransportPlan, is_symmetric, marginal_k
from scelab.reinstate import (
    C_STAR,
    build_coupling,
    is_strongly_positive,
    l1_constant,
    l1_stability_check,
    project,
    project_via_expansion,
    recovery_plan,
    smooth,
    strong_positivize,
)

from conftest import marginals, symmetric_plans


def test_coupling_two_node_oracle():
    # f = min = (0.4, 0.4); f_A = (0.2, 0); f_B = (0, 0.2); K = diag f + f_B f_A^T / 0.2
    g = make_grid(0, 1, 2)
    k = build_coupling(MarginalDensity.from_mass(g, [0.6, 0.4]), MarginalDensity.from_mass(g, [0.4, 0.6]))
    assert np.allclose(k.matrix, [[0.4, 0.0], [0.2, 0.4]])
    assert np.allclose(k.matrix.sum(axis=0), [0.6, 0.4])
    assert np.allclose(k.matrix.sum(axis=1), [0.4, 0.6])


def test_projection_two_node_oracle():
    # product of (0.6, 0.4) sent to (0.4, 0.6): Q = K / mu_A = [[2/3, 0], [1/3, 1]]
    g = make_grid(0, 1, 2)
    plan = TransportPlan.product(MarginalDensity.from_mass(g, [0.6, 0.4]), 2)
    P = project(plan, MarginalDensity.from_mass(g, [0.4, 0.6]))
    assert np.allclose(P.mass, np.outer([0.4, 0.6], [0.4, 0.6]), atol=1e-15)


def test_l1_constants():
    assert l1_constant(2) == 2.5
    assert l1_constant(3) == 5.0
    assert C_STAR == pytest.approx(6 * (8 * np.pi / 3) ** (1 / 3))


@given(symmetric_plans(), st.data())
def test_projection_invariants(plan, data):
    muB = data.draw(marginals(n=plan.grid.n))
    P = project(plan, muB)
    for m in P.marginal_masses():
        assert np.max(np.abs(m - muB.mass)) < 1e-10
    assert is_symmetric(P.values)
    assert np.all(P.values >= 0)
    lhs, rhs = l1_stability_check(plan, muB)
    assert lhs <= rhs + 1e-14
    assert np.max(np.abs(project_via_expansion(plan, muB).mass - P.mass)) < 1e-12


@given(symmetric_plans(N=3), st.data())
def test_projection_commutes_with_marginals(plan, data):
    muB = data.draw(marginals(n=plan.grid.n))
    lhs = marginal_k(project(plan, muB), 2).mass
    rhs = project(marginal_k(plan, 2), muB).mass
    assert np.max(np.abs(lhs - rhs)) < 1e-12


@given(symmetric_plans())
def test_projection_onto_own_marginal_is_identity(plan):
    mu = MarginalDensity.from_mass(plan.grid, plan.marginal_masses()[0])
    assert np.max(np.abs(project(plan, mu).mass - plan.mass)) < 1e-14


@given(marginals(n=4), marginals(n=4))
def test_product_goes_to_product(a, b):
    for N in (2, 3):
        P = project(TransportPlan.product(a, N), b)
        assert np.allclose(P.mass, TransportPlan.product(b, N).mass, atol=1e-15)


def test_unequal_marginals_rejected():
    g = make_grid(0, 1, 3)
    plan = TransportPlan.from_mass(g, [[0.2, 0.3, 0], [0.1, 0.2, 0], [0.1, 0.1, 0]])
    with pytest.raises(InvalidArgument):
        project(plan, MarginalDensity.uniform(g))


def test_safe_ratio_convention_for_zero_marginal():
    g = make_grid(0, 1, 3)
    m = np.zeros((3, 3))
    m[0, 1] = m[1, 0] = 0.5  # marginal (0.5, 0.5, 0)
    P = project(TransportPlan.from_mass(g, m, symmetric=True), MarginalDensity.uniform(g))
    assert np.allclose(P.marginal_masses()[0], 1 / 3)
    assert issubclass(SupportError, ZeroDivisionError)


@given(symmetric_plans(N=2, n=4), st.floats(0.05, 0.5))
def test_smoothing_commutes_with_one_body_marginal(plan, eps):
    k = gaussian_mollifier(eps, plan.grid)
    sm = smooth(plan, k)
    assert np.allclose(sm.marginal_masses()[0], k.apply(plan.marginal_masses()[0]), atol=1e-14)


@given(symmetric_plans(), st.floats(0.01, 0.99))
def test_strong_positivization(plan, beta):
    sp = strong_positivize(plan, beta)
    holds, best = is_strongly_positive(sp)
    N = plan.n_bodies
    assert holds and best >= (1 - beta) * beta / N * (1 - 1e-9)
    assert np.allclose(sp.marginal_masses()[0], plan.marginal_masses()[0], atol=1e-15)


@given(symmetric_plans(N=3), st.floats(0.01, 0.99))
def test_two_body_identity_after_positivization(plan, beta):
    mu = plan.marginal_masses()[0]
    lhs = marginal_k(strong_positivize(plan, beta), 2).mass
    rhs = (1 - 2 * beta / 3) * marginal_k(plan, 2).mass + 2 * beta / 3 * np.outer(mu, mu)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_strong_positivize_needs_symmetric_plan():
    g = make_grid(0, 1, 2)
    plan = TransportPlan.from_mass(g, [[0.5, 0.5], [0.0, 0.0]])
    with pytest.raises(InvalidArgument):
        strong_positivize(plan, 0.1)


def test_recovery_plan_hits_target_marginal():
    g = make_grid(0, 1, 8)
    mu = MarginalDensity.from_function(g, lambda x: 1 + x)
    m = np.zeros((8, 8))
    for i in range(8):
        m[i, 7 - i] = mu.mass[i]
    gamma = TransportPlan.from_mass(g, 0.5 * (m + m.T) / (0.5 * (m + m.T)).sum(), symmetric=True)
    rec = recovery_plan(gamma, mu, 0.2, 0.1)
    assert np.max(np.abs(rec.marginal_masses()[0] - mu.mass)) < 1e-10
    assert is_strongly_positive(rec)[0]
