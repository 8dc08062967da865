import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scelab import fermionize as fz
from scelab.discretization import make_grid
from scelab.errors import InvalidArgument
from scelab.harriman import harriman_orbitals
from scelab.plans import MarginalDensity, Wavefunction, coulomb_cost, is_symmetric, symmetrize


def bosonic_phi(n=12, N=2, seed=0):
    g = make_grid(0, 1, n)
    rng = np.random.default_rng(seed)
    a = np.abs(rng.standard_normal((n,) * N)) + 0.1
    return symmetrize(Wavefunction(g, N, a))


def test_node_function_values():
    assert fz.NodeFunctions.s(0.5) == pytest.approx(math.sin(math.pi / 4))
    assert fz.NodeFunctions.s(2.0) == 1.0 and fz.NodeFunctions.s(-3.0) == -1.0
    assert fz.NodeFunctions.c(1.5) == 0.0
    with pytest.raises(InvalidArgument):
        fz.make_node_functions(0.0)


@given(st.floats(0.05, 0.8), st.sampled_from([2, 3]))
def test_A_B_identity_and_antisymmetry(delta, N):
    g = make_grid(0, 1, 7)
    nf = fz.make_node_functions(delta)
    A, B = nf.A(g, N), nf.B(g, N)
    assert np.max(np.abs(A**2 + B**2 - 1)) < 1e-12
    assert is_symmetric(A, sign=True)
    assert np.all(np.abs(A) <= 1)


def test_A_is_plus_or_minus_one_when_separated():
    g = make_grid(0, 1, 5)
    A = fz.make_node_functions(0.2).A(g, 2)
    off = ~np.eye(5, dtype=bool)
    assert np.all(np.abs(A[off]) == 1)
    assert np.all(A[np.triu_indices(5, 1)] == -1)


@given(st.integers(0, 1000), st.sampled_from([2, 3]))
def test_insert_node_and_density_split(seed, N):
    phi = bosonic_phi(6, N, seed)
    nf = fz.make_node_functions(0.4)
    psi, rhoN = fz.insert_node(phi, nf)
    assert is_symmetric(psi.amplitudes, sign=True, spin_axes=True)
    _, php = fz.excess_density(phi, nf)
    assert np.max(np.abs(php.amplitudes**2 + rhoN - phi.amplitudes**2)) < 1e-12


def test_insert_node_rejects_nonsymmetric():
    g = make_grid(0, 1, 3)
    with pytest.raises(InvalidArgument):
        fz.insert_node(Wavefunction(g, 2, np.arange(9.0).reshape(3, 3)), fz.make_node_functions(0.5))


def test_represent_density_is_antisymmetric_with_right_mass():
    g = make_grid(0, 1, 16)
    phi = bosonic_phi(16, 2)
    rp, _ = fz.excess_density(phi, fz.make_node_functions(0.3))
    pp = fz.represent_density(rp, g, 2)
    assert is_symmetric(pp.amplitudes, sign=True, spin_axes=True)
    assert pp.is_real
    assert pp.norm2() == pytest.approx(g.integrate(rp) / 2, rel=1e-2)
    zero = fz.represent_density(np.zeros(16), g, 2)
    assert np.all(zero.amplitudes == 0)


def test_match_wavefunctions_adds_pair_energies():
    g = make_grid(0, 1, 10)
    cost = coulomb_cost(g)
    phi = bosonic_phi(10, 2, 3)
    nf = fz.make_node_functions(0.25)
    psi, _ = fz.insert_node(phi, nf)
    rp, _ = fz.excess_density(phi, nf)
    pp = fz.represent_density(rp, g, 2)
    tilde = fz.match_wavefunctions(psi, pp)
    total = fz.wavefunction_vee(tilde, cost)
    assert abs(total - fz.wavefunction_vee(psi, cost) - fz.wavefunction_vee(pp, cost)) < 1e-10
    with pytest.raises(InvalidArgument):
        fz.match_wavefunctions(tilde, pp)


def test_lipschitz_bound_holds():
    g = make_grid(0, 1, 41)
    for N in (2, 3):
        for delta in (0.1, 0.3):
            slope, bound = fz.lipschitz_check(fz.make_node_functions(delta), make_grid(0, 1, 21 if N == 3 else 41), N)
            assert slope <= bound
    assert fz.make_node_functions(1.0).lipschitz_bound(2) == pytest.approx(math.pi / 2 * math.sqrt(2))


def test_slater_identity_against_determinant():
    g = make_grid(0, 1, 32)
    cost = coulomb_cost(g)
    for N, kind in ((2, "real"), (3, "real"), (2, "complex")):
        orb = harriman_orbitals(MarginalDensity.from_function(g, np.ones_like, N), N, kind)
        sv = fz.slater_vee(orb.orbitals, g, cost)
        bf = fz.slater_vee_bruteforce(orb.orbitals, g, cost)
        assert abs(sv.direct_minus_exchange - bf) < 1e-8
        assert sv.direct_minus_exchange <= sv.direct_only


def test_slater_identity_with_mixed_spins():
    g = make_grid(0, 1, 32)
    cost = coulomb_cost(g)
    orb = harriman_orbitals(MarginalDensity.from_function(g, np.ones_like, 2), 2, "real").orbitals
    spins = [0, 1]
    sv = fz.slater_vee(orb, g, cost, spins=spins)
    assert abs(sv.direct_minus_exchange - fz.slater_vee_bruteforce(orb, g, cost, spins=spins)) < 1e-8


def test_slater_requires_orthonormal_orbitals():
    g = make_grid(0, 1, 8)
    with pytest.raises(InvalidArgument):
        fz.slater_vee(np.ones((2, 8)), g, coulomb_cost(g))


def test_bosonic_kinetic_energy_is_lower():
    g = make_grid(0, 1, 12)
    phi = bosonic_phi(12, 2, 7)
    psi, _ = fz.insert_node(phi, fz.make_node_functions(0.3))
    rel = fz.bosonic_fermionic_relation(psi.normalized(), coulomb_cost(g))
    assert rel.T_bos <= rel.T_fer * (1 + 1e-3)
    assert rel.Vee_equal


def test_c0_check_returns_both_sides():
    g = make_grid(0, 1, 8)
    lhs, rhs = fz.c0_check(np.ones(8), np.ones(8), g, coulomb_cost(g))
    assert lhs > 0 and rhs == pytest.approx(fz.C0 * 1.0 * 1.0)
