"""Turning symmetric (bosonic) wavefunctions into antisymmetric ones of nearly equal energy.

A symmetric ``Phi`` is multiplied by an antisymmetric node factor ``A_delta`` that equals
``+-1`` once all particles are ``delta`` apart. The density lost near coincidences, the
excess density, is carried by a second real antisymmetric wavefunction, and the two are
combined as ``Psi + i Psi'`` so that their densities add without interference.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .discretization import Grid1D
from .errors import InvalidArgument
from .harriman import harriman_orbitals
from .plans import (
    CostMatrix,
    MarginalDensity,
    Wavefunction,
    _perm_sign,
    is_symmetric,
    kinetic_energy,
    l1_l3_norm,
    pair_cost_tensor,
)

C0 = 2 * (8 * math.pi / 3) ** (1 / 3)
ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class NodeFunctions:
    """Node-insertion factors of width ``delta``.

    ``s(z) = sin(pi z / 2)`` and ``c(z) = cos(pi z / 2)`` inside ``|z| < 1``, continued by
    ``sign(z)`` and ``0``; ``A = prod_{i<j} s((x_i - x_j)/delta)`` and ``B = sqrt(1 - A^2)``.
    """

    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidArgument(f"delta must be positive, got {self.delta}")

    @staticmethod
    def s(z):
        z = np.asarray(z, dtype=float)
        return np.where(np.abs(z) < 1, np.sin(np.pi * z / 2), np.sign(z))

    @staticmethod
    def c(z):
        z = np.asarray(z, dtype=float)
        return np.where(np.abs(z) < 1, np.cos(np.pi * z / 2), 0.0)

    def _pair_factors(self, grid: Grid1D, N: int):
        x = np.meshgrid(*([grid.nodes] * N), indexing="ij")
        pairs = [(x[i] - x[j]) / self.delta for i, j in itertools.combinations(range(N), 2)]
        return np.stack(pairs) if pairs else np.ones((1,) + (grid.n,) * N)

    def A(self, grid: Grid1D, N: int) -> np.ndarray:
        """Antisymmetric factor on grid^N (exactly antisymmetric in floating point)."""
        if N < 2:
            return np.ones((grid.n,) * N)
        s = self.s(self._pair_factors(grid, N))
        # product of sorted moduli does not depend on the order of the particles
        mag = np.prod(np.sort(np.abs(s), axis=0), axis=0)
        return np.prod(np.sign(s), axis=0) * mag

    def B(self, grid: Grid1D, N: int) -> np.ndarray:
        A = self.A(grid, N)
        return np.sqrt(np.maximum(1.0 - A * A, 0.0))

    def lipschitz_bound(self, N: int) -> float:
        """sum over nonempty pair subsets of (sum of |grad c_l| + |grad s_l|), scaled by 1/delta."""
        M = math.comb(N, 2)
        return (2**M - 1) * M * (math.pi / 2) * math.sqrt(2) / self.delta


def make_node_functions(delta: float) -> NodeFunctions:
    return NodeFunctions(float(delta))


def lipschitz_check(nf: NodeFunctions, grid: Grid1D, N: int, safety: float = 1.1) -> tuple[float, float]:
    """(largest difference quotient of B along any axis, safety * Lipschitz bound)."""
    B = nf.B(grid, N)
    slope = max(float(np.max(np.abs(np.diff(B, axis=i)))) / grid.h for i in range(N))
    return slope, safety * nf.lipschitz_bound(N)


def _spin_up(amplitudes: np.ndarray, N: int) -> np.ndarray:
    out = np.zeros(amplitudes.shape + (2,) * N, dtype=amplitudes.dtype)
    out[(Ellipsis,) + (0,) * N] = amplitudes
    return out


def _require_symmetric_real(phi: Wavefunction):
    if phi.spinful or not phi.is_real:
        raise InvalidArgument("expected a real spinless wavefunction")
    if not is_symmetric(np.real(phi.amplitudes)):
        raise InvalidArgument("wavefunction must be symmetric")


def insert_node(phi: Wavefunction, nf: NodeFunctions) -> tuple[Wavefunction, np.ndarray]:
    """Psi_delta = A_delta Phi chi with chi all spins up, and its N-body position density."""
    _require_symmetric_real(phi)
    N = phi.n_bodies
    A = nf.A(phi.grid, N)
    amp = A * np.real(phi.amplitudes)
    psi = Wavefunction(phi.grid, N, _spin_up(amp, N), spinful=True)
    return psi, amp**2


def excess_density(phi: Wavefunction, nf: NodeFunctions) -> tuple[np.ndarray, Wavefunction]:
    """(rho' = rho_Phi - rho_Psi_delta, Phi' = B_delta Phi)."""
    _require_symmetric_real(phi)
    phi_prime = Wavefunction(phi.grid, phi.n_bodies, nf.B(phi.grid, phi.n_bodies) * np.real(phi.amplitudes))
    return phi_prime.one_body_density(), phi_prime


def slater_determinant(orbitals: np.ndarray, spins=None) -> np.ndarray:
    """(N!)^(-1/2) det[chi_i(x_j, s_j)] as a spinful array of shape (n,)*N + (2,)*N."""
    orbitals = np.asarray(orbitals)
    N, n = orbitals.shape
    spins = [0] * N if spins is None else list(spins)
    spin_orbitals = np.zeros((N, n, 2), dtype=orbitals.dtype)
    for i, s in enumerate(spins):
        spin_orbitals[i, :, s] = orbitals[i]
    letters = "abcdefgh"[:N]
    spin_letters = "pqrstuvw"[:N]
    out = np.zeros((n,) * N + (2,) * N, dtype=orbitals.dtype)
    for perm in itertools.permutations(range(N)):
        ops = [spin_orbitals[perm[j]] for j in range(N)]
        subscripts = ",".join(f"{letters[j]}{spin_letters[j]}" for j in range(N))
        out = out + _perm_sign(perm) * np.einsum(f"{subscripts}->{letters}{spin_letters}", *ops)
    return out / math.sqrt(math.factorial(N))


def represent_density(rho_prime: np.ndarray, grid: Grid1D, N: int) -> Wavefunction:
    """Real antisymmetric spinful wavefunction whose one-body density is ``rho_prime``.

    Uses the real Harriman orbitals of the normalised excess density, all spins up,
    scaled by ``sqrt(mass / N)``; zero excess gives the zero wavefunction.
    """
    rho_prime = np.maximum(np.asarray(rho_prime, dtype=float), 0.0)
    mass = grid.integrate(rho_prime)
    shape = (grid.n,) * N + (2,) * N
    if not mass > 0:
        return Wavefunction(grid, N, np.zeros(shape), spinful=True)
    rho = MarginalDensity(grid, rho_prime / mass, N)
    orb = harriman_orbitals(rho, N, kind="real")
    amp = math.sqrt(mass / N) * slater_determinant(orb.orbitals)
    return Wavefunction(grid, N, amp, spinful=True)


def match_wavefunctions(psi: Wavefunction, psi_prime: Wavefunction) -> Wavefunction:
    """Psi + i Psi'; both inputs must be real so the cross term cancels in |.|^2."""
    for w in (psi, psi_prime):
        if not w.is_real:
            raise InvalidArgument("match_wavefunctions needs real-valued inputs")
    if (psi.grid, psi.n_bodies, psi.spinful) != (psi_prime.grid, psi_prime.n_bodies, psi_prime.spinful):
        raise InvalidArgument("wavefunctions are not compatible")
    amp = np.real(psi.amplitudes) + 1j * np.real(psi_prime.amplitudes)
    return Wavefunction(psi.grid, psi.n_bodies, amp, psi.spinful)


def density_vee(density: np.ndarray, grid: Grid1D, cost: CostMatrix) -> float:
    """sum_{i<j} c(x_i, x_j) integrated against an N-body density of any total mass."""
    N = density.ndim
    return float(np.sum(pair_cost_tensor(cost, N) * grid.tensor_weights(N) * density))


def wavefunction_vee(psi: Wavefunction, cost: CostMatrix) -> float:
    return density_vee(psi.position_density(), psi.grid, cost)


@dataclass(frozen=True)
class SlaterVee:
    direct_minus_exchange: float
    direct_only: float


def slater_vee(orbitals, grid: Grid1D, cost: CostMatrix, spins=None, weights=None) -> SlaterVee:
    """Pair interaction of the Slater determinant via its one-body density matrix.

    V = 1/2 sum_{x,y} w_x w_y c(x,y) [rho(x) rho(y) - sum_sigma |gamma_sigma(x,y)|^2];
    the direct (Hartree) term alone is an upper bound. ``weights`` default to the
    trapezoid rule and must make the orbitals orthonormal.
    """
    phi = np.atleast_2d(np.asarray(orbitals))
    K = phi.shape[0]
    spins = np.zeros(K, dtype=int) if spins is None else np.asarray(spins)
    w = grid.weights if weights is None else np.asarray(weights)
    G = (phi * w) @ phi.conj().T
    G = G * (spins[:, None] == spins[None, :])
    if np.max(np.abs(G - np.eye(K))) > ORTHO_TOL:
        raise InvalidArgument("orbitals are not orthonormal under the quadrature")
    C = cost.values
    WW = np.outer(w, w)
    rho = np.sum(np.abs(phi) ** 2, axis=0)
    direct = 0.5 * float(np.sum(WW * C * np.outer(rho, rho)))
    exchange = 0.0
    for s in np.unique(spins):
        sub = phi[spins == s]
        gamma = sub.T @ sub.conj()
        exchange += 0.5 * float(np.sum(WW * C * np.abs(gamma) ** 2))
    return SlaterVee(direct - exchange, direct)


def slater_vee_bruteforce(orbitals, grid: Grid1D, cost: CostMatrix, spins=None, weights=None) -> float:
    """The same quantity by summing over the full N-body determinant."""
    phi = np.atleast_2d(np.asarray(orbitals))
    N = phi.shape[0]
    if N < 2:
        return 0.0
    det = slater_determinant(phi, spins)
    dens = np.sum(np.abs(det) ** 2, axis=tuple(range(N, 2 * N)))
    w = grid.weights if weights is None else np.asarray(weights)
    W = np.ones(())
    for _ in range(N):
        W = np.multiply.outer(W, w)
    return float(np.sum(pair_cost_tensor(cost, N) * W * dens))


@dataclass(frozen=True)
class BosFerRelation:
    T_bos: float
    T_fer: float
    Vee_equal: bool


def bosonic_fermionic_relation(psi: Wavefunction, cost: CostMatrix) -> BosFerRelation:
    """Kinetic energies of Psi and of Phi = (sum_s |Psi|^2)^(1/2), plus V_ee equality."""
    if not psi.spinful:
        raise InvalidArgument("expected a spinful wavefunction")
    dens = psi.position_density()
    phi = Wavefunction(psi.grid, psi.n_bodies, np.sqrt(dens))
    v_fer = density_vee(dens, psi.grid, cost)
    v_bos = wavefunction_vee(phi, cost)
    return BosFerRelation(kinetic_energy(phi), kinetic_energy(psi),
                          abs(v_fer - v_bos) <= 1e-10 * max(1.0, abs(v_fer)))


def c0_check(f, g, grid: Grid1D, cost: CostMatrix) -> tuple[float, float]:
    """(|int int f(x) g(y) c(x,y)|, c0 ||f||_1 ||g||_{L1 cap L3}); report-only on a line."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    w = grid.weights
    lhs = abs(float((f * w) @ cost.values @ (g * w)))
    return lhs, C0 * grid.integrate(np.abs(f)) * l1_l3_norm(g, grid)
