"""Re-instating a prescribed one-body marginal on an N-body plan.

The coupling kernel moves the common part ``f = min(mu_A, mu_B)`` in place and
redistributes the excess ``f_A`` of ``mu_A`` onto the deficit ``f_B`` in product
form.  Applying the normalised kernel to every coordinate of a plan with marginals
``mu_A`` yields a plan with marginals ``mu_B``.  All kernels here act on node
*masses*, so the discrete delta is the identity on nodes.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .discretization import Grid1D, MollifierKernel, gaussian_mollifier
from .errors import InvalidArgument, SupportError
from .plans import (
    CostMatrix,
    MarginalDensity,
    TransportPlan,
    _symmetric_average,
    coulomb_energy,
    l1_l3_norm,
)

C_STAR = 6 * (8 * math.pi / 3) ** (1 / 3)
MARGINAL_TOL = 1e-10


@dataclass(frozen=True)
class CouplingKernel:
    """Two-body plan with row marginal mu_B and column marginal mu_A (node masses)."""

    grid: Grid1D
    f: np.ndarray = field(repr=False)
    f_A: np.ndarray = field(repr=False)
    f_B: np.ndarray = field(repr=False)
    mass_fB: float

    @property
    def matrix(self) -> np.ndarray:
        K = np.diag(self.f)
        if self.mass_fB > 0:
            K = K + np.outer(self.f_B, self.f_A) / self.mass_fB
        return K


def build_coupling(mu_A: MarginalDensity, mu_B: MarginalDensity) -> CouplingKernel:
    if mu_A.grid != mu_B.grid:
        raise InvalidArgument("marginals live on different grids")
    a, b = mu_A.mass, mu_B.mass
    f = np.minimum(a, b)
    f_A = np.maximum(a - f, 0.0)
    f_B = np.maximum(b - f, 0.0)
    return CouplingKernel(mu_A.grid, f, f_A, f_B, float(f_B.sum()))


def _common_marginal(plan: TransportPlan) -> np.ndarray:
    ms = plan.marginal_masses()
    for m in ms[1:]:
        if np.max(np.abs(m - ms[0])) > MARGINAL_TOL:
            raise InvalidArgument("plan must have identical one-body marginals")
    return ms[0]


def _safe_ratio(num: np.ndarray, mu_A: np.ndarray) -> np.ndarray:
    # quotient by mu_A(x') is taken as 0 where mu_A vanishes; the plan has no mass there
    out = np.zeros_like(num, dtype=float)
    pos = mu_A > 0
    out[..., pos] = num[..., pos] / mu_A[pos]
    return out


def _apply_each_axis(M: np.ndarray, m: np.ndarray) -> np.ndarray:
    for axis in range(m.ndim):
        m = np.moveaxis(np.tensordot(M, m, axes=([1], [axis])), 0, axis)
    return m


def _finish(plan_A: TransportPlan, mass: np.ndarray) -> TransportPlan:
    mass = np.maximum(mass, 0.0)
    if plan_A.symmetric:
        mass = _symmetric_average(mass)
    return TransportPlan.from_mass(plan_A.grid, mass, symmetric=plan_A.symmetric)


def _prepare(plan_A: TransportPlan, mu_B: MarginalDensity):
    if plan_A.grid != mu_B.grid:
        raise InvalidArgument("plan and target marginal live on different grids")
    mu_A_mass = _common_marginal(plan_A)
    kernel = build_coupling(MarginalDensity.from_mass(plan_A.grid, mu_A_mass), mu_B)
    zero = mu_A_mass <= 0
    if np.any(zero):
        m = plan_A.mass
        for axis in range(m.ndim):
            if np.any(np.take(m, np.flatnonzero(zero), axis=axis) > 0):
                raise SupportError("plan carries mass where its marginal vanishes")
    return mu_A_mass, kernel


def project(plan_A: TransportPlan, mu_B: MarginalDensity) -> TransportPlan:
    """Apply the normalised coupling kernel to each coordinate; the result has marginals mu_B."""
    mu_A, kernel = _prepare(plan_A, mu_B)
    Q = _safe_ratio(kernel.matrix, mu_A)
    return _finish(plan_A, _apply_each_axis(Q, plan_A.mass))


def project_via_expansion(plan_A: TransportPlan, mu_B: MarginalDensity) -> TransportPlan:
    """Same operator as :func:`project`, summed term by term over subsets I of coordinates.

    Coordinates in I receive the rank-one transfer ``f_B (x) f_A/mu_A``; the others are
    multiplied pointwise by ``f/mu_A``.
    """
    mu_A, k = _prepare(plan_A, mu_B)
    N = plan_A.n_bodies
    keep = _safe_ratio(k.f, mu_A)
    m = plan_A.mass
    if k.mass_fB == 0:
        subsets = [()]
    else:
        take = _safe_ratio(k.f_A, mu_A)
        put = k.f_B / k.mass_fB
        subsets = [I for r in range(N + 1) for I in itertools.combinations(range(N), r)]
    total = np.zeros_like(m)
    for I in subsets:
        term = m
        for axis in range(N):
            shape = [1] * N
            shape[axis] = -1
            if axis in I:
                collapsed = np.tensordot(term, take, axes=([axis], [0]))
                term = np.expand_dims(collapsed, axis) * put.reshape(shape)
            else:
                term = term * keep.reshape(shape)
        total = total + term
    return _finish(plan_A, total)


def l1_constant(n_bodies: int) -> float:
    return 2 ** (n_bodies - 1) + (n_bodies - 1) / 2


def l1_stability_check(plan_A: TransportPlan, mu_B: MarginalDensity) -> tuple[float, float]:
    """(||gamma_A - P gamma_A||_1, c_N ||mu_A - mu_B||_1) with c_N = 2^(N-1) + (N-1)/2."""
    P = project(plan_A, mu_B)
    mu_A = _common_marginal(plan_A)
    lhs = float(np.abs(plan_A.mass - P.mass).sum())
    rhs = l1_constant(plan_A.n_bodies) * float(np.abs(mu_A - mu_B.mass).sum())
    return lhs, rhs


def smooth(plan: TransportPlan, kernel: MollifierKernel) -> TransportPlan:
    """Tensor-product discrete convolution of the plan's node masses."""
    C = kernel.transfer_matrix(plan.grid.n)
    return _finish(plan, _apply_each_axis(C, plan.mass))


def _complement_marginal(mass: np.ndarray, i: int) -> np.ndarray:
    """(N-1)-body marginal obtained by integrating out coordinate i, kept on the axes != i."""
    return mass.sum(axis=i, keepdims=True)


def strong_positivize(plan: TransportPlan, beta: float) -> TransportPlan:
    """Mix in the partial mean-field plan: (1-beta) gamma + beta/N sum_i mu(x_i) M_{N-1}(x^_i)."""
    if not 0 < beta < 1:
        raise InvalidArgument(f"beta must lie in (0, 1), got {beta}")
    if not plan.symmetric:
        raise InvalidArgument("strong positivization needs a symmetric plan")
    N = plan.n_bodies
    m = plan.mass
    mu = plan.marginal_masses()[0]
    mean_field = np.zeros_like(m)
    for i in range(N):
        shape = [1] * N
        shape[i] = -1
        mean_field += mu.reshape(shape) * _complement_marginal(m, i)
    return _finish(plan, (1 - beta) * m + beta / N * mean_field)


def is_strongly_positive(plan: TransportPlan) -> tuple[bool, float]:
    """Best constant beta with gamma >= beta * M_1 gamma(x_i) * M_{N-1} gamma(x^_i) for all i."""
    m = plan.mass
    N = plan.n_bodies
    best = math.inf
    for i, mu in enumerate(plan.marginal_masses()):
        shape = [1] * N
        shape[i] = -1
        denom = mu.reshape(shape) * _complement_marginal(m, i)
        denom = np.broadcast_to(denom, m.shape)
        pos = denom > 0
        if np.any(pos):
            best = min(best, float(np.min(m[pos] / denom[pos])))
    if best == math.inf:
        best = 0.0
    return best > 0, best


def coulomb_stability_check(plan_A: TransportPlan, mu_B: MarginalDensity,
                            cost: CostMatrix) -> tuple[float, float]:
    """(V_ee[P gamma_A], V_ee[gamma_A] + c_* C(N,2) ||mu_A - mu_B||_{L1 cap L3}).

    The constant comes from three-dimensional electrostatics; on the 1-D grid the
    inequality is an empirical check only.
    """
    P = project(plan_A, mu_B)
    mu_A = MarginalDensity.from_mass(plan_A.grid, _common_marginal(plan_A))
    diff = l1_l3_norm(mu_A.values - mu_B.values, plan_A.grid)
    rhs = coulomb_energy(plan_A, cost) + C_STAR * math.comb(plan_A.n_bodies, 2) * diff
    return coulomb_energy(P, cost), rhs


def recovery_plan(gamma: TransportPlan, mu_target: MarginalDensity,
                  epsilon: float, beta: float) -> TransportPlan:
    """Smooth, strongly positivize, then re-instate mu_target."""
    if not (epsilon > 0 and beta > 0):
        raise InvalidArgument("epsilon and beta must be positive")
    smoothed = smooth(gamma, gaussian_mollifier(epsilon, gamma.grid))
    return project(strong_positivize(smoothed, beta), mu_target)


def chain_bound(gamma: TransportPlan, mu: MarginalDensity, epsilon: float, beta: float,
                cost: CostMatrix) -> tuple[float, float]:
    """Both sides of the Coulomb chain bound for the recovery plan.

    lhs = V_ee[recovery_plan]; rhs = (1 - 2b/N) V_ee[gamma] + b (N-1) V_ee[mu x mu]
    + c_* C(N,2) ||mu_eps - mu||_{L1 cap L3}.
    """
    N = gamma.n_bodies
    lhs = coulomb_energy(recovery_plan(gamma, mu, epsilon, beta), cost)
    mu_eps = gaussian_mollifier(epsilon, mu.grid).apply(mu.mass) / mu.grid.weights
    pair = TransportPlan.product(mu, 2)
    rhs = ((1 - 2 * beta / N) * coulomb_energy(gamma, cost)
           + beta * (N - 1) * coulomb_energy(pair, cost)
           + C_STAR * math.comb(N, 2) * l1_l3_norm(mu_eps - mu.values, mu.grid))
    return lhs, rhs
