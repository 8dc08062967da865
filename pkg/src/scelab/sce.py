"""Discrete multi-marginal optimal transport with Coulomb cost.

``solve_mmot`` uses the HiGHS LP solver. ``brute_force_mmot`` is an independent
oracle used in tests: exhaustive enumeration of basic feasible solutions when the
number of candidate bases is small, otherwise an exact rational simplex method.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import InvalidArgument
from .plans import (
    MAX_BODIES,
    CostMatrix,
    MarginalDensity,
    TransportPlan,
    coulomb_cost,
    coulomb_energy,
    pair_cost_tensor,
    symmetrize,
)

LP_SIZE_LIMIT = 10**6
BRUTE_SIZE_LIMIT = 4096
MAX_BASES = 200_000


@dataclass(frozen=True)
class MmotProblem:
    mu: MarginalDensity
    n_bodies: int
    cost: CostMatrix

    def __post_init__(self):
        if not 2 <= self.n_bodies <= MAX_BODIES:
            raise InvalidArgument(f"need 2..{MAX_BODIES} marginals, got {self.n_bodies}")
        if self.cost.grid != self.mu.grid:
            raise InvalidArgument("cost and marginal live on different grids")

    @classmethod
    def coulomb(cls, mu: MarginalDensity, n_bodies: int, strict: bool = True) -> "MmotProblem":
        return cls(mu, n_bodies, coulomb_cost(mu.grid, strict=strict))


@dataclass(frozen=True)
class MmotSolution:
    plan: TransportPlan | None = field(repr=False)
    value: float
    status: str

    def symmetrized(self) -> TransportPlan:
        """Canonical plan: the tie-broken vertex averaged over coordinate permutations."""
        return symmetrize(self.plan)

    def to_json(self) -> str:
        g = self.plan.grid if self.plan is not None else None
        payload = {
            "value": self.value,
            "n": g.n if g else None,
            "N": self.plan.n_bodies if self.plan is not None else None,
            "plan": self.plan.mass.ravel().tolist() if self.plan is not None else None,
            "status": self.status,
        }
        return json.dumps(payload)


def _lp_data(problem: MmotProblem):
    n, N = problem.mu.grid.n, problem.n_bodies
    c_full = pair_cost_tensor(problem.cost, N).ravel()
    cols = np.flatnonzero(np.isfinite(c_full))
    idx = np.array(np.unravel_index(cols, (n,) * N))  # N x nvars
    rows = (np.arange(N)[:, None] * n + idx).ravel()
    A = sparse.csr_matrix((np.ones(rows.size), (rows, np.tile(np.arange(cols.size), N))),
                          shape=(N * n, cols.size))
    b = np.tile(problem.mu.mass, N)
    return c_full[cols], A, b, cols


def _to_solution(problem: MmotProblem, cols, x) -> MmotSolution:
    n, N = problem.mu.grid.n, problem.n_bodies
    mass = np.zeros(n**N)
    mass[cols] = np.maximum(x, 0.0)
    mass = mass.reshape((n,) * N) / mass.sum()
    plan = TransportPlan.from_mass(problem.mu.grid, mass)
    return MmotSolution(plan, coulomb_energy(plan, problem.cost), "optimal")


def solve_mmot(problem: MmotProblem) -> MmotSolution:
    """Minimise sum c*gamma over gamma >= 0 with all N one-body marginals equal to mu.

    A second LP over the optimal face minimises a fixed index-ordered objective, so
    repeated solves return the same vertex.
    """
    n, N = problem.mu.grid.n, problem.n_bodies
    if n**N > LP_SIZE_LIMIT:
        raise InvalidArgument(f"n^N = {n**N} exceeds the LP size limit {LP_SIZE_LIMIT}")
    c, A, b, cols = _lp_data(problem)
    opts = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
    if cols.size == 0:
        return MmotSolution(None, math.inf, "infeasible")
    res = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs", options=opts)
    if res.status == 2:
        return MmotSolution(None, math.inf, "infeasible")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    best = res.fun
    tie = np.arange(cols.size, dtype=float) / cols.size
    slack = 1e-11 * max(1.0, abs(best))
    res2 = linprog(tie, A_ub=c[None, :], b_ub=[best + slack], A_eq=A, b_eq=b,
                   bounds=(0, None), method="highs", options=opts)
    x = res2.x if res2.status == 0 else res.x
    return _to_solution(problem, cols, x)


def brute_force_mmot(problem: MmotProblem) -> MmotSolution:
    """Exact optimum by vertex enumeration (or exact rational simplex for larger instances)."""
    n, N = problem.mu.grid.n, problem.n_bodies
    if n**N > BRUTE_SIZE_LIMIT:
        raise InvalidArgument(f"n^N = {n**N} exceeds the brute-force guard {BRUTE_SIZE_LIMIT}")
    c, A, b, cols = _lp_data(problem)
    if cols.size == 0:
        return MmotSolution(None, math.inf, "infeasible")
    A_full = A.toarray()
    keep = _independent_rows(A_full)
    A, b_red = A_full[keep], b[keep]
    r = A.shape[0]
    if math.comb(cols.size, r) <= MAX_BASES:
        x = _enumerate_vertices(c, A, b_red)
    else:
        x = _rational_simplex(c, A, b_red)
    # the dropped rows are implied by the kept ones only when the system is consistent
    if x is None or np.max(np.abs(A_full @ x - b)) > 1e-9:
        return MmotSolution(None, math.inf, "infeasible")
    return _to_solution(problem, cols, x)


def _independent_rows(A: np.ndarray) -> list[int]:
    keep: list[int] = []
    for i in range(A.shape[0]):
        trial = keep + [i]
        if np.linalg.matrix_rank(A[trial]) == len(trial):
            keep = trial
    return keep


def _enumerate_vertices(c, A, b):
    r, nv = A.shape
    best, best_x = math.inf, None
    bases = np.array(list(itertools.combinations(range(nv), r)))
    for chunk in np.array_split(bases, max(1, len(bases) // 20000)):
        B = np.transpose(A[:, chunk], (1, 0, 2))  # (k, r, r)
        det = np.linalg.det(B)
        ok = np.abs(det) > 1e-9
        if not np.any(ok):
            continue
        xb = np.linalg.solve(B[ok], np.broadcast_to(b, (ok.sum(), r))[..., None])[..., 0]
        feas = np.all(xb >= -1e-12, axis=1)
        if not np.any(feas):
            continue
        vals = np.einsum("kr,kr->k", c[chunk[ok][feas]], xb[feas])
        k = int(np.argmin(vals))
        if vals[k] < best - 1e-15:
            best = vals[k]
            best_x = np.zeros(nv)
            best_x[chunk[ok][feas][k]] = np.maximum(xb[feas][k], 0.0)
    return best_x


def _rational_simplex(c, A, b):
    """Two-phase dense tableau simplex in exact rationals.

    Dantzig pricing, switching to Bland's rule after a run of degenerate pivots so the
    method cannot cycle.
    """
    r, nv = A.shape
    F = Fraction
    to_q = np.vectorize(lambda v: F(float(v)), otypes=[object])
    T = np.empty((r, nv + r + 1), dtype=object)
    T[:, :nv] = to_q(A)
    T[:, nv:nv + r] = to_q(np.eye(r))
    T[:, -1] = to_q(b)
    basis = list(range(nv, nv + r))

    def pivot(row, col):
        T[row] = T[row] / T[row, col]
        for i in range(r):
            if i != row and T[i, col] != 0:
                T[i] = T[i] - T[i, col] * T[row]
        basis[row] = col

    def run(cost, allowed):
        degenerate = 0
        while True:
            cb = cost[basis]
            reduced = cost[allowed] - cb @ T[:, allowed]
            neg = np.flatnonzero(reduced < 0)
            if neg.size == 0:
                return
            if degenerate > 50:
                enter = allowed[neg[0]]
            else:
                enter = allowed[neg[int(np.argmin(reduced[neg]))]]
            ratios = [(T[i, -1] / T[i, enter], basis[i], i) for i in range(r) if T[i, enter] > 0]
            if not ratios:
                raise RuntimeError("unbounded LP")
            step, _, row = min(ratios)
            degenerate = degenerate + 1 if step == 0 else 0
            pivot(row, enter)

    phase1 = np.array([F(0)] * nv + [F(1)] * r, dtype=object)
    run(phase1, np.arange(nv + r))
    if sum(T[i, -1] for i in range(r) if basis[i] >= nv) > 0:
        return None
    for i in range(r):
        if basis[i] >= nv:
            nz = [j for j in range(nv) if T[i, j] != 0]
            if nz:
                pivot(i, nz[0])
    phase2 = np.concatenate([to_q(c), np.array([F(0)] * r, dtype=object)])
    run(phase2, np.arange(nv))
    x = np.zeros(nv)
    for i in range(r):
        if basis[i] < nv:
            x[basis[i]] = float(T[i, -1])
    return x


@dataclass(frozen=True)
class MongeReport:
    is_monge_like: bool
    maps: np.ndarray | None
    up_to_symmetrization: bool


def _monge_maps(plan: TransportPlan, threshold: float):
    n, N = plan.grid.n, plan.n_bodies
    m = plan.mass.reshape(n, -1)
    maps = np.full((N - 1, n), -1)
    for x1 in range(n):
        row = m[x1]
        tot = row.sum()
        if tot <= 0:
            continue
        k = int(np.argmax(row))
        if row[k] < threshold * tot:
            return None
        maps[:, x1] = np.unravel_index(k, (n,) * (N - 1))
    return maps


def monge_diagnostic(solution: MmotSolution, threshold: float = 0.99,
                     plan: TransportPlan | None = None) -> MongeReport:
    """Does each conditional plan given x_1 put >= threshold of its mass on one tuple?

    ``plan`` overrides the plan inspected (e.g. the symmetrized one); the
    ``up_to_symmetrization`` flag tests the solver's vertex, whose symmetrization is the
    canonical plan.
    """
    target = plan if plan is not None else solution.plan
    maps = _monge_maps(target, threshold)
    vertex = _monge_maps(solution.plan, threshold) is not None
    return MongeReport(maps is not None, maps, vertex)
