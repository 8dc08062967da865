"""Bosonic functional alpha*T + V_ee under a marginal constraint, and the alpha -> 0 sweep.

The sweep brackets the constrained-search functional from above by a shared family of
trial wavefunctions and compares it with the optimal-transport value from
:mod:`scelab.sce`.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .discretization import Grid1D, gradient_fd, make_grid
from .errors import InvalidArgument
from .plans import (
    CostMatrix,
    MarginalDensity,
    TransportPlan,
    Wavefunction,
    _symmetric_average,
    coulomb_cost,
    coulomb_energy,
    kinetic_energy,
    pair_cost_tensor,
)
from .reinstate import project, recovery_plan
from .sce import MmotProblem, solve_mmot

MOMENT_NAMES = ("one", "mean", "mean_sq", "exp_neg_mean", "min_gap")
MOMENT_RTOL = 0.05


@dataclass(frozen=True)
class OptimizerSettings:
    max_iter: int = 2000
    step: float = 1e-2
    tol: float = 1e-13
    sinkhorn_sweeps: int = 50


@dataclass(frozen=True)
class SweepConfig:
    """Inputs of :func:`semiclassical_sweep`.

    ``epsilons`` and ``betas`` are per-alpha schedules; a single value is broadcast.
    ``mu_kind`` is ``"uniform"`` (equal node masses) or ``"gaussian"``.
    """

    alphas: tuple[float, ...] = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)
    epsilons: tuple[float, ...] = (0.3, 0.1, 0.05, 0.02, 0.01)
    betas: tuple[float, ...] = (0.2, 0.1, 0.05, 0.02, 0.01)
    n: int = 8
    a: float = 0.0
    b: float = 1.0
    n_bodies: int = 2
    mu_kind: str = "uniform"
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)

    def __post_init__(self):
        al = np.asarray(self.alphas, dtype=float)
        if al.size == 0 or np.any(al <= 0) or np.any(np.diff(al) >= 0):
            raise InvalidArgument("alphas must be positive and strictly decreasing")
        for name in ("epsilons", "betas"):
            s = getattr(self, name)
            if len(s) not in (1, al.size):
                raise InvalidArgument(f"{name} must have length 1 or {al.size}")
            if any(v <= 0 for v in s):
                raise InvalidArgument(f"{name} must be positive")
        if any(not 0 < v < 1 for v in self.betas):
            raise InvalidArgument("betas must lie in (0, 1)")
        if self.mu_kind not in ("uniform", "gaussian"):
            raise InvalidArgument(f"unknown mu_kind {self.mu_kind!r}")

    @property
    def grid(self) -> Grid1D:
        return make_grid(self.a, self.b, self.n)

    def schedule(self, name: str) -> list[float]:
        s = list(getattr(self, name))
        return s * len(self.alphas) if len(s) == 1 else s

    def marginal(self) -> MarginalDensity:
        g = self.grid
        if self.mu_kind == "uniform":
            return MarginalDensity.uniform(g)
        mid, width = (g.a + g.b) / 2, (g.b - g.a) / 4
        return MarginalDensity.from_function(g, lambda x: np.exp(-(((x - mid) / width) ** 2)))


@dataclass
class SweepRecord:
    alpha: float
    V_sce: float
    F_alpha_upper: float
    gap: float
    testfn_moments: list[float]
    source: str = ""


def bosonic_energy(psi: Wavefunction, alpha: float, cost: CostMatrix) -> float:
    """alpha * T[psi] + V_ee[|psi|^2] for a normalised real wavefunction."""
    return alpha * kinetic_energy(psi) + coulomb_energy(psi.to_plan(), cost)


def _diff_matrix(grid: Grid1D) -> np.ndarray:
    return gradient_fd(np.eye(grid.n), grid, axis=0)


def _energy_parts(psi: np.ndarray, grid: Grid1D, C: np.ndarray, W: np.ndarray):
    T = sum(float(np.sum(W * gradient_fd(psi, grid, axis=i) ** 2)) for i in range(psi.ndim))
    return T, float(np.sum(C * W * psi**2))


def _mass_gradient(mass, alpha, D, C, W):
    """Derivative of alpha*T[sqrt(gamma)] + V_ee[gamma] with respect to node masses."""
    psi = np.sqrt(mass / W)
    acc = np.zeros_like(mass)
    for i in range(mass.ndim):
        d = np.moveaxis(np.tensordot(D, psi, axes=([1], [i])), 0, i)
        acc += np.moveaxis(np.tensordot(D.T, W * d, axes=([1], [i])), 0, i)
    return C + alpha * acc / np.maximum(psi * W, 1e-300)


def _perm_mean(mass: np.ndarray) -> np.ndarray:
    perms = list(itertools.permutations(range(mass.ndim)))
    return sum(np.transpose(mass, p) for p in perms) / len(perms)


def _scale_to_marginal(mass: np.ndarray, target: np.ndarray, sweeps: int) -> np.ndarray:
    """Symmetric iterative proportional fitting towards the one-body marginal ``target``."""
    N = mass.ndim
    pos = target > 0
    for _ in range(sweeps):
        r = mass.sum(axis=tuple(range(1, N)))
        if np.max(np.abs(r - target)) < 1e-12:
            break
        s = np.zeros_like(r)
        ok = pos & (r > 0)
        s[ok] = (target[ok] / r[ok]) ** (1.0 / N)
        for i in range(N):
            shape = [1] * N
            shape[i] = -1
            mass = mass * s.reshape(shape)
        mass = _perm_mean(mass)
    return mass


def _feasible(mass: np.ndarray, grid: Grid1D, mu: MarginalDensity,
              sweeps: int) -> TransportPlan | None:
    mass = _scale_to_marginal(_perm_mean(mass), mu.mass, sweeps)
    tot = mass.sum()
    if not (np.isfinite(tot) and tot > 0):
        return None
    plan = TransportPlan.from_mass(grid, _symmetric_average(mass / tot), symmetric=True)
    try:
        return project(plan, mu)
    except ZeroDivisionError:
        return None


@dataclass(frozen=True)
class BosonicResult:
    psi: Wavefunction
    value: float
    iterations: int
    converged: bool


def minimize_bosonic(mu: MarginalDensity, alpha: float, n_bodies: int = 2,
                     settings: OptimizerSettings | None = None,
                     cost: CostMatrix | None = None,
                     init: TransportPlan | None = None) -> BosonicResult:
    """Minimise alpha*T[psi] + V_ee[|psi|^2] over psi >= 0 with one-body marginal mu.

    The objective is convex in gamma = |psi|^2, so the descent runs on gamma in the
    multiplicative (entropic) geometry. After each step the plan is scaled towards mu,
    symmetrised, and mu is re-instated exactly with :func:`scelab.reinstate.project`;
    psi is the square root of the result. Steps adapt by backtracking. The best feasible
    iterate is returned, with ``converged=False`` if ``max_iter`` ran out.
    """
    if not alpha > 0:
        raise InvalidArgument(f"alpha must be positive, got {alpha}")
    settings = settings or OptimizerSettings()
    grid = mu.grid
    cost = cost or coulomb_cost(grid)
    C = pair_cost_tensor(cost, n_bodies)
    if np.any(~np.isfinite(C)):
        raise InvalidArgument("minimize_bosonic needs a finite (capped) cost")
    W = grid.tensor_weights(n_bodies)
    D = _diff_matrix(grid)
    start = init if init is not None else TransportPlan.product(mu, n_bodies)
    plan = _feasible(start.mass, grid, mu, 0)
    if plan is None:
        raise InvalidArgument("initial plan is incompatible with mu")

    def energy(p: TransportPlan) -> float:
        T, V = _energy_parts(np.sqrt(p.values), grid, C, W)
        return alpha * T + V

    E = energy(plan)
    eta = settings.step
    converged = False
    it = 0
    for it in range(1, settings.max_iter + 1):
        m = plan.mass
        G = _mass_gradient(m, alpha, D, C, W)
        support = m > 0
        while True:
            step = np.where(support, np.exp(np.clip(-eta * G, -50.0, 50.0)), 0.0)
            trial = _feasible(m * step, grid, mu, settings.sinkhorn_sweeps)
            E_trial = energy(trial) if trial is not None else math.inf
            if E_trial < E or eta < 1e-14:
                break
            eta /= 2
        if not E_trial < E:
            converged = True
            break
        gain = E - E_trial
        plan, E = trial, E_trial
        eta *= 1.5
        if gain <= settings.tol * max(1.0, abs(E)):
            converged = True
            break
    psi = Wavefunction(grid, n_bodies, np.sqrt(plan.values))
    return BosonicResult(psi, E, it, converged)


def recovery_upper_bound(gamma_opt: TransportPlan, mu: MarginalDensity, alpha: float,
                         epsilon: float, beta: float, cost: CostMatrix | None = None) -> float:
    """bosonic_energy of sqrt(recovery_plan(gamma_opt)); an upper bound on F_alpha."""
    cost = cost or coulomb_cost(mu.grid)
    plan = recovery_plan(gamma_opt, mu, epsilon, beta)
    return bosonic_energy(Wavefunction.from_plan(plan), alpha, cost)


def moment_panel(plan: TransportPlan) -> np.ndarray:
    """Integrals of {1, xbar, xbar^2, exp(-xbar), min(|x1-x2|, 1)} against the plan."""
    x = plan.grid.nodes
    N = plan.n_bodies
    grids = np.meshgrid(*([x] * N), indexing="ij")
    xbar = sum(grids) / N
    fns = [np.ones_like(xbar), xbar, xbar**2, np.exp(-xbar),
           np.minimum(np.abs(grids[0] - grids[1]), 1.0)]
    m = plan.mass
    return np.array([float(np.sum(f * m)) for f in fns])


def moments_match(a, b, rtol: float = MOMENT_RTOL) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return bool(np.all(np.abs(a - b) <= rtol * np.maximum(np.abs(b), 1e-300)))


@dataclass
class SweepResult:
    records: list[SweepRecord]
    lp_moments: list[float]
    minimizer_match: bool
    V_sce: float

    @property
    def status(self) -> str:
        return "minimizer match" if self.minimizer_match else "minimizer mismatch"


def semiclassical_sweep(config: SweepConfig) -> SweepResult:
    """F_alpha upper bounds over the alpha schedule, bracketed below by V_sce.

    All trial wavefunctions generated at any alpha form one shared family that is
    evaluated at every alpha, so the recorded upper bound is nondecreasing in alpha.
    """
    mu = config.marginal()
    N = config.n_bodies
    grid = mu.grid
    lp = solve_mmot(MmotProblem.coulomb(mu, N, strict=True))
    if lp.status != "optimal":
        raise InvalidArgument("marginal is infeasible for the strict Coulomb problem")
    gamma = lp.symmetrized()
    cost = coulomb_cost(grid)
    W = grid.tensor_weights(N)
    C = pair_cost_tensor(cost, N)

    family: list[tuple[str, np.ndarray]] = []
    warm = None
    for alpha, eps, beta in zip(config.alphas, config.schedule("epsilons"), config.schedule("betas")):
        rec = recovery_plan(gamma, mu, eps, beta)
        family.append((f"recovery(eps={eps:g},beta={beta:g})", np.sqrt(rec.values)))
        for tag, init in (("continuation", warm), ("from-recovery", rec)):
            res = minimize_bosonic(mu, alpha, N, config.optimizer, cost, init)
            family.append((f"gradient[{tag}](alpha={alpha:g})", res.psi.amplitudes))
            if tag == "continuation":
                warm = res.psi.to_plan()

    parts = [_energy_parts(psi, grid, C, W) for _, psi in family]
    records = []
    for alpha in config.alphas:
        vals = [alpha * T + V for T, V in parts]
        k = int(np.argmin(vals))
        plan = Wavefunction(grid, N, family[k][1]).to_plan()
        records.append(SweepRecord(alpha, lp.value, vals[k], vals[k] - lp.value,
                                   moment_panel(plan).tolist(), family[k][0]))
    lp_m = moment_panel(gamma)
    return SweepResult(records, lp_m.tolist(), moments_match(records[-1].testfn_moments, lp_m), lp.value)


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "V_sce", "F_alpha_upper", "gap"] + [f"moment_{i + 1}" for i in range(5)])
        for r in result.records:
            w.writerow([repr(r.alpha), repr(r.V_sce), repr(r.F_alpha_upper), repr(r.gap)]
                       + [repr(m) for m in r.testfn_moments])


def sweep_summary(config: SweepConfig, result: SweepResult) -> dict:
    gaps = [r.gap for r in result.records]
    fs = [r.F_alpha_upper for r in result.records]
    report = {
        "gaps_nonnegative": all(g >= -1e-9 for g in gaps),
        "monotone_in_alpha": all(a >= b - 1e-12 for a, b in zip(fs, fs[1:])),
        "gap_shrinks": gaps[-1] < gaps[0],
        "final_relative_gap": gaps[-1] / result.V_sce,
        "moments": result.status,
    }
    return {
        "config": asdict(config),
        "results": [asdict(r) for r in result.records] + [{"lp_moments": result.lp_moments}],
        "invariant_report": report,
    }


def write_sweep_json(config: SweepConfig, result: SweepResult, path) -> None:
    Path(path).write_text(json.dumps(sweep_summary(config, result), indent=2))
