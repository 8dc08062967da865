"""A one-dimensional functional with a gap between Sobolev classes.

``J[u] = int (x - u^3)^2 u'^6`` has infimum 0 over paths with integrable slope
(attained by ``x^(1/3)``), yet ``J + eps^2 T`` with ``T = int u'^2`` stays above an
explicit positive constant for every ``eps > 0``. Everything is discretised with the
midpoint rule: slopes ``s = (u_{i+1} - u_i)/h`` and values ``u_m`` at cell midpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded

from .discretization import Grid1D, make_grid
from .errors import DegenerateInput, InvalidArgument

GAP_CONSTANT = 0.5 * (7 / 8) ** 2 * (3 / 10) ** 5  # = 11907 / 12800000
BC_TOL = 1e-12


@dataclass(frozen=True)
class PathFunction:
    """Nodal values of a path on [0, 1] with u(0) = 0 and u(1) = 1."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = self.grid
        if g.a != 0.0 or g.b != 1.0:
            raise InvalidArgument("paths live on the unit interval")
        u = np.asarray(self.values, dtype=float)
        if u.shape != (g.n,):
            raise InvalidArgument(f"expected {g.n} values, got shape {u.shape}")
        if abs(u[0]) > BC_TOL or abs(u[-1] - 1) > BC_TOL:
            raise InvalidArgument("boundary conditions u(0)=0, u(1)=1 violated")
        object.__setattr__(self, "values", u)

    @classmethod
    def from_function(cls, f, n: int) -> "PathFunction":
        g = make_grid(0.0, 1.0, n)
        return cls(g, np.asarray(f(g.nodes), dtype=float))

    @property
    def midpoints(self) -> np.ndarray:
        x = self.grid.nodes
        return 0.5 * (x[1:] + x[:-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / self.grid.h

    @property
    def mid_values(self) -> np.ndarray:
        u = self.values
        return 0.5 * (u[1:] + u[:-1])


def mania_J(u: PathFunction) -> float:
    xm, um, s = u.midpoints, u.mid_values, u.slopes
    return float(u.grid.h * np.sum((xm - um**3) ** 2 * s**6))


def kinetic_T(u: PathFunction) -> float:
    return float(u.grid.h * np.sum(u.slopes**2))


def perturbed_value(u: PathFunction, epsilon: float) -> float:
    return mania_J(u) + epsilon**2 * kinetic_T(u)


def _residuals(u: np.ndarray, x: np.ndarray, h: float, eps: float):
    """Residuals r, q with J + eps^2 T = |r|^2 + |q|^2, and their two nonzero Jacobian columns."""
    xm = 0.5 * (x[1:] + x[:-1])
    s = np.diff(u) / h
    um = 0.5 * (u[1:] + u[:-1])
    sq = math.sqrt(h)
    r = sq * (xm - um**3) * s**3
    dr_ds = 3 * sq * (xm - um**3) * s**2
    dr_dum = -3 * sq * um**2 * s**3
    left, right = -dr_ds / h + 0.5 * dr_dum, dr_ds / h + 0.5 * dr_dum
    q = eps * sq * s
    return r, left, right, q, -eps * sq / h, eps * sq / h


def _levenberg_marquardt(u: np.ndarray, x: np.ndarray, eps: float, iterations: int,
                         tol: float) -> tuple[np.ndarray, float, int]:
    """Damped Gauss-Newton on the interior nodes; J^T J is tridiagonal."""
    h = x[1] - x[0]
    n = len(u)

    def value(v):
        r, _, _, q, _, _ = _residuals(v, x, h, eps)
        return float(r @ r + q @ q)

    lam, E = 1e-3, value(u)
    it = 0
    for it in range(1, iterations + 1):
        r, a, b, q, qa, qb = _residuals(u, x, h, eps)
        diag = np.zeros(n)
        diag[1:] += b**2 + qb**2
        diag[:-1] += a**2 + qa**2
        off = (a * b + qa * qb)[1:-1]
        grad = np.zeros(n)
        grad[1:] += b * r + qb * q
        grad[:-1] += a * r + qa * q
        diag, grad = diag[1:-1], grad[1:-1]
        while True:
            ab = np.zeros((2, n - 2))
            ab[1] = diag * (1 + lam) + 1e-300
            ab[0, 1:] = off
            trial = u.copy()
            trial[1:-1] += solveh_banded(ab, -grad)
            E_trial = value(trial)
            if E_trial < E:
                gain = (E - E_trial) / E
                u, E = trial, E_trial
                lam = max(lam / 3, 1e-12)
                break
            lam *= 4
            if lam > 1e16:
                return u, E, it
        if gain < tol:
            break
    return u, E, it


DEFAULT_STARTS = {
    "linear": lambda x: x,
    "x^(3/5)": lambda x: x**0.6,
    "x^(1/2)": lambda x: np.sqrt(x),
}


@dataclass(frozen=True)
class PerturbedResult:
    u: PathFunction
    value: float
    start: str
    per_start: dict


def minimize_perturbed(epsilon: float, n: int = 2001, iterations: int = 5000,
                       extra_starts: dict | None = None, tol: float = 1e-14) -> PerturbedResult:
    """Multi-start minimisation of J + eps^2 T over discrete paths.

    Each start is refined by a banded Levenberg-Marquardt iteration on the residual form
    of the functional; the best local minimum is returned. ``epsilon = 0`` minimises J.
    """
    if epsilon < 0:
        raise InvalidArgument(f"epsilon must be nonnegative, got {epsilon}")
    if n < 3:
        raise InvalidArgument("need at least one interior node")
    x = make_grid(0.0, 1.0, n).nodes
    starts = dict(DEFAULT_STARTS)
    starts.update(extra_starts or {})
    results = {}
    for name, f in starts.items():
        u0 = np.asarray(f(x), dtype=float)
        u0[0], u0[-1] = 0.0, 1.0
        u, E, _ = _levenberg_marquardt(u0, x, epsilon, iterations, tol)
        results[name] = (u, E)
    best = min(results, key=lambda k: results[k][1])
    u = PathFunction(make_grid(0.0, 1.0, n), results[best][0])
    return PerturbedResult(u, perturbed_value(u, epsilon), best,
                           {k: v[1] for k, v in results.items()})


def csi_bound_check(u: PathFunction) -> float:
    """max_i u(x_i) - sqrt(x_i T[u]); nonpositive by the discrete Cauchy-Schwarz inequality."""
    return float(np.max(u.values - np.sqrt(u.grid.nodes * kinetic_T(u))))


@dataclass(frozen=True)
class GapCertificate:
    x_star: float
    G_value: float
    bound: float
    J_value: float

    def holds(self, tol: float = 5e-2) -> bool:
        return (self.J_value >= self.G_value * (1 - 1e-12)
                and self.G_value >= self.bound * (1 - tol)
                and self.bound >= GAP_CONSTANT * (1 - 1e-12))


def g_closed_form(x_star: float) -> float:
    """Minimum of (7/8)^2 int_0^x* x^2 u'^6 with u(0)=0, u(x*) = x*^(1/3)/2."""
    return (7 / 8) ** 2 * (3 / 10) ** 6 * (5 / 3) / x_star


def gap_certificate(u: PathFunction) -> GapCertificate:
    """The lower-bound chain J[u] >= G[u] >= G[u_0] evaluated on a discrete path.

    x_* is the first node where u reaches half of x^(1/3); G sums the midpoint integrand
    (7/8)^2 x^2 u'^6 over the cells left of x_*. Since x_* < 1, the bound exceeds the
    gap constant.
    """
    x = u.grid.nodes
    hit = np.flatnonzero((u.values >= 0.5 * np.cbrt(x)) & (x > 0))
    if hit.size == 0:
        raise DegenerateInput("path never reaches x^(1/3)/2")
    k = int(hit[0])
    x_star = float(x[k])
    xm, s = u.midpoints[:k], u.slopes[:k]
    G = (7 / 8) ** 2 * u.grid.h * float(np.sum(xm**2 * s**6))
    return GapCertificate(x_star, G, g_closed_form(x_star), mania_J(u))


def constraint_components(u: PathFunction) -> np.ndarray:
    """psi_1..psi_7 at the cell midpoints, built from u by the quadratic constraints."""
    x, s = u.midpoints, u.slopes
    p1 = u.mid_values
    p2 = p1 * p1
    p3 = p1 * p2
    p4 = s * s
    p5 = s * p4
    p6 = p5 * p5
    p7 = (x - p3) ** 2
    return np.stack([p1, p2, p3, p4, p5, p6, p7])


@dataclass(frozen=True)
class ConstraintReport:
    I_value: float
    J_value: float
    max_residual: float

    @property
    def consistent(self) -> bool:
        return abs(self.I_value - self.J_value) <= 1e-10 * max(1.0, abs(self.J_value))


def constraint_check(u: PathFunction) -> ConstraintReport:
    """Evaluate I[psi] = int psi_6 psi_7 and the residuals of the six quadratic constraints."""
    p = constraint_components(u)
    x, s = u.midpoints, u.slopes
    res = [p[1] - p[0] ** 2, p[2] - p[0] * p[1], p[3] - s**2,
           p[4] - s * p[3], p[5] - p[4] ** 2, p[6] - (x - p[2]) ** 2]
    I = float(u.grid.h * np.sum(p[5] * p[6]))
    return ConstraintReport(I, mania_J(u), float(max(np.max(np.abs(r)) for r in res)))
