"""Marginal densities, N-body transport plans, wavefunctions and their energies.

Plans and densities store *densities* with respect to the trapezoid quadrature of
the grid; ``.mass`` gives the probability carried by each node (tuple).  All the
marginal identities are exact statements about masses.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .discretization import Grid1D, gradient_fd
from .errors import DegenerateInput, InvalidArgument

MAX_BODIES = 3
MAX_NODES = 64
MASS_TOL = 1e-12


def _check_mass(total: float, what: str):
    if abs(total - 1.0) > MASS_TOL * 10:
        raise InvalidArgument(f"{what} must have mass 1, got {total!r}")


@dataclass(frozen=True)
class MarginalDensity:
    """One-body probability density mu on a grid; ``rho = particle_count * mu``."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)
    particle_count: int = 1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise InvalidArgument(f"density needs shape ({self.grid.n},), got {v.shape}")
        if np.any(v < 0):
            raise InvalidArgument("density must be nonnegative")
        _check_mass(self.grid.integrate(v), "marginal density")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_mass(cls, grid: Grid1D, mass, particle_count: int = 1) -> "MarginalDensity":
        m = np.asarray(mass, dtype=float)
        return cls(grid, m / grid.weights, particle_count)

    @classmethod
    def uniform(cls, grid: Grid1D, particle_count: int = 1) -> "MarginalDensity":
        """Equal mass ``1/n`` on every node."""
        return cls.from_mass(grid, np.full(grid.n, 1.0 / grid.n), particle_count)

    @classmethod
    def from_function(cls, grid: Grid1D, f, particle_count: int = 1) -> "MarginalDensity":
        v = np.asarray(f(grid.nodes), dtype=float)
        return cls(grid, v / grid.integrate(v), particle_count)

    @property
    def mass(self) -> np.ndarray:
        return self.values * self.grid.weights

    @property
    def rho(self) -> np.ndarray:
        return self.particle_count * self.values


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative density on the N-fold tensor grid with total mass 1."""

    grid: Grid1D
    n_bodies: int
    values: np.ndarray = field(repr=False)
    symmetric: bool = False

    def __post_init__(self):
        if not 1 <= self.n_bodies <= MAX_BODIES:
            raise InvalidArgument(f"n_bodies must be in 1..{MAX_BODIES}, got {self.n_bodies}")
        if self.grid.n ** self.n_bodies > MAX_NODES**MAX_BODIES:
            raise InvalidArgument(f"dense plans limited to {MAX_NODES**MAX_BODIES} cells")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,) * self.n_bodies:
            raise InvalidArgument(f"plan shape {v.shape} does not match grid^{self.n_bodies}")
        if np.any(v < 0):
            raise InvalidArgument("plan must be nonnegative")
        _check_mass(float(np.sum(v * self.grid.tensor_weights(self.n_bodies))), "plan")
        if self.symmetric and not is_symmetric(v):
            raise InvalidArgument("plan flagged symmetric but is not permutation invariant")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_mass(cls, grid: Grid1D, mass, symmetric: bool = False) -> "TransportPlan":
        m = np.asarray(mass, dtype=float)
        v = m / grid.tensor_weights(m.ndim)
        if symmetric:
            # rounding in tensor products can break bitwise symmetry; repair it if tiny
            avg = _symmetric_average(v)
            if np.max(np.abs(avg - v)) <= 1e-13 * max(float(np.max(np.abs(v))), 1e-300):
                v = avg
        return cls(grid, m.ndim, v, symmetric)

    @classmethod
    def product(cls, mu: MarginalDensity, n_bodies: int) -> "TransportPlan":
        m = np.ones(())
        for _ in range(n_bodies):
            m = np.multiply.outer(m, mu.mass)
        return cls.from_mass(mu.grid, m, symmetric=True)

    @property
    def mass(self) -> np.ndarray:
        return self.values * self.grid.tensor_weights(self.n_bodies)

    def one_body(self, axis: int = 0) -> MarginalDensity:
        """Marginal on coordinate ``axis`` (any axis for symmetric plans)."""
        others = tuple(i for i in range(self.n_bodies) if i != axis)
        return MarginalDensity.from_mass(self.grid, self.mass.sum(axis=others))

    def marginal_masses(self) -> list[np.ndarray]:
        """Node masses of every one-body marginal, one per coordinate."""
        axes = range(self.n_bodies)
        return [self.mass.sum(axis=tuple(j for j in axes if j != i)) for i in axes]


@dataclass(frozen=True)
class Wavefunction:
    """Amplitude on grid^N, optionally with a two-valued spin index per particle.

    Spinful amplitudes have shape ``(n,)*N + (2,)*N``; spin axes follow position axes.
    The norm is not enforced here, because excess-density wavefunctions are subnormalised;
    use :meth:`normalized` where a unit vector is required.
    """

    grid: Grid1D
    n_bodies: int
    amplitudes: np.ndarray = field(repr=False)
    spinful: bool = False

    def __post_init__(self):
        a = np.asarray(self.amplitudes)
        shape = (self.grid.n,) * self.n_bodies + ((2,) * self.n_bodies if self.spinful else ())
        if a.shape != shape:
            raise InvalidArgument(f"amplitude shape {a.shape} does not match {shape}")
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def from_plan(cls, plan: TransportPlan) -> "Wavefunction":
        return cls(plan.grid, plan.n_bodies, np.sqrt(plan.values))

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.amplitudes) or bool(np.all(self.amplitudes.imag == 0))

    def position_density(self) -> np.ndarray:
        """N-body position density, summed over spins."""
        d = np.abs(self.amplitudes) ** 2
        if self.spinful:
            d = d.sum(axis=tuple(range(self.n_bodies, 2 * self.n_bodies)))
        return d

    def norm2(self) -> float:
        return float(np.sum(self.position_density() * self.grid.tensor_weights(self.n_bodies)))

    def normalized(self) -> "Wavefunction":
        nrm = self.norm2()
        if not nrm > 0:
            raise DegenerateInput("cannot normalise the zero wavefunction")
        return replace(self, amplitudes=self.amplitudes / math.sqrt(nrm))

    def to_plan(self, symmetric: bool = False) -> TransportPlan:
        d = self.position_density()
        if symmetric:
            d = _symmetric_average(d)
        return TransportPlan(self.grid, self.n_bodies, d, symmetric)

    def one_body_density(self) -> np.ndarray:
        """rho(x) = N * int |psi|^2 over the other coordinates (density on the grid)."""
        d = self.position_density()
        W = self.grid.weights
        for _ in range(self.n_bodies - 1):
            d = d @ W
        return self.n_bodies * d


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise Coulomb cost ``1/|x-y|`` with a finite cap (or +inf) on the diagonal."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)
    strict: bool = False

    @property
    def cap(self) -> float:
        return float(self.values[0, 0])


def coulomb_cost(grid: Grid1D, cap: float | None = None, strict: bool = False) -> CostMatrix:
    """Coulomb cost matrix; diagonal is ``cap`` (default ``10/h``) or ``+inf`` if ``strict``."""
    x = grid.nodes
    d = np.abs(x[:, None] - x[None, :])
    c = np.empty_like(d)
    off = ~np.eye(grid.n, dtype=bool)
    c[off] = 1.0 / d[off]
    c[~off] = np.inf if strict else (10.0 / grid.h if cap is None else float(cap))
    return CostMatrix(grid, c, strict)


def pair_cost_tensor(cost: CostMatrix, n_bodies: int) -> np.ndarray:
    """sum_{i<j} c(x_i, x_j) on the N-fold grid."""
    n = cost.grid.n
    total = np.zeros((n,) * n_bodies)
    for i, j in itertools.combinations(range(n_bodies), 2):
        shape = [1] * n_bodies
        shape[i], shape[j] = n, n
        total = total + cost.values.reshape(shape)
    return total


def marginal_k(plan: TransportPlan, k: int) -> TransportPlan:
    """k-body marginal: integrate out the last N-k coordinates."""
    if not 1 <= k <= plan.n_bodies - 1:
        raise InvalidArgument(f"k must lie in 1..{plan.n_bodies - 1}, got {k}")
    m = plan.mass.sum(axis=tuple(range(k, plan.n_bodies)))
    return TransportPlan.from_mass(plan.grid, m, symmetric=plan.symmetric)


def coulomb_energy(plan: TransportPlan, cost: CostMatrix) -> float:
    """Expected pair interaction; +inf if mass sits on a strictly excluded diagonal."""
    c = pair_cost_tensor(cost, plan.n_bodies)
    m = plan.mass
    hit = m > 0
    if np.any(np.isinf(c[hit])):
        return math.inf
    return float(np.sum(c[hit] * m[hit]))


def kinetic_energy(psi: Wavefunction) -> float:
    """sum_i int |d psi / d x_i|^2 with centered differences and trapezoid weights."""
    W = psi.grid.tensor_weights(psi.n_bodies)
    if psi.spinful:
        W = W.reshape(W.shape + (1,) * psi.n_bodies)
    total = 0.0
    for i in range(psi.n_bodies):
        g = gradient_fd(psi.amplitudes, psi.grid, axis=i)
        total += float(np.sum(W * np.abs(g) ** 2))
    return total


def hoffmann_ostenhof_check(psi: Wavefunction) -> tuple[float, float]:
    """Return ``(int |grad sqrt(mu_1)|^2, int |d psi/d x_1|^2)``; the first never exceeds the second."""
    g = psi.grid
    d = psi.position_density()
    for _ in range(psi.n_bodies - 1):
        d = d @ g.weights
    lhs = g.integrate(gradient_fd(np.sqrt(d), g) ** 2)
    W = g.tensor_weights(psi.n_bodies)
    if psi.spinful:
        W = W.reshape(W.shape + (1,) * psi.n_bodies)
    rhs = float(np.sum(W * np.abs(gradient_fd(psi.amplitudes, g, axis=0)) ** 2))
    return float(lhs), rhs


def l1_l3_norm(h, grid: Grid1D | None = None) -> float:
    """max(||h||_1, ||h||_3) under trapezoid quadrature."""
    if isinstance(h, MarginalDensity):
        grid, h = h.grid, h.values
    h = np.abs(np.asarray(h, dtype=float))
    return max(grid.integrate(h), grid.integrate(h**3) ** (1 / 3))


def is_symmetric(values: np.ndarray, sign: bool = False, spin_axes: bool = False) -> bool:
    """Exact check of (anti)symmetry under all coordinate permutations."""
    N = values.ndim // 2 if spin_axes else values.ndim
    for perm in itertools.permutations(range(N)):
        s = _perm_sign(perm) if sign else 1
        if not np.array_equal(_permute(values, perm, spin_axes), s * values):
            return False
    return True


def symmetrize(obj, antisymmetric: bool = False):
    """Average over all N! coordinate permutations (signed when ``antisymmetric``).

    Plans come back renormalised and flagged symmetric; wavefunctions are renormalised.
    """
    if isinstance(obj, TransportPlan):
        if antisymmetric:
            raise InvalidArgument("plans cannot be antisymmetrised")
        return TransportPlan(obj.grid, obj.n_bodies, _symmetric_average(obj.values), symmetric=True)
    if isinstance(obj, Wavefunction):
        a = _symmetric_average(obj.amplitudes, signed=antisymmetric, spin_axes=obj.spinful)
        out = replace(obj, amplitudes=a)
        if not out.norm2() > 1e-28:
            raise DegenerateInput("(anti)symmetrisation produced the zero function")
        return out.normalized()
    raise InvalidArgument(f"cannot symmetrise {type(obj).__name__}")


def _perm_sign(perm) -> int:
    sign, seen = 1, set()
    for start in range(len(perm)):
        if start in seen:
            continue
        j, length = start, 0
        while j not in seen:
            seen.add(j)
            j = perm[j]
            length += 1
        sign *= (-1) ** (length - 1)
    return sign


def _permute(a: np.ndarray, perm, spin_axes: bool = False) -> np.ndarray:
    N = len(perm)
    axes = list(perm) + ([N + p for p in perm] if spin_axes else [])
    return np.transpose(a, axes)


def _symmetric_average(a: np.ndarray, signed: bool = False, spin_axes: bool = False) -> np.ndarray:
    N = a.ndim // 2 if spin_axes else a.ndim
    perms = list(itertools.permutations(range(N)))
    terms = np.stack([_perm_sign(p) * _permute(a, p, spin_axes) if signed else _permute(a, p, spin_axes)
                      for p in perms])
    if not signed and not np.iscomplexobj(terms):
        # sorting makes the summation order identical across each orbit: bitwise symmetry
        terms = np.sort(terms, axis=0)
        return terms.sum(axis=0) / len(perms)
    return _canonicalize(terms.sum(axis=0) / len(perms), signed, spin_axes)


def _canonicalize(a: np.ndarray, signed: bool, spin_axes: bool) -> np.ndarray:
    """Copy each orbit's representative (particles sorted by (x, spin)) to the whole orbit.

    With ``signed`` the copy carries the parity of the sorting permutation, and entries
    where two particles share a coordinate (and spin) are set to zero, so the result is
    exactly (anti)symmetric in floating point.
    """
    N = a.ndim // 2 if spin_axes else a.ndim
    idx = np.indices(a.shape).reshape(a.ndim, -1)
    keys = idx[:N] * 2 + idx[N:] if spin_axes else idx.copy()
    order = np.argsort(keys, axis=0, kind="stable")
    skeys = np.take_along_axis(keys, order, axis=0)
    rep = np.vstack([skeys // 2, skeys % 2]) if spin_axes else skeys
    out = a[tuple(rep)]
    if signed:
        inversions = sum((keys[i] > keys[j]).astype(int) for i in range(N) for j in range(i + 1, N))
        out = np.where(inversions % 2, -out, out)
        if N > 1:
            out = np.where(np.any(np.diff(skeys, axis=0) == 0, axis=0), 0, out)
    return out.reshape(a.shape)


def write_csv(obj, path) -> None:
    """Flat CSV: a header row ``n=..,N=..,h=..,a=..`` then one value per line, row-major."""
    if isinstance(obj, MarginalDensity):
        N, vals = obj.particle_count, obj.values
    else:
        N, vals = obj.n_bodies, obj.values
    g = obj.grid
    lines = [f"n={g.n},N={N},h={g.h!r},a={g.a!r}"] + [repr(float(v)) for v in vals.ravel()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path, kind: str = "plan"):
    text = Path(path).read_text().split()
    meta = dict(item.split("=") for item in text[0].split(","))
    n, N, h, a = int(meta["n"]), int(meta["N"]), float(meta["h"]), float(meta.get("a", 0.0))
    grid = Grid1D(a, a + h * (n - 1), n)
    vals = np.array([float(t) for t in text[1:]])
    if kind == "density":
        return MarginalDensity(grid, vals, N)
    v = vals.reshape((n,) * N)
    return TransportPlan(grid, N, v, symmetric=is_symmetric(v))
