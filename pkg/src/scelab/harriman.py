"""Orthonormal orbitals with a prescribed density, built from the monotone rearrangement.

For a one-body probability density ``v`` on an interval, ``F(y) = int_a^y v`` pushes ``v``
to the uniform measure on [0, 1].  Composing an orthonormal basis of L^2[0, 1] with ``F``
and multiplying by ``sqrt(v)`` gives orthonormal functions whose squared moduli sum to
``N v``.  Orbitals are always evaluated through ``F``; the inverse map ``T`` is only
needed to pull functions back.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson

from .discretization import Grid1D, gradient_fd, romberg_weights
from .errors import InvalidArgument
from .plans import MarginalDensity

ORTHO_TOL = 1e-8
DENSITY_TOL = 1e-10


def orbital_weights(grid: Grid1D) -> np.ndarray:
    """Most accurate positive Romberg rule (at most three levels) the node count allows."""
    for levels in (3, 2):
        if (grid.n - 1) % 2 ** (levels - 1) == 0:
            return romberg_weights(grid, levels)
    return grid.weights


@dataclass(frozen=True)
class MonotoneMap:
    """Cumulative map ``F`` of a density and its left-continuous generalised inverse ``T``."""

    grid: Grid1D
    F: np.ndarray = field(repr=False)

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        if F.shape != (self.grid.n,):
            raise InvalidArgument("F must be sampled on the grid")
        if np.any(np.diff(F) < 0):
            raise InvalidArgument("F must be nondecreasing")
        if abs(F[0]) > 1e-14 or abs(F[-1] - 1) > 1e-14:
            raise InvalidArgument("F must run from 0 to 1")
        object.__setattr__(self, "F", F)

    def T(self, t) -> np.ndarray:
        """inf{y : F(y) >= t}, linear between nodes where F increases strictly."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        y = self.grid.nodes
        j = np.searchsorted(self.F, t, side="left")
        j = np.clip(j, 1, self.grid.n - 1)
        F0, F1 = self.F[j - 1], self.F[j]
        frac = np.where(F1 > F0, (t - F0) / np.where(F1 > F0, F1 - F0, 1.0), 1.0)
        out = y[j - 1] + np.clip(frac, 0.0, 1.0) * self.grid.h
        return np.where(t <= self.F[0], y[0], out)


def standard_map(v: MarginalDensity) -> MonotoneMap:
    """F = cumulative Simpson integral of v, clipped to be monotone and scaled to end at 1."""
    F = cumulative_simpson(v.values, dx=v.grid.h, initial=0.0)
    F = np.maximum.accumulate(np.maximum(F, 0.0))
    return MonotoneMap(v.grid, F / F[-1])


def pushforward(f: Callable, transport: MonotoneMap) -> np.ndarray:
    """T_# f = f o F on the target grid."""
    return np.asarray(f(transport.F))


def lift(f: Callable, v: MarginalDensity, transport: MonotoneMap | None = None) -> np.ndarray:
    """L f (y) = sqrt(v(y)) f(F(y)); unitary from L^2[0, 1] to L^2 on the grid."""
    transport = transport or standard_map(v)
    return np.sqrt(v.values) * pushforward(f, transport)


def _basis(N: int, kind: str) -> list[tuple[Callable, Callable]]:
    """Orthonormal functions on [0, 1] and their derivatives."""
    tau = 2 * np.pi
    if kind == "complex":
        return [(lambda t, k=k: np.exp(1j * tau * k * t),
                 lambda t, k=k: 1j * tau * k * np.exp(1j * tau * k * t)) for k in range(1, N + 1)]
    if kind != "real":
        raise InvalidArgument(f"kind must be 'complex' or 'real', got {kind!r}")
    out = []
    r2 = np.sqrt(2.0)
    for k in range(1, N // 2 + 1):
        out.append((lambda t, k=k: r2 * np.sin(tau * k * t),
                    lambda t, k=k: r2 * tau * k * np.cos(tau * k * t)))
        out.append((lambda t, k=k: r2 * np.cos(tau * k * t),
                    lambda t, k=k: -r2 * tau * k * np.sin(tau * k * t)))
    if N % 2:
        out.append((lambda t: np.ones_like(t), lambda t: np.zeros_like(t)))
    return out


@dataclass(frozen=True)
class OrbitalSet:
    """N orbitals on a grid with sum of |phi_i|^2 equal to N v."""

    v: MarginalDensity
    orbitals: np.ndarray = field(repr=False)
    kind: str
    transport: MonotoneMap = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.orbitals)

    @property
    def density(self) -> np.ndarray:
        return np.sum(np.abs(self.orbitals) ** 2, axis=0)

    def gram(self, weights: np.ndarray | None = None) -> np.ndarray:
        w = orbital_weights(self.v.grid) if weights is None else weights
        return (self.orbitals * w) @ self.orbitals.conj().T

    def orthonormality_error(self) -> float:
        return float(np.max(np.abs(self.gram() - np.eye(self.N))))

    def density_error(self) -> float:
        return float(np.max(np.abs(self.density - self.N * self.v.values)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["node"]
            for i in range(self.N):
                head += [f"Re_phi{i + 1}", f"Im_phi{i + 1}"]
            w.writerow(head)
            for j, y in enumerate(self.v.grid.nodes):
                row = [repr(float(y))]
                for phi in self.orbitals:
                    row += [repr(float(phi[j].real)), repr(float(np.imag(phi[j])))]
                w.writerow(row)


def harriman_orbitals(rho: MarginalDensity, N: int | None = None, kind: str = "complex") -> OrbitalSet:
    """Orbitals sqrt(v) phi_k(F) with v = rho / N, from the complex or real Fourier family."""
    N = rho.particle_count if N is None else int(N)
    if N < 1:
        raise InvalidArgument(f"need N >= 1 orbitals, got {N}")
    v = MarginalDensity(rho.grid, rho.values, N)
    transport = standard_map(v)
    basis = _basis(N, kind)
    orbitals = np.array([lift(f, v, transport) for f, _ in basis],
                        dtype=complex if kind == "complex" else float)
    return OrbitalSet(v, orbitals, kind, transport)


@dataclass(frozen=True)
class RegularityReport:
    gradient_formula_error: float
    M1v_bound: float
    kinetic: float


def regularity_check(orbitals: OrbitalSet) -> RegularityReport:
    """Compare the chain-rule gradient of L phi_i with finite differences of L phi_i.

    The formula ``(sqrt v)' phi_i(F) + sqrt v phi_i'(F) v`` uses the discrete gradient of
    ``sqrt v`` (so densities with a square-root edge stay comparable) and the exact
    derivative of the basis function. Both sides use the fourth-order stencil and the
    error is the max over nodes ``2..n-3``.
    """
    v = orbitals.v
    g = v.grid
    sq = np.sqrt(v.values)
    dsq = gradient_fd(sq, g, order=4)
    F = orbitals.transport.F
    w = g.weights
    err, kin = 0.0, 0.0
    basis = _basis(orbitals.N, orbitals.kind)
    for phi, (f, df) in zip(orbitals.orbitals, basis):
        formula = dsq * f(F) + sq * df(F) * v.values
        fd = gradient_fd(phi, g, order=4)
        err = max(err, float(np.max(np.abs(formula[2:-2] - fd[2:-2]))))
        kin += float(np.sum(w * np.abs(gradient_fd(phi, g)) ** 2))
    if not np.isfinite(kin):
        raise InvalidArgument("orbital kinetic energy is not finite")
    return RegularityReport(err, float(np.max(v.values)), kin)
