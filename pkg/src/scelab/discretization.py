"""Uniform grids, quadrature weights, finite differences and mollifier kernels.

Everything here is one-dimensional in the single-particle variable; N-body
objects are built as tensor powers of a :class:`Grid1D`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``[a, b]`` with ``n`` nodes and trapezoid weights."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidArgument(f"grid needs n >= 2 nodes, got {self.n!r}")
        if not self.a < self.b:
            raise InvalidArgument(f"grid needs a < b, got a={self.a}, b={self.b}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.n)

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.h)
        w[0] = w[-1] = self.h / 2
        return w

    def integrate(self, values) -> float:
        return np.asarray(values) @ self.weights

    def tensor_weights(self, n_bodies: int) -> np.ndarray:
        """Product quadrature weights on the ``n_bodies``-fold tensor grid."""
        W = np.ones(())
        for _ in range(n_bodies):
            W = np.multiply.outer(W, self.weights)
        return W


def make_grid(a: float, b: float, n: int) -> Grid1D:
    return Grid1D(float(a), float(b), int(n))


def romberg_weights(grid: Grid1D, levels: int = 3) -> np.ndarray:
    """Linear quadrature weights equivalent to Richardson-extrapolated trapezoid.

    The trapezoid rule is applied on the sub-grids of stride ``1, 2, ..., 2**(levels-1)``
    and combined by the Romberg recursion. ``n - 1`` must be divisible by the coarsest stride.
    """
    stride = 2 ** (levels - 1)
    if levels < 1 or (grid.n - 1) % stride:
        raise InvalidArgument(f"n-1={grid.n - 1} is not divisible by stride {stride}")
    rules = []
    for k in range(levels):
        st = 2**k
        w = np.zeros(grid.n)
        w[::st] = grid.h * st
        w[0] = w[-1] = grid.h * st / 2
        rules.append(w)
    table = rules[::-1]
    for j in range(1, levels):
        table = [(4**j * table[i + 1] - table[i]) / (4**j - 1) for i in range(len(table) - 1)]
    return table[0]


def gradient_fd(values, grid: Grid1D, axis: int = 0, order: int = 2) -> np.ndarray:
    """Centered differences in the interior, one-sided at the two boundary nodes.

    ``values`` may be an N-body array; the derivative is taken along ``axis``.
    ``order=4`` switches to the five-point stencil on nodes ``2..n-3``.
    """
    if order not in (2, 4):
        raise InvalidArgument(f"order must be 2 or 4, got {order}")
    u = np.asarray(values)
    if u.ndim == 0 or u.shape[axis] != grid.n:
        raise InvalidArgument(f"expected length {grid.n} along axis {axis}, got shape {u.shape}")
    u = np.moveaxis(u, axis, 0)
    du = np.empty_like(u, dtype=np.result_type(u, float))
    du[1:-1] = (u[2:] - u[:-2]) / (2 * grid.h)
    du[0] = (u[1] - u[0]) / grid.h
    du[-1] = (u[-1] - u[-2]) / grid.h
    if order == 4 and grid.n >= 5:
        du[2:-2] = (-u[4:] + 8 * u[3:-1] - 8 * u[1:-3] + u[:-4]) / (12 * grid.h)
    return np.moveaxis(du, 0, axis)


@dataclass(frozen=True)
class MollifierKernel:
    """Discrete symmetric kernel on integer node offsets ``-K..K``."""

    epsilon: float
    weights: np.ndarray = field(repr=False)

    @property
    def radius(self) -> int:
        return (len(self.weights) - 1) // 2

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.radius, self.radius + 1)

    def transfer_matrix(self, n: int) -> np.ndarray:
        """Column-stochastic ``n x n`` matrix spreading the mass at node j over the grid.

        Kernel mass falling outside the grid is redistributed by renormalising each
        column, so total mass is preserved exactly.
        """
        C = np.zeros((n, n))
        for k, wk in zip(self.offsets, self.weights):
            C += wk * np.eye(n, k=-k)
        return C / C.sum(axis=0, keepdims=True)

    def apply(self, masses) -> np.ndarray:
        """Smooth a vector of node masses."""
        m = np.asarray(masses, dtype=float)
        return self.transfer_matrix(len(m)) @ m


def gaussian_mollifier(epsilon: float, grid: Grid1D) -> MollifierKernel:
    """Gaussian ``exp(-(x/eps)^2)`` sampled on node offsets, cut at ``6*eps`` and renormalised."""
    if not epsilon > 0:
        raise InvalidArgument(f"mollifier width must be positive, got {epsilon}")
    radius = int(np.floor(6 * epsilon / grid.h + 1e-12))
    z = np.arange(-radius, radius + 1) * grid.h / epsilon
    w = np.exp(-(z**2))
    return MollifierKernel(float(epsilon), w / w.sum())
