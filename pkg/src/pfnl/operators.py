"""The nonlocal operator ``B_eps`` and energy ``E_eps`` plus their local
counterparts.

The domain-restricted convolution ``(J_eps * u)(x) = int_D J_eps(x-y) u(y) dy``
is computed by zero-extending ``u`` and performing a linear (padded) FFT
convolution; since the integrand vanishes outside the box this is exact
for the restricted integral up to the shared midpoint quadrature.  One
quadrature (cell centers, with the origin cell of the kernel carrying its
cell average) is used for everything, so the discrete identity

    E_eps(u) = 1/2 (B_eps u, u)_H

holds to roundoff against the direct double sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import DegenerateFieldError
from .fields import (
    Field,
    dual_norm,
    grad_inner,
    inner_product,
    neumann_laplacian,
    ones,
)
from .kernels import EvaluatedKernel, tabulate_kernel


@dataclass(frozen=True)
class ConvolutionPlan:
    """Precomputed spectral data for the padded linear convolution."""

    grid: object
    kernel: EvaluatedKernel
    padded_shape: tuple
    kernel_hat: np.ndarray

    def apply(self, data):
        """Circular convolution on the padded lattice, truncated to the box."""
        padded = np.zeros(self.padded_shape)
        padded[tuple(slice(0, m) for m in self.grid.n)] = data
        out = sfft.irfftn(sfft.rfftn(padded) * self.kernel_hat, s=self.padded_shape)
        return out[tuple(slice(0, m) for m in self.grid.n)]


def build_plan(kernel):
    """Wrap the tabulated kernel onto a padded lattice and cache its FFT.

    Padding to at least ``2n - 1`` per axis keeps the circular product
    equal to the linear convolution for every in-box offset.
    """
    grid = kernel.grid
    padded_shape = tuple(sfft.next_fast_len(2 * m - 1) for m in grid.n)
    wrapped = np.zeros(padded_shape)
    sl = tuple(slice(0, 2 * m - 1) for m in grid.n)
    wrapped[sl] = kernel.values
    # move offset 0 (stored at index n-1) to lattice index 0
    wrapped = np.roll(wrapped, shift=tuple(-(m - 1) for m in grid.n), axis=tuple(range(grid.dimension)))
    return ConvolutionPlan(grid, kernel, padded_shape, sfft.rfftn(wrapped))


def convolve(plan, u):
    """Midpoint-rule restricted convolution ``J_eps * u`` as a field."""
    return Field(u.grid, plan.apply(u.data) * u.grid.cell_volume)


@dataclass(frozen=True)
class NonlocalOperator:
    """``B_eps u = a_eps u - J_eps * u`` with the precomputed ``a_eps``."""

    plan: ConvolutionPlan
    a_eps: Field

    @property
    def grid(self):
        return self.plan.grid

    @property
    def eps(self):
        return self.plan.kernel.eps


def build_nonlocal_operator(family, eps, grid):
    kernel = tabulate_kernel(family, eps, grid)
    plan = build_plan(kernel)
    return NonlocalOperator(plan, convolve(plan, ones(grid)))


def apply_B_eps(op, u):
    """Apply the nonlocal operator; annihilates constants exactly."""
    return Field(u.grid, op.a_eps.data * u.data - convolve(op.plan, u).data)


def energy_nonlocal(op, u):
    """Nonlocal energy through the quadratic form ``1/2 (B_eps u, u)_H``."""
    val = 0.5 * inner_product("H", apply_B_eps(op, u), u)
    if val < -1e-14 * max(1.0, float(np.max(op.a_eps.data))):
        raise DegenerateFieldError(f"nonlocal energy came out negative: {val}")
    return max(val, 0.0)


def pairwise_kernel_matrix(op):
    """Dense matrix ``J_eps(x_i - x_j)`` over all cell pairs (small grids)."""
    grid = op.grid
    values = op.plan.kernel.values
    if grid.dimension == 1:
        idx = np.arange(grid.n[0])
        return values[idx[:, None] - idx[None, :] + grid.n[0] - 1]
    i1, i2 = np.meshgrid(np.arange(grid.n[0]), np.arange(grid.n[1]), indexing="ij")
    i1, i2 = i1.ravel(), i2.ravel()
    o1 = i1[:, None] - i1[None, :] + grid.n[0] - 1
    o2 = i2[:, None] - i2[None, :] + grid.n[1] - 1
    return values[o1, o2]


def energy_double_sum(op, u):
    """Direct quartic double sum for the nonlocal energy (O(N^2) check)."""
    J = pairwise_kernel_matrix(op)
    uu = u.data.ravel()
    diff = uu[:, None] - uu[None, :]
    return 0.25 * op.grid.cell_volume**2 * float(np.sum(J * diff * diff))


def frechet_identity_residual(op, u, v):
    """Gap between the operator pairing and the direct double sum.

    Evaluates ``|(B_eps u, v)_H - 1/2 sum_ij J_ij (u_i-u_j)(v_i-v_j) h^{2d}|``
    with the double sum formed pairwise; both routes share one kernel
    tabulation, so agreement is a pure algebra/roundoff statement.
    """
    pairing = inner_product("H", apply_B_eps(op, u), v)
    J = pairwise_kernel_matrix(op)
    uu, vv = u.data.ravel(), v.data.ravel()
    double = 0.5 * op.grid.cell_volume**2 * float(
        np.sum(J * (uu[:, None] - uu[None, :]) * (vv[:, None] - vv[None, :]))
    )
    return abs(pairing - double)


def frechet_fd_residual(op, u, v, delta=1e-6):
    """Gap between the pairing and a centered difference of the energy.

    The energy is quadratic, so the centered difference is exact up to
    roundoff amplified by ``1/delta``.
    """
    pairing = inner_product("H", apply_B_eps(op, u), v)
    plus = energy_nonlocal(op, Field(u.grid, u.data + delta * v.data))
    minus = energy_nonlocal(op, Field(u.grid, u.data - delta * v.data))
    return abs(pairing - (plus - minus) / (2.0 * delta))


def apply_B_local(u):
    """Strong Neumann form of the local operator (minus the Laplacian)."""
    return Field(u.grid, -neumann_laplacian(u).data)


def energy_local(u):
    """Dirichlet energy ``1/2 (grad u, grad u)`` with face gradients."""
    return 0.5 * grad_inner(u, u)


def bbm_bound_ratio(op, u):
    """Ratio ``dual_norm(B_eps u) / sqrt(E_eps(u))``.

    Bounded uniformly in eps for fixed smooth fields; raises on constant
    input where the energy degenerates.
    """
    energy = energy_nonlocal(op, u)
    scale = inner_product("H", u, u) * float(np.max(op.a_eps.data))
    if energy <= 1e-28 * max(1.0, scale):
        raise DegenerateFieldError("degenerate: nonlocal energy vanishes")
    return dual_norm(apply_B_eps(op, u)) / math.sqrt(energy)
