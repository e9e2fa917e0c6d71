"""Grids on box domains, scalar fields, and the L2/H1/dual norm toolbox.

All fields are cell-centered samples on a uniform tensor grid over
``[0, L_1] x ... x [0, L_d]`` with homogeneous Neumann boundary behaviour
realized by ghost-cell reflection.  The discrete gradient lives on cell
faces so that ``(-lap(u), w)_H == (grad u, grad w)_H`` holds to machine
precision; that exact integration-by-parts is what makes the energy
identities downstream hold at the discrete level.

Dual-space machinery: the pivot identification of L2 with its dual turns
the H1 Riesz map into the SPD operator ``F = I - lap_N``.  ``dual_norm``
evaluates ``sqrt((u, F^{-1} u)_H)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded
from scipy.sparse.linalg import LinearOperator, cg

from .errors import GridMismatchError, SolverError


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered tensor grid on a box.

    Parameters
    ----------
    lengths : tuple of float
        Box edge lengths ``L_i > 0``, one per axis.
    n : tuple of int
        Cell counts per axis, at least 4 each.  Cell centers sit at
        ``(k + 1/2) * h_i``.
    """

    lengths: tuple
    n: tuple

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))
        object.__setattr__(self, "n", tuple(int(m) for m in self.n))
        if len(self.lengths) != len(self.n):
            raise ValueError("lengths and n must have matching dimension")
        if self.dimension not in (1, 2):
            raise ValueError(f"grid dimension must be 1 or 2, got {self.dimension}")
        if any(m < 4 for m in self.n):
            raise ValueError("need at least 4 cells per axis")
        if any(L <= 0 for L in self.lengths):
            raise ValueError("box lengths must be positive")

    @classmethod
    def line(cls, n, length=1.0):
        return cls((length,), (n,))

    @classmethod
    def box(cls, n, lengths=(1.0, 1.0)):
        if isinstance(n, int):
            n = (n, n)
        return cls(tuple(lengths), tuple(n))

    @property
    def dimension(self):
        return len(self.n)

    @property
    def spacing(self):
        return tuple(L / m for L, m in zip(self.lengths, self.n))

    @property
    def shape(self):
        return self.n

    @property
    def cell_volume(self):
        return math.prod(self.spacing)

    @property
    def num_cells(self):
        return math.prod(self.n)

    def axis_centers(self, axis):
        h = self.spacing[axis]
        return (np.arange(self.n[axis]) + 0.5) * h

    def meshgrid(self):
        axes = [self.axis_centers(k) for k in range(self.dimension)]
        return np.meshgrid(*axes, indexing="ij")


@dataclass
class Field:
    """Scalar samples (one per cell) on a :class:`Grid`."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.data.shape != self.grid.shape:
            raise ValueError(
                f"data shape {self.data.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field contains non-finite entries")

    def copy(self):
        return Field(self.grid, self.data.copy())

    def __add__(self, other):
        _require_same_grid(self, other)
        return Field(self.grid, self.data + other.data)

    def __sub__(self, other):
        _require_same_grid(self, other)
        return Field(self.grid, self.data - other.data)

    def __mul__(self, scalar):
        return Field(self.grid, self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.data)


#: Elements of the dual space are carried as plain fields through the
#: pivot identification; the alias only marks intent at call sites.
DualField = Field


def _require_same_grid(u, w):
    if u.grid != w.grid:
        raise GridMismatchError("fields live on different grids")


def zeros(grid):
    return Field(grid, np.zeros(grid.shape))


def ones(grid):
    return Field(grid, np.ones(grid.shape))


def field_from_function(grid, fn):
    """Sample ``fn(x1[, x2])`` at the cell centers."""
    return Field(grid, np.asarray(fn(*grid.meshgrid()), dtype=np.float64))


def face_differences(u, axis):
    """Interior-face differences along ``axis`` (Neumann faces drop out)."""
    return np.diff(u.data, axis=axis)


def inner_product(space, u1, u2):
    """Inner product of two fields.

    ``space="H"`` is the midpoint-rule L2 product ``h^d sum(u1*u2)``;
    ``space="V"`` adds the face-centered gradient term.
    """
    _require_same_grid(u1, u2)
    if space == "H":
        return u1.grid.cell_volume * float(np.sum(u1.data * u2.data))
    if space == "V":
        return inner_product("H", u1, u2) + grad_inner(u1, u2)
    raise ValueError(f"unknown space {space!r} (expected 'H' or 'V')")


def grad_inner(u1, u2):
    """Face-centered gradient product ``(grad u1, grad u2)_H``."""
    _require_same_grid(u1, u2)
    vol = u1.grid.cell_volume
    total = 0.0
    for axis, h in enumerate(u1.grid.spacing):
        d1 = face_differences(u1, axis)
        d2 = face_differences(u2, axis)
        total += vol / (h * h) * float(np.sum(d1 * d2))
    return total


def norm(u, space="H"):
    """Norm of a field in H, V, or W (W uses the Neumann Laplacian)."""
    if space == "H":
        return math.sqrt(max(inner_product("H", u, u), 0.0))
    if space == "V":
        return math.sqrt(max(inner_product("V", u, u), 0.0))
    if space == "W":
        lap = neumann_laplacian(u)
        return math.sqrt(
            max(inner_product("H", lap, lap) + inner_product("H", u, u), 0.0)
        )
    raise ValueError(f"unknown space {space!r}")


def neumann_laplacian(u):
    """Second-difference Laplacian with reflected (Neumann) ghost cells.

    The stencil is conservative: the output sums to zero exactly, and
    ``(-lap u, w)_H == (grad u, grad w)_H`` to machine precision.
    """
    out = np.zeros_like(u.data)
    for axis, h in enumerate(u.grid.spacing):
        padded = np.pad(u.data, _axis_pad(u.grid.dimension, axis), mode="edge")
        out += (
            _shift_slice(padded, axis, 2)
            - 2.0 * u.data
            + _shift_slice(padded, axis, 0)
        ) / (h * h)
    return Field(u.grid, out)


def _axis_pad(dim, axis):
    return tuple((1, 1) if k == axis else (0, 0) for k in range(dim))


def _shift_slice(padded, axis, start):
    idx = [slice(None)] * padded.ndim
    idx[axis] = slice(start, padded.shape[axis] - 2 + start)
    return padded[tuple(idx)]


def riesz_apply(u):
    """Apply ``F = I - lap_N`` (the H1 Riesz map under the L2 pivot)."""
    return Field(u.grid, u.data - neumann_laplacian(u).data)


def riesz_inverse(u, tol=1e-12):
    """Solve ``(I - lap_N) w = u``.

    Direct symmetric-banded solve in 1D; matrix-free conjugate gradients
    (relative tolerance ``tol``) in 2D.  The operator is SPD, so failure
    to converge raises :class:`SolverError`.
    """
    grid = u.grid
    if grid.dimension == 1:
        return Field(grid, _riesz_solve_1d(grid, u.data))

    def matvec(x):
        f = Field(grid, x.reshape(grid.shape))
        return riesz_apply(f).data.ravel()

    op = LinearOperator(
        (grid.num_cells, grid.num_cells), matvec=matvec, dtype=np.float64
    )
    sol, info = cg(op, u.data.ravel(), rtol=tol, atol=0.0, maxiter=20 * grid.num_cells)
    if info != 0:
        raise SolverError(f"CG for the Riesz solve did not converge (info={info})")
    return Field(grid, sol.reshape(grid.shape))


def _riesz_banded(grid):
    (n,) = grid.n
    (h,) = grid.spacing
    a = 1.0 / (h * h)
    diag = np.full(n, 1.0 + 2.0 * a)
    diag[0] -= a
    diag[-1] -= a
    upper = np.full(n, -a)
    upper[0] = 0.0
    return np.vstack([upper, diag])


def _riesz_solve_1d(grid, rhs):
    return solveh_banded(_riesz_banded(grid), rhs, lower=False)


def dual_norm(u):
    """Dual (negative-order) norm ``sqrt((u, F^{-1} u)_H)``.

    Tiny negative pairings from roundoff are clamped to zero; anything
    below -1e-14 indicates a broken solve and raises.
    """
    w = riesz_inverse(u)
    val = inner_product("H", u, w)
    if val < -1e-14:
        raise SolverError(f"dual-norm pairing came out negative: {val}")
    return math.sqrt(max(val, 0.0))


def restrict(u, coarse):
    """Cell-average restriction onto a coarser grid of the same box.

    Requires each fine cell count to be an integer multiple of the
    coarse one; exact averaging keeps the restriction H-stable.
    """
    fine = u.grid
    if fine.dimension != coarse.dimension or fine.lengths != coarse.lengths:
        raise GridMismatchError("restriction requires the same box")
    factors = []
    for nf, nc in zip(fine.n, coarse.n):
        if nf % nc != 0:
            raise GridMismatchError(
                f"fine cells {nf} not an integer multiple of coarse cells {nc}"
            )
        factors.append(nf // nc)
    if all(f == 1 for f in factors):
        return Field(coarse, u.data.copy())
    if fine.dimension == 1:
        data = u.data.reshape(coarse.n[0], factors[0]).mean(axis=1)
    else:
        data = u.data.reshape(
            coarse.n[0], factors[0], coarse.n[1], factors[1]
        ).mean(axis=(1, 3))
    return Field(coarse, data)


def write_field(u, path, fmt="csv"):
    """Serialize a field: CSV rows of index coordinates then value, or
    raw little-endian float64 in row-major order."""
    if fmt == "csv":
        lines = []
        for idx in np.ndindex(u.grid.shape):
            coords = ",".join(str(i) for i in idx)
            lines.append(f"{coords},{u.data[idx]:.17g}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    elif fmt == "binary":
        u.data.astype("<f8").tofile(path)
    else:
        raise ValueError(f"unknown field format {fmt!r}")


def read_field(grid, path, fmt="csv"):
    """Read a field snapshot written by :func:`write_field`."""
    if fmt == "csv":
        data = np.zeros(grid.shape)
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                idx = tuple(int(p) for p in parts[:-1])
                data[idx] = float(parts[-1])
        return Field(grid, data)
    if fmt == "binary":
        data = np.fromfile(path, dtype="<f8")
        return Field(grid, data.reshape(grid.shape))
    raise ValueError(f"unknown field format {fmt!r}")
