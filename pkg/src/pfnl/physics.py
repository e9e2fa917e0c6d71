"""Nonlinearities, source terms, and initial-data construction.

The phase nonlinearity is split as ``beta + pi`` with ``beta`` monotone
(carrying a convex primitive ``beta_hat``, ``beta_hat' = beta``,
``beta_hat(0) = 0``) and ``pi`` Lipschitz.  The growth pairing
``|beta(r)|^q <= c_beta (1 + beta_hat(r))`` is what keeps the
phase-nonlinearity monitors meaningful, so it is validated on a lattice
rather than trusted.

Initial data come with a per-eps uniform-bound monitor: the sum

    |theta0|_V^2 + |phi0|_H^2 + E_eps(phi0) + int beta_hat(phi0) + |v0|_H^2

must stay below a declared constant for every configured eps, and the
gaps to the eps-independent limit data are recorded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .fields import Field, dual_norm, field_from_function, inner_product, norm, zeros
from .operators import build_nonlocal_operator, energy_nonlocal


@dataclass(frozen=True)
class PotentialSpec:
    """Monotone/Lipschitz splitting of the potential derivative.

    ``beta``, ``beta_hat``, ``pi`` are vectorized scalar maps; ``q`` and
    ``c_beta`` calibrate the growth inequality; ``beta_prime`` (optional)
    feeds the Newton Jacobian, with a finite-difference fallback.
    """

    beta: callable
    beta_hat: callable
    pi: callable
    q: float
    c_beta: float
    pi_lipschitz: float
    beta_prime: callable = None

    def beta_derivative(self, r):
        r = np.asarray(r, dtype=np.float64)
        if self.beta_prime is not None:
            return self.beta_prime(r)
        dr = 1e-6
        return (self.beta(r + dr) - self.beta(r - dr)) / (2.0 * dr)


def make_double_well():
    """Classical quartic double well: ``beta(r) = r^3``, ``pi(r) = -r``.

    ``q = 4/3`` with ``c_beta = 4`` satisfies ``r^4 <= 4 (1 + r^4/4)``
    pointwise, and meets the dimensional floor q >= 6/5.
    """
    return PotentialSpec(
        beta=lambda r: r**3,
        beta_hat=lambda r: 0.25 * r**4,
        pi=lambda r: -r,
        q=4.0 / 3.0,
        c_beta=4.0,
        pi_lipschitz=1.0,
        beta_prime=lambda r: 3.0 * r**2,
    )


def make_linear_potential(pi_slope=0.0):
    """Degenerate spec with ``beta = 0`` and linear ``pi``; used by the
    linear/constant-data scenarios."""
    return PotentialSpec(
        beta=lambda r: np.zeros_like(np.asarray(r, dtype=np.float64)),
        beta_hat=lambda r: np.zeros_like(np.asarray(r, dtype=np.float64)),
        pi=lambda r: pi_slope * r,
        q=2.0,
        c_beta=1.0,
        pi_lipschitz=abs(pi_slope),
        beta_prime=lambda r: np.zeros_like(np.asarray(r, dtype=np.float64)),
    )


_LATTICE = np.linspace(-5.0, 5.0, 10_000)


def validate_potential(spec, d=None):
    """Check the potential invariants on the sample lattice.

    Returns a list of violation strings (empty when the spec is sound);
    violations are data, not exceptions.
    """
    out = []
    r = _LATTICE
    b = np.asarray(spec.beta(r), dtype=np.float64)
    bh = np.asarray(spec.beta_hat(r), dtype=np.float64)

    steps = np.diff(b)
    if np.min(steps) < -1e-10:
        k = int(np.argmin(steps))
        out.append(f"monotonicity: beta decreases near r={r[k]:.3f}")

    b0 = float(spec.beta_hat(np.array([0.0]))[0])
    if abs(b0) > 1e-12:
        out.append(f"primitive origin: beta_hat(0) = {b0:g} != 0")
    if np.min(bh) < -1e-12:
        out.append("nonnegativity: beta_hat takes negative values")

    second = bh[:-2] - 2.0 * bh[1:-1] + bh[2:]
    if np.min(second) < -1e-10:
        k = int(np.argmin(second))
        out.append(f"convexity: beta_hat second difference negative near r={r[k + 1]:.3f}")

    dr = 1e-4
    fd = (spec.beta_hat(r + dr) - spec.beta_hat(r - dr)) / (2.0 * dr)
    scale = np.max(np.abs(b))
    smooth = np.abs(b) >= 1e-3 * max(scale, 1e-12)
    if scale > 0 and np.any(smooth):
        rel = np.abs(fd[smooth] - b[smooth]) / np.abs(b[smooth])
        if np.max(rel) > 1e-6:
            out.append("primitive derivative: beta_hat' deviates from beta")

    growth = np.abs(b) ** spec.q - spec.c_beta * (1.0 + bh)
    tol = 1e-9 * np.maximum(1.0, spec.c_beta * (1.0 + bh))
    if np.any(growth > tol):
        k = int(np.argmax(growth))
        out.append(f"growth: |beta|^q exceeds c_beta(1+beta_hat) at r={r[k]:.3f}")

    p = np.asarray(spec.pi(r), dtype=np.float64)
    lip = np.abs(np.diff(p)) / np.diff(r)
    if np.max(lip) > spec.pi_lipschitz * (1.0 + 1e-10) + 1e-12:
        out.append(f"lipschitz: pi slope {np.max(lip):.6g} exceeds declared {spec.pi_lipschitz:g}")

    if spec.q <= 1.0:
        out.append(f"exponent: q = {spec.q:g} must exceed 1")
    if d == 3 and spec.q < 6.0 / 5.0 - 1e-12:
        out.append(f"exponent: q = {spec.q:g} below the d=3 floor 6/5")
    return out


# --- source terms -------------------------------------------------------------


def make_source(kind="none", amplitude=1.0):
    """Time-dependent source for the temperature equation.

    ``none`` gives the zero field; ``cosine-decay`` gives
    ``A cos(pi x_1) exp(-t)``.
    """
    if kind == "none":
        return lambda grid, t: zeros(grid)
    if kind == "cosine-decay":

        def f(grid, t):
            x1 = grid.meshgrid()[0]
            return Field(grid, amplitude * np.cos(np.pi * x1 / grid.lengths[0]) * math.exp(-t))

        return f
    raise ConfigError(f"unknown source kind {kind!r}")


# --- initial data --------------------------------------------------------------


@dataclass(frozen=True)
class InitialDataRule:
    """Closed-form initial data, evaluated on whatever grid a run uses."""

    theta0: callable
    phi0: callable
    v0: callable


def smooth_default_rule():
    return InitialDataRule(
        theta0=lambda *x: 0.5 * np.cos(np.pi * x[0]),
        phi0=lambda *x: np.cos(np.pi * x[0]),
        v0=lambda *x: np.zeros_like(x[0]),
    )


@dataclass
class ProblemData:
    """Initial triples plus the per-eps uniform-bound bookkeeping."""

    grid: object
    theta0: Field
    phi0: Field
    v0: Field
    eps_list: tuple
    per_eps: dict
    a5_values: dict
    a5_terms: dict
    data_gaps: dict
    c1_bound: float
    flags: list = field(default_factory=list)


def _a5_terms(theta0, phi0, v0, op, potential):
    grid = theta0.grid
    return {
        "theta_V_sq": inner_product("V", theta0, theta0),
        "phi_H_sq": inner_product("H", phi0, phi0),
        "energy": energy_nonlocal(op, phi0),
        "beta_hat_l1": grid.cell_volume * float(np.sum(potential.beta_hat(phi0.data))),
        "v_H_sq": inner_product("H", v0, v0),
    }


def build_initial_data(
    kind,
    grid,
    eps_list,
    family,
    potential,
    c1_bound=10.0,
    rule=None,
    custom=None,
    strict=True,
):
    """Construct initial data and evaluate the per-eps uniform bound.

    ``smooth-default`` uses eps-independent smooth data (cosine profiles,
    zero velocity), which keeps the bound trivially uniform; ``custom``
    takes explicit fields via ``custom={"theta0": ..., "phi0": ...,
    "v0": ..., "per_eps": {eps: (t, p, v), ...}}``.  With ``strict`` a
    monitor value above ``c1_bound`` raises; otherwise the violation is
    recorded in ``flags``.
    """
    if kind == "smooth-default":
        rule = rule or smooth_default_rule()
        theta0 = field_from_function(grid, rule.theta0)
        phi0 = field_from_function(grid, rule.phi0)
        v0 = field_from_function(grid, rule.v0)
        per_eps = {eps: (theta0, phi0, v0) for eps in eps_list}
    elif kind == "custom":
        if custom is None:
            raise ConfigError("custom initial data requested but none supplied")
        theta0, phi0, v0 = custom["theta0"], custom["phi0"], custom["v0"]
        per_eps = {
            eps: custom.get("per_eps", {}).get(eps, (theta0, phi0, v0))
            for eps in eps_list
        }
    else:
        raise ConfigError(f"unknown initial-data kind {kind!r}")

    a5_values, a5_terms, gaps, flags = {}, {}, {}, []
    for eps in eps_list:
        op = build_nonlocal_operator(family, eps, grid)
        te, pe, ve = per_eps[eps]
        terms = _a5_terms(te, pe, ve, op, potential)
        a5_terms[eps] = terms
        a5_values[eps] = sum(terms.values())
        gaps[eps] = (
            norm(te - theta0, "H"),
            norm(pe - phi0, "H"),
            dual_norm(ve - v0),
        )
        if a5_values[eps] > c1_bound:
            msg = (
                f"uniform bound violated at eps={eps}: monitor "
                f"{a5_values[eps]:.6g} > declared {c1_bound:g}"
            )
            if strict and kind == "custom":
                raise ConfigError(msg)
            flags.append(msg)

    if len(eps_list) >= 2:
        ordered = sorted(eps_list, reverse=True)
        lo, hi = a5_values[ordered[0]], a5_values[ordered[-1]]
        if hi > 2.0 * lo:
            flags.append(
                f"monitor grows from {lo:.6g} (eps={ordered[0]}) to "
                f"{hi:.6g} (eps={ordered[-1]}): family looks unbounded"
            )

    return ProblemData(
        grid=grid,
        theta0=theta0,
        phi0=phi0,
        v0=v0,
        eps_list=tuple(eps_list),
        per_eps=per_eps,
        a5_values=a5_values,
        a5_terms=a5_terms,
        data_gaps=gaps,
        c1_bound=c1_bound,
        flags=flags,
    )
