import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate

from pfnl.errors import KernelError, ResolutionError, SingularKernelError
from pfnl.fields import Grid
from pfnl.kernels import (
    MollifierProfile,
    adaptive_gauss_legendre,
    build_kernel_family,
    kernel_value,
    make_profile,
    moment_check,
    profile_from_samples,
    sphere_constant,
    tabulate_kernel,
    w11_integrals,
)


def bump_family(d=1, alpha=0.0, radius=1.0):
    return build_kernel_family(make_profile("polynomial-bump", radius), d, alpha)


class TestSphereConstant:
    def test_d1_counting_measure(self):
        # S^0 = {-1, +1}: the second moment is exactly 2.
        assert sphere_constant(1) == pytest.approx(1.0, abs=1e-14)

    def test_d2_against_quadrature(self):
        moment, _ = integrate.quad(lambda t: math.cos(t) ** 2, 0.0, 2.0 * math.pi)
        assert sphere_constant(2) == pytest.approx(2.0 / moment, rel=1e-12)

    def test_d3_against_quadrature(self):
        # second moment of sigma_1 over S^2 in spherical coordinates
        moment, _ = integrate.dblquad(
            lambda phi, theta: (math.sin(theta) * math.cos(phi)) ** 2
            * math.sin(theta),
            0.0,
            math.pi,
            0.0,
            2.0 * math.pi,
        )
        assert moment == pytest.approx(4.0 * math.pi / 3.0, rel=1e-10)
        assert sphere_constant(3) == pytest.approx(2.0 / moment, rel=1e-10)

    def test_unsupported_dimension(self):
        with pytest.raises(KernelError):
            sphere_constant(4)


class TestBuildFamily:
    def test_bump_normalization_exact(self):
        # moment integral of (1-s^2)^2 s^2 on [0,1] is exactly 8/105
        fam = bump_family(1, 0.0)
        exact_moment = 8.0 / 105.0
        assert fam.normalization == pytest.approx(
            sphere_constant(1) / exact_moment, rel=1e-12
        )

    @pytest.mark.parametrize(
        "shape,d,alpha",
        [
            ("polynomial-bump", 1, 0.0),
            ("polynomial-bump", 2, 0.0),
            ("polynomial-bump", 2, 1.0),
            ("polynomial-bump", 3, 1.0),
            ("compact-bump", 2, 0.5),
            ("gaussian-truncated", 2, 1.0),
            ("gaussian-truncated", 3, 2.0),
        ],
    )
    def test_moment_residual_by_construction(self, shape, d, alpha):
        fam = build_kernel_family(make_profile(shape), d, alpha)
        assert moment_check(fam) <= 1e-10

    def test_gaussian_truncated_oracle_quadrature(self):
        fam = build_kernel_family(make_profile("gaussian-truncated"), 2, 1.0)
        moment, _ = integrate.quad(
            lambda s: float(fam.rho(s)) * s ** (fam.dimension + 1 - fam.alpha),
            0.0,
            fam.profile.support_radius,
            epsabs=1e-14,
            epsrel=1e-13,
        )
        assert abs(moment - fam.c_d) / fam.c_d <= 1e-10

    def test_doubled_normalization_residual(self):
        fam = bump_family(2, 1.0)
        doubled = dataclasses.replace(fam, normalization=2.0 * fam.normalization)
        assert moment_check(doubled) == pytest.approx(1.0, rel=1e-10)

    def test_zero_profile_rejected(self):
        dead = MollifierProfile("custom", 1.0, lambda s: np.zeros_like(s))
        with pytest.raises(KernelError):
            build_kernel_family(dead, 1, 0.0)

    def test_alpha_out_of_range(self):
        with pytest.raises(KernelError):
            bump_family(2, 1.5)
        with pytest.raises(KernelError):
            bump_family(1, -0.2)

    def test_negative_profile_rejected(self):
        bad = MollifierProfile(
            "custom", 1.0, lambda s: np.where(s < 1.0, -1.0 + 0.0 * s, 0.0)
        )
        with pytest.raises(KernelError):
            build_kernel_family(bad, 1, 0.0)

    def test_profile_from_samples(self):
        s = np.linspace(0.0, 1.0, 257)
        ref = make_profile("polynomial-bump")
        prof = profile_from_samples(s, ref(s))
        fam = build_kernel_family(prof, 2, 0.0)
        assert moment_check(fam) <= 1e-10

    def test_gaussian_truncated_is_c1_and_nonnegative(self):
        prof = make_profile("gaussian-truncated", 1.0)
        s = np.linspace(0.0, 1.0, 20001)
        assert np.min(prof(s)) >= -1e-15
        assert abs(float(prof(np.array([1.0 - 1e-9]))[0])) < 1e-8
        assert abs(float(prof.derivative(np.array([1.0 - 1e-9]))[0])) < 1e-6


class TestKernelValue:
    def test_zero_beyond_support(self):
        fam = bump_family(1, 0.0)
        assert kernel_value(fam, 0.5, [0.5]) == 0.0
        assert kernel_value(fam, 0.5, [3.0]) == 0.0

    def test_unit_eps_alpha_zero_is_profile(self):
        fam = bump_family(1, 0.0)
        z = 0.37
        assert kernel_value(fam, 1.0, [z]) == pytest.approx(
            float(fam.rho(z)), rel=1e-14
        )

    def test_scaled_point_value(self):
        # alpha=0, d=1: J_eps(z) = eps^-(d+2) rho(|z|/eps)
        fam = bump_family(1, 0.0)
        eps, z = 0.5, 0.25
        expected = eps ** (-3.0) * float(fam.rho(z / eps))
        assert kernel_value(fam, eps, [z]) == pytest.approx(expected, rel=1e-13)

    def test_singular_origin(self):
        fam = bump_family(2, 1.0)
        with pytest.raises(SingularKernelError):
            kernel_value(fam, 0.5, [0.0, 0.0])

    def test_origin_with_vanishing_profile(self):
        prof = MollifierProfile(
            "custom",
            1.0,
            lambda s: np.where(s < 1.0, s**2 * (1.0 - s**2) ** 2, 0.0),
        )
        fam = build_kernel_family(prof, 2, 1.0)
        assert kernel_value(fam, 0.5, [0.0, 0.0]) == 0.0

    def test_scaling_single_path(self):
        fam = bump_family(2, 1.0)
        u = 0.4  # profile argument
        for e1, e2 in [(0.3, 0.7), (0.05, 1.0)]:
            lhs = float(fam.rho_eps(e1, u * e1)) * e1**2
            rhs = float(fam.rho_eps(e2, u * e2)) * e2**2
            assert lhs == pytest.approx(rhs, rel=1e-13)


class TestTabulation:
    def test_resolution_gate(self):
        fam = bump_family(1, 0.0)
        grid = Grid.line(16)  # h = 1/16, 4h = 0.25
        with pytest.raises(ResolutionError):
            tabulate_kernel(fam, 0.2, grid)

    def test_radial_symmetry_exact(self):
        fam = bump_family(1, 0.0)
        grid = Grid.line(32)
        ker = tabulate_kernel(fam, 0.5, grid)
        assert np.array_equal(ker.values, ker.values[::-1])

    def test_radial_symmetry_2d(self):
        fam = build_kernel_family(make_profile("polynomial-bump"), 2, 1.0)
        grid = Grid.box(16)
        ker = tabulate_kernel(fam, 0.3, grid)
        assert np.array_equal(ker.values, ker.values[::-1, :])
        assert np.array_equal(ker.values, ker.values[:, ::-1])

    def test_nonnegative_and_compact(self):
        fam = bump_family(1, 0.0)
        grid = Grid.line(64)
        eps = 0.25
        ker = tabulate_kernel(fam, eps, grid)
        assert np.min(ker.values) >= 0.0
        offsets = np.arange(-(grid.n[0] - 1), grid.n[0]) * grid.spacing[0]
        outside = np.abs(offsets) >= eps * fam.profile.support_radius
        assert np.max(ker.values[outside]) == 0.0

    def test_origin_cell_average_1d_oracle(self):
        fam = bump_family(1, 0.0)
        grid = Grid.line(64)
        eps = 0.25
        ker = tabulate_kernel(fam, eps, grid)
        h = grid.spacing[0]
        oracle, _ = integrate.quad(
            lambda z: kernel_value(fam, eps, [z]), -0.5 * h, 0.5 * h, epsabs=1e-14
        )
        assert ker.value_at((0,)) == pytest.approx(oracle / h, rel=1e-10)

    def test_origin_cell_average_2d_singular_oracle(self):
        fam = build_kernel_family(make_profile("polynomial-bump"), 2, 1.0)
        grid = Grid.box(16)
        eps = 0.3
        ker = tabulate_kernel(fam, eps, grid)
        h = grid.spacing[0]

        # independent oracle: polar coordinates absorb the 1/r singularity
        def radial(theta):
            rmax = 0.5 * h / max(abs(math.cos(theta)), abs(math.sin(theta)))
            val, _ = integrate.quad(
                lambda r: kernel_value(fam, eps, [r * math.cos(theta), r * math.sin(theta)])
                * r,
                0.0,
                rmax,
                epsabs=1e-13,
            )
            return val

        oracle, _ = integrate.quad(radial, 0.0, 2.0 * math.pi, epsabs=1e-12, limit=200)
        assert ker.value_at((0, 0)) == pytest.approx(oracle / h**2, rel=1e-6)

    def test_w11_integrals_finite(self):
        for d, alpha in [(1, 0.0), (2, 0.0), (2, 1.0), (3, 2.0)]:
            fam = build_kernel_family(make_profile("polynomial-bump"), d, alpha)
            mass, grad_mass = w11_integrals(fam, 0.25)
            assert math.isfinite(mass) and mass > 0.0
            assert math.isfinite(grad_mass) and grad_mass > 0.0


class TestQuadrature:
    def test_polynomial_exactness(self):
        val = adaptive_gauss_legendre(lambda s: s**6 - 2.0 * s**4 + s**2, 0.0, 1.0)
        assert val == pytest.approx(8.0 / 105.0, rel=1e-14)

    def test_oscillatory(self):
        val = adaptive_gauss_legendre(lambda s: np.sin(40.0 * s), 0.0, 1.0)
        exact = (1.0 - math.cos(40.0)) / 40.0
        assert val == pytest.approx(exact, abs=1e-12)
