"""
Tests for Paley-Wiener function evaluation, kernels and line norms.
"""
import math

import numpy as np
import pytest

from pwinterp.errors import (
    ConfigValidationError,
    QuadratureNotConvergedError,
    TruncationInsufficientError,
)
from pwinterp.pwcore import (
    LegendrePanels,
    ReproducingKernel,
    evaluate,
    from_spectrum_file,
    inner_product,
    integrate_density,
    kernel_eval,
    kernel_norm_estimate,
    kernel_norm_profile,
    line_norm,
    pairing_frequencies,
    panel_edges,
    panel_rule,
    plancherel_polya_check,
    pointwise_bound_check,
    reproduce,
    shift_spectrum,
    synthesize,
    translate,
)


def box(tau=math.pi):
    """Constant density on [-tau, tau]: f(z) = 2 sin(tau z) / z."""
    return synthesize(lambda t: np.ones_like(t), tau, label="box")


def pw_test_functions():
    """Five functions of type pi with densities smooth inside their supports."""
    return [
        box(),
        synthesize(lambda t: np.cos(0.5 * t) ** 2, math.pi, label="raised-cosine"),
        synthesize(lambda t: np.exp(-(t**2)), math.pi, label="gaussian"),
        translate(box(), 0.5),
        synthesize(lambda t: np.ones_like(t), math.pi, support=(-1.0, 2.0), label="offset-box"),
    ]


LAMBDA_GRID = np.array([complex(x, y) for x in (-0.7, 0.3, 1.6) for y in (-2.0, 0.0, 2.0)])


class TestQuadrature:
    """Test the composite Gauss rule"""

    def test_panel_rule_integrates_polynomials(self):
        """Test the composite rule on a polynomial."""
        x, w = panel_rule(-1.0, 2.0, 3, 8)
        assert w @ x**5 == pytest.approx((2.0**6 - 1.0) / 6)

    def test_graded_edges_keep_ends(self):
        """Test that graded panels keep the ends and cluster there."""
        edges = panel_edges(0.0, 1.0, 8, graded=True)
        assert edges[0] == pytest.approx(0.0)
        assert edges[-1] == pytest.approx(1.0)
        assert np.diff(edges)[0] < np.diff(edges)[4]

    def test_legendre_panels_reproduce_polynomial(self):
        """Test panel-wise Legendre interpolation."""
        edges = panel_edges(-1.0, 1.0, 2)
        x, _ = panel_rule(-1.0, 1.0, 2, 6)
        interpolant = LegendrePanels(edges, 6, x**3 - x)
        t = np.array([-0.7, 0.1, 0.9])
        np.testing.assert_allclose(interpolant(t).real, t**3 - t, atol=1e-12)
        assert interpolant(1.5) == 0


class TestEvaluate:
    """Test evaluation of band-limited functions"""

    def test_box_values(self):
        """Test box evaluation against its closed form."""
        f = box()
        z = np.array([0.3, 1.7 + 0.4j, -5.2])
        np.testing.assert_allclose(f(z), 2 * np.sin(math.pi * z) / z, rtol=1e-9)

    def test_value_at_zero(self):
        """Test f(0) as the integral of the density."""
        assert integrate_density(box()) == pytest.approx(2 * math.pi)

    def test_scalar_in_scalar_out(self):
        """Test that a scalar argument gives a scalar."""
        assert np.ndim(box()(0.5)) == 0

    def test_support_must_fit(self):
        """Test that the support must fit the bandwidth."""
        with pytest.raises(ConfigValidationError):
            synthesize(lambda t: t, 1.0, support=(-2.0, 0.5))

    def test_bandwidth_positive(self):
        """Test that the bandwidth must be positive."""
        with pytest.raises(ConfigValidationError):
            synthesize(lambda t: t, 0.0)

    def test_cap_raises(self, fresh_settings):
        """Test the panel cap on a rough density."""
        fresh_settings.quad_max_panels = 8
        rough = synthesize(lambda t: np.abs(t) ** 0.5, 1.0)
        with pytest.raises(QuadratureNotConvergedError) as exc:
            evaluate(rough, 0.0, rtol=1e-15)
        assert exc.value.last_value is not None

    def test_sampled_density(self, fresh_settings):
        """Test a density given by samples."""
        order = fresh_settings.quad_order
        x, _ = panel_rule(-1.0, 1.0, 4, order)
        f = synthesize(np.ones(len(x)), 1.0)
        assert f(0.0) == pytest.approx(2.0)

    def test_weights_sum_to_twice_the_bandwidth(self):
        """Base-rule weights are positive and sum to 2 tau on the full interval."""
        f = box(2.0)
        assert np.all(f.weights > 0)
        assert f.weights.sum() == pytest.approx(4.0, rel=1e-12)
        assert f.nodes.shape == f.weights.shape
        assert -2.0 < f.nodes.min() and f.nodes.max() < 2.0

    def test_weights_cover_partial_support(self):
        """On a sub-interval the weights sum to its length."""
        f = synthesize(lambda t: np.ones_like(t), math.pi, support=(-1.0, 2.0))
        assert f.weights.sum() == pytest.approx(3.0, rel=1e-12)

    def test_spectrum_file_roundtrip(self, tmp_path):
        """Test writing and reading a spectrum file."""
        f = synthesize(lambda t: np.cos(t), 2.0)
        path = tmp_path / "f.csv"
        path.write_text(f.to_spectrum_text(panels=8))
        g = from_spectrum_file(path)
        z = np.array([0.0, 1.5, 3 + 1j])
        np.testing.assert_allclose(g(z), f(z), rtol=1e-8)


class TestTransforms:
    """Test translation and spectral shifts"""

    def test_translate(self):
        """Test translation."""
        f = box(2.0)
        z = np.array([0.1, 1.3 - 0.2j])
        np.testing.assert_allclose(translate(f, 0.7)(z), f(z + 0.7), rtol=1e-9)

    def test_shift_spectrum(self):
        """Test a spectral shift."""
        f = box(1.0)
        g = shift_spectrum(f, 0.5)
        z = np.array([0.4, -2.0 + 0.3j])
        np.testing.assert_allclose(g(z), np.exp(-0.5j * z) * f(z), rtol=1e-9)
        assert g.bandwidth == pytest.approx(1.5)


class TestKernels:
    """Test reproducing kernels"""

    def test_kernel_value(self):
        """Test a kernel value off the axis."""
        value = kernel_eval(1j, 0.0, math.pi)
        assert value == pytest.approx(math.sinh(math.pi) / math.pi)

    def test_kernel_equals_one_at_conjugate(self):
        """Test k_lambda(conj(lambda)) = 1."""
        assert kernel_eval(0.5 + 1j, 0.5 - 1j, 2.0) == pytest.approx(1.0)

    def test_norm_estimate(self):
        """Test the kernel norm estimate."""
        estimate = kernel_norm_estimate(2j, math.pi, 2.0)
        assert estimate == pytest.approx(3**-0.5 * math.exp(2 * math.pi))

    def test_sinc_norm(self):
        """Test the L^2 norm of the sinc kernel."""
        norm = line_norm(ReproducingKernel(0.0, math.pi), 0.0, 2.0)
        assert norm.value == pytest.approx(1.0, rel=1e-2)
        assert norm.truncation_radius >= 32

    def test_profile_ratios_bounded(self):
        """Test bounded ratios of true and estimated kernel norms."""
        rows = kernel_norm_profile([0.5j, 1j, 2j], math.pi, 2.0)
        ratios = [row[3] for row in rows]
        assert all(0.1 < r < 10 for r in ratios)

    def test_kernel_hermitian(self, rng):
        """k_lambda(mu) = conj(k_mu(lambda)) on random pairs."""
        lam = rng.uniform(-3, 3, 8) + 1j * rng.uniform(-2, 2, 8)
        mu = rng.uniform(-3, 3, 8) + 1j * rng.uniform(-2, 2, 8)
        np.testing.assert_allclose(
            kernel_eval(lam, mu, math.pi), np.conj(kernel_eval(mu, lam, math.pi)), rtol=1e-12
        )


class TestPairings:
    """Test real-line inner products and the reproducing property"""

    def test_frequencies_of_box_against_kernel(self):
        """Edge differences of two full spectra are -2 tau, 0 and 2 tau."""
        omegas = pairing_frequencies(box(), ReproducingKernel(0.5j, math.pi))
        np.testing.assert_allclose(omegas, [-2 * math.pi, 0.0, 2 * math.pi], atol=1e-12)

    def test_box_reproduced_off_the_axis(self):
        """The slowly decaying box pairing is completed beyond the truncation radius."""
        f = box()
        lams = np.array([0.3, 1j, -0.7 + 2j])
        np.testing.assert_allclose(reproduce(f, lams), f(lams), rtol=0, atol=1e-6 * 2 * math.pi)

    def test_scalar_point(self):
        """A single point gives a complex scalar."""
        f = box()
        value = reproduce(f, 0.25 - 0.5j)
        assert isinstance(value, complex)
        assert value == pytest.approx(f(0.25 - 0.5j), abs=1e-5)

    @pytest.mark.slow
    @pytest.mark.parametrize("index", range(5))
    def test_reproducing_property_on_grid(self, index):
        """(tau/pi) <f, k_lambda> = f(lambda) to 1e-6 ||f||_2 on a 9-point grid."""
        f = pw_test_functions()[index]
        norm = line_norm(f, 0.0, 2.0).norm
        error = np.abs(reproduce(f, LAMBDA_GRID) - f(LAMBDA_GRID))
        assert error.max() <= 1e-6 * norm

    def test_radius_cap_raises(self, fresh_settings):
        """An unreachable tolerance inside the radius cap raises instead of returning."""
        fresh_settings.pairing_max_radius = 64.0
        with pytest.raises(TruncationInsufficientError) as exc:
            reproduce(box(), -0.7 + 2j, atol=1e-14)
        assert exc.value.radius == 64.0

    def test_inner_product_is_squared_norm(self):
        """<f, f> = ||f||_2^2 = 4 pi^2 for the box."""
        f = box()
        assert inner_product(f, f).real == pytest.approx(4 * math.pi**2, abs=1e-4)

    def test_disjoint_spectra_are_orthogonal(self):
        """Functions with disjoint spectral supports pair to zero."""
        f = box(1.0)
        g = shift_spectrum(box(1.0), 3.0)
        assert abs(inner_product(f, g)) < 1e-4


class TestLineNorms:
    """Test line norms and the associated inequalities"""

    def test_p_range(self):
        """Test the exponent range."""
        with pytest.raises(ConfigValidationError):
            line_norm(box(), 0.0, 1.0)

    def test_box_norm(self):
        """Test the box norm by Plancherel."""
        # ||2 sin(pi x)/x||_2^2 = 4 pi^2 by Plancherel
        norm = line_norm(box(), 0.0, 2.0)
        assert norm.value == pytest.approx(4 * math.pi**2, rel=1e-2)

    def test_fixed_radius(self):
        """Test a fixed truncation radius."""
        norm = line_norm(box(), 0.0, 2.0, radius=10.0)
        assert norm.truncation_radius == 10.0

    def test_min_radius(self):
        """Test a minimal truncation radius."""
        norm = line_norm(box(), 0.0, 2.0, min_radius=100.0)
        assert norm.truncation_radius >= 100.0

    def test_plancherel_polya(self):
        """Test the Plancherel-Polya inequality for the box."""
        assert plancherel_polya_check(box(), 0.5).passed

    @pytest.mark.parametrize("y", [0.5, 1.0, 2.0])
    def test_plancherel_polya_symmetric_heights(self, y):
        """Both heights pass and a function real on the axis has equal line integrals at +-y."""
        above, below = plancherel_polya_check(box(), y), plancherel_polya_check(box(), -y)
        assert above.passed and below.passed
        assert above.lhs == pytest.approx(below.lhs, rel=1e-8)

    @pytest.mark.slow
    @pytest.mark.parametrize("index", range(5))
    def test_plancherel_polya_all_functions(self, index):
        """Every test function passes at y in {+-0.5, +-1, +-2}."""
        f = pw_test_functions()[index]
        assert all(plancherel_polya_check(f, y).passed for y in (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0))

    def test_translation_keeps_norm(self):
        """Translation along the axis leaves the real-line norm unchanged."""
        base = line_norm(box(), 0.0, 2.0, radius=256.0).value
        moved = line_norm(translate(box(), 0.7), 0.0, 2.0, radius=256.0).value
        assert moved == pytest.approx(base, rel=1e-4)

    def test_spectral_shift_keeps_norm(self):
        """A spectral shift is a unimodular factor on the axis."""
        base = line_norm(box(), 0.0, 2.0, radius=256.0).value
        shifted = line_norm(shift_spectrum(box(), 0.5), 0.0, 2.0, radius=256.0).value
        assert shifted == pytest.approx(base, rel=1e-8)

    def test_pointwise_bound(self):
        """Test the pointwise bound on a grid."""
        z = np.array([0.0, 1.0 + 0.5j, -2.0 + 1.0j])
        assert pointwise_bound_check(box(), z) < 2.0
