"""
Tests for node-sequence diagnostics.
"""
import math

import numpy as np
import pytest

from pwinterp.errors import ConfigValidationError, DegenerateSequenceError, SequenceError
from pwinterp.seqlab import (
    ComplexSequence,
    DiscreteMeasure,
    HalfPlane,
    blaschke_condition_sum,
    blaschke_product,
    carleson_factor,
    carleson_measure_constant,
    carleson_products,
    carleson_sweep,
    density_interpolation_test,
    imaginary_ladder,
    log_carleson_products,
    perturbed_integers,
    separation_report,
    shifted_integers,
    sigma_measure,
    upper_uniform_density,
)


class TestHalfPlane:
    """Test half-plane geometry"""

    def test_depth_and_reflection(self):
        """Test depth and reflection in a shifted lower half-plane."""
        hp = HalfPlane(1.0, "lower")
        assert hp.depth(0.0) == pytest.approx(1.0)
        assert hp.reflect(2 + 0.5j) == pytest.approx(2 + 1.5j)

    def test_invalid_side(self):
        """Test rejection of an unknown side."""
        with pytest.raises(SequenceError):
            HalfPlane(0.0, "left")

    def test_boundary_point_rejected(self):
        """Test rejection of a point on the boundary line."""
        with pytest.raises(SequenceError):
            HalfPlane().require_inside([1j, 2.0])


class TestComplexSequence:
    """Test sequence validation and generators"""

    def test_duplicates_rejected(self):
        """Test rejection of coinciding nodes."""
        with pytest.raises(SequenceError, match="coincide"):
            ComplexSequence(np.array([0.0, 1.0, 1.0 + 1e-14]))

    def test_strip_bound_enforced(self):
        """Test the strip bound."""
        with pytest.raises(SequenceError):
            ComplexSequence(np.array([0.0, 1 + 2j]), strip_bound=1.0)

    def test_points_are_read_only(self):
        """Test that points cannot be modified."""
        seq = shifted_integers(3)
        with pytest.raises(ValueError):
            seq.points[0] = 5.0

    def test_perturbed_integers(self):
        """Test the perturbed integers."""
        seq = perturbed_integers(2.0, 3)
        assert len(seq) == 7
        assert seq.points[3] == 0
        assert seq.points[4] == pytest.approx(1.25)
        assert seq.points[2] == pytest.approx(-1.25)
        assert seq.strip_bound == 0.0

    def test_perturbed_integers_uses_larger_exponent(self):
        """Test the perturbation for p below 2."""
        # p = 4/3 has conjugate q = 4, so delta = 1/8
        assert perturbed_integers(4.0 / 3.0, 1).points[2] == pytest.approx(1.125)

    def test_perturbed_integers_rejects_p(self):
        """Test the exponent range of the generator."""
        with pytest.raises(ConfigValidationError):
            perturbed_integers(1.0, 3)

    def test_imaginary_ladder(self):
        """Test the imaginary ladder."""
        seq = imaginary_ladder(3)
        np.testing.assert_allclose(seq.points, [1j, 2j, 4j, 8j])

    def test_file_roundtrip(self, tmp_path):
        """Test writing and reading a node file."""
        seq = shifted_integers(2, 0.5j)
        path = tmp_path / "nodes.txt"
        path.write_text(seq.to_text())
        loaded = ComplexSequence.from_file(path)
        np.testing.assert_allclose(loaded.points, seq.points)
        assert loaded.strip_bound == pytest.approx(0.5)


class TestCarlesonProducts:
    """Test Carleson factors and products"""

    def test_factor_value(self):
        """Test a Carleson factor."""
        assert carleson_factor(1j, 1 + 1j, HalfPlane()) == pytest.approx(1 / math.sqrt(5))

    def test_factor_on_imaginary_axis(self):
        """Test a Carleson factor on the imaginary axis."""
        assert carleson_factor(1j, 3j, HalfPlane()) == pytest.approx(0.5)

    def test_factor_needs_distinct_points(self):
        """Test that the factor needs distinct points."""
        with pytest.raises(SequenceError):
            carleson_factor(1j, 1j, HalfPlane())

    def test_products_match_direct_product(self):
        """Test the products against a direct product."""
        seq = ComplexSequence(np.array([1j, 1 + 2j, -0.5 + 0.5j]))
        hp = HalfPlane()
        theta = carleson_products(seq, hp)
        direct = carleson_factor(1j, 1 + 2j, hp) * carleson_factor(1j, -0.5 + 0.5j, hp)
        assert theta[0] == pytest.approx(direct)
        assert np.all((theta > 0) & (theta <= 1))

    def test_centre_product_of_shifted_integers(self):
        """Test the centre product of i + Z against its closed form."""
        N = 10_000
        seq = shifted_integers(N, 1j)
        theta = carleson_products(seq, HalfPlane(), indices=[N])
        expected = 2 * math.pi / math.sinh(2 * math.pi)
        assert theta[0] == pytest.approx(expected, rel=1e-3)

    def test_log_products_agree_with_products(self):
        """Test the log form of the products."""
        seq = shifted_integers(20, 1j)
        np.testing.assert_allclose(
            np.exp(log_carleson_products(seq, HalfPlane())), carleson_products(seq, HalfPlane())
        )

    def test_lower_half_plane_mirror(self):
        """Test that conjugate nodes in the lower half-plane give the same products."""
        upper = ComplexSequence(np.array([1j, 2 + 3j, -1 + 0.5j]))
        lower = ComplexSequence(np.conj(upper.points))
        np.testing.assert_allclose(
            carleson_products(upper, HalfPlane()), carleson_products(lower, HalfPlane(0, "lower"))
        )


class TestSeparation:
    """Test separation and Blaschke diagnostics"""

    def test_single_point_is_degenerate(self):
        """Test that one point has no separation."""
        with pytest.raises(DegenerateSequenceError):
            separation_report(ComplexSequence(np.array([1j])))

    def test_gaps(self):
        """Test the pseudo-hyperbolic and euclidean gaps."""
        seq = ComplexSequence(np.array([1j, 1 + 1j, 3 + 1j]))
        report = separation_report(seq, HalfPlane())
        assert report.euclid_gap == pytest.approx(1.0)
        assert report.psh_gap == pytest.approx(1 / math.sqrt(5))

    def test_without_half_plane(self):
        """Test that the pseudo-hyperbolic gap needs a half-plane."""
        assert separation_report(shifted_integers(3)).psh_gap is None

    @pytest.mark.parametrize("offset", [0.0, 0.5])
    def test_factor_symmetric(self, rng, offset):
        """rho(lambda, mu) = rho(mu, lambda) on random pairs."""
        hp = HalfPlane(offset)
        lam = rng.uniform(-5, 5, 20) + 1j * rng.uniform(offset + 0.1, offset + 4.0, 20)
        mu = rng.uniform(-5, 5, 20) + 1j * rng.uniform(offset + 0.1, offset + 4.0, 20)
        for a, b in zip(lam, mu):
            assert carleson_factor(a, b, hp) == pytest.approx(carleson_factor(b, a, hp), rel=1e-12)

    def test_psh_gap_is_pairwise_minimum(self, rng):
        """The pseudo-hyperbolic gap equals the minimum over all pairs."""
        hp = HalfPlane()
        for _ in range(5):
            points = rng.uniform(-20, 20, 40) + 1j * rng.uniform(0.2, 2.0, 40)
            seq = ComplexSequence(points, 2.0)
            brute = min(
                carleson_factor(points[i], points[j], hp)
                for i in range(len(points)) for j in range(i + 1, len(points))
            )
            assert separation_report(seq, hp).psh_gap == pytest.approx(brute, rel=1e-12)

    def test_blaschke_sum(self):
        """Test the Blaschke sum."""
        seq = ComplexSequence(np.array([1j, 2 + 1j, 3j]))
        result = blaschke_condition_sum(seq, HalfPlane())
        direct = 1 / 2 + 1 / 6 + 3 / 10
        assert result.total == pytest.approx(direct)
        assert result.last_term == pytest.approx(3 / 10)

    def test_blaschke_sum_shifted_line(self):
        """Test the Blaschke sum above a shifted line."""
        seq = ComplexSequence(np.array([2j, 1 + 3j]))
        result = blaschke_condition_sum(seq, HalfPlane(1.0))
        assert result.total == pytest.approx(1 / 5 + 2 / 11)


class TestDensity:
    """Test upper uniform density estimates"""

    def test_perturbed_integers(self):
        """Test the density of the perturbed integers."""
        rows = upper_uniform_density(perturbed_integers(2.0, 500), [100.0])
        assert 1.0 <= rows[0][1] <= 1.05

    def test_sparse_sequence(self):
        """Test the density of a sparse sequence."""
        seq = ComplexSequence(np.arange(0.0, 1000.0, 10.0), 0.0)
        assert upper_uniform_density(seq, [100.0])[0][1] == pytest.approx(0.11)

    def test_window_below_spacing(self):
        """Test a window shorter than the spacing."""
        rows = upper_uniform_density(shifted_integers(10), [0.5])
        assert rows[0][1] == pytest.approx(2.0)

    def test_needs_strip_bound(self):
        """Test that density needs a strip bound."""
        with pytest.raises(SequenceError):
            upper_uniform_density(imaginary_ladder(3), [1.0])

    def test_grid_must_increase(self):
        """Test that the window grid must increase."""
        with pytest.raises(ConfigValidationError):
            upper_uniform_density(shifted_integers(3), [2.0, 1.0])

    def test_subadditive_in_window_length(self, rng):
        """n+(r + s) <= n+(r) + n+(s) on random strip sequences."""
        for _ in range(5):
            points = np.sort(rng.uniform(-50, 50, 200)) + 1j * rng.uniform(-1, 1, 200)
            seq = ComplexSequence(points, 1.0)
            for r, s in ((0.7, 1.3), (2.0, 5.0), (3.5, 3.5)):
                count = {w: upper_uniform_density(seq, [w])[0][1] * w for w in (r, s, r + s)}
                assert count[r + s] <= count[r] + count[s] + 1e-9

    def test_verdicts(self):
        """Test the three density verdicts."""
        seq = ComplexSequence(np.arange(-200.0, 201.0, 2.0), 0.0)
        assert density_interpolation_test(seq, math.pi, [50.0, 100.0]).verdict == "sufficient"
        dense = ComplexSequence(np.arange(-200.0, 201.0, 0.5), 0.0)
        assert density_interpolation_test(dense, math.pi, [100.0]).verdict == "violates_necessary"
        unit = shifted_integers(200)
        assert density_interpolation_test(unit, math.pi, [100.0]).verdict == "inconclusive"


class TestCarlesonMeasures:
    """Test discrete Carleson-measure constants"""

    def test_single_atom(self):
        """Test the constant of a single atom."""
        m = DiscreteMeasure(np.array([1j]), np.array([1.0]))
        assert carleson_measure_constant(m, HalfPlane()) == pytest.approx(1.0)

    def test_shifted_integers(self):
        """Test the constant of the sigma measure of i + Z."""
        m = sigma_measure(shifted_integers(20, 1j), HalfPlane())
        assert carleson_measure_constant(m, HalfPlane()) == pytest.approx(2.0)

    def test_empty_measure(self):
        """Test the empty measure."""
        m = DiscreteMeasure(np.array([], dtype=complex), np.array([]))
        assert carleson_measure_constant(m, HalfPlane()) == 0.0

    def test_negative_mass_rejected(self):
        """Test rejection of negative masses."""
        with pytest.raises(SequenceError):
            DiscreteMeasure(np.array([1j]), np.array([-1.0]))

    def test_coincident_atoms_merge(self):
        """Atoms sharing a location count as one atom carrying the summed mass."""
        split = DiscreteMeasure(np.array([1j, 1j, 2 + 1j]), np.array([1.0, 2.0, 0.5]))
        merged = DiscreteMeasure(np.array([1j, 2 + 1j]), np.array([3.0, 0.5]))
        hp = HalfPlane()
        assert carleson_measure_constant(split, hp) == pytest.approx(carleson_measure_constant(merged, hp))
        assert carleson_measure_constant(split, hp) == pytest.approx(3.0)

    def test_linear_in_mass_and_subset_monotone(self, rng):
        """Test homogeneity and monotonicity of the constant."""
        hp = HalfPlane()
        for _ in range(10):
            points = rng.uniform(-10, 10, 30) + 1j * rng.uniform(0.1, 3.0, 30)
            m = DiscreteMeasure(points, rng.uniform(0.0, 2.0, 30))
            constant = carleson_measure_constant(m, hp)
            assert carleson_measure_constant(m.scaled(3.0), hp) == pytest.approx(3 * constant)
            mask = rng.random(30) < 0.5
            assert carleson_measure_constant(m.subset(mask), hp) <= constant * (1 + 1e-12)


class TestBlaschkeProduct:
    """Test finite Blaschke products"""

    def test_vanishes_at_nodes(self):
        """Test that the product vanishes at the nodes."""
        seq = ComplexSequence(np.array([1j, 2 + 0.5j]))
        assert abs(blaschke_product(seq, HalfPlane(), 2 + 0.5j)) < 1e-12

    def test_unimodular_on_boundary(self):
        """Test that the product is unimodular on the boundary."""
        seq = ComplexSequence(np.array([1j, 2 + 0.5j, -3 + 4j]))
        values = blaschke_product(seq, HalfPlane(), np.linspace(-5, 5, 11))
        np.testing.assert_allclose(np.abs(values), 1.0)

    def test_positive_at_reference(self):
        """Test the normalisation at the reference point."""
        seq = ComplexSequence(np.array([3j, 2 + 0.5j]))
        value = blaschke_product(seq, HalfPlane(), 1j)
        assert abs(value.imag) < 1e-12
        assert value.real > 0


class TestCarlesonSweep:
    """Test half-plane sweeps"""

    def test_counts(self):
        """Test node counts and products across a sweep."""
        seq = ComplexSequence(np.array([1j, -1j, 2 + 2j]))
        rows = carleson_sweep(seq, [0.0, 5.0])
        by_key = {(row.offset, row.side): row for row in rows}
        assert by_key[(0.0, "upper")].count == 2
        assert by_key[(0.0, "lower")].count == 1
        assert by_key[(0.0, "lower")].inf_theta == pytest.approx(1.0)
        assert by_key[(5.0, "upper")].count == 0
        assert math.isnan(by_key[(5.0, "upper")].inf_theta)
