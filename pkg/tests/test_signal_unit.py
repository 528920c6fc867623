"""Unit tests for the signal model (shift operators, Gabor structure, atoms).

The fast FFT-based operators in srradar/signal.py are compared against the
term-by-term sums in tests/oracles.py. They cover:
  - Fractional time shift and frequency shift definitions
  - Synthesis, linearity and the natural-grid reduction
  - Gabor columns and the dense Gabor matrix
  - Atoms and the implicit operator A with its adjoint
  - Random probing signals
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from srradar.errors import DimensionError
from srradar.signal import (
    ProbingSignal,
    Scatterer,
    Scene,
    apply_atoms,
    apply_atoms_adjoint,
    atom,
    atom_operator,
    frequency_shift,
    fractional_time_shift,
    gabor_column,
    gabor_matrix,
    line_spectral_samples,
    random_probing,
    shifted_copies,
    signed_indices,
    synthesize,
)
from tests.oracles import dense_gabor, shift_sum, time_shift_sum


def _complex_vector(rng, L):
    return rng.normal(size=L) + 1j * rng.normal(size=L)


# ---------------------------------------------------------------------------
# Fractional time shift
# ---------------------------------------------------------------------------

class TestFractionalTimeShift:
    @pytest.mark.parametrize("L", [3, 15, 31])
    def test_matches_triple_sum(self, rng, L):
        for _ in range(100):
            x = _complex_vector(rng, L)
            tau = rng.uniform()
            fast = fractional_time_shift(x, tau)
            slow = time_shift_sum(x, tau)
            assert np.max(np.abs(fast - slow)) / np.max(np.abs(slow)) < 1e-10

    def test_zero_shift_is_identity(self, rng):
        x = _complex_vector(rng, 15)
        assert_allclose(fractional_time_shift(x, 0.0), x, rtol=1e-12, atol=1e-12)

    def test_one_sample_shift_is_circular(self, rng):
        x = _complex_vector(rng, 15)
        assert_allclose(fractional_time_shift(x, 1 / 15), np.roll(x, 1), atol=1e-12)

    def test_half_shift_small_case(self):
        x = np.array([1.0, 0.0, 0.0], dtype=complex)
        assert_allclose(fractional_time_shift(x, 0.5), time_shift_sum(x, 0.5), atol=1e-14)

    def test_even_length_rejected(self):
        with pytest.raises(DimensionError, match="fractional_time_shift"):
            fractional_time_shift(np.ones(4), 0.1)

    def test_periodic_in_tau(self, rng):
        x = _complex_vector(rng, 15)
        assert_allclose(fractional_time_shift(x, 1.3), fractional_time_shift(x, 0.3), atol=1e-13)

    def test_shifts_compose(self, rng):
        x = _complex_vector(rng, 15)
        twice = fractional_time_shift(fractional_time_shift(x, 0.37), 0.81)
        assert_allclose(twice, fractional_time_shift(x, 0.37 + 0.81), atol=1e-10)

    def test_energy_preserved(self, rng):
        x = _complex_vector(rng, 31)
        shifted = fractional_time_shift(x, 0.123)
        assert np.linalg.norm(shifted) == pytest.approx(np.linalg.norm(x), rel=1e-12)

    def test_accepts_probing_signal(self, probe15):
        assert_allclose(fractional_time_shift(probe15, 0.0), probe15.samples, atol=1e-12)


# ---------------------------------------------------------------------------
# Frequency shift
# ---------------------------------------------------------------------------

class TestFrequencyShift:
    def test_zero_and_one_are_identity(self, rng):
        x = _complex_vector(rng, 15)
        assert_allclose(frequency_shift(x, 0.0), x)
        assert_allclose(frequency_shift(x, 1.0), x)

    def test_natural_grid_phase(self, rng):
        x = _complex_vector(rng, 15)
        p = signed_indices(15)
        assert_allclose(frequency_shift(x, 1 / 15), x * np.exp(2j * np.pi * p / 15), atol=1e-14)

    @pytest.mark.parametrize("L", [3, 15, 31])
    def test_shifted_copies_match_triple_sum(self, rng, L):
        x = _complex_vector(rng, L)
        taus, nus = rng.uniform(size=100), rng.uniform(size=100)
        rows = shifted_copies(x, taus, nus)
        for row, tau, nu in zip(rows, taus, nus):
            assert_allclose(row, shift_sum(x, tau, nu), atol=1e-10)


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------

class TestSynthesize:
    def test_single_unshifted_scatterer_returns_probe(self, probe15):
        y = synthesize(probe15, Scene((Scatterer(1.0, 0.0, 0.0),), 15))
        assert_allclose(y.y, probe15.samples, atol=1e-12)

    def test_natural_grid_scatterer(self, probe15):
        n, m, b = 4, 6, 0.5 - 2j
        y = synthesize(probe15, Scene((Scatterer(b, n / 15, m / 15),), 15))
        p = signed_indices(15)
        expected = b * np.roll(probe15.samples, n) * np.exp(2j * np.pi * m * p / 15)
        assert_allclose(y.y, expected, atol=1e-12)

    def test_linear_in_scatterers(self, probe15):
        a = Scatterer(1.0 + 1j, 0.13, 0.71)
        c = Scatterer(-0.4, 0.52, 0.08)
        both = synthesize(probe15, Scene((a, c), 15)).y
        parts = synthesize(probe15, Scene((a,), 15)).y + synthesize(probe15, Scene((c,), 15)).y
        assert_allclose(both, parts, atol=1e-12)

    def test_matches_gabor_formulation_on_grid(self, probe15):
        L, N = 15, 7
        scatterers = (Scatterer(1.0, 2 / L, 5 / L), Scatterer(-1j, 6 / L, 1 / L))
        z = np.zeros(L * L, dtype=complex)
        for s in scatterers:
            l, k = round(s.tau * L), round(s.nu * L)
            z[(k + N) * L + (l + N)] = s.b
        y = synthesize(probe15, Scene(scatterers, L))
        assert_allclose(y.y, gabor_matrix(probe15) @ z, atol=1e-10)

    def test_empty_scene(self, probe15):
        assert not np.any(synthesize(probe15, Scene((), 15)).y)

    def test_dimension_mismatch(self, probe15):
        with pytest.raises(DimensionError, match="synthesize"):
            synthesize(probe15, Scene((Scatterer(1.0, 0.1, 0.1),), 13))

    def test_duplicate_locations_rejected(self):
        with pytest.raises(DimensionError, match="duplicate"):
            Scene((Scatterer(1.0, 0.25, 0.5), Scatterer(2.0, 1.25, 0.5)), 15)

    def test_line_spectral_special_case(self, probe15):
        nus = np.array([0.11, 0.47, 0.9])
        gains = np.array([1.0, 0.3j, -0.7])
        scene = Scene(tuple(Scatterer(b, 0.0, nu) for b, nu in zip(gains, nus)), 15)
        assert_allclose(line_spectral_samples(probe15, nus, gains), synthesize(probe15, scene).y, atol=1e-12)


# ---------------------------------------------------------------------------
# Gabor structure
# ---------------------------------------------------------------------------

class TestGabor:
    def test_origin_column_is_probe(self, probe15):
        assert_allclose(gabor_column(probe15, 0, 0), probe15.samples)

    def test_column_is_natural_shift(self, probe15):
        for k, l in [(3, -2), (-7, 7), (1, 5)]:
            expected = shifted_copies(probe15, [l / 15], [k / 15])[0]
            assert_allclose(gabor_column(probe15, k, l), expected, atol=1e-12)

    def test_column_energy(self, probe15):
        col = gabor_column(probe15, 4, -3)
        assert np.vdot(col, col).real == pytest.approx(np.linalg.norm(probe15.samples) ** 2, rel=1e-12)

    def test_out_of_range(self, probe15):
        with pytest.raises(DimensionError, match="gabor_column"):
            gabor_column(probe15, 8, 0)

    def test_matrix_matches_dense_oracle(self, probe15):
        assert_allclose(gabor_matrix(probe15), dense_gabor(probe15.samples), atol=1e-12)


# ---------------------------------------------------------------------------
# Atoms and A
# ---------------------------------------------------------------------------

class TestAtoms:
    def test_origin_atom_is_ones(self):
        assert_allclose(atom((0.0, 0.0), 7), np.ones(49))

    def test_atom_energy(self):
        f = atom((0.31, 0.77), 9)
        assert np.vdot(f, f).real == pytest.approx(81.0)

    def test_apply_atom_is_shifted_probe(self, probe15, rng):
        for tau, nu in rng.uniform(size=(5, 2)):
            expected = shifted_copies(probe15, [tau], [nu])[0]
            assert_allclose(apply_atoms(probe15, atom((tau, nu), 15)), expected, atol=1e-10)

    def test_adjoint_identity(self, probe15, rng):
        for _ in range(10):
            z = _complex_vector(rng, 225)
            y = _complex_vector(rng, 15)
            lhs = np.vdot(y, apply_atoms(probe15, z))
            rhs = np.vdot(apply_atoms_adjoint(probe15, y), z)
            assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))

    def test_linear_operator_wrapper(self, probe15, rng):
        op = atom_operator(probe15)
        z = _complex_vector(rng, 225)
        assert op.shape == (15, 225)
        assert_allclose(op.matvec(z), apply_atoms(probe15, z))


# ---------------------------------------------------------------------------
# Random probing
# ---------------------------------------------------------------------------

class TestRandomProbing:
    def test_same_seed_same_signal(self):
        assert_allclose(random_probing(21, 5).samples, random_probing(21, 5).samples)

    def test_gaussian_is_real(self):
        assert not np.any(random_probing(21, 1).samples.imag)

    def test_signs_have_fixed_modulus(self):
        x = random_probing(21, 2, kind="signs")
        assert_allclose(np.abs(x.samples), np.full(21, 1 / np.sqrt(21)))

    def test_complex_kind(self):
        assert np.any(random_probing(21, 3, kind="complex").samples.imag)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="probe kind"):
            random_probing(21, 0, kind="chirp")

    def test_even_length(self):
        with pytest.raises(DimensionError):
            ProbingSignal(np.ones(8))

    def test_unit_expected_energy(self):
        children = np.random.SeedSequence(7).spawn(1000)
        energy = np.array([np.linalg.norm(random_probing(15, c).samples) ** 2 for c in children])
        se = energy.std(ddof=1) / np.sqrt(energy.size)
        assert abs(energy.mean() - 1.0) < 4 * se
