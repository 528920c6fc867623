"""Unit tests for the wrap-around metric, separation predicates and conditioning."""

import numpy as np
import pytest

from srradar.analysis import (
    check_separation_mimo,
    check_separation_mimo_physical,
    check_separation_physical,
    check_separation_siso,
    condition_sweep,
    vandermonde_condition,
    wrap_distance,
)
from srradar.errors import DimensionError
from srradar.mimo import MimoScatterer
from srradar.signal import Scatterer


class TestWrapDistance:
    def test_worked_values(self):
        assert wrap_distance(3 / 4, 1 / 2) == 0.25
        assert wrap_distance(5 / 6, 1 / 6) == pytest.approx(1 / 3)

    def test_same_point(self):
        assert wrap_distance(0.37, 1.37) == pytest.approx(0.0, abs=1e-15)

    def test_is_a_metric(self, rng):
        a, b, c = rng.uniform(-2, 2, size=(3, 200))
        dab, dba = wrap_distance(a, b), wrap_distance(b, a)
        assert np.allclose(dab, dba)
        assert np.all(wrap_distance(a, c) <= dab + wrap_distance(b, c) + 1e-12)
        assert np.all((dab >= 0) & (dab <= 0.5))

    def test_scalar_type(self):
        assert isinstance(wrap_distance(0.1, 0.2), float)


class TestSeparationSiso:
    L = 43  # N = 21

    def test_separated_in_one_coordinate(self):
        report = check_separation_siso([(0.2, 0.1), (0.2, 0.1 + 3 / 21)], self.L)
        assert report.satisfied
        assert report.threshold == pytest.approx(2.38 / 21)

    def test_identical_nodes(self):
        report = check_separation_siso([(0.2, 0.1), (0.2, 0.1)], self.L)
        assert not report.satisfied
        assert report.violating_pairs == [(0, 1)]
        assert report.min_pairwise == 0.0

    def test_single_node(self):
        assert check_separation_siso([(0.5, 0.5)], self.L).satisfied

    def test_accepts_scatterers(self):
        nodes = [Scatterer(1.0, 0.0, 0.0), Scatterer(1.0, 0.01, 0.99)]
        assert not check_separation_siso(nodes, self.L).satisfied

    def test_permutation_invariant(self, rng):
        nodes = rng.uniform(size=(6, 2))
        a = check_separation_siso(nodes, self.L)
        b = check_separation_siso(nodes[::-1], self.L)
        assert a.min_pairwise == pytest.approx(b.min_pairwise)
        assert a.satisfied == b.satisfied


class TestSeparationMimo:
    def test_separated_only_in_beta(self):
        report = check_separation_mimo([(0.0, 0.3, 0.3), (0.5, 0.3, 0.3)], 3, 3, 41)
        # 0.5 * 8 / 10 = 0.4 < 1: beta alone needs 10 / 8 = 1.25, so fails
        assert not report.satisfied

    def test_separated_in_beta_large_array(self):
        # N_T N_R = 81, threshold 10 / 80 = 0.125
        assert check_separation_mimo([(0.0, 0.3, 0.3), (0.5, 0.3, 0.3)], 9, 9, 41).satisfied

    def test_separated_only_in_tau(self):
        N = 20
        report = check_separation_mimo([(0.1, 0.0, 0.4), (0.1, 6 / N, 0.4)], 3, 3, 41)
        assert report.satisfied
        assert report.threshold == 1.0

    def test_identical_triplets(self):
        assert not check_separation_mimo([(0.1, 0.2, 0.3)] * 2, 3, 3, 41).satisfied

    def test_single_virtual_antenna_ignores_beta(self):
        nodes = [MimoScatterer(1.0, 0.0, 0.0, 0.0), MimoScatterer(1.0, 0.5, 0.0, 0.0)]
        assert not check_separation_mimo(nodes, 1, 1, 41).satisfied


class TestSeparationPhysical:
    def test_delay_separation(self):
        B, T = 1e6, 1e-3       # B T = 1000
        delays = [0.0, 5.0 / B]
        dopplers = [0.0, 0.0]
        assert check_separation_physical(delays, dopplers, B, T).satisfied
        assert not check_separation_mimo_physical(delays, dopplers, B, T).satisfied

    def test_doppler_separation(self):
        B, T = 1e6, 1e-3
        assert check_separation_physical([0.0, 0.0], [0.0, 4.8 / T], B, T).satisfied
        assert not check_separation_physical([0.0, 0.0], [0.0, 4.7 / T], B, T).satisfied


class TestVandermonde:
    def test_orthogonal_at_zero_eps(self):
        for S in (2, 8, 32):
            assert vandermonde_condition(S, 0.0, 200) == pytest.approx(1.0, abs=1e-10)

    def test_more_nodes_worse(self):
        assert 1 / vandermonde_condition(16, 0.5, 200) < 1 / vandermonde_condition(2, 0.5, 200)

    def test_non_increasing_in_eps(self):
        eps = np.linspace(0.0, 0.95, 20)
        inv = [1 / vandermonde_condition(4, e, 200) for e in eps]
        assert np.all(np.diff(inv) <= 1e-9)

    def test_condition_at_least_one(self, rng):
        for e in rng.uniform(0, 0.99, size=5):
            assert vandermonde_condition(3, float(e), 50) >= 1.0 - 1e-12

    def test_too_many_nodes(self):
        with pytest.raises(DimensionError, match="exceeds"):
            vandermonde_condition(6, 0.1, 11)

    def test_eps_out_of_range(self):
        with pytest.raises(DimensionError, match="eps"):
            vandermonde_condition(2, 1.0, 20)

    def test_sweep_rows(self):
        points = condition_sweep(40, (2, 4), np.linspace(0, 0.5, 3))
        assert len(points) == 6
        assert points[0].s == 2 and points[0].eps == 0.0
        assert points[0].inv_kappa == pytest.approx(1.0)
