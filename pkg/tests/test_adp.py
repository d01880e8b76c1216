import cmath
import math

import numpy as np
import pytest

import csiloc
from csiloc.adp import bin_to_angle_delay, compute_adp, dft_f, dft_v, similarity, to_unit_vector, vec
from csiloc.channel import ScenarioConfig, array_response
from csiloc.errors import ConfigurationError, DomainError


def scenario_16():
    return ScenarioConfig(
        carrier_frequency=3.5e9,
        bandwidth=100e6,
        n_antennas=16,
        n_subcarriers=16,
        bs_position=(0.0, 0.0),
        scatterer_positions=(),
        grid_origin=(10.0, 0.0),
        grid_rows=1,
        grid_cols=1,
        grid_spacing=0.2,
    )


class TestAngleTransform:
    def test_first_row_is_constant(self):
        V = dft_v(2)
        np.testing.assert_allclose(V[0], [1 / np.sqrt(2)] * 2, atol=1e-15)

    def test_unitary_small(self):
        V = dft_v(4)
        np.testing.assert_allclose(V.conj().T @ V, np.eye(4), atol=1e-12)

    def test_matches_per_entry_evaluation(self):
        # scalar oracle straight from the half-shifted definition
        n = 16
        V = dft_v(n)
        for z in range(n):
            for q in range(n):
                expected = cmath.exp(-2j * math.pi * z * (q - n / 2) / n) / math.sqrt(n)
                assert abs(V[z, q] - expected) < 1e-12

    def test_rejects_odd_antenna_count(self):
        with pytest.raises(ConfigurationError):
            dft_v(5)


class TestDelayTransform:
    def test_size_one(self):
        np.testing.assert_allclose(dft_f(1), [[1.0]], atol=1e-15)

    def test_entry_1_1_for_size_4(self):
        # (1/2) * exp(-j*pi/2) = -j/2
        assert abs(dft_f(4)[1, 1] - (-0.5j)) < 1e-15

    def test_unitary(self):
        F = dft_f(16)
        np.testing.assert_allclose(F.conj().T @ F, np.eye(16), atol=1e-12)


class TestComputeAdp:
    def test_all_ones_csi_hits_single_bin(self):
        for n_t, n_c in ((4, 4), (8, 8), (16, 16)):
            A = compute_adp(np.ones((n_t, n_c)))
            assert np.unravel_index(A.argmax(), A.shape) == (n_t // 2, 0)
            np.testing.assert_allclose(A[n_t // 2, 0], np.sqrt(n_t * n_c), atol=1e-9)
            mask = np.ones_like(A, dtype=bool)
            mask[n_t // 2, 0] = False
            np.testing.assert_allclose(A[mask], 0.0, atol=1e-9)

    def test_zero_csi_gives_zero_profile(self):
        np.testing.assert_allclose(compute_adp(np.zeros((8, 8))), 0.0)

    def test_matches_triple_loop_transform_oracle(self, rng):
        # brute-force scalar sums of the conjugated-correlation transform
        n = 8
        H = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        A = compute_adp(H)
        expected = np.zeros((n, n))
        for q in range(n):
            for z in range(n):
                acc = 0j
                for t in range(n):
                    for c in range(n):
                        v = cmath.exp(-2j * math.pi * t * (q - n / 2) / n) / math.sqrt(n)
                        f = cmath.exp(-2j * math.pi * c * z / n) / math.sqrt(n)
                        acc += v.conjugate() * H[t, c] * f.conjugate()
                expected[q, z] = abs(acc)
        np.testing.assert_allclose(A, expected, atol=1e-10)

    def test_norm_preservation(self, rng):
        for _ in range(100):
            H = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
            np.testing.assert_allclose(
                np.linalg.norm(compute_adp(H)), np.linalg.norm(H), atol=1e-9
            )

    def test_on_grid_path_peaks_at_its_bins(self, rng):
        # a path with cos(aoa) = (2*q0 - N)/N and delay z0 peaks at (q0, z0)
        sc = scenario_16()
        n_t, n_c = 16, 16
        for q0, z0 in [(5, 3), (0, 0), (12, 15), (8, 1)]:
            gain = complex(rng.normal(), rng.normal())
            theta = math.acos((2 * q0 - n_t) / n_t)
            e = array_response(theta, n_t, sc.antenna_spacing, sc.wavelength)
            l = np.arange(1, n_c + 1)
            H = gain * np.outer(e, np.exp(-2j * np.pi * l * z0 / n_c))
            A = compute_adp(H)
            assert np.unravel_index(A.argmax(), A.shape) == (q0, z0)
            np.testing.assert_allclose(A[q0, z0], abs(gain) * np.sqrt(n_t * n_c), atol=1e-9)

    def test_rejects_nonfinite(self):
        H = np.ones((4, 4), dtype=complex)
        H[0, 0] = np.nan
        with pytest.raises(DomainError):
            compute_adp(H)


class TestBinInterpretation:
    def test_center_bin_is_broadside(self):
        sc = scenario_16()
        theta, _ = bin_to_angle_delay(8, 0, sc)
        np.testing.assert_allclose(theta, np.pi / 2, atol=1e-12)

    def test_zero_delay_bin(self):
        _, tau = bin_to_angle_delay(3, 0, scenario_16())
        assert tau == 0.0

    def test_published_example_bin(self):
        # 16x16 profile with 10 ns taps: bin (5, 15) -> (arccos(-6/16), 150 ns)
        sc = scenario_16()
        theta, tau = bin_to_angle_delay(5, 15, sc)
        np.testing.assert_allclose(theta, math.acos(-6 / 16), atol=1e-12)
        np.testing.assert_allclose(tau, 150e-9, atol=1e-18)

    def test_rejects_out_of_range_bins(self):
        sc = scenario_16()
        with pytest.raises(DomainError):
            bin_to_angle_delay(16, 0, sc)
        with pytest.raises(DomainError):
            bin_to_angle_delay(0, -1, sc)


class TestSimilarity:
    def test_self_similarity_is_one(self, rng):
        A = rng.uniform(0.0, 1.0, size=(16, 16))
        assert similarity(A, A) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_support_is_zero(self):
        a = np.zeros(8)
        b = np.zeros(8)
        a[:4] = 1.0
        b[4:] = 1.0
        assert similarity(a, b) == 0.0

    def test_matches_scalar_dot_product_oracle(self, rng):
        a = rng.uniform(0.0, 1.0, size=(16, 16))
        b = rng.uniform(0.0, 1.0, size=(16, 16))
        dot = sum(a[i, j] * b[i, j] for i in range(16) for j in range(16))
        na = math.sqrt(sum(a[i, j] ** 2 for i in range(16) for j in range(16)))
        nb = math.sqrt(sum(b[i, j] ** 2 for i in range(16) for j in range(16)))
        assert abs(similarity(a, b) - dot / (na * nb)) < 1e-12

    def test_symmetry_and_scale_invariance(self, rng):
        a = rng.uniform(0.0, 1.0, size=64)
        b = rng.uniform(0.0, 1.0, size=64)
        assert abs(similarity(a, b) - similarity(b, a)) < 1e-12
        assert abs(similarity(a, 7.3 * b) - similarity(a, b)) < 1e-12
        assert abs(similarity(2.5 * a, a) - 1.0) < 1e-12

    def test_nonnegative_inputs_stay_in_unit_interval(self, rng):
        for _ in range(50):
            a = rng.uniform(0.0, 1.0, size=32)
            b = rng.uniform(0.0, 1.0, size=32)
            s = similarity(a, b)
            assert 0.0 <= s <= 1.0 + 1e-12

    def test_zero_norm_rejected(self):
        with pytest.raises(DomainError):
            similarity(np.zeros(4), np.ones(4))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DomainError):
            similarity(np.ones(4), np.ones(5))


class TestVectorization:
    def test_vec_concatenates_columns(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_allclose(vec(m), [1.0, 3.0, 2.0, 4.0])

    def test_unit_vector_normalizes(self, rng):
        A = rng.uniform(0.0, 1.0, size=(8, 8))
        v = to_unit_vector(A)
        assert v.shape == (64,)
        np.testing.assert_allclose(np.linalg.norm(v), 1.0, atol=1e-12)

    def test_unit_vector_rejects_zero(self):
        with pytest.raises(DomainError):
            to_unit_vector(np.zeros((4, 4)))
