import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import awgn
from spotfs.channel import ChannelRealization, sample_channel
from spotfs.estimator import (
    ChannelEstimate,
    detect_paths,
    detection_metric,
    estimate_channel,
    estimate_gains,
    estimation_mults,
    nmse,
    threshold_for,
)
from spotfs.frame import FrameLayout, SchemeId, build_frame, map_bits_to_symbols
from spotfs.power import allocate
from spotfs.receiver import _nmse_paths

N = M = 15
L_MAX, K_MAX = 4, 2


def received(rng, scheme, ch, snr=15.0, alpha=0.5, noise=True, data=True):
    lay = FrameLayout.create(scheme, N, M, L_MAX, K_MAX)
    alloc = allocate(snr, alpha, lay.n_data, lay.n_pilots, N, M)
    bits = rng.integers(0, 2, 2 * lay.n_data) if data else np.zeros(2 * lay.n_data, int)
    d = map_bits_to_symbols(bits, "qpsk", alloc.sigma_d2) * (1 if data else 0)
    frame = build_frame(lay, alloc, d)
    y = ch.matrix @ frame.vectorize()
    if noise:
        y = y + awgn(rng, N * M, alloc.sigma2)
    return lay, alloc, y.reshape(M, N, order="F")


class TestThresholds:
    def test_examples(self):
        assert np.isclose(threshold_for(SchemeId.ep(), 0, 0.25, 7.0), 1.5)
        assert np.isclose(threshold_for(SchemeId.ep(), 3, 0.25, 7.0), 1.5)
        assert np.isclose(threshold_for(SchemeId.sp(9), 0, 0.1, 1.25), 3 * np.sqrt(9 * 1.35))
        assert np.isclose(threshold_for(SchemeId.sp(9), 0, 1.0, 0.5), 11.0227, atol=1e-4)
        assert np.isclose(threshold_for(SchemeId.sp(9), 2, 1.0, 0.5), 9.0)
        assert np.isclose(threshold_for(SchemeId.sp(4), 2, 1.0, 99.0), 6.0)

    def test_negative_stage(self):
        with pytest.raises(ValueError):
            threshold_for(SchemeId.sp(1), -1, 1.0, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(1, 9),
        st.floats(1e-4, 10),
        st.floats(1e-4, 10),
        st.floats(1.01, 10),
    )
    def test_monotone(self, n_p, sigma2, sigma_d2, scale):
        s = SchemeId.sp(n_p)
        assert threshold_for(s, 0, sigma2, sigma_d2) > threshold_for(s, 1, sigma2, sigma_d2)
        assert threshold_for(s, 1, sigma2 * scale, sigma_d2) > threshold_for(s, 1, sigma2, sigma_d2)
        assert threshold_for(s, 0, sigma2, sigma_d2 * scale) > threshold_for(s, 0, sigma2, sigma_d2)


class TestDetection:
    def test_single_path_example(self):
        Y = np.zeros((M, N), dtype=complex)
        Y[7 + 2, 7 - 1] = 3.0
        assert detect_paths(Y, [(7, 7)], 2.0, L_MAX, K_MAX) == [(2, -1)]
        assert detect_paths(Y, [(7, 7)], 3.5, L_MAX, K_MAX) == []

    def test_threshold_monotone_subset(self, rng):
        ch = sample_channel(rng, 4, L_MAX, K_MAX, N, M)
        lay, _, Y = received(rng, SchemeId.sp(9), ch)
        for metric in ("magnitude", "coherent"):
            sets = [set(detect_paths(Y, lay.pilot_positions, g, L_MAX, K_MAX, metric)) for g in (1, 3, 6, 12, 30)]
            for a, b in zip(sets, sets[1:]):
                assert b <= a

    def test_locality(self, rng):
        # writing far outside every pilot's lattice changes nothing
        Y = awgn(rng, N * M).reshape(M, N)
        pilots = [(7, 7)]
        Z = Y.copy()
        Z[0, 0] += 100.0
        Z[2, 12] -= 50j
        assert np.array_equal(detection_metric(Y, pilots, L_MAX, K_MAX), detection_metric(Z, pilots, L_MAX, K_MAX))

    def test_cyclic_indices(self):
        Y = np.zeros((M, N), dtype=complex)
        Y[1, 14] = 5.0  # pilot at (12, 1) with l=4, k=-2 wraps both axes
        assert (4, -2) in detect_paths(Y, [(12, 1)], 1.0, L_MAX, K_MAX)

    def test_coherent_equals_magnitude_for_one_pilot(self, rng):
        Y = awgn(rng, N * M).reshape(M, N)
        np.testing.assert_allclose(
            detection_metric(Y, [(7, 7)], L_MAX, K_MAX, "coherent"), detection_metric(Y, [(7, 7)], L_MAX, K_MAX)
        )

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            detection_metric(np.zeros((M, N)), [(7, 7)], L_MAX, K_MAX, "power")


class TestGains:
    @pytest.mark.parametrize("seed", range(5))
    def test_noiseless_ep_is_exact(self, seed):
        rng = np.random.default_rng(seed)
        ch = sample_channel(rng, 4, L_MAX, K_MAX, N, M)
        lay, alloc, Y = received(rng, SchemeId.ep(), ch, noise=False)
        est = estimate_channel(Y, lay, alloc.pilot_amplitude, 1e-9)
        assert sorted(zip(est.delays, est.dopplers)) == sorted(zip(ch.delays, ch.dopplers))
        truth = {(l, k): h for h, l, k in ch.paths}
        for h, l, k in est.paths:
            assert abs(h - truth[(l, k)]) < 1e-10

    def test_wrap_phase_in_derotation(self):
        # pilot near the bottom so m_p + l wraps past M
        ch = ChannelRealization(np.array([0.8 - 0.3j]), np.array([4]), np.array([2]), N, M)
        x = np.zeros(N * M, dtype=complex)
        x[5 * M + 13] = 2.0
        Y = (ch.matrix @ x).reshape(M, N, order="F")
        est = estimate_gains(Y, [(13, 5)], [(4, 2)], 2.0)
        assert abs(est.gains[0] - (0.8 - 0.3j)) < 1e-12

    def test_sp_averaging_reduces_error(self):
        errs = {1: [], 9: []}
        for n_p in errs:
            rng = np.random.default_rng(11)
            for _ in range(150):
                ch = sample_channel(rng, 4, L_MAX, K_MAX, N, M)
                lay, alloc, Y = received(rng, SchemeId.sp(n_p), ch, snr=15.0, alpha=0.5)
                taps = list(zip(ch.delays.tolist(), ch.dopplers.tolist()))
                est = estimate_gains(Y, lay.pilot_positions, taps, alloc.pilot_amplitude)
                errs[n_p].append(np.mean(np.abs(est.gains - ch.gains)))
        assert np.mean(errs[9]) < np.mean(errs[1])

    def test_empty_detection(self):
        est = estimate_gains(np.zeros((M, N)), [(7, 7)], [], 1.0)
        assert est.P_hat == 0 and est.as_channel(N, M).matrix.nnz == 0


class TestNMSE:
    def test_examples(self):
        H = np.eye(3)
        assert nmse(H, H) == 0.0
        assert np.isclose(nmse(2 * H, H), 1.0)
        assert np.isclose(nmse(np.zeros((3, 3)), H), 1.0)
        assert np.isnan(nmse(H, np.zeros((3, 3))))
        with pytest.raises(ValueError):
            nmse(np.eye(2), H)

    def test_missed_path_costs_its_share(self):
        ch = ChannelRealization(np.array([1.0, 0.5]), np.array([0, 1]), np.array([0, 1]), N, M)
        miss = ChannelRealization(np.array([1.0]), np.array([0]), np.array([0]), N, M)
        assert np.isclose(nmse(miss.matrix, ch.matrix), 0.25 / 1.25)

    def test_false_alarm_versus_miss(self):
        # a weak false alarm costs less than missing a strong path
        ch = ChannelRealization(np.array([1.0, 0.9]), np.array([0, 2]), np.array([0, 1]), N, M)
        fa = ChannelRealization(np.array([1.0, 0.9, 0.1]), np.array([0, 2, 3]), np.array([0, 1, -1]), N, M)
        miss = ChannelRealization(np.array([1.0]), np.array([0]), np.array([0]), N, M)
        assert nmse(fa.matrix, ch.matrix) < nmse(miss.matrix, ch.matrix)

    @pytest.mark.parametrize("seed", range(5))
    def test_tap_form_matches_matrix_form(self, seed):
        rng = np.random.default_rng(seed)
        ch = sample_channel(rng, 4, L_MAX, K_MAX, N, M)
        lay, alloc, Y = received(rng, SchemeId.sp(9), ch, snr=5.0)
        est = estimate_channel(Y, lay, alloc.pilot_amplitude, 2.0, "coherent")
        num, den = _nmse_paths(est, ch)
        assert np.isclose(num / den, nmse(est.as_channel(N, M).matrix, ch.matrix))

    def test_perfect_estimate(self, rng):
        ch = sample_channel(rng, 4, L_MAX, K_MAX, N, M)
        est = ChannelEstimate.from_channel(ch)
        assert nmse(est.as_channel(N, M).matrix, ch.matrix) == 0.0


def test_estimation_mults():
    assert estimation_mults(1, 4, 2, 0) == 50
    assert estimation_mults(9, 4, 2, 4) == 2 * 9 * 25 + 6 * 9 * 4
