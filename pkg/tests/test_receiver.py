import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spotfs.channel import ChannelRealization, sample_channel
from spotfs.constellation import get_constellation
from spotfs.errors import ConfigError
from spotfs.estimator import threshold_for
from spotfs.frame import FrameLayout, SchemeId, build_frame
from spotfs.ldpc import code_for, encode
from spotfs.power import allocate
from spotfs.receiver import (
    FrameMeta,
    IterationPlan,
    ReceiverOptions,
    cancel_data,
    cancel_pilots,
    generate_replicas,
    llrs_to_symbol_logits,
    logits_to_pmf,
    run_receiver,
)

N = M = 15
QPSK = get_constellation("qpsk")


def frame_parts(rng, scheme=SchemeId.sp(9), snr=15.0, alpha=0.5):
    lay = FrameLayout.create(scheme, N, M, 4, 2)
    alloc = allocate(snr, alpha, lay.n_data, lay.n_pilots, N, M)
    bits = rng.integers(0, 2, 2 * lay.n_data)
    d = QPSK.scaled(alloc.sigma_d2)[QPSK.bits_to_indices(bits)]
    frame = build_frame(lay, alloc, d)
    ch = sample_channel(rng, 4, 4, 2, N, M)
    return lay, alloc, frame, ch, bits


def coded_block(rng, F=2, scheme=SchemeId.sp(9), snr=15.0, alpha=0.5, noise=True):
    lay = FrameLayout.create(scheme, N, M, 4, 2)
    alloc = allocate(snr, alpha, lay.n_data, lay.n_pilots, N, M)
    R_c = F * 2 * lay.n_data
    code = code_for(round(0.75 * R_c), R_c)
    info = rng.integers(0, 2, code.R_b)
    cw = encode(code, info)
    ys, metas = [], []
    for part in np.split(cw, F):
        frame = build_frame(lay, alloc, QPSK.scaled(alloc.sigma_d2)[QPSK.bits_to_indices(part)])
        ch = sample_channel(rng, 4, 4, 2, N, M)
        y = ch.matrix @ frame.vectorize()
        if noise:
            y = y + np.sqrt(alloc.sigma2 / 2) * (rng.standard_normal(N * M) + 1j * rng.standard_normal(N * M))
        ys.append(y)
        metas.append(FrameMeta(lay, alloc, ch))
    return ys, metas, code, info


class TestPlan:
    def test_parse_and_modes(self):
        p = IterationPlan.parse("3, 1")
        assert (p.r_unc, p.r_cod, p.r_end) == (3, 1, 4)
        assert [p.mode(r) for r in range(1, 5)] == ["uncoded"] * 3 + ["coded"]

    @pytest.mark.parametrize("text", ["3", "a,b", "1,2,3", "-1,2", "0,0"])
    def test_invalid(self, text):
        with pytest.raises(ConfigError):
            IterationPlan.parse(text)


class TestCancellation:
    def test_zero_channel(self, rng):
        lay, alloc, frame, ch, _ = frame_parts(rng)
        y = rng.standard_normal(N * M) + 0j
        empty = ChannelRealization(np.zeros(0), np.zeros(0), np.zeros(0), N, M)
        assert np.array_equal(cancel_pilots(y, empty, frame.pilot_vector()), y)
        assert np.array_equal(cancel_data(y, np.zeros((N * M, N * M)), frame.data_vector()), y)

    def test_ep_noiseless_zero_data(self, rng):
        lay = FrameLayout.create(SchemeId.ep(), N, M, 4, 2)
        alloc = allocate(10, 0.5, lay.n_data, 1, N, M)
        frame = build_frame(lay, alloc, np.zeros(lay.n_data))
        ch = sample_channel(rng, 4, 4, 2, N, M)
        y = ch.matrix @ frame.vectorize()
        assert np.allclose(cancel_pilots(y, ch, frame.pilot_vector()), 0, atol=1e-12)

    def test_sp_linearity_oracle(self, rng):
        lay, alloc, frame, ch, _ = frame_parts(rng)
        y = ch.matrix @ frame.vectorize()
        for H in (ch, ch.taps, ch.matrix):
            np.testing.assert_allclose(cancel_pilots(y, H, frame.pilot_vector()), ch.matrix @ frame.data_vector(), atol=1e-10)

    def test_fixed_point_is_exact(self, rng):
        lay, alloc, frame, ch, _ = frame_parts(rng)
        y = ch.matrix @ frame.vectorize()
        np.testing.assert_allclose(cancel_data(y, ch, frame.data_vector()), ch.matrix @ frame.pilot_vector(), atol=1e-10)
        assert np.array_equal(cancel_data(y, ch, np.zeros(N * M)), y)

    def test_soft_replica_beats_wrong_hard_decision(self):
        # one unit path; two data cells both carrying point 0
        ch = ChannelRealization(np.array([1.0]), np.array([0]), np.array([0]), 2, 1)
        pts = QPSK.points
        x = np.array([pts[0], pts[0]])
        y = ch.apply_dd(x)
        hard = np.array([pts[3], pts[3]])
        soft = generate_replicas(np.tile([0.7, 0.1, 0.1, 0.1], (2, 1)), QPSK, 1.0)
        e_hard = np.sum(np.abs(cancel_data(y, ch, hard)) ** 2)
        e_soft = np.sum(np.abs(cancel_data(y, ch, soft)) ** 2)
        # |p0 - p3|^2 = 4 per cell; soft mean is 0.6 p0, leaving |0.4 p0|^2 = 0.16
        assert np.isclose(e_hard, 8.0) and np.isclose(e_soft, 0.32)


class TestSoftChain:
    def test_zero_llrs_uniform(self):
        Z = llrs_to_symbol_logits(np.zeros(6), QPSK, np.array([0, 2, 4]), 5)
        np.testing.assert_allclose(Z, 2 * np.log(0.5))

    def test_saturated(self):
        Z = llrs_to_symbol_logits(np.array([30.0, 30.0]), QPSK, np.array([0]), 1)
        assert abs(Z[0, 0]) < 1e-12
        assert np.isclose(Z[0, 3], -60.0)

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(["qpsk", "8psk", "16qam"]), st.integers(0, 2**32 - 1))
    def test_factorised_distribution(self, name, seed):
        c = get_constellation(name)
        K = c.bits_per_symbol
        llr = np.random.default_rng(seed).normal(0, 6, 2 * K)
        Z = llrs_to_symbol_logits(llr, c, np.array([0, 1]), 2)
        np.testing.assert_allclose(np.exp(Z).sum(axis=1), 1.0, atol=1e-9)
        p0 = 1 / (1 + np.exp(-llr.reshape(2, K)))
        for s, j in itertools.product(range(2), range(c.order)):
            brute = np.prod([p0[s, k] if c.bits[j, k] == 0 else 1 - p0[s, k] for k in range(K)])
            assert np.isclose(np.exp(Z[s, j]), brute)

    def test_size_checked(self):
        with pytest.raises(ValueError):
            llrs_to_symbol_logits(np.zeros(4), QPSK, np.array([0]), 3)

    def test_pmf_examples(self):
        Z = np.zeros((2, 4))
        np.testing.assert_allclose(logits_to_pmf(Z, normalize=False), 0.5)
        np.testing.assert_allclose(logits_to_pmf(Z), 0.25)
        P = logits_to_pmf(np.array([[30.0, -30, -30, -30]]))
        assert P[0, 0] > 1 - 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.floats(1e-6, 1 - 1e-6))
    def test_sigmoid_logit_round_trip(self, p):
        z = np.log(p) - np.log1p(-p)
        assert np.isclose(logits_to_pmf(np.array([[z]]), normalize=False)[0, 0], p)

    def test_replica_examples(self):
        pts = QPSK.scaled(2.0)
        assert np.allclose(generate_replicas(np.full((1, 4), 0.25), QPSK, 2.0), 0)
        assert np.allclose(generate_replicas(np.eye(4), QPSK, 2.0), pts)
        assert np.isclose(generate_replicas(np.array([[0.5, 0.5, 0, 0]]), QPSK, 2.0)[0], (pts[0] + pts[1]) / 2)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_replica_energy_bound(self, seed):
        p = np.random.default_rng(seed).dirichlet(np.ones(4), size=50)
        x = generate_replicas(p, QPSK, 3.0)
        assert np.sum(np.abs(x) ** 2) <= 3.0 * 50 + 1e-9


class TestRunReceiver:
    def test_pcsi_noiseless_recovers_bits(self, rng):
        ys, metas, code, info = coded_block(rng, snr=40.0, noise=False)
        out = run_receiver(ys, metas, "qpsk", IterationPlan(0, 1), code, ReceiverOptions(pcsi=True))
        assert out.converged and np.array_equal(out.bits_hat, info)

    def test_trace_shape_and_thresholds(self, rng):
        ys, metas, code, _ = coded_block(rng)
        out = run_receiver(ys, metas, "qpsk", IterationPlan(1, 3), code)
        for t in out.traces:
            assert not t.erased and len(t.records) == 4
            assert [r.r for r in t.records] == [1, 2, 3, 4]
            assert [r.mode for r in t.records] == ["uncoded", "coded", "coded", "coded"]
            a = metas[0].alloc
            assert np.isclose(t.records[0].threshold, threshold_for(SchemeId.sp(9), 0, a.sigma2, a.sigma_d2))
            for rec in t.records[1:]:
                assert np.isclose(rec.threshold, threshold_for(SchemeId.sp(9), 1, a.sigma2, a.sigma_d2))
                assert rec.decoder_converged is not None
            assert t.records[0].decoder_converged is None

    def test_conventional_plan_replicas_only_at_end(self, rng):
        ys, metas, code, _ = coded_block(rng)
        out = run_receiver(ys, metas, "qpsk", IterationPlan(3, 1), code)
        for t in out.traces:
            for rec in t.records[:3]:
                assert "replicas" not in rec.op_counts and "decoder" not in rec.op_counts
            assert "replicas" in t.records[3].op_counts and not t.records[3].terminal

    def test_uncoded_plan_appends_terminal_decode(self, rng):
        ys, metas, code, info = coded_block(rng, snr=20.0)
        out = run_receiver(ys, metas, "qpsk", IterationPlan(2, 0), code)
        for t in out.traces:
            assert len(t.records) == 2 and t.records[-1].terminal
            assert "decoder" in t.records[-1].op_counts
        assert out.bits_hat.size == code.R_b

    def test_iterating_helps_at_high_snr(self, rng):
        ys, metas, code, info = coded_block(rng, F=1, snr=20.0)
        out = run_receiver(ys, metas, "qpsk", IterationPlan(0, 4), code)
        nm = [r.nmse for r in out.traces[0].records]
        assert nm[-1] <= nm[0]

    def test_uncoded_only_without_code(self, rng):
        lay, alloc, frame, ch, bits = frame_parts(rng, snr=30.0)
        y = ch.matrix @ frame.vectorize()
        out = run_receiver([y], [FrameMeta(lay, alloc, ch)], "qpsk", IterationPlan(1, 0), None, ReceiverOptions(pcsi=True))
        assert np.array_equal(out.bits_hat, bits)
        with pytest.raises(ConfigError):
            run_receiver([y], [FrameMeta(lay, alloc, ch)], "qpsk", IterationPlan(0, 1), None)

    def test_erased_frame(self, rng):
        ys, metas, code, _ = coded_block(rng, F=1)
        out = run_receiver([np.zeros(N * M)], metas, "qpsk", IterationPlan(0, 1), code)
        assert out.erased and out.traces[0].records[0].P_hat == 0
        assert not out.converged

    def test_capacity_mismatch(self, rng):
        ys, metas, code, _ = coded_block(rng, F=2)
        with pytest.raises(ValueError):
            run_receiver(ys[:1], metas[:1], "qpsk", IterationPlan(0, 1), code)

    def test_jsonl(self, rng):
        ys, metas, code, _ = coded_block(rng, F=1)
        out = run_receiver(ys, metas, "qpsk", IterationPlan(1, 1), code)
        lines = out.traces[0].to_jsonl(scheme="sp9").splitlines()
        assert len(lines) == 2
        d = json.loads(lines[1])
        assert d["scheme"] == "sp9" and d["r"] == 2 and d["mode"] == "coded"
        assert {"threshold", "P_hat", "nmse", "op_counts", "decoder_converged"} <= set(d)

    def test_op_count_slope(self):
        # total per-frame work grows linearly with the grid size
        totals = []
        for n in (8, 16):
            rng = np.random.default_rng(n)
            lay = FrameLayout.create(SchemeId.sp(1), n, n, 2, 1)
            alloc = allocate(15, 0.5, lay.n_data, 1, n, n)
            ch = sample_channel(rng, 4, 2, 1, n, n)
            d = QPSK.scaled(alloc.sigma_d2)[rng.integers(0, 4, lay.n_data)]
            y = ch.matrix @ build_frame(lay, alloc, d).vectorize()
            opts = ReceiverOptions(pcsi=True, mp_tol=0.0, I_MP=5)
            out = run_receiver([y], [FrameMeta(lay, alloc, ch)], "qpsk", IterationPlan(2, 0), None, opts)
            totals.append(out.traces[0].total_mults)
        slope = np.log(totals[1] / totals[0]) / np.log(4)
        assert 0.85 <= slope <= 1.15
