import math

import numpy as np
import pytest

from sideinfo.ba import (
    ChannelInstance,
    SolverOptions,
    ba_capacity,
    ba_rate_distortion,
    gp_channel_capacity,
    pair_source,
    wz_primal,
)
from sideinfo.probability import Alphabet, CondKernel, JointPmf, binary_entropy
from sideinfo.problems import example3_source

HAMMING = 1.0 - np.eye(2)
TIGHT = SolverOptions(delta=1e-9)


class TestCapacity:
    def test_noiseless_binary(self):
        rep = ba_capacity(np.eye(2))
        assert rep.value == pytest.approx(1.0, abs=1e-6)

    def test_bsc_closed_form(self):
        rep = ba_capacity(np.array([[0.9, 0.1], [0.1, 0.9]]), TIGHT)
        assert rep.value == pytest.approx(1.0 - binary_entropy(0.1), abs=1e-9)
        assert rep.converged

    def test_useless_channel(self):
        rep = ba_capacity(np.array([[0.3, 0.7], [0.3, 0.7]]))
        assert rep.value == pytest.approx(0.0, abs=1e-12)

    def test_trace_monotone_and_bracket(self):
        rng = np.random.default_rng(11)
        p = rng.random((3, 4)) + 0.05
        p /= p.sum(axis=1, keepdims=True)
        rep = ba_capacity(p, TIGHT)
        lows = [lo for lo, up in rep.trace]
        assert all(lows[i + 1] >= lows[i] - 1e-12 for i in range(len(lows) - 1))
        assert all(up >= lo for lo, up in rep.trace)
        assert rep.gap >= 0.0

    def test_zary_symmetric(self):
        # ternary symmetric channel, closed form log2(3) - H(noise)
        e = 0.1
        p = np.full((3, 3), e / 2)
        np.fill_diagonal(p, 1 - e)
        rep = ba_capacity(p, TIGHT)
        expected = math.log2(3) - (-(1 - e) * math.log2(1 - e) - e * math.log2(e / 2))
        assert rep.value == pytest.approx(expected, abs=1e-8)


class TestRateDistortion:
    def test_binary_hamming_closed_form(self):
        rep = ba_rate_distortion(np.array([0.5, 0.5]), HAMMING, 0.1, TIGHT)
        assert rep.value == pytest.approx(1.0 - binary_entropy(0.1), abs=1e-6)

    def test_zero_rate_beyond_half(self):
        rep = ba_rate_distortion(np.array([0.5, 0.5]), HAMMING, 0.5)
        assert rep.value == 0.0
        rep = ba_rate_distortion(np.array([0.5, 0.5]), HAMMING, 0.7)
        assert rep.value == 0.0

    def test_lossless_distortion_zero(self):
        rep = ba_rate_distortion(np.array([0.5, 0.5]), HAMMING, 0.0)
        assert rep.value == pytest.approx(1.0, abs=1e-3)

    def test_distortion_floor_flagged(self):
        d = np.array([[1.0, 2.0], [2.0, 1.0]])
        rep = ba_rate_distortion(np.array([0.5, 0.5]), d, 0.5)
        assert rep.status == "distortion-floor"
        assert rep.extras["distortion_floor"] == pytest.approx(1.0)

    def test_curve_nonincreasing_and_convex(self):
        p = np.array([0.4, 0.6])
        ds = [0.02 * k for k in range(1, 16)]
        vals = [ba_rate_distortion(p, HAMMING, d).value for d in ds]
        assert all(vals[i + 1] <= vals[i] + 1e-9 for i in range(len(vals) - 1))
        assert all(
            vals[i - 1] + vals[i + 1] - 2 * vals[i] >= -1e-6 for i in range(1, len(vals) - 1)
        )


class TestWynerZiv:
    def test_zero_distortion_is_conditional_entropy(self):
        src = example3_source()
        rep = wz_primal(src, 0.0, TIGHT)
        assert rep.value == pytest.approx(binary_entropy(0.3), abs=1e-4)

    def test_zero_rate_at_crossover(self):
        src = example3_source()
        assert wz_primal(src, 0.3).value == pytest.approx(0.0, abs=1e-6)
        assert wz_primal(src, 0.45).value == pytest.approx(0.0, abs=1e-6)

    def test_known_strict_region_value(self):
        # below the time-sharing point the curve is H(0.3*D) - H(D)
        src = example3_source()
        rep = wz_primal(src, 0.1)
        pstar = 0.3 * 0.9 + 0.7 * 0.1
        assert rep.value == pytest.approx(binary_entropy(pstar) - binary_entropy(0.1), abs=1e-6)

    def test_independent_side_equals_rate_distortion(self):
        x = Alphabet(2, "X")
        s2 = Alphabet(2, "S")
        joint = np.einsum("x,s->xs", [0.4, 0.6], [0.5, 0.5]).reshape(2, 1, 2)
        from sideinfo.ba import SourceInstance

        src = SourceInstance(x, x, Alphabet(1, "S1"), s2, JointPmf((x, Alphabet(1, "S1"), s2), joint), HAMMING)
        for d in (0.05, 0.15, 0.25):
            wz = wz_primal(src, d, TIGHT)
            rd = ba_rate_distortion(np.array([0.4, 0.6]), HAMMING, d, TIGHT)
            assert wz.value == pytest.approx(rd.value, abs=1e-6)

    def test_degenerate_side_axis_equals_rate_distortion(self):
        x = Alphabet(2, "X")
        from sideinfo.ba import SourceInstance

        src = SourceInstance(
            x, x, Alphabet(1, "S1"), Alphabet(1, "S"),
            JointPmf((x, Alphabet(1, "S1"), Alphabet(1, "S")), np.array([[[0.35]], [[0.65]]])),
            HAMMING,
        )
        for d in (0.05, 0.2):
            wz = wz_primal(src, d, TIGHT)
            rd = ba_rate_distortion(np.array([0.35, 0.65]), HAMMING, d, TIGHT)
            assert wz.value == pytest.approx(rd.value, abs=1e-6)

    def test_curve_nonincreasing_and_convex(self):
        src = example3_source()
        ds = [0.03 * k for k in range(10)]
        vals = [wz_primal(src, d).value for d in ds]
        assert all(vals[i + 1] <= vals[i] + 1e-9 for i in range(len(vals) - 1))
        assert all(
            vals[i - 1] + vals[i + 1] - 2 * vals[i] >= -1e-6 for i in range(1, len(vals) - 1)
        )

    def test_rejects_two_sided_source(self):
        from sideinfo.ba import SourceInstance
        from sideinfo.probability import ProbabilityError

        x = Alphabet(2, "X")
        s = Alphabet(2, "S")
        src = SourceInstance(x, x, s, s, JointPmf((x, s, s), np.full((2, 2, 2), 0.125)), HAMMING)
        with pytest.raises(ProbabilityError):
            wz_primal(src, 0.1)
        merged = pair_source(src)
        assert merged.x.size == 4 and merged.s1.size == 1
        wz_primal(merged, 0.1)  # merged source is accepted


class TestStrategyCapacity:
    def make_state_channel(self, kern, sj=None):
        x, y = Alphabet(2, "X"), Alphabet(2, "Y")
        s1, s2 = Alphabet(2, "S1"), Alphabet(2, "S2")
        state = JointPmf((s1, s2), np.full((2, 2), 0.25) if sj is None else sj)
        return ChannelInstance(x, y, s1, s2, state, CondKernel((x, s1, s2), (y,), kern))

    def test_state_independent_channel_equals_plain_capacity(self):
        rng = np.random.default_rng(13)
        k = rng.random((2, 2)) + 0.1
        k /= k.sum(axis=1, keepdims=True)
        kern = np.broadcast_to(k[:, None, None, :], (2, 2, 2, 2)).copy()
        ch = self.make_state_channel(kern)
        gp = gp_channel_capacity(ch, ("s1",), (), SolverOptions(delta=1e-8))
        ba = ba_capacity(k, SolverOptions(delta=1e-8))
        assert gp.value == pytest.approx(ba.value, abs=1e-6)

    def test_noiseless_channel_one_bit(self):
        kern = np.zeros((2, 2, 2, 2))
        for x in range(2):
            kern[x, :, :, x] = 1.0
        ch = self.make_state_channel(kern)
        gp = gp_channel_capacity(ch, ("s1",), ("s2",), SolverOptions(delta=1e-8))
        assert gp.value == pytest.approx(1.0, abs=1e-6)

    def test_trace_monotone(self):
        rng = np.random.default_rng(14)
        kern = rng.random((2, 2, 2, 2)) + 0.05
        kern /= kern.sum(axis=3, keepdims=True)
        sj = rng.random((2, 2)) + 0.05
        sj /= sj.sum()
        ch = self.make_state_channel(kern, sj)
        rep = gp_channel_capacity(ch, ("s1",), ("s2",), SolverOptions(delta=1e-8))
        lows = [lo for lo, up in rep.trace]
        assert all(lows[i + 1] >= lows[i] - 1e-10 for i in range(len(lows) - 1))
        assert all(up >= lo - 1e-12 for lo, up in rep.trace)
