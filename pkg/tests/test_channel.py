import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wbansim.channel import (BASE_CHANNEL, ChannelEnvironment, ChannelId,
                             GainTable, NodePosition, PathLossModel,
                             SinrSample, active_transmitters, compute_sinr,
                             dbm_to_mw, mw_to_dbm, path_loss_db,
                             received_power_dbm, reserved_channel)

MODEL = PathLossModel(exponent_alpha=4.22, reference_loss_db=40.0,
                      reference_distance_m=1.0)


class TestPathLoss:
    def test_reference_distance(self):
        assert path_loss_db(MODEL, 1.0) == pytest.approx(40.0)

    def test_two_meters(self):
        # 40 + 42.2*log10(2)
        assert path_loss_db(MODEL, 2.0) == pytest.approx(52.70, abs=0.005)

    def test_below_reference_clamps(self):
        assert path_loss_db(MODEL, 0.5) == pytest.approx(40.0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            path_loss_db(MODEL, float("nan"))

    @given(st.floats(min_value=1.0, max_value=50.0),
           st.floats(min_value=1.0, max_value=50.0))
    def test_nondecreasing_in_distance(self, d1, d2):
        lo, hi = sorted([d1, d2])
        assert path_loss_db(MODEL, lo) <= path_loss_db(MODEL, hi) + 1e-12


class TestReceivedPower:
    def test_at_reference(self):
        assert received_power_dbm(0.0, MODEL, 1.0) == pytest.approx(-40.0)

    def test_two_meters(self):
        assert received_power_dbm(0.0, MODEL, 2.0) == pytest.approx(-52.70, abs=0.005)

    def test_lower_tx_power(self):
        assert received_power_dbm(-10.0, MODEL, 1.0) == pytest.approx(-50.0)


class TestComputeSinr:
    def test_no_interferers(self):
        assert compute_sinr(-60.0, [], -100.0) == pytest.approx(40.0)

    def test_equal_interferer_dominates_noise(self):
        # exactly -10*log10(1 + 1e-4) = -0.000434 dB
        assert compute_sinr(-60.0, [-60.0], -100.0) == pytest.approx(0.0, abs=1e-3)

    def test_two_interferers(self):
        # linear: 1e-5 / (2e-7 + 1e-10)
        assert compute_sinr(-50.0, [-70.0, -70.0], -100.0) == pytest.approx(
            16.99, abs=0.005)

    def test_rejects_non_finite_noise(self):
        with pytest.raises(ValueError):
            compute_sinr(-60.0, [], float("inf"))

    @given(st.floats(min_value=-90, max_value=0),
           st.lists(st.floats(min_value=-90, max_value=0), max_size=6),
           st.floats(min_value=-120, max_value=-60))
    @settings(max_examples=200)
    def test_matches_extended_precision_reference(self, desired, interf, noise):
        import mpmath
        mpmath.mp.dps = 50
        ten = mpmath.mpf(10)
        denom = ten ** (mpmath.mpf(noise) / 10)
        for x in interf:
            denom += ten ** (mpmath.mpf(x) / 10)
        expected = float(10 * mpmath.log10(ten ** (mpmath.mpf(desired) / 10) / denom))
        assert compute_sinr(desired, interf, noise) == pytest.approx(
            expected, abs=1e-9)

    @given(st.floats(min_value=-90, max_value=-10),
           st.floats(min_value=0.1, max_value=20),
           st.floats(min_value=-90, max_value=-10))
    def test_monotone_in_desired(self, desired, bump, interferer):
        lo = compute_sinr(desired, [interferer], -100.0)
        hi = compute_sinr(desired + bump, [interferer], -100.0)
        assert hi > lo

    @given(st.floats(min_value=-90, max_value=-10),
           st.floats(min_value=0.1, max_value=20),
           st.floats(min_value=-90, max_value=-10))
    def test_antitone_in_interference(self, interferer, bump, desired):
        clean = compute_sinr(desired, [interferer], -100.0)
        dirty = compute_sinr(desired, [interferer + bump], -100.0)
        assert dirty < clean


class TestChannelIds:
    def test_base_has_no_index(self):
        with pytest.raises(ValueError):
            ChannelId("base", 1)

    def test_reserved_needs_index(self):
        with pytest.raises(ValueError):
            ChannelId("reserved")

    def test_reserved_distinct(self):
        assert reserved_channel(0) != reserved_channel(1)
        assert reserved_channel(2) == reserved_channel(2)


class TestSinrSample:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            SinrSample(float("nan"), 0.0, BASE_CHANNEL, 1)


class TestActiveTransmitters:
    def test_empty(self):
        env = ChannelEnvironment()
        assert active_transmitters(env, BASE_CHANNEL, 1.0) == set()

    def test_orthogonality(self):
        env = ChannelEnvironment()
        env.register(1, BASE_CHANNEL, 0.0, 1.0)
        env.register(2, BASE_CHANNEL, 0.0, 1.0)
        env.register(3, reserved_channel(0), 0.0, 1.0)
        assert active_transmitters(env, BASE_CHANNEL, 0.5) == {1, 2}
        assert active_transmitters(env, reserved_channel(0), 0.5) == {3}

    def test_packet_airtime_interval(self):
        # 12 bytes at 250 kbps: 96 / 250000 s = 0.384 ms
        airtime = 96 / 250_000
        env = ChannelEnvironment()
        env.register(5, BASE_CHANNEL, 0.010, 0.010 + airtime)
        assert active_transmitters(env, BASE_CHANNEL, 0.0102) == {5}
        assert active_transmitters(env, BASE_CHANNEL, 0.010 + airtime) == set()

    def test_truncate(self):
        env = ChannelEnvironment()
        tx = env.register(1, BASE_CHANNEL, 0.0, 1.0)
        env.truncate(tx, 0.25)
        assert active_transmitters(env, BASE_CHANNEL, 0.5) == set()

    def test_double_registration_rejected(self):
        env = ChannelEnvironment()
        env.register(1, BASE_CHANNEL, 0.0, 1.0)
        with pytest.raises(ValueError):
            env.register(1, reserved_channel(0), 0.5, 1.5)

    def test_prune(self):
        env = ChannelEnvironment()
        env.register(1, BASE_CHANNEL, 0.0, 1.0)
        env.register(2, BASE_CHANNEL, 2.0, 3.0)
        env.prune(1.5)
        assert [t.node_id for t in env.transmissions] == [2]

    @given(st.lists(st.tuples(st.integers(0, 9), st.booleans(),
                              st.floats(min_value=0, max_value=10),
                              st.floats(min_value=0.01, max_value=2)),
                    max_size=12),
           st.floats(min_value=0, max_value=12))
    def test_node_on_one_channel_at_a_time(self, entries, when):
        env = ChannelEnvironment()
        for node, on_base, start, dur in entries:
            ch = BASE_CHANNEL if on_base else reserved_channel(0)
            try:
                env.register(node, ch, start, start + dur)
            except ValueError:
                pass
        base = active_transmitters(env, BASE_CHANNEL, when)
        res = active_transmitters(env, reserved_channel(0), when)
        assert not base & res


class TestGainTable:
    def test_symmetry_and_scale(self):
        positions = {0: NodePosition(0, 0.0, 0.0), 1: NodePosition(1, 0.0, 2.0)}
        gains = GainTable(positions, MODEL)
        assert gains.gain[0][1] == pytest.approx(gains.gain[1][0])
        assert mw_to_dbm(gains.gain[0][1]) == pytest.approx(-52.70, abs=0.005)

    def test_rx_mw(self):
        positions = {0: NodePosition(0, 0.0, 0.0), 1: NodePosition(1, 1.0, 0.0)}
        gains = GainTable(positions, MODEL)
        assert gains.rx_mw(dbm_to_mw(0.0), 0, 1) == pytest.approx(dbm_to_mw(-40.0))
