import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wbansim.config import ConfigError, SimConfig
from wbansim.engine import (COORDINATOR_ID, EnergyLedger, Engine, EventQueue,
                            InvariantViolation, place_nodes, run, spend_energy,
                            traffic_arrivals)


class TestEventQueue:
    def test_time_order(self):
        q = EventQueue()
        q.push(2.0, 1, "b")
        q.push(1.0, 2, "a")
        assert q.pop()[2] == "a"
        assert q.pop()[2] == "b"

    def test_fifo_on_ties(self):
        q = EventQueue()
        for i in range(5):
            q.push(1.0, i, f"e{i}")
        assert [q.pop()[2] for _ in range(5)] == [f"e{i}" for i in range(5)]

    @given(st.lists(st.floats(min_value=0, max_value=100), max_size=40))
    def test_pop_never_decreases(self, times):
        q = EventQueue()
        for i, t in enumerate(times):
            q.push(t, i, i)
        seen = [q.pop()[0] for _ in range(len(times))]
        assert seen == sorted(seen)


class TestPlaceNodes:
    def test_coordinator_at_center(self):
        cfg = SimConfig()
        positions = {p.node_id: p for p in place_nodes(cfg, random.Random(1))}
        assert (positions[COORDINATOR_ID].x, positions[COORDINATOR_ID].y) == (1.0, 1.0)

    def test_four_relays_on_midpoints(self):
        cfg = SimConfig()
        positions = place_nodes(cfg, random.Random(1))
        relays = [(p.x, p.y) for p in positions[1:5]]
        assert relays == [(1.0, 0.5), (1.0, 1.5), (0.5, 1.0), (1.5, 1.0)]

    def test_same_seed_same_sources(self):
        cfg = SimConfig()
        a = place_nodes(cfg, random.Random("s"))
        b = place_nodes(cfg, random.Random("s"))
        assert [(p.x, p.y) for p in a] == [(p.x, p.y) for p in b]

    def test_sources_inside_area(self):
        cfg = SimConfig(n_sources=30)
        for p in place_nodes(cfg, random.Random(3)):
            assert 0.0 <= p.x <= cfg.area_x_m
            assert 0.0 <= p.y <= cfg.area_y_m

    def test_positions_file_roundtrip(self, tmp_path):
        cfg = SimConfig(n_sources=2, n_relays=1)
        path = tmp_path / "pos.txt"
        path.write_text("0 1.0 1.0\n1 0.5 1.0\n2 0.2 0.2\n3 1.8 1.8\n")
        got = place_nodes(cfg.replace(positions_file=str(path)), random.Random(1))
        assert [(p.node_id, p.x, p.y) for p in got] == [
            (0, 1.0, 1.0), (1, 0.5, 1.0), (2, 0.2, 0.2), (3, 1.8, 1.8)]


class TestSpendEnergy:
    def ledger(self, initial=5.0):
        return EnergyLedger([1], initial)

    def test_packet_transmission_cost(self):
        led = self.ledger()
        spend_energy(led, 1, "tx", 0.000384, 0.0522)
        assert led.cumulative[1]["tx"] == pytest.approx(20.04e-6, rel=1e-3)
        assert led.remaining(1) == pytest.approx(5.0 - 20.04e-6)

    def test_zero_duration_no_change(self):
        led = self.ledger()
        spend_energy(led, 1, "listen", 0.0, 0.05)
        assert led.remaining(1) == 5.0

    def test_overdraw_clamps_and_kills(self):
        led = self.ledger(initial=1e-6)
        spend_energy(led, 1, "tx", 1.0, 1.0)
        assert led.remaining(1) == pytest.approx(0.0)
        assert led.is_dead(1)

    def test_negative_duration_is_fault(self):
        with pytest.raises(Exception):
            spend_energy(self.ledger(), 1, "tx", -1.0, 0.05)

    def test_conservation_identity(self):
        led = self.ledger()
        for i in range(200):
            spend_energy(led, 1, "listen", 1e-4, 0.0564)
            spend_energy(led, 1, "tx", 1e-5, 0.0522)
        assert led.conservation_drift(1) <= 1e-12 * 5.0


class TestTrafficArrivals:
    def rngs(self, cfg):
        return {s: random.Random(f"1/{s}") for s in range(100)}

    def test_saturated(self):
        cfg = SimConfig(p_traffic=1.0)
        assert traffic_arrivals(cfg, self.rngs(cfg), [1, 2, 3]) == {1, 2, 3}

    def test_silent(self):
        cfg = SimConfig(p_traffic=0.0)
        assert traffic_arrivals(cfg, self.rngs(cfg), [1, 2, 3]) == set()

    def test_binomial_mean(self):
        cfg = SimConfig(p_traffic=0.5)
        rngs = self.rngs(cfg)
        sources = list(range(12))
        total = sum(len(traffic_arrivals(cfg, rngs, sources))
                    for _ in range(10_000))
        assert total / 10_000 == pytest.approx(6.0, abs=0.1)


class TestRunBasics:
    def test_determinism_trace_and_stats(self):
        cfg = SimConfig(duration_s=3.0, seed=11, trace_enabled=True)
        a, b = run(cfg), run(cfg)
        assert json.dumps(a.trace, sort_keys=True) == json.dumps(b.trace, sort_keys=True)
        assert [f.energy_residue_j for f in a.frame_stats] == \
               [f.energy_residue_j for f in b.frame_stats]

    def test_no_traffic_spends_no_tx_on_sources(self):
        cfg = SimConfig(duration_s=0.5, p_traffic=0.0)
        result = run(cfg)
        assert result.delivered_total == 0
        eng_cfg = SimConfig(duration_s=0.5, p_traffic=0.0)
        res = run(eng_cfg)
        for s in range(1 + res.config.n_relays,
                       1 + res.config.n_relays + res.config.n_sources):
            assert res.ledger.cumulative[s]["tx"] == 0.0
            assert res.ledger.cumulative[s]["rx"] > 0.0   # beacons

    def test_single_source_delivers_every_frame(self):
        cfg = SimConfig(duration_s=3.0, n_sources=1, trace_enabled=True)
        result = run(cfg)
        assert result.frames_run > 1
        assert result.delivered_total >= result.frames_run
        cases = [e["cases"] for e in result.trace if e["event"] == "superframe"]
        src = 1 + cfg.n_relays
        assert all(c.get(str(src)) == "case1" or c.get(src) == "case1"
                   for c in cases)

    def test_energy_monotone_nonincreasing(self):
        cfg = SimConfig(duration_s=3.0, seed=5)
        res = run(cfg)
        series = [f.energy_residue_j for f in res.frame_stats]
        assert all(b <= a + 1e-12 for a, b in zip(series, series[1:]))

    def test_dead_node_stops_participating(self):
        cfg = SimConfig(duration_s=3.0, initial_energy_j=0.005, n_sources=2)
        res = run(cfg)
        assert res.ledger.dead
        for n in res.ledger.dead:
            assert res.ledger.remaining(n) == pytest.approx(0.0, abs=1e-12)

    def test_invariants_clean_for_all_schemes(self):
        for scheme in ("iaa", "or", "pc"):
            cfg = SimConfig(duration_s=2.0, scheme=scheme, seed=2,
                            check_invariants=True)
            run(cfg)

    def test_delivered_counts_nondecreasing(self):
        res = run(SimConfig(duration_s=2.0, seed=9))
        series = [f.delivered_total for f in res.frame_stats]
        assert all(b >= a for a, b in zip(series, series[1:]))


class TestConfig:
    def test_validation_names_field(self):
        with pytest.raises(ConfigError, match="n_sources"):
            SimConfig(n_sources=0).validate()

    def test_unknown_scheme(self):
        with pytest.raises(ConfigError, match="scheme"):
            SimConfig(scheme="tdma").validate()

    def test_parse_and_override(self):
        from wbansim.config import parse_config_text
        cfg = parse_config_text("""
# comment
duration_s = 12.5
scheme = pc
n_sources = 6
trace_enabled = true
""")
        assert cfg.duration_s == 12.5
        assert cfg.scheme == "pc"
        assert cfg.n_sources == 6
        assert cfg.trace_enabled is True

    def test_parse_rejects_unknown_key(self):
        from wbansim.config import parse_config_text
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("frobnicate = 7")

    def test_airtime(self):
        assert SimConfig().packet_airtime_s == pytest.approx(0.000384)
