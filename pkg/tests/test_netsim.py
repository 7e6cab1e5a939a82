import random

import numpy as np
import pytest

from contract_lens.cca import CcaSpec, RedParams, default_contract
from contract_lens.errors import ConfigError, EmptyWindow
from contract_lens.netsim import (Dumbbell, LinkSpec, NoiseSpec, ParkingLot, ScenarioSpec, audit_trace,
                                  compiled_available, measure_statistic, red_mark, red_probability, run,
                                  select_engine)
from contract_lens.netsim.io import (TRACE_HEADER, trace_csv_text, write_series_csv, write_summary_csv,
                                     write_trace_csv)
from contract_lens.netsim.spec import FlowSummary

from conftest import CAP, ENGINES, MS, RTPROP, SER, dumbbell

C1 = default_contract(1.0, CAP, RTPROP, 0.3)
C2 = default_contract(2.0, CAP, RTPROP, 0.3)
RED = RedParams(20, 220, 1.0)


def scenarios():
    """Small runs exercising every code path of the engines."""
    link = LinkSpec(CAP, RTPROP // 2)
    return {
        "canonical": dumbbell(CcaSpec("canonical_rtt_ratio", C1), duration_ms=800, trace=True,
                              sample_interval=RTPROP),
        "parking": ScenarioSpec(ParkingLot(3), link, CcaSpec("max_hop_delay_canonical", C1),
                                duration=800 * MS, trace=True),
        "aimd": ScenarioSpec(ParkingLot(2), link, CcaSpec("aimd_on_delay", threshold_ns=2 * RTPROP),
                             duration=800 * MS, trace=True),
        "reno_buffer": dumbbell(CcaSpec("reno_loss"), flows=3, duration_ms=800, trace=True,
                                link=LinkSpec(CAP, RTPROP // 2, buffer=20)),
        "ecn": dumbbell(CcaSpec("ecn_canonical", C1.__class__.power_law(
            0.5, 0.001, 0.9, rate_scale=CAP / 2, stat_scale=0.002), red=RED), flows=3, duration_ms=3000,
            trace=True, link=LinkSpec(CAP, RTPROP // 2, red=RED), seed=7),
        "noise_swift": dumbbell(CcaSpec("swift_like", C2), duration_ms=800, trace=True,
                                noise=(NoiseSpec(1, 3 * MS),), start_times=(0, 100 * MS)),
        "mimd": dumbbell((CcaSpec("mimd_rate_ratio", C2), CcaSpec("mimd_delay_ratio", C2, clamp_hi=2.0)),
                         duration_ms=800, trace=True, sample_interval=RTPROP),
        "vegas": dumbbell(CcaSpec("vegas"), flows=4, duration_ms=800, trace=True),
    }


SCENARIOS = scenarios()


class TestEngines:
    @pytest.mark.skipif(not compiled_available(), reason="compiled engine not built")
    @pytest.mark.parametrize("name", list(SCENARIOS))
    def test_compiled_matches_python(self, name):
        spec = SCENARIOS[name]
        a, b = run(spec, "python"), run(spec, "c")
        assert a.trace == b.trace
        assert a.flows == b.flows
        assert a.series == b.series
        assert a.events == b.events

    @pytest.mark.parametrize("engine", ENGINES)
    @pytest.mark.parametrize("name", list(SCENARIOS))
    def test_audits(self, name, engine):
        r = run(SCENARIOS[name], engine)
        assert r.audit and all(r.audit.values()), r.audit

    @pytest.mark.parametrize("engine", ENGINES)
    def test_deterministic_trace_bytes(self, engine):
        spec = SCENARIOS["ecn"]
        assert trace_csv_text(run(spec, engine)) == trace_csv_text(run(spec, engine))

    def test_seed_changes_red_draws(self):
        spec = SCENARIOS["ecn"]
        from dataclasses import replace
        assert run(spec).trace != run(replace(spec, seed=8)).trace

    def test_env_forces_python(self, monkeypatch):
        monkeypatch.setenv("CONTRACT_LENS_PURE_PYTHON", "1")
        assert run(SCENARIOS["vegas"]).engine == "python"

    def test_unknown_engine(self):
        with pytest.raises(ValueError):
            select_engine("fortran")


class TestSummaries:
    def test_symmetric_split(self):
        r = run(dumbbell(CcaSpec("canonical_rtt_ratio", C1)))
        for f in r.flows:
            assert f.throughput == pytest.approx(CAP / 2, rel=0.05)

    def test_parking_lot_ratio(self):
        spec = ScenarioSpec(ParkingLot(2), LinkSpec(CAP, RTPROP // 2), CcaSpec("canonical_rtt_ratio", C1),
                            duration=6000 * MS)
        th = run(spec).throughputs
        assert (th[1] + th[2]) / 2 / th[0] == pytest.approx(2.0, rel=0.15)

    @pytest.mark.parametrize("name", list(SCENARIOS))
    def test_flow_invariants(self, name):
        spec = SCENARIOS[name]
        r = run(spec)
        for f in r.flows:
            assert f.throughput <= CAP * 1.001
            assert f.delay_min >= f.rtprop
            assert 0.0 <= f.loss_rate <= 1.0
            assert 0.0 <= f.ecn_rate <= 1.0

    def test_finite_buffer_drops(self):
        r = run(SCENARIOS["reno_buffer"])
        assert any(f.loss_rate > 0 for f in r.flows)
        assert max(r.links["max_queue"]) <= 20

    def test_red_marks_without_drops(self):
        r = run(SCENARIOS["ecn"])
        assert sum(r.counters["dropped"]) == 0
        assert any(f.ecn_rate > 0 for f in r.flows)

    def test_undisclosed_noise_shows_up_in_rtt(self):
        extra = 4 * MS
        spec = dumbbell(CcaSpec("canonical_rtt_ratio", C1), noise=(NoiseSpec(1, extra),), trace=True)
        r = run(spec)
        w = (spec.warmup_ns, spec.duration)
        clean = measure_statistic(r.trace, "queue_delay", w, 0, spec.cca_rtprop(0))
        noisy = measure_statistic(r.trace, "queue_delay", w, 1, spec.cca_rtprop(1))
        assert noisy - clean == pytest.approx(extra, abs=SER)
        assert spec.cca_rtprop(1) == spec.true_rtprop(1) - extra

    def test_disclosed_noise_is_part_of_rtprop(self):
        spec = dumbbell(CcaSpec("canonical_rtt_ratio", C1), noise=(NoiseSpec(1, 4 * MS, True),))
        assert spec.cca_rtprop(1) == spec.true_rtprop(1)

    def test_starved_flow_is_flagged(self):
        spec = ScenarioSpec(ParkingLot(2), LinkSpec(CAP, RTPROP // 2),
                            CcaSpec("aimd_on_delay", threshold_ns=2 * RTPROP, md_factor=0.8),
                            duration=6000 * MS)
        r = run(spec)
        assert r.stalled == [0]

    def test_series_shape(self):
        r = run(SCENARIOS["canonical"])
        assert len(r.series["time"]) == len(r.series["cwnd"]) == len(r.series["qlen"]) > 0
        assert len(r.series["cwnd"][0]) == 2


class TestRed:
    def test_probability_edges(self):
        assert red_probability(20, RED) == 0.0
        assert red_probability(5, RED) == 0.0
        assert red_probability(220, RED) == 1.0
        assert red_probability(500, RedParams(20, 220, 0.3)) == 0.3
        assert red_probability(120, RedParams(20, 220, 0.4)) == pytest.approx(0.2)

    def test_monte_carlo_midpoint(self):
        rng = random.Random(12345)
        hits = sum(red_mark(120, RED, rng) for _ in range(10_000))
        assert hits / 10_000 == pytest.approx(0.5, abs=0.02)

    def test_no_draw_below_threshold(self):
        rng = random.Random(1)
        state = rng.getstate()
        assert not red_mark(3, RED, rng)
        assert rng.getstate() == state


class TestMeasure:
    def trace(self):
        # flow 0: rtprop 10 ms, rtts 10, 12, 11 ms; flow 1 never acked
        return [
            (0, 0, "send", 0, -1, 6000), (1, 0, "send", 1, -1, 6000), (2, 0, "send", 2, -1, 6000),
            (3, 0, "send", 3, -1, 6000), (4, 1, "send", 0, -1, 6000),
            (10_000_000, 0, "ack", 0, 10_000_000, 6000, 0),
            (12_000_001, 0, "ack", 1, 12_000_000, 6000, 2_000_000),
            (12_500_000, 0, "drop", 3, -1, 6000),
            (13_000_002, 0, "mark", 2, -1, 6000),
            (13_000_002, 0, "ack", 2, 11_000_000, 6000, 1_000_000),
        ]

    def test_zero_queue(self):
        assert measure_statistic(self.trace(), "queue_delay", (0, 10**9), 0, 10_000_000) == 0.0

    def test_delays(self):
        t = self.trace()
        assert measure_statistic(t, "avg_delay", (0, 10**9), 0) == pytest.approx(11_000_000)
        assert measure_statistic(t, "p50_delay", (0, 10**9), 0) == pytest.approx(11_000_000)
        assert measure_statistic(t, "queue_delay", (11_000_000, 10**9), 0, 10_000_000) == 1_000_000

    def test_rates(self):
        t = self.trace()
        assert measure_statistic(t, "loss_rate", (0, 10**9), 0) == pytest.approx(0.25)
        assert measure_statistic(t, "ecn_rate", (0, 10**9), 0) == pytest.approx(1 / 3)

    def test_max_per_hop(self):
        assert measure_statistic(self.trace(), "max_per_hop_delay", (11_000_000, 10**9), 0) == 1_000_000

    def test_empty_window(self):
        with pytest.raises(EmptyWindow):
            measure_statistic(self.trace(), "avg_delay", (0, 10**9), 1)
        with pytest.raises(EmptyWindow):
            measure_statistic(self.trace(), "loss_rate", (10**8, 10**9), 0)

    def test_standing_queue(self):
        # vegas parks alpha packets in the queue; frozen oracle 5 * 120 us
        spec = dumbbell(CcaSpec("vegas", alpha_pkts=5.0), flows=1, trace=True)
        r = run(spec)
        q = measure_statistic(r.trace, "queue_delay", (spec.warmup_ns, spec.duration), 0, r.flows[0].rtprop)
        assert q == pytest.approx(600_000, abs=SER)

    def test_two_hop_max(self):
        # short flows keep their own hop busy; the long flow's largest hop delay is the larger queue
        spec = ScenarioSpec(ParkingLot(2), LinkSpec(CAP, RTPROP // 2),
                            (CcaSpec("vegas", alpha_pkts=2.0), CcaSpec("vegas", alpha_pkts=2.0),
                             CcaSpec("vegas", alpha_pkts=8.0)), duration=4000 * MS, trace=True)
        r = run(spec)
        w = (spec.warmup_ns, spec.duration)
        hop = measure_statistic(r.trace, "max_per_hop_delay", w, 0)
        q1 = measure_statistic(r.trace, "max_per_hop_delay", w, 1)
        q2 = measure_statistic(r.trace, "max_per_hop_delay", w, 2)
        assert hop == pytest.approx(max(q1, q2), abs=2 * SER)
        assert q2 > q1


class TestAuditTrace:
    def test_detects_unknown_seq(self):
        bad = [(0, 0, "send", 0, -1, 1), (5, 0, "ack", 7, 5, 1)]
        assert not audit_trace(bad, 1)["trace_consistent"]

    def test_detects_time_reversal(self):
        bad = [(5, 0, "send", 0, -1, 1), (1, 0, "send", 1, -1, 1)]
        assert not audit_trace(bad, 1)["trace_consistent"]


class TestValidation:
    @pytest.mark.parametrize("kw", [dict(capacity=0.0, prop_delay=1), dict(capacity=1.0, prop_delay=-1),
                                    dict(capacity=1.0, prop_delay=1, buffer=0),
                                    dict(capacity=1.0, prop_delay=1, buffer=10, red=RedParams(2, 20))])
    def test_link(self, kw):
        with pytest.raises(ConfigError):
            LinkSpec(**kw)

    def test_topologies(self):
        with pytest.raises(ConfigError):
            Dumbbell(0)
        with pytest.raises(ConfigError):
            ParkingLot(0)
        assert ParkingLot(3).paths() == [(0, 1, 2), (0,), (1,), (2,)]
        assert ParkingLot(3).n_flows == 4

    @pytest.mark.parametrize("kw", [dict(duration=0), dict(warmup_fraction=1.0),
                                    dict(noise=(NoiseSpec(5, 1),)),
                                    dict(noise=(NoiseSpec(0, 1), NoiseSpec(0, 2))),
                                    dict(start_times=(0,)), dict(cca=(CcaSpec("vegas"),) * 3),
                                    dict(packet_size=0), dict(max_burst=0)])
    def test_scenario(self, kw):
        base = dict(topology=Dumbbell(2), link=LinkSpec(CAP, RTPROP // 2), cca=CcaSpec("vegas"),
                    duration=MS)
        base.update(kw)
        with pytest.raises(ConfigError):
            ScenarioSpec(**base)

    def test_fair_share(self):
        spec = ScenarioSpec(ParkingLot(2), LinkSpec(CAP, 1), CcaSpec("vegas"), duration=MS)
        assert spec.fair_share(0) == spec.fair_share(1) == CAP / 2


class TestIo:
    def test_trace_csv(self, tmp_path):
        r = run(SCENARIOS["aimd"])
        path = write_trace_csv(r, tmp_path / "trace.csv", {"x": 1})
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# contract_lens=") and "seed=1" in lines[0]
        assert lines[1] == ",".join(TRACE_HEADER)
        assert len(lines) == len(r.trace) + 2

    def test_summary_and_series(self, tmp_path):
        r = run(SCENARIOS["canonical"])
        s = write_summary_csv(r, tmp_path / "summary.csv").read_text().splitlines()
        assert s[1] == ",".join(FlowSummary.FIELDS) and len(s) == 4
        t = write_series_csv(r, tmp_path / "series.csv").read_text().splitlines()
        assert t[1] == "time_ns,cwnd_0,cwnd_1,queue_0"

    def test_trace_needed(self):
        r = run(dumbbell(CcaSpec("vegas"), duration_ms=100))
        with pytest.raises(ValueError):
            trace_csv_text(r)

    def test_rtt_column_values(self):
        r = run(SCENARIOS["vegas"])
        acks = np.array([row[4] for row in r.trace if row[2] == "ack"])
        assert acks.min() >= r.flows[0].rtprop
