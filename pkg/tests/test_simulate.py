"""Swap timeline construction, overlap accounting, and design comparison."""

from __future__ import annotations

import pytest
from helpers import baseline_design, static_truth_model, swap_truth_model

from swapsim.perf import decode_step_latency, prefill_latency
from swapsim.simulate import (
    ModelShape,
    ReconfigParams,
    Trigger,
    compare_designs,
    overhead_report,
    simulate_end_to_end,
    simulate_prefill,
)

RP_45MS = ReconfigParams(t_reconfig=0.045)


def exact_tail_model(tail_seconds: float):
    """Single-layer model whose whole prefill is one post-attention tail."""
    from helpers import baseline_config

    from swapsim.perf import PhaseLatencyModel

    return PhaseLatencyModel(
        p_proj=tail_seconds, p_atten=0.0, d_proj=0.01, d_atten=1e-5, t_weights=0.0,
        baseline=baseline_config(),
    )


class TestPrefillTimeline:
    def test_duration_conservation(self):
        m = swap_truth_model()
        d = baseline_design()
        shape = ModelShape(24)
        for tokens in (64, 768, 2048):
            timeline = simulate_prefill(m, shape, d, tokens, RP_45MS)
            total = sum(
                e.end - e.start for e in timeline.events if e.kind.startswith("prefill")
            )
            want = prefill_latency(m, d.r_proj, d.r_att_pre, tokens, d.port_map_pre) - m.t_weights
            assert total == pytest.approx(want, abs=1e-9)

    def test_events_ordered_per_layer(self):
        m = swap_truth_model()
        timeline = simulate_prefill(m, ModelShape(3), baseline_design(), 128, RP_45MS)
        kinds = [e.kind for e in timeline.events if e.kind.startswith("prefill")]
        assert kinds == ["prefill_attn", "prefill_proj", "prefill_ffn"] * 3

    def test_trigger_fires_at_last_attention(self):
        m = swap_truth_model()
        timeline = simulate_prefill(m, ModelShape(24), baseline_design(), 128, RP_45MS)
        last_attn = timeline.of_kind("prefill_attn")[-1]
        assert timeline.of_kind("reconfig_start")[0].start == last_attn.end

    def test_trigger_after_complete_exposes_everything(self):
        m = swap_truth_model()
        rp = ReconfigParams(0.045, trigger=Trigger.AFTER_PREFILL_COMPLETE)
        timeline = simulate_prefill(m, ModelShape(24), baseline_design(), 128, rp)
        assert timeline.exposed_overhead == rp.t_reconfig

    def test_long_tail_hides_everything(self):
        timeline = simulate_prefill(
            exact_tail_model(2 * 0.045), ModelShape(1), baseline_design(), 1, RP_45MS
        )
        assert timeline.exposed_overhead == 0.0

    def test_exposed_overhead_bounds(self):
        m = swap_truth_model()
        d = baseline_design()
        for tokens in (1, 16, 64, 256, 1024):
            timeline = simulate_prefill(m, ModelShape(24), d, tokens, RP_45MS)
            tail = timeline.prefill_end - timeline.of_kind("prefill_attn")[-1].end
            lo = max(0.0, RP_45MS.t_reconfig - tail)
            assert lo - 1e-12 <= timeline.exposed_overhead <= RP_45MS.t_reconfig

    def test_longer_prompts_never_increase_exposure(self):
        m = swap_truth_model()
        d = baseline_design()
        shape = ModelShape(24)
        exposures = [
            simulate_prefill(m, shape, d, tokens, RP_45MS).exposed_overhead
            for tokens in (1, 8, 32, 128, 512, 2048)
        ]
        assert all(a >= b for a, b in zip(exposures, exposures[1:]))

    def test_static_design_has_no_reconfig_events(self):
        timeline = simulate_prefill(swap_truth_model(), ModelShape(4), baseline_design(), 64, None)
        assert not timeline.has_reconfig
        assert timeline.exposed_overhead == 0.0


class TestOverheadReport:
    def test_measured_swap_scenario(self):
        # 45 ms load vs a 31 ms post-attention tail
        timeline = simulate_prefill(exact_tail_model(0.031), ModelShape(1), baseline_design(), 1, RP_45MS)
        report = overhead_report(timeline, RP_45MS)
        assert timeline.exposed_overhead == 0.045 - 0.031
        assert report["exposed_ms"] == pytest.approx(14.0, abs=1e-9)
        assert report["hidden_fraction"] == pytest.approx(31.0 / 45.0, abs=1e-9)

    def test_zero_tail_hides_nothing(self):
        timeline = simulate_prefill(exact_tail_model(0.0), ModelShape(1), baseline_design(), 1, RP_45MS)
        assert overhead_report(timeline, RP_45MS)["hidden_fraction"] == 0.0

    def test_double_tail_hides_all(self):
        timeline = simulate_prefill(exact_tail_model(0.090), ModelShape(1), baseline_design(), 1, RP_45MS)
        assert overhead_report(timeline, RP_45MS)["hidden_fraction"] == 1.0

    def test_requires_reconfig_events(self):
        timeline = simulate_prefill(swap_truth_model(), ModelShape(4), baseline_design(), 64, None)
        with pytest.raises(ValueError):
            overhead_report(timeline, RP_45MS)


class TestEndToEnd:
    def test_decode_waits_for_swap_confirmation(self):
        m = swap_truth_model()
        result = simulate_end_to_end(m, ModelShape(24), baseline_design(), 16, 4, RP_45MS)
        first = result.timeline.of_kind("decode_step")[0]
        assert first.start >= result.timeline.reconfig_end

    def test_unconfirmed_decode_starts_at_prefill_end(self):
        m = swap_truth_model()
        d = baseline_design()
        rp = ReconfigParams(0.045, confirm_before_decode=False)
        result = simulate_end_to_end(m, ModelShape(24), d, 16, 4, rp)
        first = result.timeline.of_kind("decode_step")[0]
        assert first.start == result.timeline.prefill_end
        # the what-if TTFT excludes the exposed swap time
        step = decode_step_latency(m, d.r_proj, d.r_att_dec, 17, d.port_map_dec)
        assert result.ttft == pytest.approx(result.timeline.prefill_end + step, rel=1e-12)

    def test_single_token_throughput(self):
        m = swap_truth_model()
        d = baseline_design()
        result = simulate_end_to_end(m, ModelShape(24), d, 100, 1, RP_45MS)
        step = decode_step_latency(m, d.r_proj, d.r_att_dec, 101, d.port_map_dec)
        assert result.decode_throughput == pytest.approx(1.0 / step, rel=1e-12)

    def test_ttft_composition(self):
        m = swap_truth_model()
        d = baseline_design()
        result = simulate_end_to_end(m, ModelShape(24), d, 32, 2, RP_45MS)
        prefill = simulate_prefill(m, ModelShape(24), d, 32, RP_45MS)
        first_step = decode_step_latency(m, d.r_proj, d.r_att_dec, 33, d.port_map_dec)
        assert result.ttft == pytest.approx(
            prefill.prefill_end + prefill.exposed_overhead + first_step, rel=1e-12
        )

    def test_step_context_grows(self):
        m = swap_truth_model()
        d = baseline_design()
        result = simulate_end_to_end(m, ModelShape(24), d, 50, 8, RP_45MS)
        steps = result.timeline.of_kind("decode_step")
        durations = [e.end - e.start for e in steps]
        assert all(b > a for a, b in zip(durations, durations[1:]))
        assert durations[0] == pytest.approx(
            decode_step_latency(m, d.r_proj, d.r_att_dec, 51, d.port_map_dec), rel=1e-12
        )


class TestCompare:
    def test_identical_designs_give_unit_ratios(self):
        m = swap_truth_model()
        d = baseline_design()
        rows = compare_designs((m, d, RP_45MS), (m, d, RP_45MS), [64, 256], ModelShape(24))
        for row in rows:
            assert row["ttft_ratio"] == pytest.approx(1.0, rel=1e-12)
            assert row["throughput_ratio"] == pytest.approx(1.0, rel=1e-12)

    def test_single_entry_sweep(self):
        m = swap_truth_model()
        d = baseline_design()
        rows = compare_designs((m, d, None), (m, d, RP_45MS), [128], ModelShape(24))
        assert len(rows) == 1 and rows[0]["l"] == 128.0

    def test_ratio_grows_with_context(self):
        rows = compare_designs(
            (static_truth_model(), baseline_design(), None),
            (swap_truth_model(), baseline_design(), RP_45MS),
            [64, 128, 256, 512, 1024, 2048],
            ModelShape(24),
        )
        ratios = [row["throughput_ratio"] for row in rows]
        assert all(b >= a for a, b in zip(ratios, ratios[1:]))


def test_shape_validation():
    with pytest.raises(ValueError):
        ModelShape(0)
    with pytest.raises(ValueError):
        ReconfigParams(0.0)
