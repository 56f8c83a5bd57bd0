"""Engine core: tick ordering, shadow state, trigger reactions, control path."""

import json

import pytest

from vivo.audio import CommandOrigin, ParameterCommand, param_range
from vivo.engine import EngineConfig, EngineCore, SectionChange
from vivo.errors import ConfigError, InvalidInput
from vivo.mapping import serialize_mapping
from vivo.motion import MotionSample
from vivo.saliency import SaliencySample, SoaSource, TriggerConfig, TriggerEvent
from vivo.score import serialize_score

from conftest import make_chain, make_engine_config, make_mapping, make_score

DT = 33_333  # ~30 fps in microseconds


def motion(qom, ts, idx=0):
    return MotionSample(qom=qom, timestamp_us=ts, frame_index=idx)


def drive(core, qoms, env=0.0, start_ts=DT):
    """Feed a list of qom values as consecutive ticks; returns all events."""
    events = []
    ts = start_ts
    for i, q in enumerate(qoms):
        events.extend(core.tick(motion(q, ts, i), env, ts))
        ts += DT
    return events, ts


def fire_sequence():
    # constant motion, then one outlier: the variance jump fires the trigger
    return [0.1] * 10 + [0.9]


class TestTickPipeline:
    def test_start_emits_section_zero_commands(self, engine_config):
        core = EngineCore(engine_config)
        cmds = core.start(0)
        targets = [c.target for c in cmds]
        assert targets == ["lp.cutoff_hz", "gain.level"]  # section 0, list order
        for c in cmds:
            assert c.origin is CommandOrigin.SCORE
            assert c.ramp_ms == engine_config.score_ramp_ms
            lo, hi = param_range(engine_config.chain, c.target)
            assert lo <= c.value <= hi

    def test_tick_event_ordering_on_fire(self, engine_config):
        core = EngineCore(engine_config)
        core.start(0)
        qoms = fire_sequence()
        events, _ = drive(core, qoms)
        fire_tick = [e for e in events if isinstance(e, TriggerEvent)]
        assert len(fire_tick) == 1
        # isolate the firing tick's events
        ts = fire_tick[0].timestamp_us
        tick_events = [e for e in events if getattr(e, "timestamp_us", None) == ts]
        kinds = [type(e).__name__ for e in tick_events]
        assert kinds[0] == "SaliencySample"
        assert kinds[1] == "TriggerEvent"
        assert kinds[2] == "SectionChange"
        score_cmds = [e for e in tick_events if isinstance(e, ParameterCommand)
                      and e.origin is CommandOrigin.SCORE]
        map_cmds = [e for e in tick_events if isinstance(e, ParameterCommand)
                    and e.origin is CommandOrigin.MAPPING]
        assert score_cmds and map_cmds
        # mapping commands come after score commands
        assert tick_events.index(map_cmds[0]) > tick_events.index(score_cmds[-1])

    def test_every_tick_emits_mapping_commands(self, engine_config):
        core = EngineCore(engine_config)
        core.start(0)
        events = core.tick(motion(0.25, DT), 0.5, DT)
        map_cmds = [e for e in events if isinstance(e, ParameterCommand)
                    and e.origin is CommandOrigin.MAPPING]
        # conftest mapping: QOM -> gain.level, SOA -> lp.cutoff_hz
        assert [c.target for c in map_cmds] == ["gain.level", "lp.cutoff_hz"]

    def test_trigger_advances_section(self, engine_config):
        core = EngineCore(engine_config)
        core.start(0)
        events, _ = drive(core, fire_sequence())
        changes = [e for e in events if isinstance(e, SectionChange)]
        assert changes == [SectionChange(from_section=0, to_section=1,
                                         action="ADVANCE",
                                         timestamp_us=changes[0].timestamp_us)]
        assert core.current_section == 1

    def test_resample_refreshes_without_section_change(self, engine_config):
        core = EngineCore(engine_config)
        core.start(0)
        drive(core, fire_sequence())           # now in section 1 (RESAMPLE)
        before = core.shadow_value("lp.q")
        # re-arm with quiet motion, then fire again
        events, _ = drive(core, [0.1] * 40 + fire_sequence(), start_ts=DT * 50)
        fires = [e for e in events if isinstance(e, TriggerEvent)]
        assert fires, "second trigger expected"
        changes = [e for e in events if isinstance(e, SectionChange)]
        assert changes == []  # resample stays in section 1
        assert core.current_section == 1
        score_cmds = [e for e in events if isinstance(e, ParameterCommand)
                      and e.origin is CommandOrigin.SCORE]
        assert score_cmds  # fresh draw happened

    def test_trigger_count_increments(self, engine_config):
        core = EngineCore(engine_config)
        core.start(0)
        drive(core, fire_sequence())
        assert core.trigger_count == 1

    def test_determinism_same_seed_same_events(self):
        runs = []
        for _ in range(2):
            core = EngineCore(make_engine_config(seed=21))
            core.start(0)
            events, _ = drive(core, fire_sequence(), env=0.3)
            runs.append(events)
        assert runs[0] == runs[1]

    def test_run_seed_overrides_score_seed(self):
        a = EngineCore(make_engine_config(seed=100))
        b = EngineCore(make_engine_config(seed=100, score=make_score(seed=999)))
        assert a.start(0) == b.start(0)

    def test_duration_limit_advances_timed(self):
        score = make_score()
        sections = list(score.sections)
        sections[0] = type(sections[0])(id=0, distributions=sections[0].distributions,
                                        on_trigger=sections[0].on_trigger,
                                        duration_limit=0.05)
        timed_score = type(score)(sections=tuple(sections), seed=score.seed,
                                  s_ref=score.s_ref, wrap=score.wrap)
        core = EngineCore(make_engine_config(score=timed_score))
        core.start(0)
        events = core.tick(motion(0.1, 20_000), 0.0, 20_000)
        assert not [e for e in events if isinstance(e, SectionChange)]
        events = core.tick(motion(0.1, 60_000, 1), 0.0, 60_000)
        changes = [e for e in events if isinstance(e, SectionChange)]
        assert changes and changes[0].action == "TIMED"
        assert changes[0].to_section == 1


class TestShadow:
    def test_initialized_from_chain(self, engine_config):
        core = EngineCore(engine_config)
        assert core.shadow_value("gain.level") == 1.0
        assert core.shadow_value("lp.cutoff_hz") == 4000.0
        assert core.shadow_value("master.wet_gain") == 0.8

    def test_score_and_mapping_commands_update_shadow(self, engine_config):
        core = EngineCore(engine_config)
        core.start(0)
        events = core.tick(motion(0.25, DT), 0.5, DT)
        for e in events:
            if isinstance(e, ParameterCommand):
                assert core.shadow_value(e.target) == e.value


class TestControl:
    def test_set_param_clamps_updates_shadow(self, engine_config):
        core = EngineCore(engine_config)
        events, ops = core.apply_control("SET_PARAM",
                                         {"target": "gain.level", "value": 7.0}, DT)
        assert len(ops) == 1
        cmd = ops[0]
        assert cmd.value == 2.0  # clamped to range
        assert cmd.origin is CommandOrigin.CONTROL_PLANE
        assert core.shadow_value("gain.level") == 2.0

    def test_set_param_unknown_target_changes_nothing(self, engine_config):
        core = EngineCore(engine_config)
        before = core.shadow_value("gain.level")
        with pytest.raises(InvalidInput):
            core.apply_control("SET_PARAM", {"target": "ghost.level", "value": 1.0}, DT)
        assert core.shadow_value("gain.level") == before

    def test_param_change_variance_mode(self):
        cfg = make_engine_config(
            soa_source=SoaSource.PARAM_CHANGE_VARIANCE,
            trigger=TriggerConfig(theta_hi=0.01, theta_lo=0.001, refractory=0),
            soa_window=8)
        core = EngineCore(cfg)
        core.start(0)
        # motion no longer produces saliency samples
        events = core.tick(motion(0.9, DT), 0.0, DT)
        assert not [e for e in events if isinstance(e, SaliencySample)]
        # alternating large/small user edits push the variance over threshold
        fired = []
        for i, v in enumerate([2.0, 0.0, 2.0, 0.0]):
            ev, _ = core.apply_control("SET_PARAM",
                                       {"target": "gain.level", "value": v},
                                       DT * (i + 2))
            fired.extend(e for e in ev if isinstance(e, TriggerEvent))
        assert fired, "parameter-change variance should fire the trigger"

    def test_set_threshold_applies(self, engine_config):
        core = EngineCore(engine_config)
        core.apply_control("SET_THRESHOLD", {"theta_hi": 0.2, "theta_lo": 0.05}, DT)
        assert core.effective_theta_hi == 0.2

    def test_set_threshold_invalid_rejected(self, engine_config):
        core = EngineCore(engine_config)
        with pytest.raises(InvalidInput):
            core.apply_control("SET_THRESHOLD", {"theta_hi": 0.1, "theta_lo": 0.5}, DT)
        assert core.effective_theta_hi == engine_config.trigger.theta_hi

    def test_trigger_config_source_switch_clears_soa(self, engine_config):
        core = EngineCore(engine_config)
        core.start(0)
        drive(core, [0.1, 0.5, 0.9, 0.2])
        assert core.current_soa > 0.0
        core.apply_control("SET_TRIGGER_CONFIG",
                           {"soa_source": "PARAM_CHANGE_VARIANCE"}, DT * 10)
        assert core.current_soa == 0.0

    def test_load_score_emits_load_change(self, engine_config):
        core = EngineCore(engine_config)
        core.start(0)
        doc = json.loads(serialize_score(make_score(seed=5)))
        events, ops = core.apply_control("LOAD_SCORE", {"document": doc}, DT)
        changes = [e for e in events if isinstance(e, SectionChange)]
        assert changes and changes[0].action == "LOAD" and changes[0].to_section == 0
        assert ops == []
        cmds = [e for e in events if isinstance(e, ParameterCommand)]
        assert cmds, "fresh section-0 draw expected"

    def test_load_score_invalid_keeps_old(self, engine_config):
        core = EngineCore(engine_config)
        old = core.score
        doc = {"sections": [{"id": 0, "distributions": [
            {"kind": "UNIFORM", "target": "ghost.param",
             "params": {"lo": 0.0, "hi": 1.0}}]}]}
        with pytest.raises(ConfigError):
            core.apply_control("LOAD_SCORE", {"document": doc}, DT)
        assert core.score is old

    def test_load_mapping_swaps_routes(self, engine_config):
        core = EngineCore(engine_config)
        core.start(0)
        doc = {"routes": [{"source": "QOM", "target": "lp.q",
                           "curve": "LINEAR", "out_lo": 0.1, "out_hi": 9.0,
                           "smoothing_ms": 10.0}]}
        core.apply_control("LOAD_MAPPING", {"document": doc}, DT)
        events = core.tick(motion(0.5, DT * 2), 0.0, DT * 2)
        maps = [e for e in events if isinstance(e, ParameterCommand)
                and e.origin is CommandOrigin.MAPPING]
        assert [c.target for c in maps] == ["lp.q"]

    def test_load_mapping_invalid_keeps_old(self, engine_config):
        core = EngineCore(engine_config)
        old = core.mapping
        doc = json.loads(serialize_mapping(make_mapping()))
        doc["routes"][0]["target"] = "ghost.level"
        with pytest.raises(ConfigError):
            core.apply_control("LOAD_MAPPING", {"document": doc}, DT)
        assert core.mapping is old

    def test_unknown_kind_rejected(self, engine_config):
        core = EngineCore(engine_config)
        with pytest.raises(InvalidInput):
            core.apply_control("REBOOT", {}, DT)


class TestConfigValidation:
    def test_bad_mapping_target_rejected_at_construction(self):
        from vivo.mapping import CurveKind, MappingConfig, Route, RouteSource
        bad = MappingConfig(routes=(
            Route(source=RouteSource.QOM, target="ghost.level",
                  curve=CurveKind.LINEAR, out_lo=0.0, out_hi=1.0,
                  smoothing_ms=0.0),))
        with pytest.raises(ConfigError):
            EngineCore(make_engine_config(mapping=bad))

    def test_effective_seed(self):
        assert make_engine_config(seed=None).effective_seed == make_score().seed
        assert make_engine_config(seed=77).effective_seed == 77
