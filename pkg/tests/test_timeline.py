"""Timeline rules: timed advance, manual cues, forward-only goto, warnings."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from somaphone.mapping import Section
from somaphone.scene import scene_from_dict
from somaphone.timeline import (
    SECTION_NAMES,
    SectionCue,
    TimelineState,
    advance_timeline,
)


def _specs(d1=10.0, d2=10.0, d3=10.0, manual=True):
    sc = scene_from_dict({"sections": {
        "connection": {"duration": d1, "manual_advance": manual},
        "disconnection": {"duration": d2, "manual_advance": manual},
        "questioning": {"duration": d3, "manual_advance": manual},
    }})
    return sc.sections


def _run(specs, total, dt=0.01, cues_at=None):
    """Tick the timeline to `total` seconds; cues_at maps tick index -> cues."""
    state = TimelineState()
    events, warnings = [], []
    n = int(round(total / dt))
    for k in range(n):
        cues = (cues_at or {}).get(k, ())
        ev, warn = advance_timeline(state, dt, cues, specs)
        events.extend(ev)
        warnings.extend(warn)
    return state, events, warnings


class TestTimedAdvance:
    def test_three_sections_make_two_boundaries(self):
        # a few extra ticks absorb float accumulation in the 0.01 s steps
        state, events, warnings = _run(_specs(), 30.05)
        assert len(events) == 2
        assert warnings == []
        assert state.finished

    def test_boundary_times_match_section_durations(self):
        _, events, _ = _run(_specs(), 30.0)
        assert events[0].t == pytest.approx(10.0, abs=1e-9)
        assert events[1].t == pytest.approx(20.0, abs=1e-9)
        assert events[0].from_section is Section.CONNECTION
        assert events[0].to_section is Section.DISCONNECTION
        assert events[1].to_section is Section.QUESTIONING

    def test_entering_end_is_not_a_boundary(self):
        state, events, _ = _run(_specs(), 31.0)
        assert state.section is Section.END
        assert all(ev.to_section is not Section.END for ev in events)

    def test_one_big_dt_crosses_several_sections(self):
        specs = _specs(0.5, 0.5, 10.0)
        state = TimelineState()
        events, _ = advance_timeline(state, 2.0, (), specs)
        assert [ev.t for ev in events] == [0.5, 1.0]
        assert state.section is Section.QUESTIONING
        assert state.t_in_section == pytest.approx(1.0)

    def test_negative_dt_is_an_error(self):
        with pytest.raises(ValueError):
            advance_timeline(TimelineState(), -0.01, (), _specs())


class TestManualCues:
    def test_cue_advances_immediately(self):
        state = TimelineState()
        specs = _specs()
        advance_timeline(state, 5.0, (), specs)
        events, warnings = advance_timeline(state, 0.01, (SectionCue(),), specs)
        assert warnings == []
        assert len(events) == 1
        assert events[0].t == pytest.approx(5.0)
        assert state.section is Section.DISCONNECTION
        # the section clock restarts at the cue
        assert state.t_in_section == pytest.approx(0.01)

    def test_cue_spam_applies_in_order_then_warns(self):
        state = TimelineState()
        specs = _specs()
        cues = (SectionCue(), SectionCue(), SectionCue())
        events, warnings = advance_timeline(state, 0.01, cues, specs)
        assert [ev.to_section for ev in events] == [Section.DISCONNECTION,
                                                    Section.QUESTIONING]
        assert state.section is Section.QUESTIONING
        assert warnings == ["cue ignored: already in the final section"]

    def test_next_in_final_section_warns_without_state_change(self):
        state = TimelineState(index=int(Section.QUESTIONING), t=25.0,
                              t_in_section=5.0)
        events, warnings = advance_timeline(state, 0.01, (SectionCue(),), _specs())
        assert events == []
        assert len(warnings) == 1
        assert "final section" in warnings[0]
        assert state.section is Section.QUESTIONING

    def test_cue_after_end_warns(self):
        state, _, _ = _run(_specs(), 30.05)
        events, warnings = advance_timeline(state, 0.01, (SectionCue(),), _specs())
        assert events == []
        assert warnings == ["cue ignored: piece already ended"]

    def test_manual_advance_can_be_disabled_per_section(self):
        specs = _specs(manual=False)
        state = TimelineState()
        events, warnings = advance_timeline(state, 0.01, (SectionCue(),), specs)
        assert events == []
        assert "disallows manual advance" in warnings[0]
        assert state.section is Section.CONNECTION


class TestGoto:
    def test_forward_goto_skips_a_section_with_one_event(self):
        state = TimelineState()
        cue = SectionCue(goto=Section.QUESTIONING)
        events, warnings = advance_timeline(state, 0.01, (cue,), _specs())
        assert warnings == []
        assert len(events) == 1
        assert events[0].from_section is Section.CONNECTION
        assert events[0].to_section is Section.QUESTIONING
        assert state.section is Section.QUESTIONING

    def test_backward_goto_is_ignored(self):
        state = TimelineState(index=int(Section.QUESTIONING))
        cue = SectionCue(goto=Section.CONNECTION)
        events, warnings = advance_timeline(state, 0.01, (cue,), _specs())
        assert events == []
        assert "not forward" in warnings[0]
        assert state.section is Section.QUESTIONING

    def test_goto_current_section_is_ignored(self):
        state = TimelineState(index=int(Section.DISCONNECTION))
        cue = SectionCue(goto=Section.DISCONNECTION)
        events, warnings = advance_timeline(state, 0.01, (cue,), _specs())
        assert events == []
        assert "not forward" in warnings[0]

    def test_goto_end_is_refused(self):
        state = TimelineState()
        cue = SectionCue(goto=Section.END)
        events, warnings = advance_timeline(state, 0.01, (cue,), _specs())
        assert events == []
        assert "past the final section" in warnings[0]
        assert state.section is Section.CONNECTION


class TestInvariants:
    @given(st.lists(st.tuples(
        st.floats(min_value=0.0, max_value=5.0, allow_nan=False),
        st.lists(st.sampled_from([None, 0, 1, 2, 3]), max_size=3)),
        max_size=40))
    @settings(max_examples=120, deadline=None)
    def test_index_never_decreases(self, steps):
        specs = _specs(2.0, 2.0, 2.0)
        state = TimelineState()
        last = state.index
        t_last = state.t
        for dt, cue_codes in steps:
            cues = tuple(SectionCue() if c is None else SectionCue(goto=Section(c))
                         for c in cue_codes)
            advance_timeline(state, dt, cues, specs)
            assert state.index >= last
            assert state.t >= t_last
            last = state.index
            t_last = state.t

    def test_names_round_trip(self):
        for sec, name in SECTION_NAMES.items():
            assert name
            assert SECTION_NAMES[sec] == name
