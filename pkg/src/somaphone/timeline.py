"""Section timeline: Connection -> Disconnection -> Questioning -> End.

Sections advance on a manual cue or on their timed duration, whichever
comes first. The index never decreases; a cue that cannot apply (backward
goto, next past the last section, cue while a section disallows manual
advance) is ignored and reported as a warning so the operator can see it.

Entering End is the end of the piece, not a section boundary: boundary
events are only emitted for transitions between playing sections, which is
what the notation's purple rules mark.
"""

from __future__ import annotations

from dataclasses import dataclass

from .mapping import Section

SECTION_NAMES = {
    Section.CONNECTION: "Connection",
    Section.DISCONNECTION: "Disconnection",
    Section.QUESTIONING: "Questioning",
    Section.END: "End",
}
NAME_TO_SECTION = {v.lower(): k for k, v in SECTION_NAMES.items()}


@dataclass(frozen=True)
class SectionCue:
    """Manual advance request: next section, or a forward goto."""
    goto: Section | None = None   # None means "next"


@dataclass(frozen=True)
class BoundaryEvent:
    t: float
    from_section: Section
    to_section: Section


@dataclass
class TimelineState:
    index: int = 0                # int(Section); END means finished
    t: float = 0.0                # absolute time, seconds
    t_in_section: float = 0.0

    @property
    def section(self) -> Section:
        return Section(self.index)

    @property
    def finished(self) -> bool:
        return self.index >= int(Section.END)


def _advance_to(state: TimelineState, target: int, events: list):
    if target > int(Section.END):
        target = int(Section.END)
    if target <= state.index:
        return
    if target < int(Section.END):
        events.append(BoundaryEvent(t=state.t,
                                    from_section=Section(state.index),
                                    to_section=Section(target)))
    state.index = target
    state.t_in_section = 0.0


def advance_timeline(state: TimelineState, dt: float, cues, specs):
    """Step the timeline by dt, applying manual cues first.

    `specs` is the ordered (connection, disconnection, questioning) tuple;
    each spec provides `duration` and `manual_advance`. Returns
    (boundary_events, warnings); `state` is mutated in place.
    """
    events: list = []
    warnings: list = []

    for cue in cues:
        if state.finished:
            warnings.append("cue ignored: piece already ended")
            continue
        spec = specs[state.index]
        if not spec.manual_advance:
            warnings.append(
                f"cue ignored: {SECTION_NAMES[state.section]} disallows manual advance")
            continue
        if cue.goto is None:
            nxt = state.index + 1
            if nxt >= int(Section.END):
                warnings.append("cue ignored: already in the final section")
                continue
            _advance_to(state, nxt, events)
        else:
            target = int(cue.goto)
            if target >= int(Section.END):
                warnings.append("cue ignored: cannot goto past the final section")
                continue
            if target <= state.index:
                warnings.append(
                    f"cue ignored: goto {SECTION_NAMES[Section(target)]} is not forward")
                continue
            _advance_to(state, target, events)

    if dt < 0.0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    state.t += dt
    if not state.finished:
        state.t_in_section += dt
        # a tiny dt can cross several short sections at once
        while not state.finished:
            spec = specs[state.index]
            if state.t_in_section < spec.duration:
                break
            leftover = state.t_in_section - spec.duration
            boundary_t = state.t - leftover
            nxt = state.index + 1
            if nxt < int(Section.END):
                events.append(BoundaryEvent(t=boundary_t,
                                            from_section=Section(state.index),
                                            to_section=Section(nxt)))
            state.index = nxt
            state.t_in_section = leftover

    return events, warnings
