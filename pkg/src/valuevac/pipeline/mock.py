"""Deterministic rule-based decision oracle.

Reproduces the observed household outcomes offline: deferral for
noise-sensitive activities, cleaning around phone use or empty rooms,
pausing around an active pet, docking after repeated deferrals. Pure
function of its inputs; identical inputs yield byte-identical outputs.
"""

from __future__ import annotations

from ..controller import Decision, DecisionSource, DecisionToken, Mode
from ..world import PERSON_KIND, PET_KIND
from .features import EntityAggregate, ExtractedFeatures
from .records import ReasoningTrace

NOISE_SENSITIVE_ACTIVITIES = frozenset({"watching_tv", "sleeping", "video_call"})
NOISE_TOLERANT_ACTIVITIES = frozenset({"using_phone", "cooking", "exercising"})
PET_MOTION_THRESHOLD = 0.2
PET_PRESENCE_THRESHOLD = 0.5
DOCK_AFTER_BLOCKED_CYCLES = 3


def _decide(pause: bool, mode: Mode, dock: bool = False) -> Decision:
    if dock and mode is Mode.OBSERVATION:
        return Decision(DecisionToken.DOCK, DecisionSource.MODEL)
    if mode is Mode.OBSERVATION:
        token = DecisionToken.WAIT if pause else DecisionToken.CLEAN
    else:
        token = DecisionToken.INTERRUPT if pause else DecisionToken.CONTINUE
    return Decision(token, DecisionSource.MODEL)


def _trace(action: str, value: str, rationale: str, consequences: str) -> ReasoningTrace:
    return ReasoningTrace.from_aspects(
        {
            "value_alignment": value,
            "time_context": (
                "The current household activity level, not the clock alone, "
                "drives this choice."
            ),
            "action_choice_and_consequences": f"{action} {consequences}",
            "rationale": rationale,
            "purpose_reflection": (
                "Cleaning remains the core purpose; it is pursued only when it "
                "does not conflict with the comfort and safety of the household."
            ),
        }
    )


def mock_decide(
    features: ExtractedFeatures, mode: Mode, blocked_cycles: int = 0
) -> tuple[Decision, ReasoningTrace, str]:
    """First matching rule wins; the table is total over all inputs."""
    people = [e for e in features.entities if e.kind == PERSON_KIND]
    pets = [e for e in features.entities if e.kind == PET_KIND]

    active_pet = next(
        (
            p
            for p in pets
            if p.motion_speed > PET_MOTION_THRESHOLD
            and p.presence_ratio >= PET_PRESENCE_THRESHOLD
        ),
        None,
    )
    if active_pet is not None:
        return _rule_pet_safety(active_pet, mode)

    sensitive = next(
        (
            p
            for p in people
            if p.activity in NOISE_SENSITIVE_ACTIVITIES and not p.transient
        ),
        None,
    )
    if sensitive is not None:
        return _rule_noise_deferral(sensitive, mode)

    if blocked_cycles >= DOCK_AFTER_BLOCKED_CYCLES:
        return _rule_persistent_block(blocked_cycles, mode)

    tolerant = next((p for p in people if p.activity in NOISE_TOLERANT_ACTIVITIES), None)
    if tolerant is not None:
        return _rule_comfort_balance(tolerant, mode)

    if not any(not e.transient for e in features.entities):
        return _rule_empty_room(features, mode)

    return _rule_cautious_default(mode)


def _rule_pet_safety(pet: EntityAggregate, mode: Mode) -> tuple[Decision, ReasoningTrace, str]:
    decision = _decide(pause=True, mode=mode)
    action = (
        "Interrupt the cleaning run." if mode is Mode.CLEANING else "Hold off on cleaning."
    )
    trace = _trace(
        action=action,
        value=(
            f"The pet {pet.id} is moving a lot nearby; its physical safety and "
            "mental wellbeing outrank the cleaning schedule."
        ),
        rationale=(
            f"Cleaning around a pet moving at {pet.motion_speed:.2f} m/s is not "
            "advisable for the pet's safety, and the loud noises could scare it."
        ),
        consequences=(
            "The floor stays uncleaned for now, but no collision or fright is "
            "risked; cleaning resumes once the pet settles."
        ),
    )
    summary = (
        f"I paused because the pet {pet.id} is moving around close by. Running "
        "the vacuum now would risk its safety and the noise could scare it, so "
        "I will try again once things calm down."
    )
    return decision, trace, summary


def _rule_noise_deferral(
    person: EntityAggregate, mode: Mode
) -> tuple[Decision, ReasoningTrace, str]:
    decision = _decide(pause=True, mode=mode)
    action = "Interrupt cleaning." if mode is Mode.CLEANING else "Defer the cleaning."
    trace = _trace(
        action=action,
        value=(
            f"Someone is {person.activity.replace('_', ' ')}; a quiet, comfortable "
            "room matters more right now than an immediately clean floor."
        ),
        rationale=(
            f"The noise produced by vacuuming would disturb {person.id}'s "
            f"{person.activity.replace('_', ' ')}, so deferring respects their comfort."
        ),
        consequences=(
            "Cleaning is postponed; the room will be cleaned at the next "
            "opportunity when it no longer disturbs anyone."
        ),
    )
    summary = (
        f"I am waiting to clean because {person.id} is "
        f"{person.activity.replace('_', ' ')} and the vacuum noise would be "
        "disruptive. I will check again shortly."
    )
    return decision, trace, summary


def _rule_persistent_block(
    blocked_cycles: int, mode: Mode
) -> tuple[Decision, ReasoningTrace, str]:
    decision = _decide(pause=True, mode=mode, dock=True)
    trace = _trace(
        action="Return to the docking station.",
        value=(
            "The room has stayed busy across repeated checks; continuing to "
            "hover nearby helps nobody."
        ),
        rationale=(
            f"After {blocked_cycles} deferrals in a row the room is clearly in "
            "use for a while; docking keeps the robot charged and out of the way."
        ),
        consequences=(
            "The robot leaves the room unclean for now and recharges; an "
            "operator or a later schedule can send it out again."
        ),
    )
    summary = (
        f"The room stayed busy through {blocked_cycles} checks in a row, so I am "
        "heading back to my dock to charge and stay out of the way."
    )
    return decision, trace, summary


def _rule_comfort_balance(
    person: EntityAggregate, mode: Mode
) -> tuple[Decision, ReasoningTrace, str]:
    decision = _decide(pause=False, mode=mode)
    action = "Keep cleaning." if mode is Mode.CLEANING else "Start cleaning."
    trace = _trace(
        action=action,
        value=(
            f"{person.id} is {person.activity.replace('_', ' ')}, which does not "
            "require silence; cleanliness and comfort can be balanced."
        ),
        rationale=(
            f"Since {person.activity.replace('_', ' ')} is tolerant of background "
            "noise, cleaning now balances the user's comfort with the purpose of "
            "keeping the home clean."
        ),
        consequences=(
            "The room gets cleaned promptly with only minor, acceptable "
            "background noise."
        ),
    )
    summary = (
        f"I decided to clean now: {person.id} is "
        f"{person.activity.replace('_', ' ')}, which is fine with some background "
        "noise, so this is a good moment to tidy up."
    )
    return decision, trace, summary


def _rule_empty_room(
    features: ExtractedFeatures, mode: Mode
) -> tuple[Decision, ReasoningTrace, str]:
    decision = _decide(pause=False, mode=mode)
    transients = features.transient_ids()
    if transients:
        visitor = ", ".join(transients)
        value = (
            f"Whoever passed through ({visitor}) has already left; nobody is "
            "disturbed by cleaning now."
        )
        summary = (
            "Someone briefly passed through but has left the room, so I am "
            "starting to clean while nobody is around to be disturbed."
        )
    else:
        value = "The room appears empty, so no one is disturbed by cleaning."
        summary = (
            "The room is empty, so I am taking the opportunity to clean it "
            "without bothering anyone."
        )
    action = "Keep cleaning." if mode is Mode.CLEANING else "Start cleaning."
    trace = _trace(
        action=action,
        value=value,
        rationale=(
            "An unoccupied room is the ideal time to clean: maximum cleanliness "
            "gain at zero cost to anyone's comfort."
        ),
        consequences="The floor is cleaned while the room is free.",
    )
    return decision, trace, summary


def _rule_cautious_default(mode: Mode) -> tuple[Decision, ReasoningTrace, str]:
    # The listed rules do not cover every activity; unknown situations get
    # the conservative treatment.
    decision = _decide(pause=True, mode=mode)
    action = "Interrupt cleaning." if mode is Mode.CLEANING else "Wait and re-observe."
    trace = _trace(
        action=action,
        value=(
            "Someone or some animal is present whose activity is unclear; "
            "caution protects their comfort."
        ),
        rationale=(
            "Without a confident read on the activity, pausing is the safer "
            "choice; a later observation can clarify the situation."
        ),
        consequences="Cleaning is briefly postponed pending a clearer picture.",
    )
    summary = (
        "I am holding off on cleaning because I could not tell what the person "
        "or pet in the room is doing. I will look again soon."
    )
    return decision, trace, summary
