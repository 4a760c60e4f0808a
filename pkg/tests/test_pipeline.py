import pytest

from valuevac.controller import DecisionSource, DecisionToken, Mode
from valuevac.pipeline.engine import parse_trace, truncate_at_sentence
from valuevac.pipeline.features import (
    ExtractedFeatures,
    FrameFeatures,
    aggregate_features,
    features_from_frames,
    parse_extraction_response,
)
from valuevac.pipeline.mock import mock_decide
from valuevac.pipeline.prompts import (
    DEFAULT_OBJECTIVE,
    DEFAULT_ROLE,
    PromptConfigError,
    compose_system_prompt,
    describe_frame,
)
from valuevac.world import Clock, Entity, Pose, SceneFrame, SyntheticScene, World
from tests.conftest import square_plan


def frame_with(entities=(), clues=(), seq=0, sim_time=0.0):
    return SceneFrame(
        seq=seq,
        sim_time=sim_time,
        wall_clock="09:00",
        pose=Pose(0, 0, 0),
        payload=SyntheticScene(entities=tuple(entities), clues=tuple(clues)),
    )


def snapshot(world, entity_id):
    return next(s for s in world.snapshot_entities() if s.id == entity_id)


class TestComposeSystemPrompt:
    def test_contains_role_objective_and_modes_in_order(self):
        text = compose_system_prompt()
        assert text.startswith(DEFAULT_ROLE)
        assert "maintain cleanliness while respecting the homeowner's values" in text
        i_role = text.index(DEFAULT_ROLE)
        i_obj = text.index(DEFAULT_OBJECTIVE)
        i_obs = text.index("- observation:")
        i_cln = text.index("- cleaning:")
        i_dck = text.index("- docking:")
        assert i_role < i_obj < i_obs < i_cln < i_dck

    def test_order_canonical_despite_mapping_order(self):
        custom = {
            "docking": "go charge up",
            "observation": "look around first",
            "cleaning": "sweep the floor",
        }
        text = compose_system_prompt(custom)
        assert (
            text.index("look around first")
            < text.index("sweep the floor")
            < text.index("go charge up")
        )

    def test_empty_mode_description_is_config_error(self):
        with pytest.raises(PromptConfigError):
            compose_system_prompt({"docking": ""})


class TestFeatureAggregation:
    def test_full_presence(self):
        frames = [FrameFeatures(people=(("p", "watching_tv"),), pets=(), clues=())] * 10
        features = aggregate_features(frames)
        assert features.presence_ratio("p") == 1.0
        assert features.transient_ids() == ()

    def test_transient_person(self):
        # DERIVED: visible in frames 2..4 of 10, absent from the final frame
        frames = []
        for i in range(10):
            people = (("p", "walking"),) if i in (2, 3, 4) else ()
            frames.append(FrameFeatures(people=people, pets=(), clues=()))
        features = aggregate_features(frames)
        assert features.presence_ratio("p") == pytest.approx(0.3)
        assert features.transient_ids() == ("p",)

    def test_half_presence_with_final_frame_is_not_transient(self):
        frames = []
        for i in range(10):
            people = (("p", "cooking"),) if i in (7, 8, 9) else ()
            frames.append(FrameFeatures(people=people, pets=(), clues=()))
        features = aggregate_features(frames)
        assert features.presence_ratio("p") == pytest.approx(0.3)
        assert features.transient_ids() == ()

    def test_empty_frames(self):
        features = aggregate_features([FrameFeatures((), (), ()) for _ in range(5)])
        assert features.entities == ()

    def test_pet_max_speed_kept(self):
        frames = [
            FrameFeatures(people=(), pets=(("d", 0.1),), clues=()),
            FrameFeatures(people=(), pets=(("d", 0.6),), clues=()),
        ]
        features = aggregate_features(frames)
        assert features.entities[0].motion_speed == 0.6

    def test_clue_union_preserves_order(self):
        frames = [
            FrameFeatures((), (), ("tv_on",)),
            FrameFeatures((), (), ("tv_on", "toys_on_floor")),
        ]
        assert aggregate_features(frames).clues == ("tv_on", "toys_on_floor")

    def test_features_from_scene_frames(self):
        world = World(
            square_plan(10.0),
            robot_pose=Pose(5, 5, 0),
            entities=[Entity(id="d", kind="pet", pose=Pose(6.5, 5, 0), motion_speed=0.5)],
            context_tags=("toys_on_floor",),
        )
        frame = world.capture_frame(clock=Clock(0.0, "09:00"))
        features = features_from_frames([frame])
        assert features.entities[0].kind == "pet"
        assert features.entities[0].motion_speed == 0.5
        assert features.clues == ("toys_on_floor",)

    def test_payload_roundtrip(self):
        frames = [FrameFeatures(people=(("p", "cooking"),), pets=(("d", 0.2),), clues=("x",))]
        features = aggregate_features(frames)
        again = ExtractedFeatures.from_payload(features.to_payload())
        assert again == features


class TestExtractionResponseParsing:
    def test_parses_canonical_json(self):
        text = (
            'Here you go:\n{"frames": [{"people": [{"id": "p1", "activity": "cooking"}],'
            ' "pets": [], "clues": ["kitchen"]}]}'
        )
        frames = parse_extraction_response(text, 1)
        assert frames[0].people == (("p1", "cooking"),)
        assert frames[0].clues == ("kitchen",)

    def test_pads_missing_frames(self):
        frames = parse_extraction_response('{"frames": []}', 3)
        assert len(frames) == 3

    def test_garbage_raises(self):
        from valuevac.pipeline.features import FeatureParseError

        with pytest.raises(FeatureParseError):
            parse_extraction_response("no json here", 1)
        with pytest.raises(FeatureParseError):
            parse_extraction_response('{"wrong": 1}', 1)


class TestTraceParsing:
    def test_full_trace(self):
        text = (
            "Value alignment: quiet matters\n"
            "Time context: evening\n"
            "Action choice and consequences: wait, nothing breaks\n"
            "Rationale: tv noise\n"
            "Purpose reflection: clean later\n"
        )
        aspects, missing = parse_trace(text)
        assert missing == []
        assert aspects["rationale"] == "tv noise"

    def test_multiline_sections(self):
        text = (
            "Value alignment: first line\ncontinued line\n"
            "Time context: t\nAction choice and consequences: a\nRationale: r\n"
            "Purpose reflection: p"
        )
        aspects, missing = parse_trace(text)
        assert aspects["value_alignment"] == "first line continued line"
        assert missing == []

    def test_missing_aspect_reported(self):
        aspects, missing = parse_trace("Value alignment: only this")
        assert "time_context" in missing
        assert "rationale" in missing


class TestTruncation:
    def test_short_text_untouched(self):
        assert truncate_at_sentence("Hello there.", 600) == "Hello there."

    def test_truncates_at_sentence_boundary(self):
        text = ("A sentence that fills space. " * 40).strip()
        out = truncate_at_sentence(text, 600)
        assert len(out) <= 600
        assert out.endswith(".")


MOVIE = aggregate_features(
    [FrameFeatures(people=(("res", "watching_tv"),), pets=(), clues=("tv_on",))] * 10
)
PHONE = aggregate_features(
    [FrameFeatures(people=(("res", "using_phone"),), pets=(), clues=())] * 10
)
EMPTY = aggregate_features([FrameFeatures((), (), ()) for _ in range(10)])
ACTIVE_PET = aggregate_features(
    [FrameFeatures(people=(), pets=(("dog", 0.5),), clues=()) for _ in range(3)]
)


class TestMockRules:
    def test_movie_waits_with_noise_rationale(self):
        decision, trace, summary = mock_decide(MOVIE, Mode.OBSERVATION)
        assert decision.token is DecisionToken.WAIT
        assert decision.source is DecisionSource.MODEL
        assert "noise" in trace.rationale.lower()
        assert trace.complete()

    def test_phone_cleans(self):
        decision, trace, _ = mock_decide(PHONE, Mode.OBSERVATION)
        assert decision.token is DecisionToken.CLEAN
        assert "comfort" in trace.rationale.lower()

    def test_pet_interrupts_cleaning_with_safety_and_fear(self):
        decision, trace, _ = mock_decide(ACTIVE_PET, Mode.CLEANING)
        assert decision.token is DecisionToken.INTERRUPT
        assert "safety" in trace.rationale.lower()
        assert "scare" in trace.rationale.lower()

    def test_empty_room_cleans(self):
        decision, trace, _ = mock_decide(EMPTY, Mode.OBSERVATION)
        assert decision.token is DecisionToken.CLEAN
        assert trace.complete()

    def test_blocked_cycles_escalate_to_dock(self):
        decision, _, _ = mock_decide(EMPTY, Mode.OBSERVATION, blocked_cycles=3)
        # rule order: nothing above fires for an empty room except persistence
        assert decision.token is DecisionToken.DOCK

    def test_pet_rule_outranks_person_rules(self):
        both = aggregate_features(
            [
                FrameFeatures(
                    people=(("res", "using_phone"),), pets=(("dog", 0.5),), clues=()
                )
            ]
            * 4
        )
        decision, _, _ = mock_decide(both, Mode.OBSERVATION)
        assert decision.token is DecisionToken.WAIT

    def test_slow_pet_falls_to_cautious_default(self):
        calm = aggregate_features(
            [FrameFeatures(people=(), pets=(("cat", 0.0),), clues=()) for _ in range(4)]
        )
        decision, trace, _ = mock_decide(calm, Mode.OBSERVATION)
        assert decision.token is DecisionToken.WAIT
        assert trace.complete()

    def test_transient_visitor_cleans(self):
        frames = []
        for i in range(10):
            people = (("vis", "walking"),) if i in (2, 3) else ()
            frames.append(FrameFeatures(people=people, pets=(), clues=()))
        features = aggregate_features(frames)
        decision, _, summary = mock_decide(features, Mode.OBSERVATION)
        assert decision.token is DecisionToken.CLEAN
        assert "left" in summary

    def test_pure_function_byte_identical(self):
        a = mock_decide(MOVIE, Mode.OBSERVATION, 1)
        b = mock_decide(MOVIE, Mode.OBSERVATION, 1)
        assert a == b

    def test_exactly_one_rule_fires_everywhere(self):
        # totality probe over a grid of synthetic situations
        activities = ["watching_tv", "using_phone", "sleeping", "walking", "", "cooking"]
        for activity in activities:
            for ratio_frames in (1, 4, 10):
                for blocked in (0, 3):
                    frames = [
                        FrameFeatures(people=(("p", activity),), pets=(), clues=())
                    ] * ratio_frames + [FrameFeatures((), (), ())] * (10 - ratio_frames)
                    features = aggregate_features(frames)
                    decision, trace, summary = mock_decide(
                        features, Mode.OBSERVATION, blocked
                    )
                    assert decision.token in (
                        DecisionToken.CLEAN,
                        DecisionToken.WAIT,
                        DecisionToken.DOCK,
                    )
                    assert trace.complete()
                    assert summary

    def test_summaries_fit_the_cap(self):
        for features in (MOVIE, PHONE, EMPTY, ACTIVE_PET):
            for blocked in (0, 5):
                _, _, summary = mock_decide(features, Mode.OBSERVATION, blocked)
                assert len(summary) <= 600


class TestDescribeFrame:
    def test_empty_room_text(self):
        text = describe_frame(frame_with())
        assert "empty" in text

    def test_entities_and_clues_listed(self):
        world = World(
            square_plan(10.0),
            robot_pose=Pose(5, 5, 0),
            entities=[Entity(id="p", kind="person", pose=Pose(7, 5, 0), activity="cooking")],
            context_tags=("kitchen",),
        )
        frame = world.capture_frame(clock=Clock(0.0, "09:00"))
        text = describe_frame(frame)
        assert "person p" in text
        assert "cooking" in text
        assert "kitchen" in text
