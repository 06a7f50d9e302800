import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from tryon.semantics import (AttributeValidationError, CallableClient, CaptionParseError,
                             CaptionPolicy, CaptionResponse, CaptionUnavailableError,
                             EmptyCaptionError, GarmentAttributes, ScriptedClient, clean_caption,
                             generate_caption, parse_caption, serialize_caption,
                             validate_attributes)
from tryon.semantics.attributes import CLOSED_SETS, COLLAR, FIT, NECKLINE, SHIRT_LENGTH, SLEEVE

CORPUS = [json.loads(line) for line in
          (Path(__file__).parent / "data" / "caption_corpus.jsonl").read_text().splitlines()]

VALID = {"fit": "slim", "pattern": "striped", "color": "blue", "neckline": "mid",
         "collar": "round neck", "sleeve": "short sleeve", "shirt_length": "normal"}
VALID_TEXT = "a slim blue striped top with round neck, mid neckline, short sleeve, normal length"

open_token = st.from_regex(r"[a-z][a-z0-9]{0,7}(-[a-z0-9]{1,5})?", fullmatch=True)
attribute_records = st.builds(
    GarmentAttributes, fit=st.sampled_from(FIT), pattern=open_token, color=open_token,
    neckline=st.sampled_from(NECKLINE), collar=st.sampled_from(COLLAR),
    sleeve=st.sampled_from(SLEEVE), shirt_length=st.sampled_from(SHIRT_LENGTH))


class TestValidate:
    def test_valid_record(self):
        assert validate_attributes(VALID) == GarmentAttributes(**VALID)

    def test_missing_slot_named(self):
        bad = dict(VALID)
        del bad["collar"]
        with pytest.raises(AttributeValidationError) as exc:
            validate_attributes(bad)
        assert exc.value.slots == ["collar"]

    def test_closed_set_violation_lists_allowed(self):
        with pytest.raises(AttributeValidationError) as exc:
            validate_attributes({**VALID, "fit": "baggy"})
        assert exc.value.slots == ["fit"]
        assert all(v in str(exc.value) for v in FIT)

    def test_open_slots_must_be_lowercase_tokens(self):
        with pytest.raises(AttributeValidationError) as exc:
            validate_attributes({**VALID, "color": " Blue ", "pattern": "two words"})
        assert sorted(exc.value.slots) == ["color", "pattern"]

    def test_every_closed_set_is_enforced(self):
        for slot in CLOSED_SETS:
            with pytest.raises(AttributeValidationError):
                validate_attributes({**VALID, slot: "nonsense"})


class TestSerializeParse:
    def test_template(self):
        assert serialize_caption(GarmentAttributes(**VALID)) == VALID_TEXT

    def test_distinct_records_distinct_strings(self):
        other = GarmentAttributes(**{**VALID, "color": "red"})
        assert serialize_caption(other) != VALID_TEXT

    def test_inverse(self):
        assert parse_caption(VALID_TEXT) == GarmentAttributes(**VALID)

    def test_metadata_removed_then_parses(self):
        assert parse_caption(clean_caption(VALID_TEXT + " (model: x, tokens: 42)")) == GarmentAttributes(**VALID)

    def test_nonconformant(self):
        with pytest.raises(CaptionParseError) as exc:
            parse_caption("hello world")
        assert exc.value.slot == "fit"

    def test_first_failing_slot(self):
        with pytest.raises(CaptionParseError) as exc:
            parse_caption(VALID_TEXT.replace("round neck", "turtle neck"))
        assert exc.value.slot == "collar"
        with pytest.raises(CaptionParseError) as exc:
            parse_caption(VALID_TEXT + " and more")
        assert exc.value.slot == "end"

    def test_longest_collar_wins(self):
        text = serialize_caption(GarmentAttributes(**{**VALID, "collar": "deep v-neck"}))
        assert parse_caption(text).collar == "deep v-neck"

    @settings(max_examples=200, deadline=None)
    @given(attribute_records)
    def test_round_trip_property(self, attrs):
        assert parse_caption(serialize_caption(attrs)) == attrs


def test_round_trip_1000_records():
    import numpy as np
    from tryon.fixtures import random_attributes
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a = random_attributes(rng)
        assert parse_caption(serialize_caption(a)) == a


class TestClean:
    def test_role_prefix(self):
        assert clean_caption("Assistant: a slim top.") == "a slim top."

    def test_markdown_fence(self):
        assert clean_caption(f"```\n{VALID_TEXT}\n```") == VALID_TEXT
        assert clean_caption(f"```text\n{VALID_TEXT}\n```") == VALID_TEXT

    def test_empty_after_cleaning(self):
        with pytest.raises(EmptyCaptionError):
            clean_caption("(model: x) [tokens: 1]")
        with pytest.raises(EmptyCaptionError):
            clean_caption("   ")

    def test_corpus_size(self):
        assert len(CORPUS) == 50

    @pytest.mark.parametrize("raw", CORPUS)
    def test_idempotent_on_corpus(self, raw):
        try:
            once = clean_caption(raw)
        except EmptyCaptionError:
            return
        assert clean_caption(once) == once

    @settings(max_examples=300, deadline=None)
    @given(st.text(alphabet=st.characters(codec="ascii"), max_size=60))
    def test_idempotent_property(self, raw):
        try:
            once = clean_caption(raw)
        except EmptyCaptionError:
            return
        assert clean_caption(once) == once


def caption(text=VALID_TEXT):
    return CaptionResponse("caption", text)


FAILURES = {
    "timeout": CaptionResponse("timeout"),
    "safety_rejection": CaptionResponse("safety_rejection"),
    "error": CaptionResponse("error", "500"),
    "malformed": CaptionResponse("caption", "I cannot see a garment here."),
    "empty": CaptionResponse("caption", "(model: x)"),
}


class TestGenerateCaption:
    def test_primary_success(self):
        r = generate_caption(None, ScriptedClient(caption()), ScriptedClient(caption()))
        assert r.source == "primary" and r.text == VALID_TEXT

    def test_safety_rejection_falls_back(self):
        primary = ScriptedClient(FAILURES["safety_rejection"], caption())
        r = generate_caption(None, primary, ScriptedClient(caption("Assistant: " + VALID_TEXT)),
                             policy=CaptionPolicy(attempts_per_client=3))
        assert r.source == "fallback" and r.text == VALID_TEXT
        assert primary.calls == 1

    def test_both_fail_uses_local_template(self):
        r = generate_caption(None, ScriptedClient(FAILURES["timeout"]), ScriptedClient(FAILURES["error"]),
                             attributes=VALID)
        assert r.source == "local_template" and r.text == VALID_TEXT

    def test_unavailable(self):
        with pytest.raises(CaptionUnavailableError):
            generate_caption(None, ScriptedClient(FAILURES["timeout"]), ScriptedClient(FAILURES["error"]))
        with pytest.raises(CaptionUnavailableError):
            generate_caption(None)

    def test_timeout_is_retried(self):
        primary = ScriptedClient(FAILURES["timeout"], caption())
        r = generate_caption(None, primary, policy=CaptionPolicy(attempts_per_client=2))
        assert r.source == "primary" and primary.calls == 2

    def test_callable_adapter(self):
        def boom(image, prompt):
            raise TimeoutError
        r = generate_caption(None, CallableClient(boom), CallableClient(lambda i, p: VALID_TEXT))
        assert r.source == "fallback"

    @pytest.mark.parametrize("first", sorted(FAILURES))
    @pytest.mark.parametrize("second", sorted(FAILURES))
    def test_every_failure_combination_yields_parsable_caption(self, first, second):
        r = generate_caption(None, ScriptedClient(FAILURES[first]), ScriptedClient(FAILURES[second]),
                             attributes=VALID)
        assert r.source == "local_template"
        assert parse_caption(r.text) == GarmentAttributes(**VALID)
