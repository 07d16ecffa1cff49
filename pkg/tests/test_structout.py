import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finextract.corpus import CorpusSpec, generate_corpus
from finextract.prompting import serialize_target
from finextract.structout import (ParseStatus, Verification, parse_output,
                                  repair_json, verify_span)


class TestParseOutput:
    def test_well_formed_input_is_clean_exact(self):
        got = parse_output('{"entities":[{"text":"Acme","start":0,"end":4}]}',
                           "Acme Corp announced")
        assert got.parse_status == ParseStatus.CLEAN
        assert got.repair_log == []
        assert len(got.entities) == 1
        assert got.entities[0].verification == Verification.EXACT

    def test_garbage_fails_with_zero_entities(self):
        got = parse_output("not json at all", "whatever")
        assert got.parse_status == ParseStatus.FAILED
        assert got.entities == []

    def test_truncated_input_repaired_by_close_brackets(self):
        got = parse_output('{"entities":[{"text":"Acme","start":0,"end":4',
                           "Acme Corp")
        assert got.parse_status == ParseStatus.REPAIRED
        assert [e.text for e in got.entities] == ["Acme"]
        assert got.repair_log == ["close_brackets"]

    def test_duplicates_collapse_keeping_first(self):
        raw = json.dumps({"entities": [
            {"text": "Acme", "start": 0, "end": 4},
            {"text": "Acme", "start": 0, "end": 4},
        ]})
        got = parse_output(raw, "Acme Corp")
        assert len(got.entities) == 1

    @pytest.mark.parametrize("entity", [
        {"text": "Acme", "start": -1, "end": 4},
        {"text": "Acme", "start": 0.5, "end": 4},
        {"text": "Acme", "start": "0", "end": 4},
        {"text": "", "start": 0, "end": 4},
        {"text": "Acme", "start": 0},
        {"text": "Acme", "start": True, "end": 4},
        "not an object",
    ])
    def test_invalid_entities_dropped_and_logged(self, entity):
        raw = json.dumps({"entities": [
            {"text": "Acme", "start": 0, "end": 4}, entity,
        ]})
        got = parse_output(raw, "Acme Corp")
        assert [e.text for e in got.entities] == ["Acme"]
        assert "drop_invalid_entity" in got.repair_log
        assert got.parse_status == ParseStatus.REPAIRED

    def test_missing_entities_key_fails(self):
        assert parse_output("{}", "x").parse_status == ParseStatus.FAILED
        assert parse_output('{"other":[]}', "x").parse_status == ParseStatus.FAILED

    def test_top_level_list_fails(self):
        assert parse_output("[1,2]", "x").parse_status == ParseStatus.FAILED

    def test_never_raises_on_arbitrary_bytes(self):
        for raw in ("", "{", "}{", '{"entities":', "\x00\xff", "null", "3"):
            parse_output(raw, "src")


class TestInverseProperty:
    def test_parse_of_serialized_gold_recovers_gold(self):
        ds = generate_corpus(CorpusSpec(n_instances=200, seed=17))
        for inst in ds:
            raw = serialize_target(inst.gold, inst.text)
            got = parse_output(raw, inst.text)
            assert got.parse_status == ParseStatus.CLEAN
            assert all(e.verification == Verification.EXACT
                       for e in got.entities)
            assert {(e.start, e.end, e.text) for e in got.entities} \
                == {(s.start, s.end, s.text) for s in inst.gold}


class TestRepairJson:
    def test_canonical_input_unchanged(self):
        raw = '{"entities":[{"text":"A","start":0,"end":1}]}'
        log = []
        assert repair_json(raw, log) == raw
        assert log == []

    def test_prefix_strip(self):
        log = []
        assert repair_json('Output: {"entities":[]}', log) == '{"entities":[]}'
        assert log == ["strip_noise"]

    def test_trailing_comma_removed(self):
        log = []
        got = repair_json('{"entities":[{"text":"A","start":0,"end":1},]}', log)
        assert json.loads(got)["entities"] == [
            {"text": "A", "start": 0, "end": 1}
        ]
        assert log == ["remove_trailing_commas"]

    def test_single_quotes_normalized(self):
        got = repair_json("{'entities':[{'text':'A','start':0,'end':1}]}")
        assert json.loads(got)["entities"][0]["text"] == "A"

    def test_apostrophe_inside_double_quotes_kept(self):
        raw = '{"entities":[{"text":"O\'Neil Corp","start":0,"end":11}]}'
        assert repair_json(raw) == raw

    def test_suffix_noise_stripped(self):
        got = repair_json('{"entities":[]} and some trailing words')
        assert got == '{"entities":[]}'

    @given(st.text(max_size=80))
    @settings(max_examples=200, deadline=None)
    def test_idempotent_on_arbitrary_text(self, raw):
        once = repair_json(raw)
        assert repair_json(once) == once

    @given(st.integers(min_value=0, max_value=10_000), st.data())
    @settings(max_examples=150, deadline=None)
    def test_idempotent_on_mutated_canonical_outputs(self, seed, data):
        ds = generate_corpus(CorpusSpec(n_instances=1, seed=seed))
        raw = serialize_target(ds.instances[0].gold, ds.instances[0].text)
        mode = data.draw(st.sampled_from(["truncate", "prefix", "comma"]))
        if mode == "truncate":
            cut = data.draw(st.integers(min_value=1, max_value=len(raw) - 1))
            raw = raw[:cut]
        elif mode == "prefix":
            raw = data.draw(st.sampled_from(
                ["Output: ", "json\n", "Sure! "])) + raw
        else:
            raw = raw.replace("}]", "},]")
        once = repair_json(raw)
        assert repair_json(once) == once


class TestVerifySpan:
    def test_exact(self):
        got = verify_span("Acme", 0, 4, "Acme Corp")
        assert got.verification == Verification.EXACT

    def test_relocated_unique_occurrence(self):
        got = verify_span("Acme", 1, 5, "Acme Corp")
        assert got.verification == Verification.RELOCATED
        assert (got.start, got.end) == (0, 4)
        assert (got.claimed_start, got.claimed_end) == (1, 5)

    def test_relocated_nearest_occurrence_tie_leftmost(self):
        #        0123456789012345
        text = "ab ab cd ab"
        got = verify_span("ab", 4, 6, text)
        assert (got.start, got.end) == (3, 5)
        tied = verify_span("cd", 0, 2, "xcdxxcdx")
        assert (tied.start, tied.end) == (1, 3)

    def test_unverifiable_absent_text(self):
        got = verify_span("Zeta", 0, 4, "Acme Corp")
        assert got.verification == Verification.UNVERIFIABLE
        assert (got.start, got.end) == (0, 4)

    def test_out_of_range_claims_absent_text(self):
        got = verify_span("Zeta", 50, 54, "Acme Corp")
        assert got.verification == Verification.UNVERIFIABLE

    def test_no_invented_spans_property(self):
        ds = generate_corpus(CorpusSpec(n_instances=50, seed=3))
        for inst in ds:
            raw = serialize_target(inst.gold, inst.text)
            for e in parse_output(raw, inst.text).entities:
                if e.verification != Verification.UNVERIFIABLE:
                    assert inst.text[e.start:e.end] == e.text
