from collections import Counter

import numpy as np
import pytest

from binaryshield.errors import SchemaError
from binaryshield.redaction import (EntityType, Redactor, entity_histogram,
                                    histogram_to_csv, parse_rules)

PAPER_SENTENCE = "Transfer $5000 from John Smith's account 123456789"
PAPER_REDACTED = "Transfer [AMOUNT] from [PERSON]'s account [ACCOUNT]"


@pytest.fixture(scope="module")
def redactor():
    return Redactor.default()


def luhn_fix(prefix15: str) -> str:
    """Append the check digit that makes a 16-digit number pass Luhn."""
    for check in "0123456789":
        digits = [int(c) for c in prefix15 + check]
        total = 0
        for i, d in enumerate(reversed(digits)):
            if i % 2 == 1:
                d *= 2
                if d > 9:
                    d -= 9
            total += d
        if total % 10 == 0:
            return prefix15 + check
    raise AssertionError("unreachable")


def build_fuzz_prompts(n: int, seed: int) -> list[str]:
    """Benign carrier sentences with random PII snippets spliced in."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    first = ["John", "Alice", "Maria", "Omar", "Priya", "Victor"]
    last = ["Smith", "Garcia", "Nguyen", "Patel", "Kowalski", "Tanaka"]
    cities = ["Berlin", "Tokyo", "Seattle", "New York", "Paris"]
    carriers = [
        "please forward the report to {} before the review",
        "the customer {} called twice about the invoice",
        "note from support: {} should be archived",
        "escalate ticket mentioning {} to tier two",
        "billing flagged {} in the overnight batch",
    ]

    def snippet() -> str:
        kind = int(rng.integers(9))
        if kind == 0:
            return f"{first[int(rng.integers(6))]} {last[int(rng.integers(6))]}"
        if kind == 1:
            return f"user{int(rng.integers(1000))}@example{int(rng.integers(90))}.com"
        if kind == 2:
            return f"{int(rng.integers(200, 900))}-{int(rng.integers(10, 99))}0-{int(rng.integers(1000, 9999))}"
        if kind == 3:
            area = int(rng.integers(100, 665))
            return f"{area:03d}-{int(rng.integers(1, 99)):02d}-{int(rng.integers(1, 9999)):04d}"
        if kind == 4:
            return luhn_fix("453212345678901"[:15 - 0])
        if kind == 5:
            return f"{int(rng.integers(1, 255))}.{int(rng.integers(0, 255))}.{int(rng.integers(0, 255))}.{int(rng.integers(1, 255))}"
        if kind == 6:
            return f"https://host{int(rng.integers(100))}.example.net/path{int(rng.integers(100))}"
        if kind == 7:
            return f"${int(rng.integers(10, 99999))}"
        return f"{int(rng.integers(10**6, 10**11))}"

    prompts = []
    for i in range(n):
        carrier = carriers[i % len(carriers)]
        parts = " and ".join(snippet() for _ in range(1 + int(rng.integers(3))))
        prompts.append(carrier.format(parts) + f" in {cities[i % len(cities)]}")
    return prompts


class TestDetect:
    def test_single_email(self, redactor):
        spans = redactor.detect("email me at a@b.com")
        assert len(spans) == 1
        assert spans[0].entity_type is EntityType.EMAIL
        assert spans[0].matched_text == "a@b.com"

    def test_paper_sentence_entities(self, redactor):
        spans = redactor.detect(PAPER_SENTENCE)
        found = {(s.entity_type, s.matched_text) for s in spans}
        assert (EntityType.AMOUNT, "$5000") in found
        assert (EntityType.PERSON, "John Smith") in found
        assert (EntityType.ACCOUNT, "123456789") in found

    def test_two_phone_occurrences(self, redactor):
        # rule oracle: the phone regex matches each occurrence separately
        spans = redactor.detect("call 555-010-1234 or 555-010-1234")
        phones = [s for s in spans if s.entity_type is EntityType.PHONE]
        assert len(phones) == 2
        assert all(s.matched_text == "555-010-1234" for s in phones)

    def test_empty_text(self, redactor):
        assert redactor.detect("") == []

    def test_spans_sorted_and_disjoint(self, redactor):
        text = "wire $250 to Alice Johnson at alice@corp.example.com now"
        spans = redactor.detect(text)
        for s, t in zip(spans, spans[1:]):
            assert s.end <= t.start

    def test_determinism(self, redactor):
        text = build_fuzz_prompts(5, seed=3)[2]
        assert redactor.detect(text) == redactor.detect(text)

    def test_longer_span_beats_shorter(self, redactor):
        spans = redactor.detect("signed by John Smith Inc yesterday")
        assert [s.entity_type for s in spans] == [EntityType.ORGANIZATION]
        assert spans[0].matched_text == "John Smith Inc"

    def test_priority_breaks_equal_length_ties(self, redactor):
        # a bare 10-digit run matches both PHONE and ACCOUNT at equal
        # length; PHONE has the higher (smaller-valued) priority
        spans = redactor.detect("reach me on 5550101234 today")
        assert [s.entity_type for s in spans] == [EntityType.PHONE]

    def test_luhn_gate_on_card_numbers(self, redactor):
        valid = luhn_fix("453212345678901")
        spans = redactor.detect(f"card {valid} on file")
        assert any(s.entity_type is EntityType.CREDIT_CARD for s in spans)
        # break the checksum: falls back to the ACCOUNT digit-run rule
        broken = valid[:-1] + ("0" if valid[-1] != "0" else "1")
        spans = redactor.detect(f"card {broken} on file")
        assert all(s.entity_type is not EntityType.CREDIT_CARD for s in spans)


class TestRedact:
    def test_paper_example_exact(self, redactor):
        assert redactor.redact(PAPER_SENTENCE).text == PAPER_REDACTED

    def test_counts_for_paper_example(self, redactor):
        counts = redactor.redact(PAPER_SENTENCE).entity_counts
        assert counts == {EntityType.AMOUNT: 1, EntityType.PERSON: 1,
                          EntityType.ACCOUNT: 1}

    def test_no_pii_is_unchanged(self, redactor):
        text = "explain the rules of chess castling to a beginner"
        result = redactor.redact(text)
        assert result.text == text
        assert result.entity_counts == {}
        assert result.original_length == len(text)

    def test_ssn_and_person(self, redactor):
        result = redactor.redact("SSN 078-05-1120 for John Smith")
        assert result.text == "SSN [SSN] for [PERSON]"
        assert result.entity_counts == {EntityType.SSN: 1, EntityType.PERSON: 1}

    def test_fixed_point_on_fuzz_corpus(self, redactor):
        for text in build_fuzz_prompts(200, seed=17):
            once = redactor.redact(text)
            twice = redactor.redact(once.text)
            assert twice.text == once.text
            assert not twice.entity_counts  # monotone to zero

    def test_no_rule_matches_redacted_output(self, redactor):
        for text in build_fuzz_prompts(120, seed=23):
            redacted = redactor.redact(text).text
            for rule in redactor.rules:
                for m in rule.pattern.finditer(redacted):
                    assert not rule.validator(m.group()), (
                        f"rule {rule.entity} matched {m.group()!r} in "
                        f"{redacted!r}")


class TestHistogram:
    def test_empty_corpus(self):
        histogram, skipped = entity_histogram([])
        assert histogram == Counter() and skipped == 0

    def test_two_example_sentences(self, redactor):
        corpus = [PAPER_SENTENCE, "SSN 078-05-1120 for John Smith"]
        histogram, skipped = entity_histogram(corpus, redactor=redactor)
        assert skipped == 0
        assert histogram == Counter({EntityType.PERSON: 2, EntityType.AMOUNT: 1,
                                     EntityType.ACCOUNT: 1, EntityType.SSN: 1})

    def test_linearity_over_copies(self, redactor):
        histogram, _ = entity_histogram([PAPER_SENTENCE] * 1000, redactor=redactor)
        assert histogram[EntityType.PERSON] == 1000

    def test_unreadable_records_counted(self, redactor):
        histogram, skipped = entity_histogram(
            ["email a@b.com", None, 42], redactor=redactor)
        assert skipped == 2
        assert histogram[EntityType.EMAIL] == 1

    def test_csv_contains_all_types(self):
        histogram, _ = entity_histogram([PAPER_SENTENCE])
        csv_text = histogram_to_csv(histogram)
        lines = csv_text.strip().splitlines()
        assert lines[0] == "entity,count"
        assert len(lines) == 1 + len(EntityType)


class TestRuleConfig:
    def test_default_config_versioned(self, redactor):
        assert redactor.version == 1
        assert len(redactor.rules) >= 12

    def test_custom_config_roundtrip(self, tmp_path):
        cfg = tmp_path / "mini.rules"
        cfg.write_text("version 3\nEMAIL\t1\tnone\t[a-z]+@[a-z]+\\.com\n")
        custom = Redactor.from_config(cfg)
        assert custom.version == 3
        assert custom.redact("mail me x@y.com").text == "mail me [EMAIL]"

    def test_unknown_entity_rejected(self):
        with pytest.raises(SchemaError, match="unknown entity"):
            parse_rules("version 1\nWIDGET\t1\tnone\tx\n")

    def test_unknown_validator_rejected(self):
        with pytest.raises(SchemaError, match="unknown validator"):
            parse_rules("version 1\nEMAIL\t1\tsorcery\tx\n")

    def test_bad_pattern_rejected(self):
        with pytest.raises(SchemaError, match="bad pattern"):
            parse_rules("version 1\nEMAIL\t1\tnone\t(unclosed\n")

    def test_missing_version_rejected(self):
        with pytest.raises(SchemaError, match="version"):
            parse_rules("EMAIL\t1\tnone\tx\n")
