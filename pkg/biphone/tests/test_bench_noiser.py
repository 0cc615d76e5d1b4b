# Licensed under a 3-clause BSD style license - see LICENSE.md
"""Test benchmark noising and its audit."""

import numpy as np
import pytest

from biphone.bench_noiser import (
    NoiseConfig,
    audit_noise,
    load_blocklist,
    load_field_map,
    noise_dataset,
    parse_jsonl,
    read_jsonl,
    read_jsonl_lines,
    splice_record,
    write_jsonl,
    write_noised_jsonl,
    write_stats,
)
from biphone.errors import ConfigError, NoiseAuditError, UnknownTaskError
from biphone.generator import MisspellingCandidate

WORDS = {
    "going": [("goin", 0.3), ("gowing", 0.2)],
    "where": [("vare", 0.4), ("wear", 0.1)],
    "today": [("tuday", 0.25)],
    "house": [("hous", 0.2)],
    "water": [("vater", 0.3), ("wotter", 0.1)],
    "is": [("iz", 0.5)],
}


@pytest.fixture
def candidates():
    return {
        word: [MisspellingCandidate(word, spelling, score, l1="hi") for spelling, score in found]
        for word, found in WORDS.items()
    }


@pytest.fixture
def top1():
    return NoiseConfig(strategy="top1")


def boolq(idx, question, passage="where is the water going today"):
    return {"idx": idx, "question": question, "passage": passage, "label": True}


def test_only_the_designated_field_changes(candidates) -> None:
    records = [boolq(i, "where is the water going today") for i in range(20)]
    noised, stats = noise_dataset(records, "boolq", candidates)
    assert stats.records_noised == 20
    for before, after in zip(records, noised):
        assert after["passage"] == before["passage"]
        assert after["label"] is True
        assert after["question"] != before["question"]
    assert records[0]["question"] == "where is the water going today"


def test_rte_uses_the_hypothesis(candidates) -> None:
    record = {"idx": 0, "premise": "going today", "hypothesis": "where", "label": "entailment"}
    noised, _ = noise_dataset([record], "rte", candidates, NoiseConfig(strategy="top1"))
    assert noised[0] == {"idx": 0, "premise": "going today", "hypothesis": "vare", "label": "entailment"}


def test_calibrated_rate(candidates) -> None:
    rng = np.random.default_rng(11)
    vocabulary = ["going", "where", "today", "house", "water"]
    records = [boolq(i, " ".join(rng.choice(vocabulary, size=10))) for i in range(1000)]
    _, stats = noise_dataset(records, "boolq", candidates)
    assert stats.eligible == 10_000
    assert stats.records_eligible == 1000
    assert stats.records_noised == 1000
    assert abs(stats.eligible_rate - 0.30) <= 0.02
    assert stats.token_rate == stats.eligible_rate
    report = stats.to_report()
    assert report["examples_with_noise_pct"] == 100.0
    assert abs(report["tokens_misspelt_pct"] - 30.0) <= 2.0


def test_short_words_are_never_replaced(candidates) -> None:
    records = [boolq(i, "is it going") for i in range(50)]
    noised, stats = noise_dataset(records, "boolq", candidates)
    assert stats.replaced == 50
    for record in noised:
        assert record["question"].startswith("is it ")
        assert record["question"] in ("is it goin", "is it gowing")


def test_deterministic_and_order_free(candidates) -> None:
    records = [boolq(i, "where is the water going today") for i in range(200)]
    first, _ = noise_dataset(records, "boolq", candidates, NoiseConfig(seed=3))
    again, _ = noise_dataset(records, "boolq", candidates, NoiseConfig(seed=3))
    assert first == again
    shuffled, _ = noise_dataset(records[::-1], "boolq", candidates, NoiseConfig(seed=3))
    assert shuffled[::-1] == first
    other, _ = noise_dataset(records, "boolq", candidates, NoiseConfig(seed=4))
    assert other != first


def test_case_punctuation_and_whitespace(candidates, top1) -> None:
    records = [boolq(0, '"Going!"'), boolq(1, "WHERE?"), boolq(2, "  going\tnow  ")]
    noised, _ = noise_dataset(records, "boolq", candidates, top1)
    assert [record["question"] for record in noised] == ['"Goin!"', "VARE?", "  goin\tnow  "]


def test_guardrails(candidates) -> None:
    records = [boolq(0, "going")]
    blocked = NoiseConfig(strategy="top1", blocklist=frozenset({("going", "goin")}))
    assert noise_dataset(records, "boolq", candidates, blocked)[0][0]["question"] == "gowing"
    candidates["going"].append(MisspellingCandidate("going", "gooong", 0.9, l1="hi"))
    assert noise_dataset(records, "boolq", candidates, NoiseConfig(strategy="top1"))[0][0]["question"] == "goin"
    tamil_only = {"going": [MisspellingCandidate("going", "koing", 0.9, l1="ta")]}
    noised, stats = noise_dataset(records, "boolq", tamil_only)
    assert noised == records
    assert stats.eligible == 0


def test_nested_multirc_field(candidates, top1) -> None:
    record = {
        "idx": 0,
        "passage": {
            "text": "going where today",
            "questions": [
                {"question": "going today", "answers": [{"text": "where", "label": 0}]},
                {"question": "where now", "answers": []},
            ],
        },
    }
    noised, stats = noise_dataset([record], "multirc", candidates, top1)
    passage = noised[0]["passage"]
    assert passage["text"] == "going where today"
    assert passage["questions"][0]["answers"] == [{"text": "where", "label": 0}]
    assert stats.tokens == 4
    assert stats.eligible == 3
    assert stats.replaced == 1
    changed = [q["question"] for q in passage["questions"]]
    assert changed in (["goin today", "where now"], ["going tuday", "where now"], ["going today", "vare now"])


def test_missing_field_is_copied(candidates) -> None:
    records = [{"idx": 0, "passage": "going"}]
    noised, stats = noise_dataset(records, "boolq", candidates)
    assert noised == records
    assert stats.missing_field == 1
    assert stats.records_noised == 0


def test_refusals(candidates) -> None:
    with pytest.raises(ConfigError):
        noise_dataset([boolq(0, "going")], "boolq", candidates, split="train")
    with pytest.raises(UnknownTaskError, match="boolq"):
        noise_dataset([boolq(0, "going")], "squad", candidates)
    with pytest.raises(ConfigError):
        NoiseConfig(target_token_fraction=1.5)
    with pytest.raises(ConfigError):
        NoiseConfig(strategy="best")
    with pytest.raises(ConfigError):
        NoiseConfig(rules=("(",))


def test_audit_agrees_with_noising(candidates) -> None:
    records = [boolq(i, "Where is the water going today?") for i in range(100)]
    records.append({"idx": 100, "passage": "going"})
    noised, stats = noise_dataset(records, "boolq", candidates)
    audited = audit_noise(records, noised, "boolq", candidates=candidates)
    assert audited == stats
    assert audited.to_report()["tokens_misspelt_pct"] == stats.to_report()["tokens_misspelt_pct"]


def test_audit_errors(candidates) -> None:
    clean = [boolq(0, "where is the water")]
    with pytest.raises(NoiseAuditError):
        audit_noise(clean, [boolq(0, "where is the water", passage="changed")], "boolq")
    with pytest.raises(NoiseAuditError, match="short"):
        audit_noise(clean, [boolq(0, "where iz the water")], "boolq")
    with pytest.raises(NoiseAuditError, match="allowed"):
        audit_noise(clean, [boolq(0, "where is the wader")], "boolq", candidates=candidates)
    with pytest.raises(NoiseAuditError):
        audit_noise(clean, [boolq(1, "where is the water")], "boolq")
    with pytest.raises(NoiseAuditError):
        audit_noise(clean, [], "boolq")
    assert audit_noise(clean, [boolq(0, "vare is the water")], "boolq", candidates=candidates).replaced == 1


def test_files(candidates, tmp_path) -> None:
    records = [boolq(0, "naïve going")]
    write_jsonl(records, tmp_path / "boolq.jsonl")
    assert "naïve" in (tmp_path / "boolq.jsonl").read_text(encoding="utf-8")
    assert read_jsonl(tmp_path / "boolq.jsonl") == records
    _, stats = noise_dataset(records, "boolq", candidates)
    write_stats(stats, tmp_path / "boolq.stats.json")
    assert '"examples_with_noise_pct": 100.0' in (tmp_path / "boolq.stats.json").read_text()

    (tmp_path / "fields.yaml").write_text("boolq: passage\nsquad: question\n")
    fields = load_field_map(tmp_path / "fields.yaml")
    assert fields == {"boolq": "passage", "squad": "question"}
    noised, _ = noise_dataset([boolq(0, "going", "where")], "boolq", candidates, NoiseConfig(fields_by_task=fields, strategy="top1"))
    assert noised[0]["passage"] == "vare"
    (tmp_path / "fields.yaml").write_text("- boolq\n")
    with pytest.raises(ConfigError):
        load_field_map(tmp_path / "fields.yaml")

    (tmp_path / "blocklist.tsv").write_text("Going\tgoin\n")
    assert load_blocklist(tmp_path / "blocklist.tsv") == frozenset({("going", "goin")})


def test_untouched_bytes_survive(candidates, tmp_path) -> None:
    source = (
        '{"idx":0,"question":"going","passage":"caf\\u00e9","score":1.0E2}\n'
        '{"idx": 1,  "question": "a b", "passage": "x"}\r\n'
        "\n"
        '{"idx":2,"question":"Going naïve","extra":[1, 2 ,3]}'
    )
    (tmp_path / "boolq.jsonl").write_bytes(source.encode("utf-8"))
    lines = read_jsonl_lines(tmp_path / "boolq.jsonl")
    clean = parse_jsonl(lines)
    noised, stats = noise_dataset(clean, "boolq", candidates, NoiseConfig(strategy="top1"))
    assert stats.replaced == 2
    write_noised_jsonl(lines, clean, noised, tmp_path / "boolq.noised.jsonl")
    expected = source.replace('"question":"going"', '"question":"goin"').replace("Going naïve", "Goin naïve")
    assert (tmp_path / "boolq.noised.jsonl").read_bytes() == expected.encode("utf-8")
    assert audit_noise(clean, read_jsonl(tmp_path / "boolq.noised.jsonl"), "boolq", candidates=candidates) == stats


def test_splice_record() -> None:
    line = '{ "idx" : 7, "passage": {"questions": [{"question": "going \\"today\\"", "n": -0.0}]}}\n'
    clean = {"idx": 7, "passage": {"questions": [{"question": 'going "today"', "n": -0.0}]}}
    noised = {"idx": 7, "passage": {"questions": [{"question": 'goin "today"', "n": -0.0}]}}
    assert splice_record(line, clean, noised) == line.replace("going", "goin")
    assert splice_record(line, clean, clean) == line
    with pytest.raises(ValueError):
        splice_record('{"idx":0}', {"idx": 0}, {"idx": 1})
    with pytest.raises(ValueError):
        write_noised_jsonl([line], [clean], [], "unused.jsonl")
