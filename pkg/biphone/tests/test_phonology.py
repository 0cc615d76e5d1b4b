# Licensed under a 3-clause BSD style license - see LICENSE.md
"""Test the lexicon parser and phoneme utilities."""

import pickle

import pytest

from biphone.errors import LexiconError
from biphone.phonology import (
    DEFAULT_INVENTORY,
    PhonemeInventory,
    load_lexicon,
    merge_lexicons,
    normalize_word,
    parse_lexicon,
    phonemes_of,
    serialize_lexicon,
    strip_stress,
    write_rejects,
)


def test_sample_lexicon(data_dir) -> None:
    lex = load_lexicon(data_dir / "cmudict_sample.txt")
    assert len(lex) == 16
    assert lex.phonemes_of("they") == ("DH", "EY1")
    assert lex.phonemes_of("THEY") == ("DH", "EY1")
    assert lex.phonemes_of("They,") == ("DH", "EY1")
    assert lex.phonemes_of("building") == ("B", "IH1", "L", "D", "IH0", "NG")


def test_variants_keep_file_order(data_dir) -> None:
    lex = load_lexicon(data_dir / "cmudict_sample.txt")
    assert lex.entries["a"] == (("AH0",), ("EY1",))
    assert lex.canonical["a"] == ("AH0",)
    assert lex.variants("hello")[1] == ("HH", "EH0", "L", "OW1")


def test_rejects_are_reported(data_dir) -> None:
    lex = load_lexicon(data_dir / "cmudict_sample.txt")
    reasons = {reject.line.split()[0]: reject.reason for reject in lex.rejects}
    assert set(reasons) == {"1ST", "BADPHONE", "NOPHONES", "BAD(X)"}
    assert reasons["BADPHONE"] == "unknown phoneme XX1"
    assert reasons["NOPHONES"] == "no phonemes"
    assert "1st" not in lex
    assert "bad" not in lex


def test_unknown_word_is_none(data_dir) -> None:
    lex = load_lexicon(data_dir / "cmudict_sample.txt")
    assert phonemes_of(lex, "xylophone") is None
    assert lex.variants("xylophone") == ()


def test_empty_lexicon_is_an_error() -> None:
    with pytest.raises(LexiconError):
        parse_lexicon([";;; only a comment", "BAD  QQ"])


def test_duplicate_variants_are_merged() -> None:
    lex = parse_lexicon(["TOMATO  T AH0 M EY1 T OW2", "TOMATO(1)  T AH0 M EY1 T OW2"])
    assert lex.entries["tomato"] == (("T", "AH0", "M", "EY1", "T", "OW2"),)


def test_serialize_parses_back(data_dir) -> None:
    lex = load_lexicon(data_dir / "cmudict_sample.txt")
    text = serialize_lexicon(lex)
    assert "A(1)  EY1" in text
    assert parse_lexicon(text.splitlines()) == lex


def test_merge_keeps_canonical(data_dir) -> None:
    base = parse_lexicon(["READ  R IY1 D"])
    extra = parse_lexicon(["READ  R EH1 D", "JOO  JH UW1"])
    merged = merge_lexicons(base, extra)
    assert merged.phonemes_of("read") == ("R", "IY1", "D")
    assert merged.variants("read") == (("R", "IY1", "D"), ("R", "EH1", "D"))
    assert "joo" in merged


def test_lexicon_pickles(data_dir) -> None:
    lex = load_lexicon(data_dir / "cmudict_sample.txt")
    assert pickle.loads(pickle.dumps(lex)) == lex


def test_strip_stress() -> None:
    assert strip_stress(("B", "IH1", "L", "D", "IH0", "NG")) == ("B", "IH", "L", "D", "IH", "NG")
    with pytest.raises(ValueError):
        strip_stress(())


def test_inventory() -> None:
    assert "AH0" in DEFAULT_INVENTORY
    assert "AH" in DEFAULT_INVENTORY
    assert "AH3" not in DEFAULT_INVENTORY
    assert "K1" not in DEFAULT_INVENTORY
    assert DEFAULT_INVENTORY.is_vowel("EY1")
    assert not DEFAULT_INVENTORY.is_vowel("JH")
    extended = PhonemeInventory(extra=["DX"], extra_vowels=["AX"])
    assert "DX" in extended and "AX0" in extended and "DX0" not in extended
    with pytest.raises(LexiconError):
        PhonemeInventory(extra=["dx"])


def test_normalize_word() -> None:
    assert normalize_word('"Hello!"') == "hello"
    assert normalize_word("don't") == "don't"


def test_write_rejects(data_dir, tmp_path) -> None:
    lex = load_lexicon(data_dir / "cmudict_sample.txt")
    write_rejects(lex.rejects, tmp_path / "rejects.tsv")
    lines = (tmp_path / "rejects.tsv").read_text().splitlines()
    assert len(lines) == 4
    assert lines[0].split("\t")[2] == "word has characters other than letters and apostrophes"
