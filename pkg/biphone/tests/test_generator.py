# Licensed under a 3-clause BSD style license - see LICENSE.md
"""Test misspelling generation."""

import itertools
import math

import numpy as np
import pytest

from biphone.align import PhonemeGraphemeModel, align_lexicon
from biphone.confusion import ConfusionMatrix
from biphone.errors import MissingPhonemeError, WordNotFoundError
from biphone.generator import (
    GeneratorConfig,
    corrupt,
    corrupt_batch,
    path_probability,
    read_candidates,
    write_candidates,
)
from biphone.phonology import Lexicon, load_lexicon


def spellings(candidates):
    return [candidate.misspelling for candidate in candidates]


def test_they_in_hindi(lexicon, hindi, pgm) -> None:
    found = corrupt("they", lexicon, hindi, pgm)
    assert spellings(found) == ["tha", "thay", "thai", "ta", "tay", "tai", "tey"]
    assert found[1].score == pytest.approx(0.285)
    assert all(candidate.l1 == "hi" for candidate in found)


def test_exam_in_tamil(lexicon, tamil, pgm) -> None:
    found = corrupt("exam", lexicon, tamil, pgm)
    assert "eksam" in spellings(found)
    eksam = found[spellings(found).index("eksam")]
    assert eksam.shifts == ((1, "G", "K"),)
    assert eksam.score == pytest.approx(0.4 * 0.25 * 0.5 * 0.9 * 0.9)


def test_bacterial_in_tamil(lexicon, tamil, pgm) -> None:
    found = corrupt("bacterial", lexicon, tamil, pgm)
    assert "pactirial" in spellings(found)
    pactirial = found[spellings(found).index("pactirial")]
    assert pactirial.shifts == ((0, "B", "P"),)
    assert pactirial.chunks == ("p", "a", "c", "t", "i", "r", "i", "a", "l")


def test_very_in_bengali(lexicon, bengali, pgm) -> None:
    found = corrupt("very", lexicon, bengali, pgm)
    assert found[0].misspelling == "bery"
    assert found[0].shifts == ((0, "V", "B"),)
    assert "very" not in spellings(found)


def test_learned_model_gives_the_same_misspellings(data_dir, hindi, tamil, bengali) -> None:
    lex = load_lexicon(data_dir / "table2_lexicon.txt")
    segmentations, model = align_lexicon(lex, max_chunk_len=2, empty_weight=0.0)
    assert model.skipped == ("exam",)
    assert {seg.word: seg.chunks for seg in segmentations}["they"] == ("th", "ey")
    assert model.prob("EY1", "ay") == pytest.approx(0.5)
    assert model.prob("K", "c") == pytest.approx(1 / 3)

    cfg = GeneratorConfig(beam_width=10)
    for word, matrix, expected in [
        ("they", hindi, "thay"),
        ("exam", tamil, "eksam"),
        ("bacterial", tamil, "pactirial"),
        ("very", bengali, "bery"),
    ]:
        assert expected in spellings(corrupt(word, lex, matrix, model, cfg))


def test_scores_are_sorted(lexicon, tamil, pgm) -> None:
    for word in ("exam", "bacterial", "very", "they"):
        scores = [candidate.score for candidate in corrupt(word, lexicon, tamil, pgm)]
        assert scores == sorted(scores, reverse=True)
        assert all(0.0 < score <= 1.0 for score in scores)


def test_stored_path_is_recomputable(lexicon, hindi, tamil, pgm) -> None:
    for word, matrix in (("they", hindi), ("exam", tamil), ("bacterial", tamil)):
        for candidate in corrupt(word, lexicon, matrix, pgm):
            assert path_probability(candidate, lexicon, matrix, pgm) == pytest.approx(
                candidate.path_score, rel=1e-12
            )
    ta = corrupt("they", lexicon, hindi, pgm)[3]
    assert ta.misspelling == "ta"
    assert ta.shifts == ((0, "DH", "TH"),)
    assert ta.score == pytest.approx(ta.path_score, rel=1e-12)


def test_max_merge(lexicon, hindi, pgm) -> None:
    found = corrupt("they", lexicon, hindi, pgm, GeneratorConfig(merge="max"))
    thay = found[spellings(found).index("thay")]
    assert thay.score == pytest.approx(0.15)
    assert thay.score == thay.path_score


def test_wider_beam_is_a_superset(lexicon, tamil, pgm) -> None:
    narrow = corrupt("exam", lexicon, tamil, pgm, GeneratorConfig(beam_width=5))
    wide = corrupt("exam", lexicon, tamil, pgm, GeneratorConfig(beam_width=10))
    assert narrow == wide[:5]


def test_floor_and_identity(lexicon, hindi, pgm) -> None:
    floored = corrupt("they", lexicon, hindi, pgm, GeneratorConfig(min_prob=0.1))
    assert spellings(floored) == ["tha", "thay"]
    kept = corrupt("they", lexicon, hindi, pgm, GeneratorConfig(drop_identity=False))
    assert "they" in spellings(kept)


def test_identity_only_gives_nothing() -> None:
    lex = Lexicon({"no": (("N", "OW1"),)})
    matrix = ConfusionMatrix("hi", "en", {})
    model = PhonemeGraphemeModel({"N": {"n": 4}, "OW1": {"o": 2}})
    assert corrupt("no", lex, matrix, model) == []


def test_errors(lexicon, tamil, pgm) -> None:
    with pytest.raises(WordNotFoundError):
        corrupt("xylophone", lexicon, tamil, pgm)
    with pytest.raises(MissingPhonemeError, match='"D"'):
        corrupt("building", lexicon, tamil, pgm)
    with pytest.raises(ValueError):
        GeneratorConfig(beam_width=0)
    with pytest.raises(ValueError):
        GeneratorConfig(merge="mean")


def _exhaustive(phonemes, matrix, model):
    """Summed and best path score of every non-empty spelling."""
    options = [
        [
            (chunk, shift * emit)
            for target, shift in matrix.row(phoneme).items()
            for chunk, emit in model.row(target).items()
        ]
        for phoneme in phonemes
    ]
    summed, best = {}, {}
    for path in itertools.product(*options):
        spelling = "".join(chunk for chunk, _ in path)
        if not spelling:
            continue
        score = math.prod(factor for _, factor in path)
        summed[spelling] = summed.get(spelling, 0.0) + score
        best[spelling] = max(best.get(spelling, 0.0), score)
    return summed, best


def _top(scores, word, width):
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:width]
    return [score for spelling, score in ranked if spelling != word]


def test_overlapping_chunks_are_merged() -> None:
    lex = Lexicon({"ca": (("K", "AA1"),)})
    matrix = ConfusionMatrix("hi", "en", {})
    model = PhonemeGraphemeModel({"K": {"x": 4, "t": 3, "th": 3}, "AA1": {"a": 1, "ha": 1}})
    found = corrupt("ca", lex, matrix, model, GeneratorConfig(beam_width=2))
    assert spellings(found) == ["tha", "xa"]
    assert found[0].score == pytest.approx(0.3)
    assert found[0].path_score == pytest.approx(0.15)
    assert found[0].chunks in (("t", "ha"), ("th", "a"))
    wide = corrupt("ca", lex, matrix, model, GeneratorConfig(beam_width=10))
    assert spellings(wide)[:4] == ["tha", "xa", "xha", "ta"]
    best = corrupt("ca", lex, matrix, model, GeneratorConfig(beam_width=2, merge="max"))
    assert spellings(best) == ["xa", "xha"]


def test_search_equals_exhaustive_enumeration() -> None:
    rng = np.random.default_rng(2023)
    symbols = ["B", "D", "G", "K", "P", "T", "S", "Z"]
    chunk_pool = ["b", "d", "bd", "db", "t", "dt", "td", "tt", "k", "kt", ""]
    rows = {}
    for symbol in symbols:
        others = rng.choice([s for s in symbols if s != symbol], size=rng.integers(0, 3), replace=False)
        targets = [symbol, *(str(other) for other in others)]
        rows[symbol] = {target: float(prob) for target, prob in zip(targets, rng.dirichlet(np.ones(len(targets))))}
    matrix = ConfusionMatrix("hi", "en", rows)
    emissions = {}
    for symbol in symbols:
        chunks = rng.choice(chunk_pool, size=rng.integers(1, 4), replace=False)
        emissions[symbol] = {str(chunk): int(count) for chunk, count in zip(chunks, rng.integers(1, 10, size=len(chunks)))}
    model = PhonemeGraphemeModel(emissions)

    entries = {}
    for _ in range(100):
        phonemes = tuple(str(symbol) for symbol in rng.choice(symbols, size=rng.integers(1, 5), replace=False))
        word = "".join(model.ranked(phoneme)[0][0] for phoneme in phonemes)
        if word:
            entries.setdefault(word, (phonemes,))
    lex = Lexicon(entries)

    for word, (phonemes,) in lex.entries.items():
        summed, best = _exhaustive(phonemes, matrix, model)
        for merge, scores in (("sum", summed), ("max", best)):
            found = corrupt(word, lex, matrix, model, GeneratorConfig(beam_width=10, merge=merge))
            assert [candidate.score for candidate in found] == pytest.approx(_top(scores, word, 10), abs=1e-12)
            for candidate in found:
                assert candidate.score == pytest.approx(scores[candidate.misspelling], abs=1e-12)
                assert candidate.path_score == pytest.approx(best[candidate.misspelling], abs=1e-12)
                assert "".join(candidate.chunks) == candidate.misspelling
            narrow = corrupt(word, lex, matrix, model, GeneratorConfig(beam_width=3, merge=merge))
            assert found[:len(narrow)] == narrow


def test_batch(lexicon, hindi, pgm) -> None:
    words = ["they", "very", "exam", "bacterial", "a", "the", "xylophone"]
    serial = corrupt_batch(words, lexicon, hindi, pgm, workers=1)
    parallel = corrupt_batch(words, lexicon, hindi, pgm, workers=2)
    assert serial == parallel
    assert list(serial) == ["they", "very", "exam", "bacterial", "a", "the"]
    assert serial["they"] == corrupt("they", lexicon, hindi, pgm)
    assert corrupt_batch([], lexicon, hindi, pgm) == {}


def test_candidate_file(lexicon, hindi, pgm, tmp_path) -> None:
    results = corrupt_batch(["they", "the"], lexicon, hindi, pgm)
    path = tmp_path / "candidates.tsv"
    write_candidates(results, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "#l1=hi"
    assert any(line.startswith("they\tta\t") for line in lines)
    assert any(line.endswith("\t0:DH>TH") for line in lines)
    loaded = read_candidates(path)
    assert list(loaded) == list(results)
    for word, found in results.items():
        assert spellings(loaded[word]) == spellings(found)
        assert [c.score for c in loaded[word]] == [c.score for c in found]
        assert [c.shifts for c in loaded[word]] == [c.shifts for c in found]
        assert all(c.l1 == "hi" for c in loaded[word])
