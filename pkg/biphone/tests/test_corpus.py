# Licensed under a 3-clause BSD style license - see LICENSE.md
"""Test n-gram counting, misspelling retrieval and confidence scoring."""

from collections import Counter

import pytest

from biphone.corpus import (
    NGramStore,
    ScoredOccurrence,
    build_misspelling_index,
    build_ngrams,
    confidence,
    coverage_report,
    load_store,
    read_scored,
    retrieve_candidates,
    save_store,
    score_occurrences,
    split_pool,
    tokenize,
    top_words,
    write_scored,
)
from biphone.errors import EmptyInputError, StoreFormatError
from biphone.generator import MisspellingCandidate

SENTENCES = [
    "they were going home",
    "they were going out",
    "they are going home",
    "they are going there",
    "we were here today",
    "you were there today",
]


@pytest.fixture
def store():
    return build_ngrams(SENTENCES)


def occurrence(left, word, right):
    return ScoredOccurrence(0, 1, "x", word, left, right)


def test_tokenize() -> None:
    assert tokenize("I vare going, today!") == ["i", "vare", "going", "today"]
    assert tokenize("  -- ") == []


def test_counts(store) -> None:
    assert store.tri["they", "were", "going"] == 2
    assert store.tri["<s>", "they", "were"] == 2
    assert store.bi["today", "</s>"] == 2
    assert store.left_total["<s>"] == 6
    assert store.right_total["</s>"] == 6


def test_marginals_recount(store) -> None:
    ctx, left, right = Counter(), Counter(), Counter()
    for (l, _, r), count in store.tri.items():
        ctx[l, r] += count
    for (l, r), count in store.bi.items():
        left[l] += count
        right[r] += count
    assert store.ctx_total == dict(ctx)
    assert store.left_total == dict(left)
    assert store.right_total == dict(right)
    assert store.left_bi is store.bi


def test_trigram_estimate(store) -> None:
    assert confidence(store, occurrence("they", "were", "going")) == 0.5
    assert confidence(store, occurrence("<s>", "they", "were")) == 0.5
    assert confidence(store, occurrence("they", "zebra", "going")) == 0.0


def test_backoff_estimate(store) -> None:
    assert confidence(store, occurrence("going", "there", "today")) == pytest.approx(0.4 * (1 / 4 + 1 / 2))
    assert confidence(store, occurrence("going", "zebra", "today")) == 0.0
    assert confidence(store, occurrence("nowhere", "zebra", "nothing")) == 0.0


def test_workers_do_not_change_the_store() -> None:
    assert build_ngrams(SENTENCES * 10, workers=2) == build_ngrams(SENTENCES * 10)


def test_negative_count() -> None:
    with pytest.raises(ValueError):
        NGramStore({("a", "b", "c"): -1}, {})


def test_top_words() -> None:
    assert top_words(SENTENCES, 2) == [("going", 4), ("they", 4)]


def test_split_pool() -> None:
    pool, clean = split_pool(["they were going", "i vare going", ""], {"they", "were", "going", "i"})
    assert pool == [(1, ["i", "vare", "going"])]
    assert clean == [["they", "were", "going"]]


def test_retrieve() -> None:
    dictionary = {"i", "going", "they", "were", "home", "is", "it"}
    sentences = ["i vare going", "they were going home", "Vare is it"]
    found = list(retrieve_candidates(sentences, {"vare": "where"}, dictionary))
    assert found == [
        ScoredOccurrence(0, 1, "vare", "where", "i", "going"),
        ScoredOccurrence(2, 0, "vare", "where", "<s>", "is"),
    ]


def test_misspelling_index() -> None:
    candidates = {
        "where": [MisspellingCandidate("where", "vare", 0.3), MisspellingCandidate("where", "ware", 0.2)],
        "wear": [
            MisspellingCandidate("wear", "ware", 0.4),
            MisspellingCandidate("wear", "vare", 0.3),
            MisspellingCandidate("wear", "were", 0.5),
        ],
    }
    assert build_misspelling_index(candidates, {"were"}) == {"vare": "wear", "ware": "wear"}


def test_score_pipeline(store) -> None:
    found = retrieve_candidates(["they vare going home"], {"vare": "were"}, {"they", "going", "home"})
    scored = score_occurrences(store, found)
    assert len(scored) == 1
    assert scored[0].confidence == 0.5


def test_coverage_report() -> None:
    scored = [
        ScoredOccurrence(0, 0, "a", "b", "<s>", "</s>", 0.5),
        ScoredOccurrence(0, 2, "a", "b", "<s>", "</s>", 0.1),
        ScoredOccurrence(1, 0, "a", "b", "<s>", "</s>", 0.3),
        ScoredOccurrence(2, 0, "a", "b", "<s>", "</s>", 0.0),
    ]
    report = coverage_report(scored, [0.6, 0.0, 0.2, 0.5], pool_size=4)
    assert list(report["threshold"]) == [0.0, 0.2, 0.5, 0.6]
    assert list(report["retained"]) == [3, 2, 1, 0]
    assert list(report["fraction"]) == [0.75, 0.5, 0.25, 0.0]
    assert report["retained"].is_monotonic_decreasing


def test_coverage_errors() -> None:
    with pytest.raises(EmptyInputError):
        coverage_report([], [0.5], pool_size=0)
    with pytest.raises(ValueError):
        coverage_report([ScoredOccurrence(0, 0, "a", "b", "<s>", "</s>")], [0.5], pool_size=1)


def test_store_file(store, tmp_path) -> None:
    path = tmp_path / "ngrams.tsv"
    save_store(store, path)
    lines = path.read_text().splitlines()
    assert lines[:2] == ["#format=biphone-ngrams", "#version=1.0"]
    assert load_store(path) == store
    path.write_text("\n".join(["#format=biphone-ngrams", "#version=1.3", "a b c\t2", "a b\t2"]) + "\n")
    assert load_store(path).ctx_total == {("a", "c"): 2}


def test_bad_store_file(tmp_path) -> None:
    path = tmp_path / "ngrams.tsv"
    path.write_text("a b c\t2\n")
    with pytest.raises(StoreFormatError):
        load_store(path)
    path.write_text("#format=biphone-ngrams\n#version=2.0\na b c\t2\n")
    with pytest.raises(StoreFormatError, match="version"):
        load_store(path)
    path.write_text("#format=biphone-ngrams\n#version=1.0\na b c\tmany\n")
    with pytest.raises(StoreFormatError, match=":3:"):
        load_store(path)


def test_scored_file(tmp_path) -> None:
    scored = [ScoredOccurrence(3, 1, "vare", "where", "i", "going", 0.25)]
    write_scored(scored, tmp_path / "scored.tsv")
    assert (tmp_path / "scored.tsv").read_text() == "3\t1\tvare\twhere\t0.25\n"
    assert read_scored(tmp_path / "scored.tsv") == [ScoredOccurrence(3, 1, "vare", "where", "", "", 0.25)]


def test_unscored_occurrence_is_not_written(tmp_path) -> None:
    scored = [
        ScoredOccurrence(3, 1, "vare", "where", "i", "going", 0.25),
        ScoredOccurrence(4, 0, "vare", "where", "<s>", "is", None),
    ]
    with pytest.raises(ValueError, match="not been scored"):
        write_scored(scored, tmp_path / "scored.tsv")
    assert not (tmp_path / "scored.tsv").exists()
