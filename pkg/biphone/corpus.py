# Licensed under a 3-clause BSD style license - see LICENSE.md
"""This module finds generated misspellings in running text and scores them.

A sentence enters the candidate pool when it holds at least one token that
is not a dictionary word.  Every occurrence of an indexed misspelling ``Ŵ``
in the pool is scored by how well the intended word ``W`` fits between the
neighbours ``L`` and ``R`` of ``Ŵ``, with the Stupid Backoff estimate

    F(L, W, R) / sum_w F(L, w, R)                      if the context was seen
    0.4 * (F(L, W) / sum_w F(L, w) + F(W, R) / sum_w F(w, R))   otherwise

where ``F`` counts n-grams of a reference corpus.  Sentences are padded with
``<s>`` and ``</s>`` so the first and last words have a context too.
"""

import logging
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from pathlib import Path

import pandas as pd
from packaging.version import InvalidVersion, Version

from biphone.errors import EmptyInputError, MatrixFormatError, StoreFormatError
from biphone.formats import atomic_write, format_float, read_header, tsv_rows, write_header
from biphone.phonology import normalize_word

__all__ = [
    "CONSTANTS",
    "NGramStore",
    "ScoredOccurrence",
    "build_misspelling_index",
    "build_ngrams",
    "confidence",
    "coverage_report",
    "load_store",
    "read_scored",
    "retrieve_candidates",
    "save_store",
    "score_occurrences",
    "split_pool",
    "tokenize",
    "top_words",
    "write_scored",
]

logger = logging.getLogger(__name__)

CONSTANTS = {
    "BACKOFF": 0.4,
    "BOS": "<s>",
    "EOS": "</s>",
    "STORE_FORMAT": "biphone-ngrams",
    "STORE_VERSION": "1.0",
}


def tokenize(sentence: str) -> list[str]:
    """Lowercase, split on whitespace and strip punctuation from token edges.

    Tokens that are nothing but punctuation disappear.

    Examples
    --------
    >>> tokenize("I vare going, today!")
    ['i', 'vare', 'going', 'today']
    """
    return [token for token in map(normalize_word, sentence.split()) if token]


def _padded(tokens: list[str]) -> list[str]:
    return [CONSTANTS["BOS"], *tokens, CONSTANTS["EOS"]]


def _as_tokens(sentence) -> list[str]:
    return tokenize(sentence) if isinstance(sentence, str) else list(sentence)


@dataclass(frozen=True)
class NGramStore:
    """Trigram and bigram counts of a reference corpus with their marginals.

    ``tri`` and ``bi`` are the raw counts.  The marginals are derived from
    them when the store is built:

    ``ctx_total[(L, R)]``
        sum over ``w`` of ``F(L, w, R)``
    ``left_total[L]``
        sum over ``w`` of ``F(L, w)``
    ``right_total[R]``
        sum over ``w`` of ``F(w, R)``
    """

    tri: Mapping[tuple[str, str, str], int]
    bi: Mapping[tuple[str, str], int]
    ctx_total: dict = field(init=False, repr=False, compare=False)
    left_total: dict = field(init=False, repr=False, compare=False)
    right_total: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for table in (self.tri, self.bi):
            for key, count in table.items():
                if not isinstance(count, int) or count < 0:
                    raise ValueError(f"The count of {key} is {count!r}, not a non-negative integer.")
        ctx_total, left_total, right_total = Counter(), Counter(), Counter()
        for (left, _, right), count in self.tri.items():
            ctx_total[left, right] += count
        for (left, right), count in self.bi.items():
            left_total[left] += count
            right_total[right] += count
        object.__setattr__(self, "tri", dict(self.tri))
        object.__setattr__(self, "bi", dict(self.bi))
        object.__setattr__(self, "ctx_total", dict(ctx_total))
        object.__setattr__(self, "left_total", dict(left_total))
        object.__setattr__(self, "right_total", dict(right_total))

    @property
    def left_bi(self) -> Mapping[tuple[str, str], int]:
        """``F(L, W)``; the same table as :attr:`right_bi`."""
        return self.bi

    @property
    def right_bi(self) -> Mapping[tuple[str, str], int]:
        return self.bi


@dataclass(frozen=True)
class ScoredOccurrence:
    """A misspelling seen in a sentence, with its 1-word contexts.

    ``position`` counts tokens from 0 without the boundary markers.
    ``confidence`` is ``None`` until the occurrence is scored.
    """

    sentence_id: int
    position: int
    misspelling: str
    word: str
    left: str
    right: str
    confidence: float | None = None


def _count_shard(sentences):
    tri, bi = Counter(), Counter()
    for tokens in sentences:
        padded = _padded(tokens)
        bi.update(zip(padded, padded[1:]))
        tri.update(zip(padded, padded[1:], padded[2:]))
    return tri, bi


def build_ngrams(sentences: Iterable, workers: int = 1) -> NGramStore:
    """Count the trigrams and bigrams of a corpus.

    Parameters
    ----------
    sentences: iterable of str or of token lists
        Strings are passed through :func:`tokenize`; token lists are used
        as they are.
    workers: int
        Processes counting shards of sentences.  Shard counts are merged
        by addition so the store does not depend on the number of workers.

    Returns
    -------
    NGramStore

    Examples
    --------
    >>> build_ngrams(["a b c"]).tri[("a", "b", "c")]
    1
    """
    corpus = [_as_tokens(sentence) for sentence in sentences]
    if workers <= 1 or len(corpus) < 2 * workers:
        tri, bi = _count_shard(corpus)
    else:
        size = -(-len(corpus) // workers)
        shards = [corpus[start:start + size] for start in range(0, len(corpus), size)]
        tri, bi = Counter(), Counter()
        with Pool(workers) as pool:
            for shard_tri, shard_bi in pool.imap(_count_shard, shards):
                tri.update(shard_tri)
                bi.update(shard_bi)
    logger.info(
        "Counted %d trigram and %d bigram types over %d sentences.",
        len(tri),
        len(bi),
        len(corpus),
    )
    return NGramStore(tri, bi)


def top_words(sentences: Iterable, n: int) -> list[tuple[str, int]]:
    """The ``n`` most frequent tokens with their counts, ties by word."""
    counts = Counter()
    for sentence in sentences:
        counts.update(_as_tokens(sentence))
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))[:n]


def split_pool(sentences: Iterable, dictionary) -> tuple[list[tuple[int, list[str]]], list[list[str]]]:
    """Separate the candidate pool from the clean sentences.

    Returns
    -------
    pool: list of (sentence_id, tokens)
        Sentences with at least one token outside ``dictionary``.
    clean: list of token lists
        The others; they are the default reference corpus.
    """
    pool, clean = [], []
    for sentence_id, sentence in enumerate(sentences):
        tokens = _as_tokens(sentence)
        if not tokens:
            continue
        if any(token not in dictionary for token in tokens):
            pool.append((sentence_id, tokens))
        else:
            clean.append(tokens)
    logger.info("The candidate pool holds %d sentences, %d are clean.", len(pool), len(clean))
    return pool, clean


def retrieve_candidates(sentences: Iterable, misspelling_index: Mapping[str, str], dictionary) -> Iterator[ScoredOccurrence]:
    """Find the indexed misspellings in the sentences of the candidate pool.

    Parameters
    ----------
    sentences: iterable of str or of token lists
        The corpus; sentence ids are positions in this stream.
    misspelling_index: mapping
        Misspelling to intended word, see :func:`build_misspelling_index`.
    dictionary: container of str
        The words that are correctly spelled.

    Yields
    ------
    ScoredOccurrence
        One unscored record per occurrence, in corpus order.

    Examples
    --------
    >>> next(retrieve_candidates(["i vare going"], {"vare": "where"}, {"i", "going"}))
    ScoredOccurrence(sentence_id=0, position=1, misspelling='vare', word='where', left='i', right='going', confidence=None)
    """
    pool, _ = split_pool(sentences, dictionary)
    for sentence_id, tokens in pool:
        padded = _padded(tokens)
        for position, token in enumerate(tokens):
            word = misspelling_index.get(token)
            if word is None:
                continue
            yield ScoredOccurrence(
                sentence_id=sentence_id,
                position=position,
                misspelling=token,
                word=word,
                left=padded[position],
                right=padded[position + 2],
            )


def build_misspelling_index(candidates: Mapping[str, Iterable], dictionary=frozenset()) -> dict[str, str]:
    """Map every generated misspelling to the word it most likely stands for.

    When several words share a misspelling the highest scoring candidate
    wins, ties going to the alphabetically first word.  Misspellings that
    are dictionary words are left out since they cannot be told apart
    from correct text.
    """
    best: dict[str, tuple[float, str]] = {}
    for word, word_candidates in candidates.items():
        for candidate in word_candidates:
            if candidate.misspelling in dictionary or candidate.misspelling == word:
                continue
            known = best.get(candidate.misspelling)
            if known is None or (-candidate.score, word) < (-known[0], known[1]):
                best[candidate.misspelling] = (candidate.score, word)
    return {misspelling: word for misspelling, (_, word) in sorted(best.items())}


def confidence(store: NGramStore, occ: ScoredOccurrence) -> float:
    """Stupid Backoff likelihood of the intended word in the occurrence context.

    The trigram estimate is a conditional probability.  When the context
    ``(L, R)`` never occurs the estimate backs off to the two bigram
    fractions weighted by 0.4; a fraction whose denominator is 0 counts
    as 0.
    """
    left, word, right = occ.left, occ.word, occ.right
    context = store.ctx_total.get((left, right), 0)
    if context > 0:
        return store.tri.get((left, word, right), 0) / context
    left_total = store.left_total.get(left, 0)
    right_total = store.right_total.get(right, 0)
    left_part = store.bi.get((left, word), 0) / left_total if left_total else 0.0
    right_part = store.bi.get((word, right), 0) / right_total if right_total else 0.0
    return CONSTANTS["BACKOFF"] * (left_part + right_part)


def score_occurrences(store: NGramStore, occurrences: Iterable[ScoredOccurrence]) -> list[ScoredOccurrence]:
    return [replace(occ, confidence=confidence(store, occ)) for occ in occurrences]


def coverage_report(scored: Iterable[ScoredOccurrence], thresholds: Iterable[float], pool_size: int) -> pd.DataFrame:
    """Count the sentences kept at each confidence threshold.

    A sentence is kept when one of its occurrences scores at or above the
    threshold.

    Parameters
    ----------
    scored: iterable of ScoredOccurrence
    thresholds: iterable of float
    pool_size: int
        Number of sentences in the candidate pool.

    Returns
    -------
    pandas.DataFrame
        Columns ``threshold``, ``retained`` and ``fraction`` (of the pool),
        one row per threshold in ascending order.

    Raises
    ------
    EmptyInputError
        When ``pool_size`` is not positive.
    """
    if pool_size <= 0:
        raise EmptyInputError("The candidate pool is empty.")
    best: dict[int, float] = {}
    for occ in scored:
        if occ.confidence is None:
            raise ValueError(f"The occurrence {occ} has not been scored.")
        best[occ.sentence_id] = max(best.get(occ.sentence_id, 0.0), occ.confidence)
    rows = []
    for threshold in sorted(set(thresholds)):
        retained = sum(1 for value in best.values() if value >= threshold)
        rows.append((threshold, retained, retained / pool_size))
    return pd.DataFrame(rows, columns=["threshold", "retained", "fraction"])


def save_store(store: NGramStore, path) -> None:
    """Write ``ngram<TAB>count`` lines, n-gram tokens joined by spaces."""
    with atomic_write(Path(path)) as handle:
        write_header(handle, format=CONSTANTS["STORE_FORMAT"], version=CONSTANTS["STORE_VERSION"])
        for table in (store.tri, store.bi):
            for ngram, count in sorted(table.items()):
                handle.write(f"{' '.join(ngram)}\t{count}\n")


def load_store(path) -> NGramStore:
    """Read a store written by :func:`save_store`.

    Raises
    ------
    StoreFormatError
        When the header is missing, names another format or a version
        with a different major number, or a line is malformed.
    """
    with open(path, encoding="utf-8") as handle:
        lines = handle.readlines()
    header = dict(filter(None, (read_header(line) for line in lines if line.startswith("#"))))
    if header.get("format") != CONSTANTS["STORE_FORMAT"]:
        raise StoreFormatError(f"{path} is not a {CONSTANTS['STORE_FORMAT']} file.")
    try:
        version = Version(header.get("version", ""))
    except InvalidVersion as error:
        raise StoreFormatError(f"{path} has an invalid version: {error}") from error
    if version.major != Version(CONSTANTS["STORE_VERSION"]).major:
        raise StoreFormatError(
            f"{path} has version {version}, this release reads {CONSTANTS['STORE_VERSION']}."
        )
    tri, bi = {}, {}
    for line_no, fields in tsv_rows(lines):
        if len(fields) != 2:
            raise StoreFormatError(f"{path}:{line_no}: expected 2 fields, found {len(fields)}.")
        ngram = tuple(fields[0].split(" "))
        try:
            count = int(fields[1])
        except ValueError as error:
            raise StoreFormatError(f"{path}:{line_no}: {error}") from error
        if len(ngram) == 3:
            tri[ngram] = count
        elif len(ngram) == 2:
            bi[ngram] = count
        else:
            raise StoreFormatError(f"{path}:{line_no}: a {len(ngram)}-gram is not stored.")
    return NGramStore(tri, bi)


def write_scored(scored: Iterable[ScoredOccurrence], path) -> None:
    """Write ``sentence_id<TAB>pos<TAB>misspelling<TAB>word<TAB>confidence``.

    Raises
    ------
    ValueError
        When an occurrence has not been scored; nothing is written then.
    """
    scored = list(scored)
    for occ in scored:
        if occ.confidence is None:
            raise ValueError(f"The occurrence {occ} has not been scored.")
    with atomic_write(Path(path)) as handle:
        for occ in scored:
            handle.write(
                f"{occ.sentence_id}\t{occ.position}\t{occ.misspelling}\t{occ.word}\t{format_float(occ.confidence)}\n"
            )


def read_scored(path) -> list[ScoredOccurrence]:
    """Read a file written by :func:`write_scored`; contexts are not stored."""
    with open(path, encoding="utf-8") as handle:
        rows = list(tsv_rows(handle))
    scored = []
    for line_no, fields in rows:
        if len(fields) != 5:
            raise MatrixFormatError(f"{path}:{line_no}: expected 5 fields, found {len(fields)}.")
        sentence_id, position, misspelling, word, value = fields
        scored.append(
            ScoredOccurrence(int(sentence_id), int(position), misspelling, word, "", "", float(value))
        )
    return scored
