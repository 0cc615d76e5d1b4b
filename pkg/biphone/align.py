# Licensed under a 3-clause BSD style license - see LICENSE.md
"""Sequence alignment engines.

Two alignments live here:

- :func:`needleman_wunsch`, a global alignment of two phoneme sequences used
  to mine sound shifts from round-trip transliterations.
- :func:`align_lexicon`, an iterative phoneme to letter-chunk alignment of a
  pronunciation lexicon.  It yields a :class:`PhonemeGraphemeModel`, the
  distribution over letter chunks that can spell each phoneme.

The lexicon alignment is a hard (Viterbi) EM.  The first pass spreads one
unit of co-occurrence evenly over every letter chunk of length 1 to
``max_chunk_len`` found in a word, for each of the word's phonemes, with a
smaller share for the empty chunk.  Every pass then segments each word with
the chunks that maximise the product of the current probabilities and
re-estimates the probabilities from those segmentations, until no
segmentation changes.
"""

import logging
import math
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path

import numpy as np
from tqdm import tqdm

from biphone.errors import MatrixFormatError, MissingPhonemeError
from biphone.formats import atomic_write, format_float, tsv_rows
from biphone.phonology import DEFAULT_INVENTORY, Lexicon, PhonemeSeq, strip_stress

__all__ = [
    "AlignedPair",
    "AlignmentParams",
    "CONSTANTS",
    "GAP",
    "GraphemeSegmentation",
    "PhonemeGraphemeModel",
    "align_lexicon",
    "load_pgm",
    "needleman_wunsch",
    "save_pgm",
    "segment_word",
    "write_segmentations",
]

logger = logging.getLogger(__name__)

GAP = None

CONSTANTS = {
    "CHUNK_SEPARATOR": "|",
    "EMPTY_CHUNK_WEIGHT": 0.1,
    "MAX_CHUNK_LEN": 4,
    "MAX_ITERS": 10,
    "TOLERANCE": 1e-9,
}


@dataclass(frozen=True)
class AlignmentParams:
    """Scores of the global alignment.

    Only the base symbols are compared, so ``AH2`` against ``AH0`` scores
    as a match.
    """

    match_score: float = 1.0
    mismatch_score: float = -1.0
    gap_score: float = -1.0

    def __post_init__(self):
        if not self.match_score > self.mismatch_score:
            raise ValueError(
                f"The match score {self.match_score} must exceed the mismatch score {self.mismatch_score}."
            )
        if not self.gap_score < self.match_score:
            raise ValueError(
                f"The gap score {self.gap_score} must be below the match score {self.match_score}."
            )


@dataclass(frozen=True)
class AlignedPair:
    """A global alignment: ``ops`` pairs a left and a right symbol, either may be ``GAP``."""

    ops: tuple[tuple, ...]
    score: float

    @property
    def left(self) -> PhonemeSeq:
        return tuple(left for left, _ in self.ops if left is not GAP)

    @property
    def right(self) -> PhonemeSeq:
        return tuple(right for _, right in self.ops if right is not GAP)

    def substitutions(self) -> list[tuple[str, str]]:
        """Aligned pairs whose full symbols (stress included) differ."""
        return [
            (left, right)
            for left, right in self.ops
            if left is not GAP and right is not GAP and left != right
        ]

    def matches(self) -> list[str]:
        return [left for left, right in self.ops if left is not GAP and left == right]

    def deletions(self) -> list[str]:
        return [left for left, right in self.ops if right is GAP]

    def insertions(self) -> list[str]:
        return [right for left, right in self.ops if left is GAP]


def needleman_wunsch(a: PhonemeSeq, b: PhonemeSeq, params: AlignmentParams = AlignmentParams()) -> AlignedPair:
    """Globally align two phoneme sequences.

    Parameters
    ----------
    a, b: PhonemeSeq
        Non-empty sequences.  Stress digits are ignored when scoring and kept
        in the returned operations.
    params: AlignmentParams
        Match, mismatch and gap scores.

    Returns
    -------
    AlignedPair
        An alignment of maximal score.  The traceback prefers the diagonal,
        then a gap on the right (up), then a gap on the left, so ties always
        resolve the same way.

    Examples
    --------
    >>> needleman_wunsch(("K", "AE", "T"), ("K", "T")).ops
    (('K', 'K'), ('AE', None), ('T', 'T'))
    """
    if not a or not b:
        raise ValueError("Both phoneme sequences must be non-empty.")
    base_a, base_b = strip_stress(a), strip_stress(b)
    n, m = len(a), len(b)
    gap = params.gap_score
    table = np.zeros((n + 1, m + 1))
    table[:, 0] = np.arange(n + 1) * gap
    table[0, :] = np.arange(m + 1) * gap
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            pair = params.match_score if base_a[i - 1] == base_b[j - 1] else params.mismatch_score
            table[i, j] = max(
                table[i - 1, j - 1] + pair,
                table[i - 1, j] + gap,
                table[i, j - 1] + gap,
            )

    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            pair = params.match_score if base_a[i - 1] == base_b[j - 1] else params.mismatch_score
            if table[i, j] == table[i - 1, j - 1] + pair:
                ops.append((a[i - 1], b[j - 1]))
                i, j = i - 1, j - 1
                continue
        if i > 0 and table[i, j] == table[i - 1, j] + gap:
            ops.append((a[i - 1], GAP))
            i -= 1
        else:
            ops.append((GAP, b[j - 1]))
            j -= 1
    ops.reverse()
    return AlignedPair(tuple(ops), float(table[n, m]))


@dataclass(frozen=True)
class GraphemeSegmentation:
    """The letter chunk spelling each phoneme of one pronunciation of a word."""

    word: str
    phonemes: PhonemeSeq
    chunks: tuple[str, ...]

    def __post_init__(self):
        if "".join(self.chunks) != self.word:
            raise ValueError(f'The chunks {self.chunks} do not spell "{self.word}".')
        if len(self.chunks) != len(self.phonemes):
            raise ValueError(f'The word "{self.word}" has one chunk per phoneme.')


@dataclass(frozen=True)
class PhonemeGraphemeModel:
    """Probability of a letter chunk given a phoneme.

    Every probability is the number of times the phoneme was spelled by
    the chunk divided by the number of times the phoneme was aligned.
    """

    counts: Mapping[str, Mapping[str, int]]
    skipped: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        cleaned = {}
        for phoneme, chunks in self.counts.items():
            row = {chunk: count for chunk, count in chunks.items() if count > 0}
            if row:
                cleaned[phoneme] = row
        object.__setattr__(self, "counts", cleaned)

    @property
    def phoneme_freq(self) -> dict[str, int]:
        return {phoneme: sum(row.values()) for phoneme, row in self.counts.items()}

    @property
    def emission(self) -> dict[str, dict[str, float]]:
        return {phoneme: self.row(phoneme) for phoneme in self.counts}

    def __contains__(self, phoneme: object) -> bool:
        return phoneme in self.counts

    def row(self, phoneme: str) -> dict[str, float]:
        """The chunk distribution of ``phoneme``.

        Raises
        ------
        MissingPhonemeError
            When the phoneme never occurred in the aligned lexicon.
        """
        chunks = self.counts.get(phoneme)
        if chunks is None:
            raise MissingPhonemeError(phoneme)
        total = sum(chunks.values())
        return {chunk: count / total for chunk, count in chunks.items()}

    def prob(self, phoneme: str, chunk: str) -> float:
        return self.row(phoneme).get(chunk, 0.0)

    def ranked(self, phoneme: str) -> list[tuple[str, float]]:
        """``(chunk, prob)`` pairs by descending probability, then chunk."""
        return sorted(self.row(phoneme).items(), key=lambda item: (-item[1], item[0]))


def _log_table(weights: Mapping[str, Mapping[str, float]]) -> dict[str, dict[str, float]]:
    table = {}
    for phoneme, chunks in weights.items():
        total = sum(chunks.values())
        table[phoneme] = {
            chunk: math.log(weight / total) for chunk, weight in chunks.items() if weight > 0
        }
    return table


def segment_word(word: str, phonemes: PhonemeSeq, logprob: Mapping[str, Mapping[str, float]], max_chunk_len: int = CONSTANTS["MAX_CHUNK_LEN"]):
    """Split ``word`` into one chunk per phoneme maximising the chunk probabilities.

    Parameters
    ----------
    word: str
        The spelling.
    phonemes: PhonemeSeq
        The pronunciation.
    logprob: mapping
        ``logprob[phoneme][chunk]`` is the log probability of the chunk;
        missing chunks are impossible.
    max_chunk_len: int
        Longest chunk.  Chunks may be empty.

    Returns
    -------
    tuple of str or None
        The chunks, or ``None`` when no segmentation has non-zero
        probability.  Among equally probable segmentations the one with
        fewer empty chunks wins.
    """
    n, m = len(phonemes), len(word)
    best: list[list] = [[None] * (m + 1) for _ in range(n + 1)]
    back = [[0] * (m + 1) for _ in range(n + 1)]
    best[0][0] = (0.0, 0)
    for i in range(1, n + 1):
        row = logprob.get(phonemes[i - 1], {})
        for j in range(m + 1):
            for length in range(min(max_chunk_len, j) + 1):
                previous = best[i - 1][j - length]
                if previous is None:
                    continue
                weight = row.get(word[j - length:j])
                if weight is None:
                    continue
                candidate = (previous[0] + weight, previous[1] - (length == 0))
                if best[i][j] is None or candidate > best[i][j]:
                    best[i][j] = candidate
                    back[i][j] = length
    if best[n][m] is None:
        return None
    chunks = []
    j = m
    for i in range(n, 0, -1):
        length = back[i][j]
        chunks.append(word[j - length:j])
        j -= length
    chunks.reverse()
    return tuple(chunks)


def _cooccurrence(entries: Iterable[tuple[str, PhonemeSeq]], max_chunk_len: int, empty_weight: float) -> dict[str, Counter]:
    """First-pass weights: every chunk of a word co-occurs once with each of its phonemes."""
    weights: dict[str, Counter] = {}
    for word, phonemes in entries:
        chunks = {
            word[start:start + length]
            for length in range(1, max_chunk_len + 1)
            for start in range(len(word) - length + 1)
        }
        for phoneme in phonemes:
            row = weights.setdefault(phoneme, Counter())
            for chunk in chunks:
                row[chunk] += 1
            row[""] += empty_weight
    return weights


_WORKER_STATE: dict = {}


def _init_worker(logprob, max_chunk_len):
    _WORKER_STATE["logprob"] = logprob
    _WORKER_STATE["max_chunk_len"] = max_chunk_len


def _segment_shard(shard):
    logprob = _WORKER_STATE["logprob"]
    max_chunk_len = _WORKER_STATE["max_chunk_len"]
    return [segment_word(word, phonemes, logprob, max_chunk_len) for word, phonemes in shard]


def _segment_all(entries, logprob, max_chunk_len, workers):
    if workers <= 1 or len(entries) < 2 * workers:
        _init_worker(logprob, max_chunk_len)
        return _segment_shard(entries)
    size = math.ceil(len(entries) / workers)
    shards = [entries[start:start + size] for start in range(0, len(entries), size)]
    with Pool(workers, initializer=_init_worker, initargs=(logprob, max_chunk_len)) as pool:
        results = pool.map(_segment_shard, shards)
    return [chunks for shard in results for chunks in shard]


def align_lexicon(lex: Lexicon, max_chunk_len: int = CONSTANTS["MAX_CHUNK_LEN"], max_iters: int = CONSTANTS["MAX_ITERS"], workers: int = 1, progress: bool = False, empty_weight: float = CONSTANTS["EMPTY_CHUNK_WEIGHT"]):
    """Align every pronunciation of a lexicon with its spelling.

    Parameters
    ----------
    lex: Lexicon
        Every variant of every word takes part.
    max_chunk_len: int
        Longest letter chunk a phoneme may spell (``ough`` needs 4).
    max_iters: int
        Upper bound on segment/re-estimate passes.
    workers: int
        Processes used to segment the entries.  The result does not depend
        on it.
    progress: bool
        Show a progress bar.
    empty_weight: float
        First-pass weight of the empty chunk against one co-occurrence.
        With 0 a phoneme never spells nothing, and words with fewer
        letters than phonemes are skipped.

    Returns
    -------
    segmentations: list of GraphemeSegmentation
        In word order, variants in lexicon order.
    model: PhonemeGraphemeModel
        Counts from the final segmentations; words that could not be
        segmented are listed in ``model.skipped``.

    Examples
    --------
    >>> segs, model = align_lexicon(parse_lexicon(["NO  N OW1"]))
    >>> segs[0].chunks
    ('n', 'o')
    """
    if len(lex) == 0:
        raise ValueError("The lexicon is empty.")
    if max_chunk_len < 1 or max_iters < 1:
        raise ValueError("Both max_chunk_len and max_iters must be at least 1.")
    if empty_weight < 0:
        raise ValueError(f"empty_weight must not be negative, got {empty_weight}.")
    entries = [
        (word, phonemes)
        for word in sorted(lex.entries)
        for phonemes in lex.entries[word]
    ]
    logprob = _log_table(_cooccurrence(entries, max_chunk_len, empty_weight))
    previous = None
    for iteration in tqdm(range(1, max_iters + 1), desc="align", disable=not progress):
        current = _segment_all(entries, logprob, max_chunk_len, workers)
        counts: dict[str, Counter] = {}
        for (word, phonemes), chunks in zip(entries, current):
            if chunks is None:
                continue
            for phoneme, chunk in zip(phonemes, chunks):
                counts.setdefault(phoneme, Counter())[chunk] += 1
        changed = (
            len(entries)
            if previous is None
            else sum(old != new for old, new in zip(previous, current))
        )
        logger.info("Alignment pass %d: %d segmentations changed.", iteration, changed)
        if previous is not None and changed == 0:
            break
        previous = current
        logprob = _log_table(counts)

    segmentations = []
    skipped = []
    for (word, phonemes), chunks in zip(entries, current):
        if chunks is None:
            skipped.append(word)
            continue
        segmentations.append(GraphemeSegmentation(word, phonemes, chunks))
    if skipped:
        logger.warning("Could not segment %d entries.", len(skipped))
    model = PhonemeGraphemeModel(
        {phoneme: dict(row) for phoneme, row in counts.items()}, skipped=tuple(skipped)
    )
    return segmentations, model


def save_pgm(model: PhonemeGraphemeModel, path) -> None:
    """Write ``phoneme<TAB>chunk<TAB>count<TAB>prob`` sorted by phoneme then descending prob."""
    with atomic_write(Path(path)) as handle:
        for phoneme in sorted(model.counts):
            counts = model.counts[phoneme]
            for chunk, prob in model.ranked(phoneme):
                handle.write(f"{phoneme}\t{chunk}\t{counts[chunk]}\t{format_float(prob)}\n")


def load_pgm(path, inventory=DEFAULT_INVENTORY) -> PhonemeGraphemeModel:
    """Read a model written by :func:`save_pgm` and check its distributions.

    Raises
    ------
    MatrixFormatError
        On a malformed line, an unknown phoneme, a probability that is not
        count over phoneme frequency, or a row that does not sum to 1.
    """
    counts: dict[str, dict[str, int]] = {}
    probs: dict[str, dict[str, float]] = {}
    first_line: dict[str, int] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, fields in tsv_rows(handle):
            if len(fields) != 4:
                raise MatrixFormatError(f"{path}:{line_no}: expected 4 fields, found {len(fields)}.")
            phoneme, chunk, count, prob = fields
            if phoneme not in inventory:
                raise MatrixFormatError(f'{path}:{line_no}: unknown phoneme "{phoneme}".')
            try:
                counts.setdefault(phoneme, {})[chunk] = int(count)
                probs.setdefault(phoneme, {})[chunk] = float(prob)
            except ValueError as error:
                raise MatrixFormatError(f"{path}:{line_no}: {error}") from error
            first_line.setdefault(phoneme, line_no)
    if not counts:
        raise MatrixFormatError(f"{path}: the model is empty.")
    for phoneme, row in probs.items():
        total = sum(row.values())
        if abs(total - 1.0) > CONSTANTS["TOLERANCE"]:
            raise MatrixFormatError(
                f'{path}:{first_line[phoneme]}: the row of "{phoneme}" sums to {total}.'
            )
        freq = sum(counts[phoneme].values())
        for chunk, prob in row.items():
            if abs(prob - counts[phoneme][chunk] / freq) > CONSTANTS["TOLERANCE"]:
                raise MatrixFormatError(
                    f'{path}:{first_line[phoneme]}: P("{chunk}"|{phoneme}) is not count over frequency.'
                )
    return PhonemeGraphemeModel(counts)


def write_segmentations(segmentations: Iterable[GraphemeSegmentation], path) -> None:
    """Write ``word<TAB>phonemes<TAB>chunks`` with chunks joined by ``|``."""
    with atomic_write(Path(path)) as handle:
        for seg in segmentations:
            handle.write(
                f"{seg.word}\t{' '.join(seg.phonemes)}\t{CONSTANTS['CHUNK_SEPARATOR'].join(seg.chunks)}\n"
            )
