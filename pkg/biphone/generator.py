# Licensed under a 3-clause BSD style license - see LICENSE.md
"""Generate the likely phonetic misspellings of a word.

A misspelling ``w~`` of a word ``w`` with pronunciation ``ph_w`` is scored by

    P(w~ | w) = sum over corrupted pronunciations ph~ of
                prod_i C[ph_w^i][ph~^i] * prod_i P(chunk_i | ph~^i)

where ``C`` is the confusion matrix of the speaker's native language and
``P(chunk | phoneme)`` the phoneme-grapheme model.  Paths that spell the same
string are merged, summing their scores (``merge="sum"``) or keeping the
best (``merge="max"``).

Different chunkings can spell one string ("t" + "ha" and "th" + "a"), so
pruning partial spellings position by position loses mass.  Instead the
search grows spellings letter by letter, best first.  Each prefix carries
the merged weight of every partial path spelling it, keyed by the number of
phonemes used and the unwritten rest of the last chunk.  Its priority is
that weight times a bound on any completion, so complete spellings leave
the queue in exact score order and the first ``K`` are the exact top ``K``.
The best single path of each result is recovered afterwards to report its
shifts.
"""

import heapq
import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from functools import reduce
from multiprocessing import Pool
from pathlib import Path

from tqdm import tqdm

from biphone.align import PhonemeGraphemeModel
from biphone.confusion import ConfusionMatrix
from biphone.errors import MatrixFormatError, WordNotFoundError
from biphone.formats import atomic_write, format_float, read_header, tsv_rows, write_header
from biphone.phonology import Lexicon, PhonemeSeq, normalize_word

__all__ = [
    "CONSTANTS",
    "GeneratorConfig",
    "MisspellingCandidate",
    "corrupt",
    "corrupt_batch",
    "format_shifts",
    "path_probability",
    "read_candidates",
    "write_candidates",
]

logger = logging.getLogger(__name__)

CONSTANTS = {
    "BEAM_WIDTH": 10,
    "MERGES": ("sum", "max"),
    "SHIFT_SEPARATOR": ";",
    # bounds are inflated by this much against rounding
    "BOUND_SLACK": 1.0 + 1e-9,
}


@dataclass(frozen=True)
class GeneratorConfig:
    """Search settings.

    ``min_prob`` drops candidates scoring below it (0 keeps everything) and
    ``drop_identity`` removes the original spelling from the output.
    """

    beam_width: int = CONSTANTS["BEAM_WIDTH"]
    min_prob: float = 0.0
    drop_identity: bool = True
    merge: str = "sum"

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError(f"The beam width {self.beam_width} must be at least 1.")
        if not 0.0 <= self.min_prob <= 1.0:
            raise ValueError(f"The probability floor {self.min_prob} is outside [0, 1].")
        if self.merge not in CONSTANTS["MERGES"]:
            raise ValueError(f'The merge "{self.merge}" is not one of {CONSTANTS["MERGES"]}.')


@dataclass(frozen=True)
class MisspellingCandidate:
    """One generated misspelling.

    ``score`` is the merged probability of the spelling.  ``shifts``,
    ``corrupted_seq`` and ``chunks`` describe its most probable path and
    ``path_score`` is the probability of that path alone; the two scores
    agree whenever one path spells the word.
    """

    word: str
    misspelling: str
    score: float
    shifts: tuple[tuple[int, str, str], ...] = ()
    corrupted_seq: PhonemeSeq = ()
    chunks: tuple[str, ...] = ()
    path_score: float = 0.0
    l1: str = field(default="", compare=False)


def _sum(old: float, new: float) -> float:
    return old + new


def _positions(phonemes, cm, pgm, combine):
    """Per position, the merged factor of each chunk and every ``(target, chunk, factor)`` choice."""
    positions = []
    for phoneme in phonemes:
        merged: dict[str, float] = {}
        choices = []
        for target, shift_prob in sorted(cm.row(phoneme).items()):
            for chunk, chunk_prob in pgm.ranked(target):
                factor = shift_prob * chunk_prob
                if factor <= 0.0:
                    continue
                choices.append((target, chunk, factor))
                merged[chunk] = combine(merged[chunk], factor) if chunk in merged else factor
        positions.append((merged, choices))
    return positions


def _completion_bounds(positions, combine) -> list[float]:
    """``bounds[j]`` is at least the score of any suffix spelled by phonemes ``j`` onwards.

    At one position the chunks that can start a given suffix are prefixes of
    one another, so the chunk factor is bounded by the largest merge along
    such a chain.
    """
    bounds = [1.0]
    for merged, _ in reversed(positions):
        chain = max(
            (
                reduce(combine, (merged[chunk[:k]] for k in range(len(chunk) + 1) if chunk[:k] in merged))
                for chunk in merged
            ),
            default=0.0,
        )
        bounds.append(chain * bounds[-1])
    bounds.reverse()
    return bounds


def _add(states, key, weight, combine):
    states[key] = combine(states[key], weight) if key in states else weight


def _close(states, positions, combine):
    """Follow empty chunks from every finished state."""
    for j, (merged, _) in enumerate(positions):
        weight = states.get((j, ""))
        factor = merged.get("")
        if weight is not None and factor:
            _add(states, (j + 1, ""), weight * factor, combine)
    return states


def _advance(states, positions, combine):
    """The states of every one-letter extension of a prefix, by letter."""
    children: dict[str, dict] = {}
    for (j, rest), weight in states.items():
        if rest:
            _add(children.setdefault(rest[0], {}), (j, rest[1:]), weight, combine)
        elif j < len(positions):
            for chunk, factor in positions[j][0].items():
                if chunk:
                    _add(children.setdefault(chunk[0], {}), (j + 1, chunk[1:]), weight * factor, combine)
    return {letter: _close(child, positions, combine) for letter, child in sorted(children.items())}


def _best_path(spelling, positions):
    """The most probable ``(score, ((target, chunk), ...))`` path spelling ``spelling``."""
    size = len(spelling)
    best: list[list] = [[None] * (size + 1) for _ in range(len(positions) + 1)]
    best[0][0] = (1.0, ())
    for j, (_, choices) in enumerate(positions):
        for offset in range(size + 1):
            current = best[j][offset]
            if current is None:
                continue
            for target, chunk, factor in choices:
                if not spelling.startswith(chunk, offset):
                    continue
                end = offset + len(chunk)
                score = current[0] * factor
                slot = best[j + 1][end]
                if slot is None or score > slot[0]:
                    best[j + 1][end] = (score, current[1] + ((target, chunk),))
    return best[len(positions)][size]


def corrupt(word: str, lex: Lexicon, cm: ConfusionMatrix, pgm: PhonemeGraphemeModel, cfg: GeneratorConfig = GeneratorConfig()) -> list[MisspellingCandidate]:
    """Return the top ``K`` misspellings of a word.

    Parameters
    ----------
    word: str
        A lexicon word; its canonical pronunciation is corrupted.
    lex: Lexicon
        Pronunciations.
    cm: ConfusionMatrix
        Phoneme shifts of the speaker's native language.
    pgm: PhonemeGraphemeModel
        Chunks that spell each phoneme.
    cfg: GeneratorConfig
        Width ``K``, probability floor, identity removal and merge rule.

    Returns
    -------
    list of MisspellingCandidate
        At most ``cfg.beam_width`` candidates by descending score, ties by
        spelling.  The top ``K`` is taken before the original spelling is
        removed, and a wider search returns these same candidates first.

    Raises
    ------
    WordNotFoundError
        When the word has no pronunciation.
    MissingPhonemeError
        When a phoneme reachable through the matrix has no chunks in the
        model.

    Examples
    --------
    >>> [c.misspelling for c in corrupt("they", lex, hindi, pgm)][:3]  # doctest: +SKIP
    ['tha', 'thay', 'thai']
    """
    phonemes = lex.phonemes_of(word)
    if phonemes is None:
        raise WordNotFoundError(word)
    word = normalize_word(word)
    combine = _sum if cfg.merge == "sum" else max
    positions = _positions(phonemes, cm, pgm, combine)
    bounds = _completion_bounds(positions, combine)
    done = (len(positions), "")

    # (-priority, 0 to extend or 1 when complete, spelling, states);
    # extensions leave before complete spellings of equal priority
    queue: list = []

    def push(spelling, states):
        final = states.get(done, 0.0)
        if spelling and final > 0.0 and final >= cfg.min_prob:
            heapq.heappush(queue, (-final, 1, spelling, None))
        partial = [weight * bounds[j] for (j, rest), weight in states.items() if (j, rest) != done]
        bound = reduce(combine, partial) * CONSTANTS["BOUND_SLACK"] if partial else 0.0
        if bound > 0.0 and bound >= cfg.min_prob:
            heapq.heappush(queue, (-bound, 0, spelling, states))

    push("", _close({(0, ""): 1.0}, positions, combine))
    ranked = []
    while queue and len(ranked) < cfg.beam_width:
        priority, complete, spelling, states = heapq.heappop(queue)
        if complete:
            ranked.append((spelling, -priority))
            continue
        for letter, child in _advance(states, positions, combine).items():
            push(spelling + letter, child)

    candidates = []
    for spelling, score in ranked:
        if cfg.drop_identity and spelling == word:
            continue
        path_score, path = _best_path(spelling, positions)
        corrupted = tuple(target for target, _ in path)
        candidates.append(
            MisspellingCandidate(
                word=word,
                misspelling=spelling,
                score=score,
                shifts=tuple(
                    (position, source, target)
                    for position, (source, target) in enumerate(zip(phonemes, corrupted))
                    if source != target
                ),
                corrupted_seq=corrupted,
                chunks=tuple(chunk for _, chunk in path),
                path_score=path_score,
                l1=cm.l1,
            )
        )
    return candidates


def path_probability(candidate: MisspellingCandidate, lex: Lexicon, cm: ConfusionMatrix, pgm: PhonemeGraphemeModel) -> float:
    """Recompute the probability of a candidate's stored path."""
    phonemes = lex.phonemes_of(candidate.word)
    return math.prod(
        cm.row(source).get(target, 0.0) * pgm.prob(target, chunk)
        for source, target, chunk in zip(phonemes, candidate.corrupted_seq, candidate.chunks)
    )


_WORKER_STATE: dict = {}


def _init_worker(lex, cm, pgm, cfg):
    _WORKER_STATE.update(lex=lex, cm=cm, pgm=pgm, cfg=cfg)


def _corrupt_one(word):
    try:
        return word, corrupt(word, _WORKER_STATE["lex"], _WORKER_STATE["cm"], _WORKER_STATE["pgm"], _WORKER_STATE["cfg"])
    except WordNotFoundError:
        return word, None


def corrupt_batch(words: Iterable[str], lex: Lexicon, cm: ConfusionMatrix, pgm: PhonemeGraphemeModel, cfg: GeneratorConfig = GeneratorConfig(), workers: int = 1, progress: bool = False) -> dict[str, list[MisspellingCandidate]]:
    """Corrupt many words.

    Out of vocabulary words are logged and left out of the result; every
    other word maps to exactly what :func:`corrupt` returns for it, in
    input order, whatever the number of workers.
    """
    words = list(dict.fromkeys(normalize_word(word) for word in words))
    if workers <= 1 or len(words) < 2 * workers:
        _init_worker(lex, cm, pgm, cfg)
        results = map(_corrupt_one, words)
        found = list(tqdm(results, total=len(words), desc="corrupt", disable=not progress))
    else:
        chunksize = max(1, len(words) // (workers * 8))
        with Pool(workers, initializer=_init_worker, initargs=(lex, cm, pgm, cfg)) as pool:
            found = list(
                tqdm(
                    pool.imap(_corrupt_one, words, chunksize=chunksize),
                    total=len(words),
                    desc="corrupt",
                    disable=not progress,
                )
            )
    missing = [word for word, candidates in found if candidates is None]
    if missing:
        logger.warning("%d words are not in the lexicon and were skipped.", len(missing))
    return {word: candidates for word, candidates in found if candidates is not None}


def format_shifts(shifts) -> str:
    """``pos:ph_i>ph_j`` joined by ``;``."""
    return CONSTANTS["SHIFT_SEPARATOR"].join(
        f"{position}:{source}>{target}" for position, source, target in shifts
    )


def _parse_shifts(text: str):
    shifts = []
    for item in filter(None, text.split(CONSTANTS["SHIFT_SEPARATOR"])):
        position, _, change = item.partition(":")
        source, _, target = change.partition(">")
        if not source or not target:
            raise ValueError(f'The shift "{item}" is not pos:ph_i>ph_j.')
        shifts.append((int(position), source, target))
    return tuple(shifts)


def write_candidates(results: dict[str, list[MisspellingCandidate]], path, l1: str = "") -> None:
    """Write ``word<TAB>misspelling<TAB>score<TAB>shifts`` behind a ``#l1=`` header."""
    if not l1:
        l1 = next((c.l1 for candidates in results.values() for c in candidates), "")
    with atomic_write(Path(path)) as handle:
        write_header(handle, l1=l1)
        for word, candidates in results.items():
            for candidate in candidates:
                handle.write(
                    f"{word}\t{candidate.misspelling}\t{format_float(candidate.score)}\t{format_shifts(candidate.shifts)}\n"
                )


def read_candidates(path) -> dict[str, list[MisspellingCandidate]]:
    """Read a candidate file; the ``#l1=`` header tags every candidate."""
    with open(path, encoding="utf-8") as handle:
        lines = handle.readlines()
    l1 = ""
    for line in lines:
        header = read_header(line)
        if header is not None and header[0] == "l1":
            l1 = header[1]
    results: dict[str, list[MisspellingCandidate]] = {}
    for line_no, fields in tsv_rows(lines):
        if len(fields) != 4:
            raise MatrixFormatError(f"{path}:{line_no}: expected 4 fields, found {len(fields)}.")
        word, misspelling, score, shifts = fields
        try:
            candidate = MisspellingCandidate(
                word=word,
                misspelling=misspelling,
                score=float(score),
                shifts=_parse_shifts(shifts),
                l1=l1,
            )
        except ValueError as error:
            raise MatrixFormatError(f"{path}:{line_no}: {error}") from error
        results.setdefault(word, []).append(candidate)
    return results
