# Licensed under a 3-clause BSD style license - see LICENSE.md
"""This module mines a phoneme confusion matrix from round-trip transliterations.

A word of the second language (L2) transliterated into the script of a
native language (L1) and back again comes out spelled the way an L1
speaker hears it.  Aligning the pronunciations of the original and the
round-trip spelling exposes sound shifts such as ``Z -> JH`` for Hindi.
Counting those shifts over many words gives ``P(ph_j | ph_i)``, the
probability that an L1 speaker realises the L2 phoneme ``ph_i`` as
``ph_j``.

Only the ``top_k`` most frequent shifts of a language pair are kept; each
row is the kept shifts of a source phoneme plus its identity mass,
renormalised to sum to 1.
"""

import logging
import math
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path

import pandas as pd

from biphone.align import AlignmentParams, needleman_wunsch
from biphone.errors import EmptyInputError, MatrixFormatError
from biphone.formats import atomic_write, format_float, read_header, tsv_rows, write_header
from biphone.phonology import DEFAULT_INVENTORY, Lexicon, PhonemeInventory, strip_stress

__all__ = [
    "CONSTANTS",
    "KEYS",
    "ConfusionMatrix",
    "MiningReport",
    "build_matrix",
    "count_shifts",
    "RttPair",
    "load_matrix",
    "mine_confusions",
    "read_rtt_pairs",
    "save_matrix",
]

logger = logging.getLogger(__name__)

CONSTANTS = {
    "TOLERANCE": 1e-9,
    "TOP_K": 10,
}

KEYS = {
    "L1": "l1",
    "L2": "l2",
}

LANGUAGES = {
    "bn": "Bengali",
    "en": "English",
    "gu": "Gujarati",
    "hi": "Hindi",
    "kn": "Kannada",
    "ml": "Malayalam",
    "mr": "Marathi",
    "pa": "Punjabi",
    "ta": "Tamil",
    "te": "Telugu",
    "ur": "Urdu",
}


@dataclass(frozen=True)
class RttPair:
    """An L2 word and its spelling after a round trip through ``pivot``."""

    original: str
    roundtrip: str
    pivot: str

    def __post_init__(self):
        if not self.original or not self.roundtrip:
            raise ValueError("Both words of a round-trip pair must be non-empty.")
        if self.pivot not in LANGUAGES:
            raise ValueError(f'The pivot language "{self.pivot}" is not declared.')


@dataclass
class MiningReport:
    """What happened to the pairs during mining."""

    pairs: int = 0
    used: int = 0
    skipped: int = 0
    deletions: Counter = field(default_factory=Counter)
    insertions: Counter = field(default_factory=Counter)
    aligned: Counter = field(default_factory=Counter)

    def merge(self, other: "MiningReport") -> None:
        """Add the counts of another shard."""
        self.pairs += other.pairs
        self.used += other.used
        self.skipped += other.skipped
        self.deletions.update(other.deletions)
        self.insertions.update(other.insertions)
        self.aligned.update(other.aligned)


@dataclass(frozen=True)
class ConfusionMatrix:
    """``rows[ph_i][ph_j]`` is the probability that ``ph_i`` is realised as ``ph_j``.

    ``shift_counts`` holds the raw count behind every retained entry,
    identity entries included.  Hand-written matrices may leave it empty.
    """

    l1: str
    l2: str
    rows: Mapping[str, Mapping[str, float]]
    shift_counts: Mapping[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        for source, row in self.rows.items():
            total = sum(row.values())
            if abs(total - 1.0) > CONSTANTS["TOLERANCE"]:
                raise ValueError(f'The row of "{source}" sums to {total}, not 1.')
            for target, prob in row.items():
                if not 0.0 < prob <= 1.0:
                    raise ValueError(f'P({target}|{source}) = {prob} is outside (0, 1].')

    @classmethod
    def from_rows(cls, l1: str, l2: str, rows: Mapping[str, Mapping[str, float]], inventory: PhonemeInventory = DEFAULT_INVENTORY):
        """Build a matrix from hand-supplied rows such as ``{"DH": {"DH": 0.5, "TH": 0.5}}``."""
        for source, row in rows.items():
            for symbol in (source, *row):
                if symbol not in inventory:
                    raise ValueError(f'The phoneme "{symbol}" is not in the inventory.')
        return cls(l1, l2, {source: dict(row) for source, row in rows.items()})

    def row(self, phoneme: str) -> dict[str, float]:
        """The realisations of ``phoneme``; a phoneme never mined stays itself."""
        return dict(self.rows.get(phoneme, {phoneme: 1.0}))

    def shifts(self) -> list[tuple[str, str, int]]:
        """Retained non-identity shifts by descending count."""
        found = [
            (source, target, self.shift_counts.get((source, target), 0))
            for source, row in self.rows.items()
            for target in row
            if source != target
        ]
        return sorted(found, key=lambda item: (-item[2], item[0], item[1]))

    def to_frame(self) -> pd.DataFrame:
        """Display the matrix as a long table."""
        records = [
            {
                "ph_i": source,
                "ph_j": target,
                "count": self.shift_counts.get((source, target), 0),
                "prob": prob,
            }
            for source, target, prob in self._sorted_entries()
        ]
        return pd.DataFrame.from_records(records, columns=["ph_i", "ph_j", "count", "prob"])

    def _sorted_entries(self):
        for source in sorted(self.rows):
            row = self.rows[source]
            for target in sorted(row, key=lambda symbol: (-row[symbol], symbol)):
                yield source, target, row[target]


def read_rtt_pairs(path) -> list[RttPair]:
    """Read ``original<TAB>roundtrip<TAB>pivot_lang`` lines."""
    pairs = []
    with open(path, encoding="utf-8") as handle:
        for line_no, fields in tsv_rows(handle):
            if len(fields) != 3:
                raise MatrixFormatError(f"{path}:{line_no}: expected 3 fields, found {len(fields)}.")
            try:
                pairs.append(RttPair(fields[0].strip(), fields[1].strip(), fields[2].strip()))
            except ValueError as error:
                raise MatrixFormatError(f"{path}:{line_no}: {error}") from error
    return pairs


def _count_shard(pairs, lex, params, stress_sensitive):
    """Count aligned matches and substitutions of a batch of pairs."""
    counts: Counter = Counter()
    report = MiningReport()
    for pair in pairs:
        report.pairs += 1
        original = lex.phonemes_of(pair.original)
        roundtrip = lex.phonemes_of(pair.roundtrip)
        if original is None or roundtrip is None:
            report.skipped += 1
            continue
        if not stress_sensitive:
            original, roundtrip = strip_stress(original), strip_stress(roundtrip)
        alignment = needleman_wunsch(original, roundtrip, params)
        report.used += 1
        for source, target in alignment.ops:
            if source is None:
                report.insertions[target] += 1
            elif target is None:
                report.deletions[source] += 1
            else:
                counts[source, target] += 1
                report.aligned[source] += 1
    return counts, report


def count_shifts(pairs: Iterable[RttPair], lex: Lexicon, params: AlignmentParams = AlignmentParams(), stress_sensitive: bool = True, workers: int = 1):
    """Count every aligned ``(ph_i, ph_j)`` pair, identities included.

    Gaps are counted in the report only.  With ``workers > 1`` the pairs
    are split into shards counted in separate processes; counts add up the
    same in any order.

    Returns
    -------
    counts: Counter
        ``counts[ph_i, ph_j]`` over all usable pairs.
    report: MiningReport
    """
    pairs = list(pairs)
    if workers <= 1 or len(pairs) < 2 * workers:
        return _count_shard(pairs, lex, params, stress_sensitive)
    size = math.ceil(len(pairs) / workers)
    shards = [pairs[start:start + size] for start in range(0, len(pairs), size)]
    with Pool(workers) as pool:
        results = pool.starmap(
            _count_shard, [(shard, lex, params, stress_sensitive) for shard in shards]
        )
    counts: Counter = Counter()
    report = MiningReport()
    for shard_counts, shard_report in results:
        counts.update(shard_counts)
        report.merge(shard_report)
    return counts, report


def mine_confusions(pairs: Iterable[RttPair], lex: Lexicon, params: AlignmentParams = AlignmentParams(), top_k=CONSTANTS["TOP_K"], l1: str = "", l2: str = "en", stress_sensitive: bool = True, workers: int = 1) -> ConfusionMatrix:
    """Estimate the confusion matrix of a language pair.

    Parameters
    ----------
    pairs: iterable of RttPair
        Round-trip pairs of one pivot language.
    lex: Lexicon
        Pronunciations of the original and the round-trip spellings.
        Pairs with an unknown word are skipped and counted.
    params: AlignmentParams
        Scores of the alignment.
    top_k: int or None
        Number of non-identity shifts kept over the whole matrix, ranked by
        count (ties by symbol).  ``None`` keeps every shift.
    l1, l2: str
        Language codes recorded in the matrix.  ``l1`` defaults to the
        pivot of the pairs, which must then all share one pivot.
    stress_sensitive: bool
        When false stress digits are removed before aligning.
    workers: int
        Processes used for counting.

    Returns
    -------
    ConfusionMatrix

    Raises
    ------
    EmptyInputError
        When no pair could be aligned.
    ValueError
        When ``l1`` is not given and the pairs come from several pivots.

    Examples
    --------
    A Hindi speaker's ``amazon`` comes back as ``amajon``:

    >>> matrix = mine_confusions(pairs, lex)  # doctest: +SKIP
    >>> matrix.row("Z")  # doctest: +SKIP
    {'JH': 0.75, 'Z': 0.25}
    """
    pairs = list(pairs)
    pivots = sorted({pair.pivot for pair in pairs})
    if not l1 and len(pivots) > 1:
        raise ValueError(
            f"The pairs come from several pivots ({', '.join(pivots)}); name the language with l1."
        )
    counts, report = count_shifts(pairs, lex, params, stress_sensitive, workers)
    if report.skipped:
        logger.warning("Skipped %d of %d pairs with unknown words.", report.skipped, report.pairs)
    if report.used == 0:
        raise EmptyInputError(f"None of the {report.pairs} round-trip pairs could be aligned.")
    if not l1:
        l1 = pivots[0]
    matrix = build_matrix(counts, l1, l2, top_k)
    logger.info(
        "Mined %d shifts for %s-%s from %d pairs.", len(matrix.shifts()), l1, l2, report.used
    )
    return matrix


def build_matrix(counts: Mapping[tuple[str, str], int], l1: str, l2: str, top_k=CONSTANTS["TOP_K"]) -> ConfusionMatrix:
    """Keep the ``top_k`` shifts of aligned pair counts and normalise the rows."""
    shifts = sorted(
        ((source, target) for source, target in counts if source != target),
        key=lambda key: (-counts[key], key),
    )
    kept = set(shifts if top_k is None else shifts[:top_k])
    retained = {
        key: count
        for key, count in counts.items()
        if count > 0 and (key[0] == key[1] or key in kept)
    }
    totals: Counter = Counter()
    for (source, _), count in retained.items():
        totals[source] += count
    rows: dict[str, dict[str, float]] = {}
    for (source, target), count in sorted(retained.items()):
        rows.setdefault(source, {})[target] = count / totals[source]
    return ConfusionMatrix(l1, l2, rows, dict(retained))


def save_matrix(m: ConfusionMatrix, path) -> None:
    """Write the matrix TSV: ``#l1=``/``#l2=`` headers then ``ph_i ph_j count prob``."""
    with atomic_write(Path(path)) as handle:
        write_header(handle, **{KEYS["L1"]: m.l1, KEYS["L2"]: m.l2})
        for source, target, prob in m._sorted_entries():
            count = m.shift_counts.get((source, target), 0)
            handle.write(f"{source}\t{target}\t{count}\t{format_float(prob)}\n")


def load_matrix(path, inventory: PhonemeInventory = DEFAULT_INVENTORY) -> ConfusionMatrix:
    """Read a matrix written by :func:`save_matrix`.

    Raises
    ------
    EmptyInputError
        When the file holds no rows.
    MatrixFormatError
        On a malformed line, an unknown phoneme or a row not summing to 1,
        naming the offending line.
    """
    header = {}
    rows: dict[str, dict[str, float]] = {}
    counts: dict[tuple[str, str], int] = {}
    first_line: dict[str, int] = {}
    with open(path, encoding="utf-8") as handle:
        lines = handle.readlines()
    for line in lines:
        pair = read_header(line)
        if pair is not None:
            header[pair[0]] = pair[1]
    for line_no, fields in tsv_rows(lines):
        if len(fields) != 4:
            raise MatrixFormatError(f"{path}:{line_no}: expected 4 fields, found {len(fields)}.")
        source, target, count, prob = fields
        for symbol in (source, target):
            if symbol not in inventory:
                raise MatrixFormatError(f'{path}:{line_no}: unknown phoneme "{symbol}".')
        try:
            rows.setdefault(source, {})[target] = float(prob)
            counts[source, target] = int(count)
        except ValueError as error:
            raise MatrixFormatError(f"{path}:{line_no}: {error}") from error
        first_line.setdefault(source, line_no)
    if not rows:
        raise EmptyInputError(f"{path}: the confusion matrix is empty.")
    for source, row in rows.items():
        total = sum(row.values())
        if abs(total - 1.0) > CONSTANTS["TOLERANCE"]:
            raise MatrixFormatError(
                f'{path}:{first_line[source]}: the row of "{source}" sums to {total}, not 1.'
            )
        for target, prob in row.items():
            if not 0.0 < prob <= 1.0:
                raise MatrixFormatError(
                    f'{path}:{first_line[source]}: P({target}|{source}) = {prob} is outside (0, 1].'
                )
    return ConfusionMatrix(
        header.get(KEYS["L1"], ""),
        header.get(KEYS["L2"], ""),
        rows,
        {key: count for key, count in counts.items() if count > 0},
    )
