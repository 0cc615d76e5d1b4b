# Licensed under a 3-clause BSD style license - see LICENSE.md
"""This module owns the phoneme inventory and the pronunciation lexicon.

A lexicon is read from a file in the CMU Pronouncing Dictionary format::

    ;;; comment
    HELLO  HH AH0 L OW1
    A  AH0
    A(1)  EY1

Words are lowercased, numbered variants ``WORD(n)`` are gathered under the
bare word in file order and the first listed variant is the canonical
pronunciation returned by :func:`phonemes_of`.  Lines that cannot be used are
collected in a rejects report instead of stopping the parse.
"""

import logging
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

from biphone.errors import LexiconError
from biphone.formats import atomic_write

__all__ = [
    "ARPABET_CONSONANTS",
    "ARPABET_VOWELS",
    "CONSTANTS",
    "Lexicon",
    "PhonemeInventory",
    "PhonemeSeq",
    "Reject",
    "load_lexicon",
    "merge_lexicons",
    "normalize_word",
    "parse_lexicon",
    "phonemes_of",
    "serialize_lexicon",
    "strip_stress",
    "write_rejects",
]

logger = logging.getLogger(__name__)

PhonemeSeq = tuple[str, ...]

ARPABET_VOWELS = frozenset(
    "AA AE AH AO AW AY EH ER EY IH IY OW OY UH UW".split()
)
ARPABET_CONSONANTS = frozenset(
    "B CH D DH F G HH JH K L M N NG P R S SH T TH V W Y Z ZH".split()
)

CONSTANTS = {
    "COMMENT": ";;;",
    "EDGE_PUNCTUATION": "\"!#$%&()*+,-./:;<=>?@[\\]^_`{|}~",
    "ENCODING": "latin-1",
    "INLINE_COMMENT": "#",
    "STRESS_DIGITS": "012",
}

REJECTS = {
    "EMPTY_WORD": "empty word",
    "NO_PHONEMES": "no phonemes",
    "BAD_WORD": "word has characters other than letters and apostrophes",
    "UNKNOWN": "unknown phoneme",
    "BAD_VARIANT": "malformed variant suffix",
}

_SYMBOL = re.compile(r"^([A-Z]{1,2})([0-2]?)$")
_VARIANT = re.compile(r"^(.+?)\((\d+)\)$")
_WORD = re.compile(r"^[a-z']+$")


class PhonemeInventory:
    """The set of phoneme symbols a lexicon and the models may use.

    ARPAbet by default: 15 vowels that take an optional stress digit 0, 1
    or 2 and 24 consonants that never do.  ``extra`` adds base symbols,
    treated as consonants unless listed in ``extra_vowels``.
    """

    def __init__(self, extra: Iterable[str] = (), extra_vowels: Iterable[str] = ()):
        self.vowels = frozenset(ARPABET_VOWELS | set(extra_vowels))
        self.consonants = frozenset(ARPABET_CONSONANTS | set(extra)) - self.vowels
        for symbol in self.vowels | self.consonants:
            if not re.fullmatch(r"[A-Z]{1,2}", symbol):
                raise LexiconError(f'The extra phoneme "{symbol}" is not a base symbol.')

    def __contains__(self, symbol: object) -> bool:
        return isinstance(symbol, str) and self.is_valid(symbol)

    def is_valid(self, symbol: str) -> bool:
        """Return whether ``symbol`` is a base symbol with a legal stress digit."""
        match = _SYMBOL.match(symbol)
        if match is None:
            return False
        base, stress = match.groups()
        if base in self.vowels:
            return True
        return base in self.consonants and stress == ""

    def is_vowel(self, symbol: str) -> bool:
        return symbol.rstrip(CONSTANTS["STRESS_DIGITS"]) in self.vowels


DEFAULT_INVENTORY = PhonemeInventory()


def strip_stress(seq: PhonemeSeq) -> PhonemeSeq:
    """Remove the vowel stress digits of a phoneme sequence.

    Parameters
    ----------
    seq: PhonemeSeq
        A non-empty phoneme sequence.

    Returns
    -------
    PhonemeSeq
        The same phonemes without stress digits, same length.

    Raises
    ------
    ValueError
        When ``seq`` is empty.

    Examples
    --------
    >>> strip_stress(("DH", "EY1"))
    ('DH', 'EY')
    """
    if len(seq) == 0:
        raise ValueError("A phoneme sequence cannot be empty.")
    return tuple(symbol.rstrip(CONSTANTS["STRESS_DIGITS"]) for symbol in seq)


def normalize_word(word: str) -> str:
    """Lowercase a word and strip the punctuation around it.

    Internal apostrophes are kept (``don't``); surrounding ones are kept too
    because CMUdict lists words such as ``'BOUT``.
    """
    return word.strip().strip(CONSTANTS["EDGE_PUNCTUATION"]).lower()


@dataclass(frozen=True)
class Reject:
    """A lexicon line that was not accepted."""

    line_no: int
    line: str
    reason: str


@dataclass(frozen=True)
class Lexicon:
    """Pronunciations of words, immutable once built.

    ``entries`` maps a lowercase word to its pronunciation variants in file
    order; ``canonical`` maps it to the first one.
    """

    entries: Mapping[str, tuple[PhonemeSeq, ...]]
    inventory: PhonemeInventory = field(default=DEFAULT_INVENTORY, compare=False)
    rejects: tuple[Reject, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def __reduce__(self):
        return (Lexicon, (dict(self.entries), self.inventory, self.rejects))

    @property
    def canonical(self) -> Mapping[str, PhonemeSeq]:
        return MappingProxyType(
            {word: variants[0] for word, variants in self.entries.items()}
        )

    def __contains__(self, word: object) -> bool:
        return isinstance(word, str) and normalize_word(word) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def variants(self, word: str) -> tuple[PhonemeSeq, ...]:
        return self.entries.get(normalize_word(word), ())

    def phonemes_of(self, word: str) -> PhonemeSeq | None:
        return phonemes_of(self, word)


def _parse_line(line: str, inventory: PhonemeInventory):
    """Return ``(word, variant, phonemes)`` or a rejection reason string."""
    body = line.split(CONSTANTS["INLINE_COMMENT"], 1)[0] if " #" in line else line
    fields = body.split()
    if not fields:
        return REJECTS["EMPTY_WORD"]
    raw_word, phonemes = fields[0], tuple(fields[1:])
    variant = 0
    match = _VARIANT.match(raw_word)
    if match is not None:
        raw_word, variant = match.group(1), int(match.group(2))
    elif "(" in raw_word or ")" in raw_word:
        return REJECTS["BAD_VARIANT"]
    word = raw_word.lower()
    if not word:
        return REJECTS["EMPTY_WORD"]
    if not _WORD.match(word):
        return REJECTS["BAD_WORD"]
    if not phonemes:
        return REJECTS["NO_PHONEMES"]
    phonemes = tuple(symbol.upper() for symbol in phonemes)
    for symbol in phonemes:
        if symbol not in inventory:
            return f'{REJECTS["UNKNOWN"]} {symbol}'
    return word, variant, phonemes


def parse_lexicon(source: Iterable[str], inventory: PhonemeInventory = DEFAULT_INVENTORY) -> Lexicon:
    """Parse a CMUdict-format text stream into a :class:`Lexicon`.

    Parameters
    ----------
    source: iterable of str
        Lines of the dictionary, e.g. an open file.
    inventory: PhonemeInventory
        Symbols accepted in pronunciations.  Lines using any other symbol
        are rejected rather than growing the inventory.

    Returns
    -------
    Lexicon
        Lowercase words with their variants in file order.  Rejected lines
        are kept in ``Lexicon.rejects``.

    Raises
    ------
    LexiconError
        When not a single line yields a valid entry.

    Examples
    --------
    >>> lex = parse_lexicon(["A  AH0", "A(1)  EY1"])
    >>> lex.entries["a"]
    (('AH0',), ('EY1',))
    """
    entries: dict[str, list[PhonemeSeq]] = {}
    rejects = []
    for line_no, raw in enumerate(source, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith(CONSTANTS["COMMENT"]):
            continue
        parsed = _parse_line(line, inventory)
        if isinstance(parsed, str):
            rejects.append(Reject(line_no, line, parsed))
            continue
        word, _, phonemes = parsed
        variants = entries.setdefault(word, [])
        if phonemes not in variants:
            variants.append(phonemes)
    if not entries:
        raise LexiconError(
            f"The lexicon has no valid entries ({len(rejects)} lines rejected)."
        )
    if rejects:
        logger.warning("Rejected %d lexicon lines.", len(rejects))
    logger.info("Parsed %d lexicon words.", len(entries))
    return Lexicon(
        {word: tuple(variants) for word, variants in entries.items()},
        inventory=inventory,
        rejects=tuple(rejects),
    )


def load_lexicon(path, inventory: PhonemeInventory = DEFAULT_INVENTORY, encoding: str = CONSTANTS["ENCODING"]) -> Lexicon:
    """Read a lexicon file.  CMUdict 0.7b is latin-1 encoded."""
    with open(path, encoding=encoding) as handle:
        return parse_lexicon(handle, inventory)


def merge_lexicons(base: Lexicon, *extra: Lexicon) -> Lexicon:
    """Add the words and variants of ``extra`` lexicons after those of ``base``.

    Existing variants keep their order so the canonical pronunciation of a
    word already in ``base`` never changes.
    """
    entries = {word: list(variants) for word, variants in base.entries.items()}
    rejects = list(base.rejects)
    for lexicon in extra:
        rejects.extend(lexicon.rejects)
        for word, variants in lexicon.entries.items():
            known = entries.setdefault(word, [])
            known.extend(v for v in variants if v not in known)
    return Lexicon(
        {word: tuple(variants) for word, variants in entries.items()},
        inventory=base.inventory,
        rejects=tuple(rejects),
    )


def phonemes_of(lex: Lexicon, word: str) -> PhonemeSeq | None:
    """Return the canonical pronunciation of ``word`` or ``None``.

    Lookup is case-insensitive and ignores surrounding punctuation.
    ``None`` is the not-found result: the caller decides whether to skip
    the word or fall back to another source.

    Examples
    --------
    >>> phonemes_of(parse_lexicon(["THEY  DH EY1"]), "They")
    ('DH', 'EY1')
    """
    variants = lex.entries.get(normalize_word(word))
    if not variants:
        return None
    return variants[0]


def serialize_lexicon(lex: Lexicon) -> str:
    """Write a lexicon back to CMUdict format.

    The first variant is written as ``WORD``, later ones as ``WORD(1)``,
    ``WORD(2)`` ...  Words are sorted so the output is stable.
    """
    lines = []
    for word in sorted(lex.entries):
        for number, phonemes in enumerate(lex.entries[word]):
            key = word.upper() if number == 0 else f"{word.upper()}({number})"
            lines.append(f"{key}  {' '.join(phonemes)}")
    return "\n".join(lines) + "\n"


def write_rejects(rejects: Iterable[Reject], path) -> None:
    """Write the rejects report, ``line_no<TAB>line<TAB>reason`` per line."""
    with atomic_write(Path(path)) as handle:
        for reject in rejects:
            line = reject.line.replace("\t", " ")
            handle.write(f"{reject.line_no}\t{line}\t{reject.reason}\n")
