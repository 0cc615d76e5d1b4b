# Licensed under a 3-clause BSD style license - see LICENSE.md
"""This module writes the text-to-text pre-training mixture.

Two kinds of examples are interleaved:

``span_corruption``
    Random spans of a sentence are replaced by sentinels ``<extra_id_N>``;
    the target lists each sentinel followed by the tokens it hides and ends
    with one more sentinel.
``phoneme_prediction``
    The input is a single word and the target its phoneme sequence.

Each example is a phoneme example with probability ``phoneme_fraction``,
so over a long stream the kinds settle at the configured ratio.
"""

import itertools
import json
import logging
import re
from collections import Counter
from collections.abc import Callable, Iterable, Iterator
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from biphone.errors import ConfigError, EmptyInputError
from biphone.formats import atomic_write
from biphone.phonology import Lexicon, PhonemeSeq, normalize_word, strip_stress

__all__ = [
    "CONSTANTS",
    "KEYS",
    "MixtureConfig",
    "MixtureExample",
    "emit_mixture",
    "phoneme_vocabulary",
    "random_spans_mask",
    "reconstruct",
    "span_corrupt",
    "write_mixture",
]

logger = logging.getLogger(__name__)

CONSTANTS = {
    "MEAN_SPAN_LENGTH": 3.0,
    "NOISE_DENSITY": 0.15,
    "PHONEME_FRACTION": 0.20,
    "SENTINEL": "<extra_id_{}>",
    "VOCAB_SIZE": 2_000_000,
}

KEYS = {
    "PHONEME": "phoneme_prediction",
    "SPAN": "span_corruption",
}

_SENTINEL = re.compile(r"(<extra_id_\d+>)")
_WHITESPACE = re.compile(r"(\s+)")


@dataclass(frozen=True)
class MixtureConfig:
    phoneme_fraction: float = CONSTANTS["PHONEME_FRACTION"]
    noise_density: float = CONSTANTS["NOISE_DENSITY"]
    mean_span_length: float = CONSTANTS["MEAN_SPAN_LENGTH"]
    vocab_size: int = CONSTANTS["VOCAB_SIZE"]
    seed: int = 0
    strip_stress: bool = True
    max_examples: int | None = None

    def __post_init__(self):
        if not 0.0 < self.phoneme_fraction < 1.0:
            raise ConfigError(f"The phoneme fraction {self.phoneme_fraction} is outside (0, 1).")
        if not 0.0 < self.noise_density < 1.0:
            raise ConfigError(f"The noise density {self.noise_density} is outside (0, 1).")
        if self.mean_span_length < 1.0:
            raise ConfigError(f"The mean span length {self.mean_span_length} is below 1.")
        if self.vocab_size < 1:
            raise ConfigError(f"The vocabulary size {self.vocab_size} must be at least 1.")
        if self.max_examples is not None and self.max_examples < 0:
            raise ConfigError(f"The example limit {self.max_examples} is negative.")


@dataclass(frozen=True)
class MixtureExample:
    kind: str
    input: str
    target: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


def sentinel(index: int) -> str:
    return CONSTANTS["SENTINEL"].format(index)


def _random_segmentation(num_items: int, num_segments: int, rng: np.random.Generator) -> np.ndarray:
    """Split ``num_items`` into ``num_segments`` positive lengths, all splits equally likely."""
    first_in_segment = np.zeros(num_items, dtype=np.int64)
    first_in_segment[1:] = rng.permutation(np.arange(num_items - 1) < num_segments - 1)
    segment_id = np.cumsum(first_in_segment)
    return np.bincount(segment_id, minlength=num_segments)


def random_spans_mask(length: int, noise_density: float = CONSTANTS["NOISE_DENSITY"], mean_span_length: float = CONSTANTS["MEAN_SPAN_LENGTH"], rng: np.random.Generator | None = None) -> np.ndarray:
    """A boolean mask of random noise spans over ``length`` tokens.

    ``round(length * noise_density)`` tokens are noise, clipped to
    ``[1, length - 1]``, split into ``round(noise / mean_span_length)``
    spans (at least one).  Spans alternate between non-noise and noise,
    starting with non-noise, and every such mask is equally likely.

    Parameters
    ----------
    length: int
        Number of tokens, at least 2.
    noise_density: float
    mean_span_length: float
    rng: numpy.random.Generator

    Returns
    -------
    numpy.ndarray of bool, shape ``(length,)``

    Examples
    --------
    >>> int(random_spans_mask(10, 0.2, 2.0, np.random.default_rng(0)).sum())
    2
    """
    if length < 2:
        raise ValueError(f"A span mask needs at least 2 tokens, got {length}.")
    rng = np.random.default_rng() if rng is None else rng
    num_noise = min(max(int(round(length * noise_density)), 1), length - 1)
    num_nonnoise = length - num_noise
    num_spans = max(int(round(num_noise / mean_span_length)), 1)
    num_spans = min(num_spans, num_noise, num_nonnoise)
    noise_lengths = _random_segmentation(num_noise, num_spans, rng)
    nonnoise_lengths = _random_segmentation(num_nonnoise, num_spans, rng)
    interleaved = np.stack([nonnoise_lengths, noise_lengths], axis=1).reshape(-1)
    span_starts = np.cumsum(interleaved)[:-1]
    span_start_indicator = np.zeros(length, dtype=np.int64)
    span_start_indicator[span_starts] = 1
    span_num = np.cumsum(span_start_indicator)
    return span_num % 2 == 1


def span_corrupt(tokens: list[str], mask: np.ndarray, separators: list[str] | None = None) -> tuple[str, str]:
    """Replace each noise span by a sentinel.

    Parameters
    ----------
    tokens: list of str
    mask: numpy.ndarray of bool
        True for noise tokens.
    separators: list of str, optional
        The whitespace after each token but the last; single spaces by
        default.  Whitespace around a span stays in the input, whitespace
        inside it travels with the span.

    Returns
    -------
    input: str
        The text with one sentinel per noise span.
    target: str
        Every sentinel, a space and the span it replaced, then a final
        sentinel, all separated by single spaces.

    Examples
    --------
    >>> span_corrupt("a new sofa design idea".split(), np.array([0, 0, 1, 1, 0], bool))
    ('a new <extra_id_0> idea', '<extra_id_0> sofa design <extra_id_1>')
    """
    if len(tokens) != len(mask):
        raise ValueError(f"{len(tokens)} tokens do not match a mask of {len(mask)}.")
    if separators is None:
        separators = [" "] * max(len(tokens) - 1, 0)
    if len(separators) != max(len(tokens) - 1, 0):
        raise ValueError(f"{len(tokens)} tokens need {len(tokens) - 1} separators, got {len(separators)}.")
    source, target = "", ""
    count = 0
    for index, (token, noise) in enumerate(zip(tokens, mask)):
        gap = separators[index - 1] if index else ""
        if not noise:
            source += gap + token
        elif index and mask[index - 1]:
            target += gap + token
        else:
            source += gap + sentinel(count)
            target += (" " if target else "") + sentinel(count) + " " + token
            count += 1
    target += (" " if target else "") + sentinel(count)
    return source, target


def reconstruct(input: str, target: str) -> str:
    """Put the spans of ``target`` back into the sentinels of ``input``."""
    parts = _SENTINEL.split(target)
    if parts[0]:
        raise ValueError(f'The target "{target}" does not start with a sentinel.')
    spans = {
        marker: text.removeprefix(" ").removesuffix(" ")
        for marker, text in zip(parts[1::2], parts[2::2])
    }

    def restore(match: re.Match) -> str:
        if match.group(0) not in spans:
            raise ValueError(f"The sentinel {match.group(0)} has no span in the target.")
        return spans[match.group(0)]

    return _SENTINEL.sub(restore, input)


def phoneme_vocabulary(wordfreq: Iterable, lex: Lexicon, vocab_size: int = CONSTANTS["VOCAB_SIZE"], strip: bool = True, g2p: Callable[[str], PhonemeSeq | None] | None = None) -> tuple[dict[str, str], int]:
    """Phoneme targets of the most frequent words.

    Parameters
    ----------
    wordfreq: iterable
        Words by descending frequency, bare or as ``(word, count)`` pairs.
    lex: Lexicon
    vocab_size: int
        How many words of the list to consider.
    strip: bool
        Remove the stress digits from the targets.
    g2p: callable, optional
        Pronounces a word the lexicon does not know; returns ``None`` when
        it cannot.

    Returns
    -------
    targets: dict
        Word to its space-joined phoneme sequence, in list order.
    uncovered: int
        Words without a pronunciation; they are left out.
    """
    targets: dict[str, str] = {}
    uncovered = 0
    for entry in itertools.islice(wordfreq, vocab_size):
        word = normalize_word(entry[0] if isinstance(entry, tuple) else entry)
        if not word or word in targets:
            continue
        phonemes = lex.phonemes_of(word)
        if phonemes is None and g2p is not None:
            phonemes = g2p(word)
        if not phonemes:
            uncovered += 1
            continue
        targets[word] = " ".join(strip_stress(tuple(phonemes)) if strip else phonemes)
    return targets, uncovered


def emit_mixture(corpus: Iterable[str], wordfreq: Iterable, lex: Lexicon, cfg: MixtureConfig = MixtureConfig(), g2p: Callable[[str], PhonemeSeq | None] | None = None) -> Iterator[MixtureExample]:
    """Interleave span corruption and phoneme prediction examples.

    Parameters
    ----------
    corpus: iterable of str
        Sentences, one per item.  Leading and trailing whitespace is
        dropped; the whitespace between tokens is kept, so filling the
        sentinels of an example gives the stripped sentence back exactly.
        Sentences under two tokens or holding a sentinel are skipped.
    wordfreq: iterable
        Ranked word list for :func:`phoneme_vocabulary`.
    lex: Lexicon
    cfg: MixtureConfig
    g2p: callable, optional
        Fallback pronunciation for words outside the lexicon.

    Returns
    -------
    iterator of MixtureExample
        Ends when the corpus runs out or ``cfg.max_examples`` is reached.

    Raises
    ------
    EmptyInputError
        When the corpus or the covered word list is empty.  Both are
        checked before the first example is produced.

    Examples
    --------
    >>> next(emit_mixture(["x y"], ["building"], lex, MixtureConfig(phoneme_fraction=0.99)))  # doctest: +SKIP
    MixtureExample(kind='phoneme_prediction', input='building', target='B IH L D IH NG')
    """
    targets, uncovered = phoneme_vocabulary(wordfreq, lex, cfg.vocab_size, cfg.strip_stress, g2p)
    if not targets:
        raise EmptyInputError("No word of the word list has a pronunciation.")
    logger.info("%d words have phoneme targets, %d are not covered.", len(targets), uncovered)
    sentences = iter(corpus)
    first = next(sentences, None)
    if first is None:
        raise EmptyInputError("The corpus is empty.")
    return _mixture(itertools.chain([first], sentences), list(targets.items()), cfg)


def _mixture(sentences: Iterator[str], words: list[tuple[str, str]], cfg: MixtureConfig) -> Iterator[MixtureExample]:
    rng = np.random.default_rng(cfg.seed)
    counts = Counter()
    while cfg.max_examples is None or counts[KEYS["SPAN"]] + counts[KEYS["PHONEME"]] < cfg.max_examples:
        if rng.random() < cfg.phoneme_fraction:
            word, target = words[int(rng.integers(len(words)))]
            counts[KEYS["PHONEME"]] += 1
            yield MixtureExample(KEYS["PHONEME"], word, target)
            continue
        parts = None
        for sentence in sentences:
            candidate = _WHITESPACE.split(sentence.strip())
            if len(candidate) >= 3 and not _SENTINEL.search(sentence):
                parts = candidate
                break
            counts["skipped"] += 1
        if parts is None:
            break
        tokens, separators = parts[0::2], parts[1::2]
        mask = random_spans_mask(len(tokens), cfg.noise_density, cfg.mean_span_length, rng)
        source, target = span_corrupt(tokens, mask, separators)
        counts[KEYS["SPAN"]] += 1
        yield MixtureExample(KEYS["SPAN"], source, target)
    logger.info(
        "Emitted %d span corruption and %d phoneme prediction examples, skipped %d sentences.",
        counts[KEYS["SPAN"]],
        counts[KEYS["PHONEME"]],
        counts["skipped"],
    )


def write_mixture(examples: Iterable[MixtureExample], path) -> Counter:
    """Write examples as JSONL and return the count of each kind."""
    counts = Counter()
    with atomic_write(Path(path)) as handle:
        for example in examples:
            handle.write(example.to_json() + "\n")
            counts[example.kind] += 1
    return counts
