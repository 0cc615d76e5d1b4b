# Licensed under a 3-clause BSD style license - see LICENSE.md
"""Exceptions raised by :mod:`biphone`.

Every error is a ``ValueError`` so callers that only know about the
builtin still catch them.  The command line maps :class:`ConfigError`
to exit status 1 and every other :class:`BiphoneError` to exit status 2.
"""

__all__ = [
    "BiphoneError",
    "ConfigError",
    "EmptyInputError",
    "LexiconError",
    "MatrixFormatError",
    "MissingPhonemeError",
    "NoiseAuditError",
    "StoreFormatError",
    "UnknownTaskError",
    "WordNotFoundError",
]


class BiphoneError(ValueError):
    """Base class of the package errors."""


class ConfigError(BiphoneError):
    """The pipeline configuration or a command line flag is invalid."""


class EmptyInputError(BiphoneError):
    """An input that must hold data holds none."""


class LexiconError(BiphoneError):
    """A pronunciation lexicon could not be built."""


class MatrixFormatError(BiphoneError):
    """A matrix, model or candidate file breaks its format."""


class MissingPhonemeError(BiphoneError):
    """A phoneme has no row in the phoneme-grapheme model."""

    def __init__(self, phoneme: str):
        super().__init__(
            f'The phoneme "{phoneme}" has no grapheme emissions in the model.'
        )
        self.phoneme = phoneme


class NoiseAuditError(BiphoneError):
    """A clean and a noised task file disagree outside the allowed places."""


class StoreFormatError(BiphoneError):
    """An n-gram store file has a missing or incompatible header."""


class UnknownTaskError(BiphoneError):
    """A benchmark task has no designated field."""

    def __init__(self, task: str, known: list):
        super().__init__(
            f'The task "{task}" is unknown. Known tasks: {", ".join(sorted(known))}.'
        )
        self.task = task
        self.known = sorted(known)


class WordNotFoundError(BiphoneError, KeyError):
    """A word is not in the pronunciation lexicon."""

    def __init__(self, word: str):
        super().__init__(f'The word "{word}" is not in the lexicon.')
        self.word = word

    def __str__(self) -> str:
        return str(self.args[0])
