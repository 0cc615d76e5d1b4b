# Licensed under a 3-clause BSD style license - see LICENSE.md
"""Pipeline configuration.

The configuration is a YAML file with one block per stage::

    seed: 13
    workers: 4
    paths:
      lexicon: data/cmudict-0.7b
      rtt_pairs: data/rtt_hi.tsv
      output_dir: out
    confusion:
      l1: hi
      top_k: 10
    generator:
      beam_width: 10

Every block is validated with pydantic; relative paths are resolved against
the directory of the configuration file.  A missing file means defaults.
"""

import logging
import os
from pathlib import Path

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from biphone.align import AlignmentParams
from biphone.bench_noiser import CONSTANTS as NOISE
from biphone.bench_noiser import FIELDS, NoiseConfig
from biphone.errors import ConfigError
from biphone.generator import GeneratorConfig
from biphone.pretrain_mix import CONSTANTS as MIXTURE
from biphone.pretrain_mix import MixtureConfig

__all__ = [
    "SUBCOMMANDS",
    "PipelineConfig",
    "load_config",
]

logger = logging.getLogger(__name__)

# Paths each subcommand reads; every one must exist before work starts.
SUBCOMMANDS = {
    "mine": ("lexicon", "rtt_pairs"),
    "train-pgm": ("lexicon",),
    "corrupt": ("lexicon", "matrix", "pgm"),
    "score-corpus": ("corpus", "dictionary", "candidates"),
    "noise": ("task_file", "candidates"),
    "emit-mixture": ("lexicon", "corpus", "wordfreq"),
    "report": (),
}


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsConfig(_Block):
    lexicon: Path | None = None
    extra_lexicons: list[Path] = []
    extra_phonemes: list[str] = []
    extra_vowels: list[str] = []
    rtt_pairs: Path | None = None
    matrix: Path | None = None
    pgm: Path | None = None
    words: Path | None = None
    candidates: list[Path] = []
    corpus: Path | None = None
    reference_corpus: Path | None = None
    dictionary: Path | None = None
    wordfreq: Path | None = None
    task_file: Path | None = None
    field_map: Path | None = None
    blocklist: Path | None = None
    output_dir: Path = Path("out")


class AlignmentBlock(_Block):
    match_score: float = 1.0
    mismatch_score: float = -1.0
    gap_score: float = -1.0

    @model_validator(mode="after")
    def _check(self):
        self.params()
        return self

    def params(self) -> AlignmentParams:
        return AlignmentParams(self.match_score, self.mismatch_score, self.gap_score)


class ConfusionBlock(_Block):
    l1: str = ""
    l2: str = "en"
    top_k: int | None = Field(default=10, ge=1)
    stress_sensitive: bool = True


class PgmBlock(_Block):
    max_chunk_len: int = Field(default=4, ge=1)
    max_iters: int = Field(default=10, ge=1)
    empty_weight: float = Field(default=0.1, ge=0.0)


class GeneratorBlock(_Block):
    beam_width: int = Field(default=10, ge=1)
    min_prob: float = Field(default=0.0, ge=0.0, le=1.0)
    drop_identity: bool = True
    merge: str = "sum"

    @model_validator(mode="after")
    def _check(self):
        self.generator_config()
        return self

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(self.beam_width, self.min_prob, self.drop_identity, self.merge)


class CorpusBlock(_Block):
    reference: str = "clean"
    thresholds: list[float] = [0.0, 0.001, 0.01, 0.1, 0.5]
    top_words: int = Field(default=10_000, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if self.reference not in ("clean", "external"):
            raise ValueError(f'The reference "{self.reference}" is neither "clean" nor "external".')
        return self


class NoiseBlock(_Block):
    task: str = "boolq"
    split: str = "validation"
    target_token_fraction: float = Field(default=NOISE["TARGET_TOKEN_FRACTION"], gt=0.0, lt=1.0)
    min_word_len: int = Field(default=NOISE["MIN_WORD_LEN"], ge=1)
    languages: list[str] = list(NOISE["LANGUAGES"])
    rules: list[str] = list(NOISE["RULES"])
    strategy: str = "sampled"
    id_field: str = NOISE["ID_FIELD"]

    @model_validator(mode="after")
    def _check(self):
        self.noise_config(seed=0)
        return self

    def noise_config(self, seed: int, fields_by_task=None, blocklist=frozenset()) -> NoiseConfig:
        return NoiseConfig(
            fields_by_task=dict(fields_by_task or FIELDS),
            target_token_fraction=self.target_token_fraction,
            min_word_len=self.min_word_len,
            languages=tuple(self.languages),
            seed=seed,
            blocklist=blocklist,
            rules=tuple(self.rules),
            strategy=self.strategy,
            id_field=self.id_field,
        )


class MixtureBlock(_Block):
    phoneme_fraction: float = Field(default=MIXTURE["PHONEME_FRACTION"], gt=0.0, lt=1.0)
    noise_density: float = Field(default=MIXTURE["NOISE_DENSITY"], gt=0.0, lt=1.0)
    mean_span_length: float = Field(default=MIXTURE["MEAN_SPAN_LENGTH"], ge=1.0)
    vocab_size: int = Field(default=MIXTURE["VOCAB_SIZE"], ge=1)
    strip_stress: bool = True
    max_examples: int | None = Field(default=None, ge=0)

    def mixture_config(self, seed: int) -> MixtureConfig:
        return MixtureConfig(
            phoneme_fraction=self.phoneme_fraction,
            noise_density=self.noise_density,
            mean_span_length=self.mean_span_length,
            vocab_size=self.vocab_size,
            seed=seed,
            strip_stress=self.strip_stress,
            max_examples=self.max_examples,
        )


class PipelineConfig(_Block):
    """Every setting of a pipeline run."""

    seed: int = 0
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    paths: PathsConfig = Field(default_factory=PathsConfig)
    alignment: AlignmentBlock = Field(default_factory=AlignmentBlock)
    confusion: ConfusionBlock = Field(default_factory=ConfusionBlock)
    pgm: PgmBlock = Field(default_factory=PgmBlock)
    generator: GeneratorBlock = Field(default_factory=GeneratorBlock)
    corpus: CorpusBlock = Field(default_factory=CorpusBlock)
    noise: NoiseBlock = Field(default_factory=NoiseBlock)
    mixture: MixtureBlock = Field(default_factory=MixtureBlock)

    def resolve(self, base: Path) -> "PipelineConfig":
        """Return a copy whose relative paths are taken from ``base``."""
        updates = {}
        for name, value in self.paths:
            if isinstance(value, Path) and not value.is_absolute():
                updates[name] = base / value
            elif isinstance(value, list) and value and isinstance(value[0], Path):
                updates[name] = [item if item.is_absolute() else base / item for item in value]
        return self.model_copy(update={"paths": self.paths.model_copy(update=updates)})

    def validate_inputs(self, subcommand: str) -> None:
        """Check that every input of ``subcommand`` is configured and exists.

        Raises
        ------
        ConfigError
            Naming the first missing input.
        """
        if subcommand not in SUBCOMMANDS:
            raise ConfigError(f'The subcommand "{subcommand}" is unknown.')
        for name in SUBCOMMANDS[subcommand]:
            value = getattr(self.paths, name)
            values = value if isinstance(value, list) else [value]
            if not values or values[0] is None:
                raise ConfigError(f'The "{subcommand}" step needs paths.{name}.')
            for path in values:
                if not Path(path).exists():
                    raise ConfigError(f'The input paths.{name} = {path} does not exist.')
        optional = ["extra_lexicons", "field_map", "blocklist"]
        if subcommand == "score-corpus" and self.corpus.reference == "external":
            optional.append("reference_corpus")
            if self.paths.reference_corpus is None:
                raise ConfigError("An external reference needs paths.reference_corpus.")
        for name in optional:
            value = getattr(self.paths, name)
            for path in value if isinstance(value, list) else [value]:
                if path is not None and not Path(path).exists():
                    raise ConfigError(f'The input paths.{name} = {path} does not exist.')


def load_config(path=None) -> PipelineConfig:
    """Read and validate a configuration file.

    Parameters
    ----------
    path: str or Path, optional
        A YAML file.  ``None`` gives the defaults.

    Raises
    ------
    ConfigError
        When the file cannot be read or a value is invalid.
    """
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as handle:
            raw = yaml.safe_load(handle) or {}
    except (OSError, yaml.YAMLError) as error:
        raise ConfigError(f"Cannot read the configuration {path}: {error}") from error
    if not isinstance(raw, dict):
        raise ConfigError(f"The configuration {path} is not a mapping.")
    try:
        config = PipelineConfig.model_validate(raw)
    except ValidationError as error:
        raise ConfigError(f"The configuration {path} is invalid:\n{error}") from error
    logger.debug("Loaded the configuration %s.", path)
    return config.resolve(path.parent)
