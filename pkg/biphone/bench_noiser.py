# Licensed under a 3-clause BSD style license - see LICENSE.md
"""This module adds phonetic misspellings to benchmark task files.

Each task has one designated text field.  Inside it every eligible token
(long enough, with allowed candidates, not vetoed) may be replaced by one of
its generated misspellings; every other field is copied unchanged.  Noised
files are written by splicing the new strings into the source lines, so
every other byte of a task file survives.

The replacement rate is calibrated over the whole task file so that the
expected share of replaced eligible tokens is ``target_token_fraction``.
Every record with an eligible token gets one forced replacement and the
remaining eligible tokens are replaced independently with probability

    p = (f * N - R) / (N - R)

for ``N`` eligible tokens in ``R`` records, clipped to [0, 1].

Each record draws from its own generator seeded by ``(seed, record id)``,
so output does not depend on record order or on how the file is split.
"""

import copy
import hashlib
import json
import logging
import re
from collections.abc import Iterable, Mapping
from dataclasses import asdict, dataclass, field
from json.decoder import scanstring
from pathlib import Path

import numpy as np
import yaml

from biphone.errors import ConfigError, NoiseAuditError, UnknownTaskError
from biphone.formats import atomic_write, tsv_rows
from biphone.phonology import CONSTANTS as PHONOLOGY
from biphone.phonology import normalize_word

__all__ = [
    "CONSTANTS",
    "FIELDS",
    "NoiseConfig",
    "NoiseStats",
    "audit_noise",
    "load_blocklist",
    "load_field_map",
    "noise_dataset",
    "parse_jsonl",
    "read_jsonl",
    "read_jsonl_lines",
    "splice_record",
    "write_jsonl",
    "write_noised_jsonl",
    "write_stats",
]

logger = logging.getLogger(__name__)

CONSTANTS = {
    "ID_FIELD": "idx",
    "LANGUAGES": ("hi", "bn"),
    "MIN_WORD_LEN": 4,
    "RULES": (r"(.)\1\1", r"[^a-z']"),
    "STRATEGIES": ("sampled", "top1", "uniform"),
    "TARGET_TOKEN_FRACTION": 0.30,
}

# SuperGLUE field of each task; dotted paths step into nested objects and lists.
FIELDS = {
    "boolq": "question",
    "cb": "premise",
    "copa": "premise",
    "multirc": "passage.questions.question",
    "record": "qas.query",
    "rte": "hypothesis",
    "wic": "sentence1",
}

_WHITESPACE = re.compile(r"(\s+)")


@dataclass(frozen=True)
class NoiseConfig:
    """Noising guardrails.

    ``blocklist`` holds ``(word, misspelling)`` pairs vetoed by hand and
    ``rules`` regular expressions that veto any misspelling they match.
    ``strategy`` picks a replacement among the allowed candidates:
    proportionally to score (``sampled``), the best one (``top1``) or any
    one (``uniform``).
    """

    fields_by_task: Mapping[str, str] = field(default_factory=lambda: dict(FIELDS))
    target_token_fraction: float = CONSTANTS["TARGET_TOKEN_FRACTION"]
    min_word_len: int = CONSTANTS["MIN_WORD_LEN"]
    languages: tuple[str, ...] = CONSTANTS["LANGUAGES"]
    seed: int = 0
    blocklist: frozenset = frozenset()
    rules: tuple[str, ...] = CONSTANTS["RULES"]
    strategy: str = "sampled"
    id_field: str = CONSTANTS["ID_FIELD"]

    def __post_init__(self):
        if not 0.0 < self.target_token_fraction < 1.0:
            raise ConfigError(
                f"The target token fraction {self.target_token_fraction} is outside (0, 1)."
            )
        if self.min_word_len < 1:
            raise ConfigError(f"The minimum word length {self.min_word_len} must be at least 1.")
        if self.strategy not in CONSTANTS["STRATEGIES"]:
            raise ConfigError(
                f'The strategy "{self.strategy}" is not one of {CONSTANTS["STRATEGIES"]}.'
            )
        for rule in self.rules:
            try:
                re.compile(rule)
            except re.error as error:
                raise ConfigError(f'The rule "{rule}" is not a regular expression: {error}') from error

    def field_of(self, task: str) -> str:
        if task not in self.fields_by_task:
            raise UnknownTaskError(task, list(self.fields_by_task))
        return self.fields_by_task[task]


@dataclass
class NoiseStats:
    """Token and record counts of a noised task file.

    ``tokens`` counts every whitespace token of the designated fields.
    The eligibility counts are only known while noising, so they take no
    part in comparisons with the counts an audit recovers.
    """

    task: str
    tokens: int = 0
    replaced: int = 0
    records: int = 0
    records_noised: int = 0
    missing_field: int = 0
    eligible: int = field(default=0, compare=False)
    records_eligible: int = field(default=0, compare=False)

    @property
    def token_rate(self) -> float:
        return self.replaced / self.tokens if self.tokens else 0.0

    @property
    def record_rate(self) -> float:
        return self.records_noised / self.records if self.records else 0.0

    @property
    def eligible_rate(self) -> float:
        return self.replaced / self.eligible if self.eligible else 0.0

    def to_report(self) -> dict:
        """The counts with the percentages of tokens misspelt and examples noised."""
        report = asdict(self)
        report["tokens_misspelt_pct"] = round(100.0 * self.token_rate, 2)
        report["examples_with_noise_pct"] = round(100.0 * self.record_rate, 2)
        return report


def _record_rng(seed: int, record_id) -> np.random.Generator:
    digest = hashlib.sha256(str(record_id).encode("utf-8")).hexdigest()
    return np.random.default_rng([seed, int(digest[:16], 16)])


def _slots(record, path: str):
    """``(container, key)`` pairs holding the strings at a dotted path.

    Returns ``None`` when some step of the path is absent.
    """
    parts = path.split(".")
    level = [record]
    for depth, part in enumerate(parts):
        found = []
        for node in level:
            nodes = node if isinstance(node, list) else [node]
            for item in nodes:
                if not isinstance(item, dict) or part not in item:
                    return None
                found.append((item, part))
        if depth == len(parts) - 1:
            slots = []
            for container, key in found:
                value = container[key]
                if isinstance(value, list):
                    slots.extend((value, index) for index in range(len(value)))
                else:
                    slots.append((container, key))
            if not all(isinstance(c[k], str) for c, k in slots):
                return None
            return slots
        level = [item[part] for item, part in found]
    return None


def _split_token(token: str) -> tuple[str, str, str]:
    """``(leading punctuation, core, trailing punctuation)``."""
    punctuation = PHONOLOGY["EDGE_PUNCTUATION"]
    start = len(token) - len(token.lstrip(punctuation))
    end = len(token.rstrip(punctuation))
    if end <= start:
        return token, "", ""
    return token[:start], token[start:end], token[end:]


def _match_case(source: str, replacement: str) -> str:
    if source.isupper() and len(source) > 1:
        return replacement.upper()
    if source[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


class _Chooser:
    """Allowed candidates per word, filtered once for the whole file."""

    def __init__(self, candidates: Mapping[str, Iterable], cfg: NoiseConfig):
        self.cfg = cfg
        rules = [re.compile(rule) for rule in cfg.rules]
        self.allowed: dict[str, tuple[list[str], np.ndarray]] = {}
        for word, word_candidates in candidates.items():
            kept = sorted(
                (
                    candidate
                    for candidate in word_candidates
                    if candidate.l1 in cfg.languages
                    and candidate.misspelling != word
                    and (word, candidate.misspelling) not in cfg.blocklist
                    and not any(rule.search(candidate.misspelling) for rule in rules)
                    and candidate.score > 0.0
                ),
                key=lambda candidate: (-candidate.score, candidate.misspelling),
            )
            merged: dict[str, float] = {}
            for candidate in kept:
                merged[candidate.misspelling] = merged.get(candidate.misspelling, 0.0) + candidate.score
            if merged:
                self.allowed[word] = (list(merged), np.array(list(merged.values())))

    def eligible(self, core: str) -> bool:
        word = core.lower()
        return len(word) >= self.cfg.min_word_len and word in self.allowed

    def choose(self, core: str, rng: np.random.Generator) -> str:
        spellings, scores = self.allowed[core.lower()]
        if self.cfg.strategy == "top1":
            index = 0
        elif self.cfg.strategy == "uniform":
            index = int(rng.integers(len(spellings)))
        else:
            index = int(rng.choice(len(spellings), p=scores / scores.sum()))
        return _match_case(core, spellings[index])


def _tokenized(text: str) -> list[str]:
    return _WHITESPACE.split(text)


def noise_dataset(records: Iterable[dict], task: str, candidates: Mapping[str, Iterable], cfg: NoiseConfig = NoiseConfig(), split: str = "validation") -> tuple[list[dict], NoiseStats]:
    """Replace words of the designated field of a task with misspellings.

    Parameters
    ----------
    records: iterable of dict
        Task records in the SuperGLUE layout.
    task: str
        A task of ``cfg.fields_by_task``.
    candidates: mapping
        Word to its :class:`~biphone.generator.MisspellingCandidate` list;
        candidates of languages outside ``cfg.languages`` are ignored.
    cfg: NoiseConfig
    split: str
        The split being noised.  Training splits stay clean.

    Returns
    -------
    records: list of dict
        Copies of the input; only strings of the designated field change
        and their whitespace is kept.
    stats: NoiseStats

    Raises
    ------
    UnknownTaskError
        When the task has no designated field.
    ConfigError
        When asked to noise a training split.
    """
    if split == "train":
        raise ConfigError("Training splits are not noised.")
    path = cfg.field_of(task)
    chooser = _Chooser(candidates, cfg)
    stats = NoiseStats(task)

    prepared = []
    for position, record in enumerate(records):
        stats.records += 1
        noised = copy.deepcopy(record)
        slots = _slots(noised, path)
        if slots is None:
            stats.missing_field += 1
            prepared.append((noised, None, [], []))
            continue
        pieces = [_tokenized(container[key]) for container, key in slots]
        eligible = []
        for slot_index, parts in enumerate(pieces):
            for part_index in range(0, len(parts), 2):
                if not parts[part_index]:
                    continue
                stats.tokens += 1
                _, core, _ = _split_token(parts[part_index])
                if core and chooser.eligible(core):
                    eligible.append((slot_index, part_index))
        stats.eligible += len(eligible)
        if eligible:
            stats.records_eligible += 1
        record_id = record.get(cfg.id_field, position) if isinstance(record, dict) else position
        prepared.append((noised, (record_id, slots), pieces, eligible))

    total, holders = stats.eligible, stats.records_eligible
    if total > holders:
        probability = (cfg.target_token_fraction * total - holders) / (total - holders)
    else:
        probability = 0.0
    probability = float(np.clip(probability, 0.0, 1.0))
    if holders and holders > cfg.target_token_fraction * total:
        logger.warning(
            "%d records hold only %d eligible tokens; the forced replacements exceed the target.",
            holders,
            total,
        )
    logger.info("Replacing eligible tokens of %s with probability %.4f.", task, probability)

    output = []
    for noised, located, pieces, eligible in prepared:
        if located is None or not eligible:
            output.append(noised)
            continue
        record_id, slots = located
        rng = _record_rng(cfg.seed, record_id)
        forced = int(rng.integers(len(eligible)))
        draws = rng.random(len(eligible))
        chosen = [index for index in range(len(eligible)) if index == forced or draws[index] < probability]
        for index in chosen:
            slot_index, part_index = eligible[index]
            lead, core, trail = _split_token(pieces[slot_index][part_index])
            pieces[slot_index][part_index] = lead + chooser.choose(core, rng) + trail
        for (container, key), parts in zip(slots, pieces):
            container[key] = "".join(parts)
        stats.replaced += len(chosen)
        stats.records_noised += 1
        output.append(noised)

    logger.info(
        "Noised %s: %d of %d tokens in %d of %d records.",
        task,
        stats.replaced,
        stats.tokens,
        stats.records_noised,
        stats.records,
    )
    return output, stats


def _blank(record, path):
    blanked = copy.deepcopy(record)
    slots = _slots(blanked, path)
    for container, key in slots or ():
        container[key] = None
    return blanked, slots


def audit_noise(clean: Iterable[dict], noised: Iterable[dict], task: str, cfg: NoiseConfig = NoiseConfig(), candidates: Mapping[str, Iterable] | None = None) -> NoiseStats:
    """Recount the noise of a task file by diffing it against the clean one.

    Records are matched in order and must carry the same id.  Tokens of the
    designated field are compared position by position.  Every changed
    token must be at least ``cfg.min_word_len`` letters long and, when
    ``candidates`` is given, be an allowed misspelling of the clean word.

    Raises
    ------
    NoiseAuditError
        On misaligned ids or record counts, differences outside the
        designated field or an illegal replacement.
    """
    path = cfg.field_of(task)
    chooser = _Chooser(candidates, cfg) if candidates is not None else None
    stats = NoiseStats(task)
    clean, noised = list(clean), list(noised)
    if len(clean) != len(noised):
        raise NoiseAuditError(f"The clean file has {len(clean)} records, the noised one {len(noised)}.")
    for position, (before, after) in enumerate(zip(clean, noised)):
        before_id = before.get(cfg.id_field, position)
        after_id = after.get(cfg.id_field, position)
        if before_id != after_id:
            raise NoiseAuditError(f"Record {position} has id {before_id!r} in the clean file and {after_id!r} in the noised one.")
        stats.records += 1
        blank_before, slots_before = _blank(before, path)
        blank_after, slots_after = _blank(after, path)
        if blank_before != blank_after:
            raise NoiseAuditError(f"Record {before_id!r} differs outside the field {path}.")
        if slots_before is None:
            stats.missing_field += 1
            continue
        if slots_after is None or len(slots_before) != len(slots_after):
            raise NoiseAuditError(f"Record {before_id!r} changed the shape of the field {path}.")
        changed = 0
        for (c_before, k_before), (c_after, k_after) in zip(slots_before, slots_after):
            tokens_before = c_before[k_before].split()
            tokens_after = c_after[k_after].split()
            if len(tokens_before) != len(tokens_after):
                raise NoiseAuditError(f"Record {before_id!r} changed the number of tokens in {path}.")
            stats.tokens += len(tokens_before)
            for old, new in zip(tokens_before, tokens_after):
                if old == new:
                    continue
                _, core, _ = _split_token(old)
                if len(core) < cfg.min_word_len:
                    raise NoiseAuditError(f'Record {before_id!r} replaced the short word "{old}".')
                if chooser is not None:
                    _, replacement, _ = _split_token(new)
                    spellings = chooser.allowed.get(core.lower(), ([], None))[0]
                    if replacement.lower() not in spellings:
                        raise NoiseAuditError(
                            f'Record {before_id!r} replaced "{old}" with "{new}", not an allowed misspelling.'
                        )
                changed += 1
        stats.replaced += changed
        if changed:
            stats.records_noised += 1
    return stats


_JSON_SPACE = re.compile(r"[ \t\n\r]*")
_DECODER = json.JSONDecoder()


def read_jsonl_lines(path) -> list[str]:
    """The lines of a JSONL file with their own line endings."""
    with open(path, encoding="utf-8", newline="") as handle:
        return handle.readlines()


def parse_jsonl(lines: Iterable[str]) -> list[dict]:
    return [json.loads(line) for line in lines if line.strip()]


def read_jsonl(path) -> list[dict]:
    return parse_jsonl(read_jsonl_lines(path))


def write_jsonl(records: Iterable[dict], path) -> None:
    with atomic_write(Path(path)) as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def _string_spans(text: str, index: int, path: tuple, spans: dict) -> int:
    """Record the ``(start, end)`` of every string value of the JSON at ``index`` by path.

    Returns the index just past the value.
    """
    index = _JSON_SPACE.match(text, index).end()
    opener = text[index]
    if opener == '"':
        _, end = scanstring(text, index + 1)
        spans[path] = (index, end)
        return end
    if opener not in "{[":
        _, end = _DECODER.raw_decode(text, index)
        return end
    closer = "}" if opener == "{" else "]"
    index = _JSON_SPACE.match(text, index + 1).end()
    position = 0
    while text[index] != closer:
        if opener == "{":
            step, index = scanstring(text, index + 1)
            index = _JSON_SPACE.match(text, index).end() + 1
        else:
            step, position = position, position + 1
        index = _string_spans(text, index, path + (step,), spans)
        index = _JSON_SPACE.match(text, index).end()
        if text[index] == ",":
            index = _JSON_SPACE.match(text, index + 1).end()
    return index + 1


def _changed_strings(clean, noised, path=()):
    """``(path, new text)`` of every string that differs; anything else must be equal."""
    if isinstance(clean, dict) and isinstance(noised, dict) and list(clean) == list(noised):
        for key in clean:
            yield from _changed_strings(clean[key], noised[key], path + (key,))
    elif isinstance(clean, list) and isinstance(noised, list) and len(clean) == len(noised):
        for index, (before, after) in enumerate(zip(clean, noised)):
            yield from _changed_strings(before, after, path + (index,))
    elif isinstance(clean, str) and isinstance(noised, str):
        if clean != noised:
            yield path, noised
    elif type(clean) is not type(noised) or clean != noised:
        raise ValueError(f"The value at {list(path)} changed beyond its text.")


def splice_record(line: str, clean: dict, noised: dict) -> str:
    """Write the changed strings of ``noised`` into the source line of ``clean``.

    Every other byte of the line is kept, so number spellings, escapes and
    spacing survive.  New strings are escaped to ASCII when the line is
    pure ASCII.

    Examples
    --------
    >>> splice_record('{"idx":0, "question":"going"}\\n', {"idx": 0, "question": "going"}, {"idx": 0, "question": "goin"})
    '{"idx":0, "question":"goin"}\\n'
    """
    changes = list(_changed_strings(clean, noised))
    if not changes:
        return line
    spans: dict = {}
    _string_spans(line, 0, (), spans)
    ascii_only = line.isascii()
    for (start, end), text in sorted(((spans[path], text) for path, text in changes), reverse=True):
        line = line[:start] + json.dumps(text, ensure_ascii=ascii_only) + line[end:]
    return line


def write_noised_jsonl(lines: list[str], clean: list[dict], noised: list[dict], path) -> None:
    """Write a task file as its source lines with each record's replacements spliced in."""
    records = [line for line in lines if line.strip()]
    if not len(records) == len(clean) == len(noised):
        raise ValueError(
            f"{len(records)} source lines, {len(clean)} clean and {len(noised)} noised records do not match."
        )
    pairs = iter(zip(clean, noised))
    with atomic_write(Path(path)) as handle:
        for line in lines:
            if line.strip():
                before, after = next(pairs)
                line = splice_record(line, before, after)
            handle.write(line)


def write_stats(stats: NoiseStats, path) -> None:
    with atomic_write(Path(path)) as handle:
        json.dump(stats.to_report(), handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_field_map(path) -> dict[str, str]:
    """Read a ``task: field`` map from a YAML (or JSON) file."""
    with open(path, encoding="utf-8") as handle:
        mapping = yaml.safe_load(handle)
    if not isinstance(mapping, dict) or not all(
        isinstance(key, str) and isinstance(value, str) for key, value in mapping.items()
    ):
        raise ConfigError(f"{path} is not a map of task names to field names.")
    return mapping


def load_blocklist(path) -> frozenset:
    """Read vetoed ``word<TAB>misspelling`` pairs."""
    with open(path, encoding="utf-8") as handle:
        rows = list(tsv_rows(handle))
    pairs = set()
    for line_no, fields in rows:
        if len(fields) != 2:
            raise ConfigError(f"{path}:{line_no}: expected word<TAB>misspelling.")
        pairs.add((normalize_word(fields[0]), fields[1].strip().lower()))
    return frozenset(pairs)
