# Licensed under a 3-clause BSD style license - see LICENSE.md
"""Shared test data."""

from pathlib import Path

import pytest

from biphone.align import load_pgm
from biphone.confusion import ConfusionMatrix
from biphone.phonology import load_lexicon, merge_lexicons

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def lexicon():
    return merge_lexicons(
        load_lexicon(DATA / "cmudict_sample.txt"), load_lexicon(DATA / "rtt_extra.txt")
    )


@pytest.fixture
def pgm():
    return load_pgm(DATA / "pgm_table2.tsv")


@pytest.fixture
def hindi():
    return ConfusionMatrix.from_rows("hi", "en", {"DH": {"DH": 0.5, "TH": 0.5}})


@pytest.fixture
def tamil():
    return ConfusionMatrix.from_rows(
        "ta", "en", {"G": {"G": 0.5, "K": 0.5}, "B": {"B": 0.6, "P": 0.4}}
    )


@pytest.fixture
def bengali():
    return ConfusionMatrix.from_rows("bn", "en", {"V": {"V": 0.4, "B": 0.6}})
