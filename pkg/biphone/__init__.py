# Licensed under a 3-clause BSD style license - see LICENSE.md

__citation__ = "The biphone developers"

try:
    from biphone._version import version as __version__
except ImportError:
    __version__ = "0.0.0"

__all__ = [
    "align",
    "bench_noiser",
    "cli",
    "config",
    "confusion",
    "corpus",
    "errors",
    "formats",
    "generator",
    "phonology",
    "pretrain_mix",
]
