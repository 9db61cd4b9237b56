# Copyright 2026 The gpa Authors
# SPDX-License-Identifier: Apache-2.0
"""Unified speech token toolkit: mock codec, task composer, transformer,
curation math, streaming engine and benchmark helpers."""

from ._gpa import (
    GpaError,
    Model,
    cli,
    compose_prompt,
    consensus_keeps,
    decode_acoustic,
    encode,
    medoid,
    normalize,
    partition_of,
    percentile,
    pwer,
    refine_punctuation,
    rtf,
    vocab_layout,
    vocab_size,
    wer,
)

__all__ = [
    "GpaError",
    "Model",
    "cli",
    "compose_prompt",
    "consensus_keeps",
    "decode_acoustic",
    "encode",
    "medoid",
    "normalize",
    "partition_of",
    "percentile",
    "pwer",
    "refine_punctuation",
    "rtf",
    "vocab_layout",
    "vocab_size",
    "wer",
]
