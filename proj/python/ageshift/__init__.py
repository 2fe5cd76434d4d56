# Copyright 2026 The ageshift Authors
# SPDX-License-Identifier: Apache-2.0
"""Personalised facial age editing: prompts, metrics, fixtures and the full edit pipeline."""

from ._ageshift import (
    ConfigError,
    DomainError,
    Error,
    EvalRecord,
    Fixture,
    Gender,
    IdentityProfile,
    IoError,
    NumericError,
    ParseError,
    PipelineConfig,
    PromptBundle,
    PromptFlags,
    ReferenceImage,
    ShapeError,
    SpanResolutionError,
    StageError,
    StateError,
    Tokenizer,
    ValidationError,
    age_metric,
    age_phrase,
    attach_spans,
    build_bundle,
    cosine_distance,
    default_target_ages,
    image_sha256,
    load_profile,
    make_fixture,
    ntxent,
    person_word,
    run_cli,
)

__version__ = "0.1.0"
