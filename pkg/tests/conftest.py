"""Shared fixture builders, re-exported from the package's synthetic
fixture generator so tests and demos use the same corpus format."""

from __future__ import annotations

import pytest

from tosguard.fixtures import (  # noqa: F401  (re-exported for tests)
    FILLER,
    LABEL_VOCAB,
    make_category_corpus,
    make_corpus,
    synth_text,
)
from tosguard.taxonomy import Taxonomy


@pytest.fixture
def taxonomy() -> Taxonomy:
    return Taxonomy.default()
