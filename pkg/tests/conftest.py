from __future__ import annotations

import pytest

from helpers import BIO2_SCHEME, BIOES_SCHEME


@pytest.fixture
def bio2_scheme():
    return BIO2_SCHEME


@pytest.fixture
def bioes_scheme():
    return BIOES_SCHEME
