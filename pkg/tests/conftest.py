from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from secforge.oracle import SecurityOracle


@pytest.fixture(scope="session")
def oracle() -> SecurityOracle:
    return SecurityOracle()
