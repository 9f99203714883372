import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from ota_ensemble.config import load_synthetic_source
from ota_ensemble.harness import materialize_dataset

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def reference_source():
    return load_synthetic_source(CONFIG_DIR / "reference_dataset.cfg")


@pytest.fixture(scope="session")
def reference_dataset(reference_source):
    return materialize_dataset(reference_source)
