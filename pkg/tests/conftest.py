import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mcf_ttdl.config import load_design, bundled_design_path  # noqa: E402
from mcf_ttdl.fiber_model import load_table1_link  # noqa: E402


@pytest.fixture(scope="session")
def table1():
    return load_table1_link()


@pytest.fixture(scope="session")
def table1_file_link():
    return load_design(bundled_design_path())
