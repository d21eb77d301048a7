import sys
from pathlib import Path

import pytest

# Make the repository root importable (config, services, utils, handlers)
ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from services.ode_model import build_forced_oscillator, build_mass_spring  # noqa: E402

DATA_DIR = ROOT / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def forced_oscillator():
    """m=1, b=0.1, k=1, l=2 driven by 2 cos(3t)."""
    return build_forced_oscillator(1.0, 0.1, 1.0, 2.0, 2.0, 3.0)


@pytest.fixture
def chain2():
    """Two unit masses, unit springs and lengths, walls at 0 and 3; rest at 1 and 2."""
    return build_mass_spring(2, [1.0, 1.0], [0.5, 0.5], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 3.0)


@pytest.fixture
def chain3():
    return build_mass_spring(3, [1.0, 2.0, 1.0], [0.5, 0.8, 0.5], [1.0, 1.5, 1.5, 1.0],
                             [1.0, 1.0, 1.0, 1.0], 4.0)


@pytest.fixture(autouse=True)
def isolated_output_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    yield
