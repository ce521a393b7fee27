import os
import tempfile
from pathlib import Path

import pytest

# one cache directory per test session unless the caller points at a warm one
if "MULTIBUMP_CACHE" not in os.environ:
    os.environ["MULTIBUMP_CACHE"] = tempfile.mkdtemp(prefix="multibump-cache-")

from multibump.ground_state import ground_state  # noqa: E402
from multibump.model import Potential  # noqa: E402


@pytest.fixture(scope="session")
def cache_dir() -> Path:
    return Path(os.environ["MULTIBUMP_CACHE"])


@pytest.fixture(scope="session")
def gs2(cache_dir):
    return ground_state(2, 3.0, cache_dir=cache_dir)


@pytest.fixture(scope="session")
def gs4(cache_dir):
    return ground_state(4, 2.0, cache_dir=cache_dir)


@pytest.fixture(scope="session")
def gs1(cache_dir):
    return ground_state(1, 3.0, cache_dir=cache_dir)


@pytest.fixture(scope="session")
def pot():
    return Potential()


@pytest.fixture(scope="session")
def consts(gs2):
    from multibump.reduced_energy import energy_constants

    return energy_constants(gs2)


@pytest.fixture(scope="session")
def bundle8(gs2, pot, cache_dir):
    from multibump.solver import cached_solve_full

    return cached_solve_full(8, gs2, pot, cache_dir=cache_dir)


@pytest.fixture(scope="session")
def fine8(bundle8, gs2, pot, cache_dir):
    from multibump.solver import cached_refined

    return cached_refined(bundle8, gs2, pot, cache_dir=cache_dir)
