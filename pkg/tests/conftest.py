import warnings

import pytest


@pytest.fixture(autouse=True)
def _quiet_integration():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*coarse grid.*")
        yield
