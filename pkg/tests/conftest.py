import numpy as np
import pytest

from spfh.app.config import settings
from spfh.engine.field import FieldSpec


@pytest.fixture
def gf2() -> FieldSpec:
    return FieldSpec(2, 1)


@pytest.fixture
def gf3() -> FieldSpec:
    return FieldSpec(3, 1)


@pytest.fixture
def gf4() -> FieldSpec:
    return FieldSpec(2, 2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    """Points the cache, run log and result dumps at a temporary directory."""
    monkeypatch.setattr(settings, "cache_dir", str(tmp_path / "cache"))
    monkeypatch.setattr(settings, "results_dir", str(tmp_path / "results"))
    monkeypatch.setattr(settings, "database_url", f"sqlite:///{tmp_path / 'spfh.db'}")
    return tmp_path
