from pathlib import Path

import pytest

from core.config import WalkConfig
from core.domain_geometry import slit_plane
from core.walk_engine import WalkEngine

DOMAINS = Path(__file__).parent / "domains"


@pytest.fixture
def domains_dir() -> Path:
    return DOMAINS


@pytest.fixture
def walk_cfg() -> WalkConfig:
    return WalkConfig(n_samples=4000, seed=7)


@pytest.fixture
def engine(walk_cfg) -> WalkEngine:
    return WalkEngine(walk_cfg, threads=2)


@pytest.fixture
def slit():
    return slit_plane(-1.0)


def within_guard(values, stderrs, truths, hard=5.0, soft=3.0, allowed=3):
    """All points within hard*stderr, at most `allowed` beyond soft*stderr"""
    gaps = [abs(v - t) / s for v, s, t in zip(values, stderrs, truths)]
    return max(gaps) <= hard and sum(g > soft for g in gaps) <= allowed
