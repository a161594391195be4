"""Shared fixtures for the test suite"""
from pathlib import Path

import numpy as np
import pytest

from geometry import ConstantSignal, MovingSet, PolyhedralCone
from integrator import EviSystem
from utils.settings import Settings

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def settings(tmp_path) -> Settings:
    return Settings(output_dir=tmp_path / "out")


def orthant_set(d: int, offset=None) -> MovingSet:
    h = np.zeros(d) if offset is None else offset
    return MovingSet(PolyhedralCone.orthant(d), ConstantSignal(h))


def quarter_plane_system(J) -> EviSystem:
    """G = H = I on the nonnegative quadrant with no drift"""
    return EviSystem(
        A=np.zeros((2, 2)),
        G=np.eye(2),
        H=np.eye(2),
        J=np.asarray(J, dtype=float),
        moving_set=orthant_set(2),
        name="quarter_plane",
    )


@pytest.fixture
def symmetric_feedthrough_system() -> EviSystem:
    return quarter_plane_system([[0.0, 0.0], [0.0, 1.0]])


@pytest.fixture
def skew_feedthrough_system() -> EviSystem:
    return quarter_plane_system([[0.0, -1.0], [1.0, 1.0]])
