"""Shared fixtures: the six-word geography dataset and the worked triangle polytope."""

import numpy as np
import pytest

from unamap.core import CountVector, Dataset, Vocabulary
from unamap.lp import Polytope

SOURCE_ATOMS = ("area", "of", "Ohio", "cities", "in", "Iowa")
TARGET_ATOMS = ("area", "city", "OH", "IA")

# rows: "area of Iowa" -> {area, IA}; "cities in Ohio" -> {city, OH};
#       "cities in Iowa" -> {city, IA}
S3 = np.array(
    [
        [1, 1, 0, 0, 0, 1],
        [0, 0, 1, 1, 1, 0],
        [0, 0, 0, 1, 1, 1],
    ],
    dtype=np.int64,
)
T3 = np.array(
    [
        [1, 0, 0, 1],
        [0, 1, 1, 0],
        [0, 1, 0, 1],
    ],
    dtype=np.int64,
)

# fourth row: "area of cities in Ohio" -> {area, city, OH}
S4 = np.vstack([S3, [[1, 1, 1, 1, 1, 0]]])
T4 = np.vstack([T3, [[1, 1, 1, 0]]])


@pytest.fixture
def source_vocab() -> Vocabulary:
    return Vocabulary(SOURCE_ATOMS)


@pytest.fixture
def target_vocab() -> Vocabulary:
    return Vocabulary(TARGET_ATOMS)


@pytest.fixture
def geo_dataset(source_vocab, target_vocab) -> Dataset:
    return Dataset(source_vocab, target_vocab, S3.copy(), T3.copy())


@pytest.fixture
def geo_dataset_extended(source_vocab, target_vocab) -> Dataset:
    return Dataset(source_vocab, target_vocab, S4.copy(), T4.copy())


def geo_consistent_mappings() -> list[np.ndarray]:
    """All four integer mappings consistent with the three-example dataset.

    The data pins Ohio->OH and Iowa->IA but cannot tell whether "area" or
    "of" carries the area predicate, nor whether "cities" or "in" carries
    city, giving a 2x2 family.
    """
    out = []
    for area_carrier in (0, 1):  # area vs of
        for city_carrier in (3, 4):  # cities vs in
            M = np.zeros((6, 4), dtype=np.int64)
            M[area_carrier, 0] = 1
            M[city_carrier, 1] = 1
            M[2, 2] = 1  # Ohio -> OH
            M[5, 3] = 1  # Iowa -> IA
            out.append(M)
    return out


@pytest.fixture
def geo_mappings() -> list[np.ndarray]:
    return geo_consistent_mappings()


@pytest.fixture
def triangle_polytope() -> Polytope:
    """x,y >= 0, x+y <= 6, z pinned to 0 by an inequality pair; vars (x,y,z)."""
    A = np.array(
        [
            [0, 0, 1],
            [0, 0, -1],
            [-1, 0, 0],
            [0, -1, 0],
            [1, 1, 0],
        ],
        dtype=np.int64,
    )
    b = np.array([0, 0, 0, 0, 6], dtype=np.int64)
    return Polytope(A, b, (False,) * 5)


def bag(counts) -> CountVector:
    return CountVector(tuple(int(c) for c in counts))
