from __future__ import annotations

from pathlib import Path

import pytest

from torus_billiards.admissible import build_paper_graph, build_transition_graph
from torus_billiards.scene import Obstacle, Scene

SCENES = Path(__file__).resolve().parent.parent / "scenes"


def make_s1(radius: float = 0.1) -> Scene:
    return Scene(2, (Obstacle((0.5, 0.5), radius),))


def make_s2() -> Scene:
    return Scene(2, (Obstacle((0.25, 0.25), 0.15), Obstacle((0.75, 0.75), 0.15)))


def make_s3() -> Scene:
    return Scene(3, (Obstacle((0.5, 0.5, 0.5), 0.2),))


@pytest.fixture(scope="session")
def s1() -> Scene:
    return make_s1()


@pytest.fixture(scope="session")
def s2() -> Scene:
    return make_s2()


@pytest.fixture(scope="session")
def s3() -> Scene:
    return make_s3()


@pytest.fixture(scope="session")
def s2_graph(s2):
    return build_transition_graph(s2, 1)


@pytest.fixture(scope="session")
def s2_graph2(s2):
    return build_transition_graph(s2, 2)


@pytest.fixture(scope="session")
def s2_paper3(s2):
    return build_paper_graph(s2, 3)


@pytest.fixture(scope="session")
def scene_dir() -> Path:
    return SCENES
