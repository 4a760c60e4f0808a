import pytest

from valuevac.world import FloorPlan, Pose, World


def square_plan(size: float = 10.0, dock=(0.5, 0.5, 0.0)) -> FloorPlan:
    s = size
    walls = (
        ((0.0, 0.0), (s, 0.0)),
        ((s, 0.0), (s, s)),
        ((s, s), (0.0, s)),
        ((0.0, s), (0.0, 0.0)),
    )
    return FloorPlan(walls=walls, dock=Pose(*dock), bounds=(0.0, 0.0, s, s))


@pytest.fixture
def plan10():
    return square_plan(10.0)


@pytest.fixture
def world10(plan10):
    return World(plan10, robot_pose=Pose(5.0, 5.0, 0.0))
