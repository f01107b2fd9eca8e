import pytest

from uavplan.environment import ChannelParams, Hotspot, Instance, MissionConfig
from uavplan.oracle import ObjectiveWeights


@pytest.fixture(scope="session")
def chan():
    return ChannelParams()


@pytest.fixture(scope="session")
def mission():
    return MissionConfig()


@pytest.fixture(scope="session")
def default_weights():
    return ObjectiveWeights()


@pytest.fixture
def make_instance(chan, mission):
    """Factory for hand-built instances with explicit geometry.

    Profits default to a realistically large constant so vertex skipping stays
    inactive unless a test overrides them.
    """

    def build(centers, depot=(0.0, 0.0), profits=None, ids=None, seed=0,
              users=5):
        n = len(centers)
        ids = list(ids) if ids is not None else list(range(1, n + 1))
        profits = list(profits) if profits is not None else [1.0e7] * n
        hotspots = tuple(
            Hotspot(id=ids[k], center_m=(float(centers[k][0]), float(centers[k][1])),
                    num_users=users, profit_bps=float(profits[k]))
            for k in range(n))
        return Instance(hotspots=hotspots, depot_m=(float(depot[0]), float(depot[1])),
                        channel=chan, mission=mission, seed=seed)

    return build
