"""Shared world builders for the tests."""
from dataclasses import replace

from gripsense.geometry import GripperRig
from gripsense.sim import FingerState, SimObject, WorldState, grasp_center


def closed_world(**kw) -> WorldState:
    return WorldState(finger_state=FingerState.CLOSED, bend=1.0, **kw)


def grasped_world(rig: GripperRig | None = None, radius: float = 40.0, **kw) -> WorldState:
    """Closed gripper holding a centered object."""
    rig = rig or GripperRig()
    w = closed_world(**kw)
    c = grasp_center(w, rig)
    return replace(w, object=SimObject((c[0], c[1], c[2] + 10.0), radius, attached=True))


def at_time(world: WorldState, t: float) -> WorldState:
    return replace(world, tick=int(round(t / 0.0005)))
