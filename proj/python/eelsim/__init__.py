"""Eel robot digital twin: kinematics, gait, CAN buses, nodes, plant and teleoperation."""

import json as _json

from ._eelsim import (
    ConfigError,
    Error,
    InvalidFrame,
    InvalidInput,
    Scenario,
    Simulation,
    TopologyError,
    arbitrate,
    buoyancy_report,
    decode_gait,
    displaced_volume,
    encode_gait,
    endurance_hours,
    forward_kinematics,
    frame_time,
    joints_from_motors,
    motors_from_joints,
    propulsion_estimate,
    run,
    scenario_defaults,
    setpoint,
    skin_fiber_strain,
    straight_length,
    summarize,
)
from ._eelsim import Session as _Session


class Session(_Session):
    """Teleoperation session taking and returning plain dicts."""

    def submit(self, client, message):
        return _json.loads(self.submit_json(client, _json.dumps(message)))

    def frame(self):
        return _json.loads(self.frame_json())


def state(simulation):
    """StateFrame of a Simulation as a dict."""
    return _json.loads(simulation.state_json())


__all__ = [name for name in dir() if not name.startswith("_")]
