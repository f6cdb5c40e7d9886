"""Scene assembly: map a rasterized design (and optional object) into the
unit simulation domain."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .params import SimParams

# Horizontal gap between the left wall and the robot, in simulation units.
X_OFFSET = 0.04

# Lattice pitch used for object packing, in cm (two particles per default
# grid cell per axis; a 2.5 cm disk packs to exactly 208 sites).
OBJECT_PITCH_CM = 0.3125


class EmptyRobotError(ValueError):
    """Raised when a design rasterizes to zero alive particles."""


@dataclass(frozen=True)
class ObjectSpec:
    """A passive disk dropped just above the robot."""

    radius_cm: float = 2.5
    mass: float = 1.0
    youngs: float = 20.0


@dataclass
class SceneSpec:
    """Particle soup handed to the simulator.

    The first ``n_robot`` particles are the robot (alive candidates in
    rasterization order); any remainder is the passive object.
    """

    rest: np.ndarray          # (N, 2) rest positions, sim units
    mass: np.ndarray          # (N,)
    youngs: np.ndarray        # (N,)
    amp_sin: np.ndarray       # (N,)
    amp_cos: np.ndarray       # (N,)
    n_robot: int
    n_object: int
    floor_height: float
    params: SimParams = field(repr=False, default_factory=SimParams)

    @property
    def n_particles(self) -> int:
        return self.rest.shape[0]


@dataclass
class SimState:
    """Full per-particle state at one step."""

    x: np.ndarray
    v: np.ndarray
    C: np.ndarray
    F: np.ndarray
    t: int


def _object_offsets_su(radius_cm: float, scale: float) -> np.ndarray:
    """Cell-centered lattice offsets filling a disk, in sim units."""
    pitch = OBJECT_PITCH_CM / scale
    r = radius_cm / scale
    n = int(np.ceil(r / pitch)) + 1
    idx = np.arange(-n, n)
    gx, gy = np.meshgrid(idx, idx, indexing="ij")
    px = (gx + 0.5) * pitch
    py = (gy + 0.5) * pitch
    keep = px * px + py * py <= r * r
    return np.column_stack([px[keep], py[keep]])


def build_scene(field_, params: SimParams,
                object_spec: Optional[ObjectSpec] = None,
                drop_height: float = 0.0) -> tuple[SceneSpec, SimState]:
    """Place the alive particles of a rasterized field into the domain.

    The robot rests on the floor, offset ``X_OFFSET`` from the left wall
    (``drop_height``, in sim units, lifts it for free-fall setups).  When an
    object is configured it is packed as a lattice disk directly above the
    robot's top, centered over the robot's horizontal extent.
    """
    alive = field_.alive
    if not alive.any():
        raise EmptyRobotError("empty robot: design has no alive particles")
    scale = params.domain_scale
    pos_cm = field_.positions_cm[alive]
    rx = X_OFFSET + pos_cm[:, 0] / scale
    ry = params.floor_height + pos_cm[:, 1] / scale + drop_height
    rest = np.column_stack([rx, ry])
    mass = field_.mass[alive].copy()
    youngs = field_.youngs[alive].copy()
    amp_sin = field_.amp_sin[alive].copy()
    amp_cos = field_.amp_cos[alive].copy()
    n_robot = rest.shape[0]
    n_object = 0

    if object_spec is not None:
        offs = _object_offsets_su(object_spec.radius_cm, scale)
        cx = 0.5 * (rx.min() + rx.max())
        pitch = OBJECT_PITCH_CM / scale
        shift_y = ry.max() + pitch - offs[:, 1].min()
        obj = offs + np.array([cx, shift_y])
        n_object = obj.shape[0]
        rest = np.vstack([rest, obj])
        mass = np.concatenate([mass, np.full(n_object, object_spec.mass)])
        youngs = np.concatenate([youngs, np.full(n_object, object_spec.youngs)])
        amp_sin = np.concatenate([amp_sin, np.zeros(n_object)])
        amp_cos = np.concatenate([amp_cos, np.zeros(n_object)])

    scene = SceneSpec(rest=rest, mass=mass, youngs=youngs,
                      amp_sin=amp_sin, amp_cos=amp_cos,
                      n_robot=n_robot, n_object=n_object,
                      floor_height=params.floor_height, params=params)
    n = rest.shape[0]
    state0 = SimState(x=rest.copy(), v=np.zeros((n, 2)),
                      C=np.zeros((n, 2, 2)),
                      F=np.tile(np.eye(2), (n, 1, 1)), t=0)
    return scene, state0
