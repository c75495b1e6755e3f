"""Built-in free-flyer models: the shared base and two-joint perching arm with
either the 1-DOF claw or the two-finger, 6-DOF compliant hand.

Perched frame convention (all builtins): the handrail lies along world y
through the origin; the robot hangs on the -z side with the arm pointing +z.
The pan joint axis is x and the tilt joint axis is y (parallel to the rail).

No dimension here comes from a drawing of the real hardware; they are
plausible handrail-scale defaults and can all be edited in the model text.
"""

from __future__ import annotations

import math

from .model import GeomDef, JointDef, LinkDef, Material, ModelDef
from .spatial import Pose, Quaternion

BASE_MASS = 9.58
BASE_HALF = 0.16
ARM_LINK = 0.10
RAIL_RADIUS = 0.011
RAIL_HALF_LENGTH = 0.30
PAD_RADIUS = 0.008
PALM_HALF = (0.03, 0.03, 0.006)
APPROACH_GAP = 0.008  # palm-to-rail clearance at t = 0
ARM_MOUNT = (0.0, 0.0)  # arm base position on the top face of the base (x, y)
CLAW_HINGE_X = 0.03
CLAW_LENGTH = 0.03
CLAW_GRIP_CLOSE = 0.8
FINGER_Y = 0.0  # DexCoHand finger offset along the rail (a at +y, b at -y)
DEX_HINGE_X = 0.03
DEX_PROX = 0.02
DEX_DIST = 0.016

ARM_STIFFNESS = 50.0
DEX_STIFFNESS = 2.0
CLAW_STIFFNESS = 20.0

MATERIALS = (
    Material("rail", stiffness=1.0e6, damping=0.0, friction=0.8),
    Material("pad", stiffness=1.0e6, damping=0.0, friction=0.8),
    Material("shell", stiffness=1.0e6, damping=0.0, friction=0.8),
)

# height of the rail axis above the wrist (tilt joint) in the perched pose
RAIL_ABOVE_WRIST = ARM_LINK + RAIL_RADIUS
BUILTIN_MODELS = ("claw", "dexcohand")


def _box_inertia(m, hx, hy, hz):
    return (m * (hy * hy + hz * hz) / 3.0, m * (hx * hx + hz * hz) / 3.0, m * (hx * hx + hy * hy) / 3.0, 0.0, 0.0, 0.0)


def _rod_inertia(m, length, r):
    axial = 0.5 * m * r * r
    trans = m * (3 * r * r + length * length) / 12.0
    return (trans, trans, axial, 0.0, 0.0, 0.0)


def _capsule(length, r=PAD_RADIUS, material="pad"):
    return GeomDef("capsule", (r, 0.5 * length), Pose(translation=(0.0, 0.0, 0.5 * length)), material)


def base_home_pose() -> Pose:
    z = -(BASE_HALF + 2 * ARM_LINK + RAIL_RADIUS + APPROACH_GAP)
    return Pose(translation=(-ARM_MOUNT[0], -ARM_MOUNT[1], z))


def _base_and_arm() -> list:
    base = LinkDef(
        name="base",
        parent="world",
        joint=JointDef("base", "free"),
        mass=BASE_MASS,
        inertia=(0.153, 0.143, 0.162, 0.0, 0.0, 0.0),
        joint_pose=base_home_pose(),
        geoms=(GeomDef("box", (BASE_HALF,) * 3, Pose(), "shell"),),
    )
    arm_joint = dict(actuated=True, stiffness=ARM_STIFFNESS, damping=8.0, effort=10.0, limits=(-1.2, 1.2))
    pan = LinkDef(
        name="arm_pan",
        parent="base",
        joint=JointDef("arm_pan", "revolute", axis=(1.0, 0.0, 0.0), **arm_joint),
        mass=0.3,
        com=(0.0, 0.0, 0.5 * ARM_LINK),
        inertia=_rod_inertia(0.3, ARM_LINK, 0.012),
        joint_pose=Pose(translation=(ARM_MOUNT[0], ARM_MOUNT[1], BASE_HALF)),
        geoms=(GeomDef("capsule", (0.012, 0.5 * ARM_LINK - 0.012), Pose(translation=(0.0, 0.0, 0.5 * ARM_LINK)), "shell"),),
    )
    palm_z = ARM_LINK - PALM_HALF[2]
    tilt = LinkDef(
        name="arm_tilt",
        parent="arm_pan",
        joint=JointDef("arm_tilt", "revolute", axis=(0.0, 1.0, 0.0), **arm_joint),
        mass=0.25,
        com=(0.0, 0.0, 0.6 * ARM_LINK),
        inertia=_rod_inertia(0.25, ARM_LINK, 0.02),
        joint_pose=Pose(translation=(0.0, 0.0, ARM_LINK)),
        geoms=(GeomDef("box", PALM_HALF, Pose(translation=(0.0, 0.0, palm_z)), "pad"),),
    )
    return [base, pan, tilt]


def _finish(links, name) -> ModelDef:
    rail = GeomDef("cylinder", (RAIL_RADIUS, RAIL_HALF_LENGTH), Pose(Quaternion.from_axis_angle((1, 0, 0), -math.pi / 2)), "rail")
    return ModelDef(tuple(links), MATERIALS, (rail,), name)


def build_astrobee_claw() -> ModelDef:
    """Base + arm + underactuated claw: one command closes two mirrored fingers 1:1."""
    links = _base_and_arm()
    length = CLAW_LENGTH
    for side, sx in (("r", 1.0), ("l", -1.0)):
        links.append(
            LinkDef(
                name=f"claw_{side}",
                parent="arm_tilt",
                joint=JointDef(
                    f"claw_{side}",
                    "revolute",
                    axis=(0.0, -sx, 0.0),
                    limits=(-0.3, 1.6),
                    damping=0.05,
                    actuated=True,
                    coupling=("claw", 1.0),
                    stiffness=CLAW_STIFFNESS,
                    effort=1.0,
                    grip=(-0.2, CLAW_GRIP_CLOSE),
                ),
                mass=0.03,
                com=(0.0, 0.0, 0.6 * length),
                inertia=_rod_inertia(0.03, length, PAD_RADIUS),
                joint_pose=Pose(translation=(sx * CLAW_HINGE_X, 0.0, ARM_LINK)),
                geoms=(GeomDef("sphere", (PAD_RADIUS,), Pose(translation=(0.0, 0.0, length)), "pad"),),
            )
        )
    return _finish(links, "claw")


def build_astrobee_dexcohand() -> ModelDef:
    """Base + arm + two 3-DOF fingers (universal joint at the proximal link plus
    fingertip flexion)."""
    links = _base_and_arm()
    prox, dist = DEX_PROX, DEX_DIST
    for side, sx, sy in (("a", 1.0, FINGER_Y), ("b", -1.0, -FINGER_Y)):
        gripper = dict(actuated=True, stiffness=DEX_STIFFNESS, damping=0.02, effort=0.5)
        links.append(
            LinkDef(
                name=f"{side}_abd",
                parent="arm_tilt",
                joint=JointDef(f"{side}_abd", "revolute", axis=(1.0, 0.0, 0.0), limits=(-0.5, 0.5), grip=(0.0, 0.0), **gripper),
                mass=1e-3,
                inertia=(1e-8, 1e-8, 1e-8, 0.0, 0.0, 0.0),
                joint_pose=Pose(translation=(sx * DEX_HINGE_X, sy, ARM_LINK)),
            )
        )
        links.append(
            LinkDef(
                name=f"{side}_prox",
                parent=f"{side}_abd",
                joint=JointDef(f"{side}_prox", "revolute", axis=(0.0, -sx, 0.0), limits=(-0.3, 1.6), grip=(-0.2, 0.9), **gripper),
                mass=0.02,
                com=(0.0, 0.0, 0.5 * prox),
                inertia=_rod_inertia(0.02, prox, PAD_RADIUS),
                geoms=(_capsule(prox),),
            )
        )
        links.append(
            LinkDef(
                name=f"{side}_dist",
                parent=f"{side}_prox",
                joint=JointDef(f"{side}_dist", "revolute", axis=(0.0, -sx, 0.0), limits=(-0.2, 1.6), grip=(0.0, 1.2), **gripper),
                mass=0.015,
                com=(0.0, 0.0, 0.5 * dist),
                inertia=_rod_inertia(0.015, dist, PAD_RADIUS),
                joint_pose=Pose(translation=(0.0, 0.0, prox)),
                geoms=(_capsule(dist),),
            )
        )
    return _finish(links, "dexcohand")


def builtin_model(name: str) -> ModelDef:
    key = name.removeprefix("builtin:")
    if key == "claw":
        return build_astrobee_claw()
    if key == "dexcohand":
        return build_astrobee_dexcohand()
    raise KeyError(f"unknown builtin model {name!r} (choices: {', '.join(BUILTIN_MODELS)})")
