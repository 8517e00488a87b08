from .plant import (
    ControlCommand, DegenerateCableError, PlantParams, PlantParamsError, StateDerivative,
    UavState, active_force, cable_tension_monitor, constraint_multiplier, dynamics_deriv,
    mechanical_energy, saturate_thrust, step, with_attitude,
)
from .so3_math import (
    AngleAxis, Quaternion, RotationMatrixError, angle_axis, canonicalize, conjugate, normalize,
    quat_compose, quat_exp_step, quat_kinematics, quat_to_rot, rot_to_quat, skew,
)
