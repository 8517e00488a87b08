from .closed_loop import LoopConfig, StepSignals, closed_loop_step, compute_control
from .inner_loop import (
    AttitudeTrace, InnerGains, attitude_error, attitude_response, disturbance_exact,
    error_angle, torque_command,
)
from .outer_loop import (
    DegenerateGeodesicError, DesiredRateTracker, OuterGains, ThrustDecomposition, chord_bounds,
    compose_yaw, decompose_thrust, desired_attitude, desired_rate_estimate, desired_thrust_vector,
    geodesic_tangent, great_circle_dist, hover_attitude, kp_feasible, min_rotation_quat,
    sphere_point, tangent_basis, tangential_command,
)
