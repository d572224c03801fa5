"""Whole-body differential-IK control stack for a holonomic-base mobile
manipulator: geometry, kinematics, collision dampers, QP solver, hybrid
keypose/dense execution, simulation harness, and a live teleop service."""

from ._kernels import COMPILED as KERNELS_COMPILED

__version__ = "0.1.0"

__all__ = ["KERNELS_COMPILED", "__version__"]
