"""Meta-learned inverse kinematics for a tendon-driven continuum manipulator."""

__version__ = "0.1.0"
