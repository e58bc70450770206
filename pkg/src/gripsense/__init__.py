"""Simulated vision-based collision sensing for a three-finger soft gripper."""

__version__ = "0.1.0"
