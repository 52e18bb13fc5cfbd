"""Setpoint-swept linearizations of block-oriented nonlinear systems.

Simulate block-oriented systems, estimate their best linear approximations
at several DC setpoints, follow the poles and zeros of those models as the
setpoint moves, and rule out candidate model structures whose linearized
dynamics cannot move that way.
"""
__version__ = "0.1.0"
