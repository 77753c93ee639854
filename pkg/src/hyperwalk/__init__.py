"""Euler walks with infinitesimal mesh and the adequality relation.

Subpackages: :mod:`hyperwalk.asymptotic` (truncated series in a formal
infinitesimal), :mod:`hyperwalk.flows` (prevector fields, walks, deviation
and Gronwall machinery), :mod:`hyperwalk.pendulum` (the pendulum fields and
period measurements) and :mod:`hyperwalk.cli`.
"""

from .asymptotic import AsymptoticNumber, adequal, epsilon, infinitely_close, standard_part
from .flows import PrevectorField, Trajectory, VectorField, walk, walk_deviation
from .pendulum import PendulumParams, make_fields

__version__ = "0.1.0"
