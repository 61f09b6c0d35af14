"""Numerical toolkit for orbits of nonsmooth vector-field families."""

from .fields import BracketFamily, FieldFamily, build_bracket_family, builtin, load_family
from .flows import FlowStep, FlowWord, IntegratorConfig

__all__ = ["BracketFamily", "FieldFamily", "FlowStep", "FlowWord", "IntegratorConfig",
           "build_bracket_family", "builtin", "load_family"]
__version__ = "0.1.0"
