"""Robustness-driven event-triggered state estimation for propositional properties."""

from .interval import Interval
from .logic import parse, robustness, robustness_interval
from .ettreg import PolicyConfig, PolicyKind, regulate

__version__ = "0.1.0"

__all__ = ["Interval", "parse", "robustness", "robustness_interval",
           "PolicyConfig", "PolicyKind", "regulate", "__version__"]
