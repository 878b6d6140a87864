"""Diverse question/equation augmentation for math word problems."""

from .expr import Equation, evaluate, parse_infix
from .geneq import generate_all
from .scenario import prepare_scenario

__all__ = ["Equation", "evaluate", "parse_infix", "generate_all", "prepare_scenario"]
__version__ = "0.1.0"
