"""Learning robust policies for MDPs with known parametric structure."""

__version__ = "0.1.0"

from .model import MDP, PMDP, ExpressionIndex, ModelError, ParameterSpace, index_expressions, instantiate, render
from .parser import ModelSyntaxError, load_model, parse_model
from .polynomial import Polynomial

__all__ = [
    "MDP",
    "PMDP",
    "ExpressionIndex",
    "ModelError",
    "ModelSyntaxError",
    "ParameterSpace",
    "Polynomial",
    "index_expressions",
    "instantiate",
    "load_model",
    "parse_model",
    "render",
]
