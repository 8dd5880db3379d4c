from .exceptions import FrozenGroupError, GraphError, ShapeError
from .models import AdamConfig, Graph, Parameter, ParamGroup, Tensor
from .optim import adam_step

__all__ = [
    "AdamConfig",
    "FrozenGroupError",
    "Graph",
    "GraphError",
    "Parameter",
    "ParamGroup",
    "ShapeError",
    "Tensor",
    "adam_step",
]
