from .distributions import diagonal_log_density, gaussian_log_prob, sample_action
from .exceptions import ArchitectureError, DecoupledError
from .models import (
    CoupledNetworkPair,
    Encoder,
    GaussianPolicy,
    MixingWeights,
    Mlp,
    MlpSpec,
    ValueNet,
    VariationalDecoder,
)

__all__ = [
    "ArchitectureError",
    "CoupledNetworkPair",
    "DecoupledError",
    "Encoder",
    "GaussianPolicy",
    "MixingWeights",
    "Mlp",
    "MlpSpec",
    "ValueNet",
    "VariationalDecoder",
    "diagonal_log_density",
    "gaussian_log_prob",
    "sample_action",
]
