"""Multi-order message passing on corrected De Bruijn graphs."""

from .autodiff import NonFiniteError, Tensor
from .layers import (
    BipartiteMaps,
    bipartite_in,
    bipartite_out,
    edge_encoded_convolution,
    edge_normalisation,
    hypa_convolution,
    propagation_matrix,
)
from .model import (
    HIDDEN_GRID,
    VARIANTS,
    CorrectedGraphs,
    GraphInputs,
    ModelConfig,
    ModelState,
    class_weight_vector,
    correct_graphs,
    forward,
    loss_and_grads,
    loss_weighted_cross_entropy,
)
from .train import GradientCheckReport, TrainingDiverged, TrainingTrace, gradient_check, train
