"""Transport-embedded neural networks and a baseline PINN for the 2-D Taylor-Green vortex."""

__version__ = "0.1.0"

from .embedding import (LEVI_CIVITA, FluxFields, assemble_M, curl_spacetime, levi_civita,
                        recover_velocity, spacetime_div, tenn_heads, transport_residual)
from .errors import (CheckpointError, CheckpointVersionError, ConfigurationError,
                     CorruptCheckpointError, DivergenceError, NumericError, SingularityError,
                     SpecMismatchError, TennError)
from .graph import ParamGraph, ParamVector
from .jets import Jet3, finite_diff_check, seed_inputs
from .losses import TERMS, LossWeights, ResidualBatch, loss_terms, total_loss
from .network import NetworkSpec, PeriodicDictionary, init_params, mlp_forward
from .report import EvalGrid, evaluate_grid, model_predictor, oracle_predictor
from .taylor_green import analytic_pressure, analytic_velocity, analytic_vorticity
from .train import AdamConfig, TrainConfig, TrainReport, load_checkpoint, save_checkpoint, train
