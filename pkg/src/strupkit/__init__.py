"""Symplectic shear-layer networks and Hamiltonian recovery by backward error analysis."""
from .bch import backward_error_map, bch_pair, quad_matrix_log_oracle
from .errors import *  # noqa: F401,F403
from .linrep import (TriangularFactor, factor_symplectic, matrix_flow_oracle,
                     model_from_symplectic_matrix, triangular_to_layers)
from .model import (SympNetModel, init_model, inverse_modified_hamiltonian, load_model,
                    model_forward, model_inverse, param_stats)
from .phase import apply_J, symplectic_matrix, symplecticity_residual, volume_residual
from .poly import MultiPoly, coefficient_mae, poisson_bracket, poly_arith, poly_grad
from .regression import extract_basis, regress
from .systems import (IntegratorConfig, SnapshotDataset, builtin_system, generate_dataset,
                      reference_flow)
from .training import TrainConfig, adam_step, grid_run, loss_and_grad, mse_loss, train

__version__ = "0.1.0"
