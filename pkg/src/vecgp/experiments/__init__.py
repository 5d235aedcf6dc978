from .config import ExperimentConfig, load_config
from .norms import discrete_site_norm, estimate_rate, grid_Lq_norm, predicted_rate
from .runs import (
    run_chebyshev_check,
    run_convergence,
    run_divergence_certificate,
    run_kernel_check,
    run_power_map,
    run_sample,
)
