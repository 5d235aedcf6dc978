"""Gaussian-process regression of divergence-free and curl-free vector fields
with matrix-valued kernels."""
from .geometry import Domain, GeometryStats, PointSet, fill_distance, generate_points, mesh_ratio, separation_radius
from .kernels import MatrixKernel, ScalarKernelSpec, eval_matrix, eval_scalar, hessian, laplacian, sobolev_order
from .gp import GPModel, MeanFunction, Observations, assemble_gram, fit, zero_mean
from .fields import NoiseSpec, make_gradient_field, make_kernel_combo, make_stream_field_2d, sample_observations
from .sampler import EvaluationGrid, kl_sample, midpoint_grid, nystrom_eigensystem, sample_gaussian_field

__version__ = "0.1.0"
