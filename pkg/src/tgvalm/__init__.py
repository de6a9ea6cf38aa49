"""Matrix-free TGV denoising: ALM with semismooth Newton inner solves, and an ALG2 baseline."""

from .alm import ALMConfig, ALMFailure, ALMResult, ALMState, alm_run
from .imageio import add_gaussian_noise, load_image, save_image, synthetic_image
from .metrics import gap, kkt_residuals, psnr, rmse, scaled_residual, ssim
from .primal_dual import alg2_run
from .ssn import InnerConfig, PrimalDualState, SolverFailure, SubproblemData, ssn_solve

__all__ = [
    "ALMConfig", "ALMFailure", "ALMResult", "ALMState", "alm_run",
    "add_gaussian_noise", "load_image", "save_image", "synthetic_image",
    "gap", "kkt_residuals", "psnr", "rmse", "scaled_residual", "ssim",
    "alg2_run",
    "InnerConfig", "PrimalDualState", "SolverFailure", "SubproblemData", "ssn_solve",
]
