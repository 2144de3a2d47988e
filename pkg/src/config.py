"""
Polyharmonic Field Toolkit - Configuration Module

Core configuration for sampling, kernels, chaos measures and file output.
Every command reads its defaults from here; the CLI only overrides them.
"""

import os
from pathlib import Path
from typing import Dict

# Project Structure
PROJECT_ROOT = Path(__file__).parent.parent
OUTPUT_DIR = PROJECT_ROOT / "output"

# Output directories with specific purposes
DIRECTORIES = {
    "grids": OUTPUT_DIR / "grids",        # Field, kernel and measure grids
    "reports": OUTPUT_DIR / "reports",    # CSV/JSON tables and verify reports
    "figures": OUTPUT_DIR / "figures",    # PGM heatmaps
}

# Create necessary directories
for directory in DIRECTORIES.values():
    directory.mkdir(parents=True, exist_ok=True)

# Gaussian stream and Monte Carlo batching
SAMPLING_CONFIG = {
    "default_seed": 0,
    "seed_chunk": 2048,        # Seeds synthesized per FFT batch
    "spectral_draw": 0,        # Draw index of the ξ_z stream
    "white_noise_draw": 1,     # Draw index of the lattice white-noise stream
    "workers": 1,              # Threads used for seed chunks
    "min_covariance_seeds": 100,
}

# Kernel profiles and the tables derived from them
KERNEL_CONFIG = {
    "flat_cutoff_factor": 9,          # FLAT alias cutoff K = factor * L
    "log_div_bin_width": 0.05,
    "bound_refinements": (3, 9),      # M = factor * L for the bound table
    "sobolev_cutoff_factor": 3,       # H^{-s} truncation K = factor * max(L)
}

# Chaos measures and their Monte Carlo reports
GMC_CONFIG = {
    "sigma_band": 4.0,
    "reference_cutoff_factor": 3,     # K_ref = factor * a**l_max
    "min_report_seeds": 1000,
}

# Invariant suite settings
VERIFY_CONFIG: Dict[str, float] = {
    "identity_tol": 1e-10,
    "synthesis_tol": 1e-9,
    "parseval_tol": 1e-12,
    "kernel_tol": 1e-10,
    "covariance_seeds": 20000,
    "mass_seeds": 100000,
    "convergence_seeds": 256,
    "random_functions": 50,
}

# File formats
IO_CONFIG = {
    "grid_format": "phg-grid",
    "grid_version": 1,
    "report_schema": "phg-verify",
    "report_version": 1,
    "float_format": "%.17g",
}

# Memory guard, checked before large allocations
RESOURCE_CONFIG = {
    "budget_bytes": int(os.getenv("PHG_BUDGET_BYTES", str(2 * 1024 ** 3))),
}


class ResourceBudgetError(RuntimeError):
    """Raised when a computation would exceed the configured memory budget."""


def get_file_path(directory: str, filename: str) -> Path:
    """
    Get the full path for a file in a specific output directory.

    Args:
        directory: The directory type ('grids', 'reports', 'figures')
        filename: The name of the file

    Returns:
        Path object for the full file path
    """
    if directory not in DIRECTORIES:
        raise ValueError(f"Invalid directory type: {directory}")
    return DIRECTORIES[directory] / filename


def check_budget(nbytes: int, what: str) -> None:
    """Abort before allocating ``nbytes`` if the memory budget is smaller."""
    budget = int(os.getenv("PHG_BUDGET_BYTES", str(RESOURCE_CONFIG["budget_bytes"])))
    if nbytes > budget:
        raise ResourceBudgetError(
            f"{what} needs about {nbytes} bytes, budget is {budget} bytes "
            f"(set PHG_BUDGET_BYTES to raise it)"
        )


def validate_config() -> bool:
    """
    Validate the configuration settings.

    Returns:
        bool: True if configuration is valid
    """
    try:
        for directory in DIRECTORIES.values():
            if not directory.exists():
                return False

        if SAMPLING_CONFIG["seed_chunk"] < 1 or SAMPLING_CONFIG["workers"] < 1:
            return False
        if SAMPLING_CONFIG["spectral_draw"] == SAMPLING_CONFIG["white_noise_draw"]:
            return False

        # FLAT cutoff must keep K odd for odd L
        if KERNEL_CONFIG["flat_cutoff_factor"] % 2 != 1:
            return False
        if GMC_CONFIG["reference_cutoff_factor"] % 2 != 1:
            return False
        if KERNEL_CONFIG["sobolev_cutoff_factor"] % 2 != 1:
            return False
        if any(factor % 2 != 1 for factor in KERNEL_CONFIG["bound_refinements"]):
            return False

        if RESOURCE_CONFIG["budget_bytes"] <= 0:
            return False

        return all(value > 0 for value in VERIFY_CONFIG.values())

    except Exception:
        return False


# Validate configuration on import
if not validate_config():
    raise ValueError("Invalid configuration detected")
