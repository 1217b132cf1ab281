# Copyright 2025 The sgd_stoptime Authors

# exported table headers
TRAJECTORY_CSV_COLUMNS = ["t", "eps", "f", "grad_norm", "mart_inc", "g_norm_sq"]
CHECKPOINT_CSV_COLUMNS = ["t", "mean_grad_sq", "stderr", "median_f_gap", "as_fraction"]

# schedule probing
MONOTONE_PREFIX = 10**6
SUM_CHUNK = 10**6
POWER_SUM_HORIZON = 10**7
M_OF_MAX_INDEX = 10**9

# problem probing
COERCIVITY_PROBE_RADII = (1e2, 1e3, 1e4)
LEVEL_PROBE_RADII = (1e3, 1e4, 1e5)
LIPSCHITZ_CLOSE_PAIR_STEP = 1e-3
CRITICAL_POINT_GRAD_TOL = 1e-10

# statistical checks
UNBIASED_Z_LIMIT = 4.0
WEAK_GROWTH_SLACK = 0.1
MOMENT_DRAW_SIZES = (10**4, 10**5, 10**6)
MOMENT_STABILIZATION_TOL = 0.2
CONFIDENCE_Z = 1.96

# per-step residual tolerance: RESIDUAL_REL_TOL * (1 + |f|)
RESIDUAL_REL_TOL = 1e-9

# iterate storage default (number of floats)
DEFAULT_MEMORY_BUDGET = 5 * 10**7

# environment variable for the default output directory
OUTPUT_DIR_ENV = "STOPTIMER_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "stoptimer_out"

# named tolerances and required fractions of the ensemble checks
DEFAULT_THRESHOLDS = {
    "as_grad_tol": 0.1,
    "as_fraction": 0.95,
    "critical_value_tol": 1e-2,
    "critical_value_fraction": 0.95,
    "saturation_fraction": 0.9,
    "final_mean_grad_sq": 1e-2,
    "sup_grad_stability": 0.1,
    "martingale_z": UNBIASED_Z_LIMIT,
    "liminf_grad_tol": 0.1,
    "stderr_multiplier": 2.0,
}
