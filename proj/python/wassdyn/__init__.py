"""Wasserstein dynamics on discrete probability measures."""

import json as _json

from ._wassdyn import (
    DiscreteMeasure,
    Error,
    KernelSpec,
    MapSpec,
    apply_kernel,
    compress,
    eval_expression,
    eval_map,
    find_stationary,
    gaussian_noise_level,
    growth_ratio_profile,
    kr_dual,
    mix,
    noise_level,
    parse_kernel,
    parse_map,
    projection_distance,
    push_forward,
    tail_mass,
    wasserstein,
    wasserstein_1d,
    wasserstein_exact,
    __version__,
)
from ._wassdyn import run_experiment_json as _run_experiment_json


def run_experiment(config, base_dir="."):
    """Run an experiment config (a dict) and return the report as a dict."""
    return _json.loads(_run_experiment_json(_json.dumps(config), str(base_dir)))


__all__ = [
    "DiscreteMeasure",
    "Error",
    "KernelSpec",
    "MapSpec",
    "apply_kernel",
    "compress",
    "eval_expression",
    "eval_map",
    "find_stationary",
    "gaussian_noise_level",
    "growth_ratio_profile",
    "kr_dual",
    "mix",
    "noise_level",
    "parse_kernel",
    "parse_map",
    "projection_distance",
    "push_forward",
    "run_experiment",
    "tail_mass",
    "wasserstein",
    "wasserstein_1d",
    "wasserstein_exact",
]
