# Copyright 2025 The sgd_stoptime Authors

'''
central imports for check contexts and check functions

Adding a new check:

  1)  create or extend a file in src/sgd_stoptime/pipeline
  2)  implement the check function (trajectory, context) -> per-seed results and a context
      derived from AbstractContext whose drain() returns the ensemble-level results;
      list accepted config parameters in the context's `defaults`
  3)  import both below and add the pair to CHECK_REGISTRY under the config name
'''

from sgd_stoptime.pipeline.context import AbstractContext, SeedTable

from sgd_stoptime.pipeline.residual_checks import (
    DescentResidualContext,
    IndicatorDescentContext,
    LossBoundContext,
    AssumptionContext,
    descent_residual_check,
    indicator_descent,
    loss_bound_points,
    assumption_certificate)
from sgd_stoptime.pipeline.oracle_checks import OracleCheckContext, oracle_statistics
from sgd_stoptime.pipeline.martingale import (
    MartingaleMeanContext,
    MartingaleWindowContext,
    martingale_increments,
    martingale_window)
from sgd_stoptime.pipeline.excursions import (
    TruncatedIncrementContext,
    RecursiveInequalityContext,
    UpcrossingSaturationContext,
    UpcrossingBoundContext,
    truncated_increments,
    recursive_inequality,
    upcrossing_saturation,
    upcrossing_expectation)
from sgd_stoptime.pipeline.convergence import (
    AsProxyContext,
    CriticalValueContext,
    GradTrendContext,
    SupGradStabilityContext,
    LiminfProxyContext,
    as_proxy,
    final_value,
    grad_trend,
    sup_grad_stability,
    liminf_proxy)
from sgd_stoptime.pipeline.stats import EnsembleStatsContext, collect_statistics


# config check name -> (check function, context class)
CHECK_REGISTRY = {
    "descent_residuals": (descent_residual_check, DescentResidualContext),
    "indicator_descent": (indicator_descent, IndicatorDescentContext),
    "loss_bound": (loss_bound_points, LossBoundContext),
    "assumption_31": (assumption_certificate, AssumptionContext),
    "oracle_checks": (oracle_statistics, OracleCheckContext),
    "martingale_mean": (martingale_increments, MartingaleMeanContext),
    "martingale_window": (martingale_window, MartingaleWindowContext),
    "truncated_increments": (truncated_increments, TruncatedIncrementContext),
    "recursive_inequality": (recursive_inequality, RecursiveInequalityContext),
    "upcrossing_saturation": (upcrossing_saturation, UpcrossingSaturationContext),
    "upcrossing_bound": (upcrossing_expectation, UpcrossingBoundContext),
    "as_proxy": (as_proxy, AsProxyContext),
    "critical_value_match": (final_value, CriticalValueContext),
    "grad_trend": (grad_trend, GradTrendContext),
    "sup_grad_stability": (sup_grad_stability, SupGradStabilityContext),
    "liminf_proxy": (liminf_proxy, LiminfProxyContext),
}


def lookup_check(name: str):
    if name not in CHECK_REGISTRY:
        raise KeyError(f"Unknown check '{name}'. Valid checks are: {sorted(CHECK_REGISTRY)}")
    return CHECK_REGISTRY[name]
