from .bootstrap import BootstrapResult, bootstrap_errorbars, fit_chain
from .gauge import GaugeElement, find_gauge, gauge_objective, gauge_optimize
from .lgst import LinearInversionScaffold, lgst
from .mle import MleInfo, MleOptions, loglikelihood, max_loglikelihood, mle_fit

__all__ = [
    "BootstrapResult",
    "bootstrap_errorbars",
    "fit_chain",
    "GaugeElement",
    "LinearInversionScaffold",
    "MleInfo",
    "MleOptions",
    "find_gauge",
    "gauge_objective",
    "gauge_optimize",
    "lgst",
    "loglikelihood",
    "max_loglikelihood",
    "mle_fit",
]
