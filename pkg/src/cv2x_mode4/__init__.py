"""Analytical PDR model and sensing-based SPS simulator for C-V2X Mode 4.

The package splits into four layers:

- :mod:`cv2x_mode4.propagation`: channel abstraction (pathloss, shadowing,
  BLER tables) and the sensing / propagation / interference probabilities.
- :mod:`cv2x_mode4.analytic`: the closed-form PDR-vs-distance model with its
  four-way loss decomposition (half-duplex, sensing, propagation, collision).
- :mod:`cv2x_mode4.simulator`: a sub-frame-resolution simulator of the
  sensing-based semi-persistent scheduling MAC, used as the independent
  validation reference.
- :mod:`cv2x_mode4.harness`: scenario sweeps, MAD comparison and CSV output
  (also exposed through the ``cv2x-mode4`` command line tool).
"""

from .analytic import (
    AnalyticModel,
    PdrBreakdown,
    ScenarioConfig,
    alpha_weight,
    channel_busy_ratio,
    collision_loss,
    half_duplex_loss,
    pdr_curve,
)
from .errors import ConfigurationError, ModelError, NotReadyError
from .harness import (
    RunManifest,
    default_manifest,
    load_manifest,
    mad,
    run_analytic,
    run_compare,
    run_simulate,
    run_sweep,
)
from .propagation import (
    BlerTable,
    IntegrationGrid,
    PathlossModel,
    RadioConfig,
    ShadowingModel,
    default_bler_table,
    interference_failure,
    pathloss_db,
    propagation_loss,
    psr,
    sensing_loss,
)
from .simulator import (
    Outcome,
    SimStats,
    Simulator,
    build_scenario,
    classify_rx,
    merge_stats,
    run,
)

__all__ = [
    "AnalyticModel", "PdrBreakdown", "ScenarioConfig", "alpha_weight",
    "channel_busy_ratio", "collision_loss", "half_duplex_loss", "pdr_curve",
    "ConfigurationError", "ModelError", "NotReadyError",
    "RunManifest", "default_manifest", "load_manifest", "mad",
    "run_analytic", "run_compare", "run_simulate", "run_sweep",
    "BlerTable", "IntegrationGrid", "PathlossModel", "RadioConfig",
    "ShadowingModel", "default_bler_table", "interference_failure",
    "pathloss_db", "propagation_loss", "psr", "sensing_loss",
    "Outcome", "SimStats", "Simulator", "build_scenario", "classify_rx",
    "merge_stats", "run",
]

__version__ = "0.1.0"
