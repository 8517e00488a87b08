from .explicit_governor import erg_advance, erg_dsm, erg_navigation_field, erg_refresh, erg_step
from .prediction import (
    GovernorConfig, GovernorConfigError, GovernorState, TensionPrediction, predict_min_tension,
)
from .reference_governor import AntipodalReferenceError, interpolate_reference, rg_update
