"""flowlab: a desk-scale numerical laboratory for expanding CMC vacuum Einstein flows.

Evolves spatially homogeneous (Bianchi class A) and Gowdy-symmetric vacuum
spacetimes in constant-mean-curvature Hubble gauge / areal gauge, checks the
monotone and scale-invariant functionals attached to such flows, and runs
rescaling / blowdown diagnostics (type-III vs type-IIb curvature behaviour).

Conventions used throughout:

* spatial dimension n = 3 unless stated otherwise;
* mean curvature H = tr_h K < 0 on expanding slices, Hubble time t = -n/H;
* second fundamental form normalized by dh/dt = -2 L K;
* all slice integrals are per comoving unit cell (homogeneous case: one cell).
"""

__version__ = "0.1.0"

from .tensors import (ConditioningError, DomainError, hnorm_sq, shape_distance,
                      spd_sqrt_log, traceless_split)
from .state import FlowState, SymmetrySplit, Trajectory
from .frames import (ricci_frame, scalar_curvature_frame,
                     spacetime_curvature_norm_frame, structure_constants_cyclic)
from .models import (MODEL_KINDS, ModelId, default_zoo, kasner_family,
                     model_curvature_norm, model_state, model_trajectory,
                     validate_kasner_exponents)
from .bianchi import (BianchiSpec, EvolutionFailure, EvolveConfig, cmc_lapse,
                      constraint_residuals, evolve, spacetime_curvature_norm)
from .gowdy import (GowdyFailure, GowdyState, GowdyTrajectory, bessel_mode_data,
                    bessel_mode_exact, evolve_polarized, evolve_unpolarized,
                    polarized_data, unpolarized_data)
from .twisted import pseudo_static_fields, twisted_energy, verify_pseudo_static
from .series import (CheckVerdict, FunctionalReport, MonotoneSeries,
                     monotone_check)
from .functionals import (dvol_infty_estimate, ensure_aux, equivolume_momentum,
                          fm_volume, gowdy_energy, gowdy_energy_hat,
                          gowdy_energy_series, gowdy_homogeneous_part,
                          reduced_volume, rescaled_l1_ladder,
                          rescaled_l1_report, scale_invariant_integrals,
                          shape_drift_check)
from .scaling import (BlowdownReport, InsufficientBlowupError, KasnerFit,
                      RescaledView, ShortSpanError, TypeReport, blowdown,
                      classify, kasner_fit, limit_compare,
                      ringstrom_asymptotics, rescale)
from .scenarios import (Scenario, SchemaError, compare_runs, load_scenario,
                        run_scenario, validate_scenario, verify_zoo)

__all__ = [
    "__version__",
    # tensor core
    "ConditioningError", "DomainError", "hnorm_sq", "shape_distance",
    "spd_sqrt_log", "traceless_split", "structure_constants_cyclic",
    "ricci_frame", "scalar_curvature_frame", "spacetime_curvature_norm_frame",
    # states and exact models
    "FlowState", "SymmetrySplit", "Trajectory", "MODEL_KINDS", "ModelId",
    "default_zoo", "kasner_family", "model_curvature_norm", "model_state",
    "model_trajectory", "validate_kasner_exponents",
    # evolvers
    "BianchiSpec", "EvolutionFailure", "EvolveConfig", "cmc_lapse",
    "constraint_residuals", "evolve", "spacetime_curvature_norm",
    "GowdyFailure", "GowdyState", "GowdyTrajectory", "bessel_mode_data",
    "bessel_mode_exact", "evolve_polarized", "evolve_unpolarized",
    "polarized_data", "unpolarized_data", "pseudo_static_fields",
    "twisted_energy", "verify_pseudo_static",
    # functionals
    "CheckVerdict", "FunctionalReport", "MonotoneSeries", "monotone_check",
    "dvol_infty_estimate", "ensure_aux", "equivolume_momentum", "fm_volume",
    "gowdy_energy", "gowdy_energy_hat", "gowdy_energy_series",
    "gowdy_homogeneous_part", "reduced_volume", "rescaled_l1_ladder",
    "rescaled_l1_report", "scale_invariant_integrals", "shape_drift_check",
    # scaling diagnostics
    "BlowdownReport", "InsufficientBlowupError", "KasnerFit", "RescaledView",
    "ShortSpanError", "TypeReport", "blowdown", "classify", "kasner_fit",
    "limit_compare", "rescale", "ringstrom_asymptotics",
    # scenarios / CLI backend
    "Scenario", "SchemaError", "compare_runs", "load_scenario", "run_scenario",
    "validate_scenario", "verify_zoo",
]
