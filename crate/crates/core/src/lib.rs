//! Identification, bounds and inference for the binary instrumental-variable
//! model when the instrument, treatment or outcome is misclassified.
//!
//! Everything works from a 2×2×2 table of counts or probabilities over
//! `(Z, D, Y)`; see [`observed`] for the data layout.

#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod error;
pub mod fixtures;
pub mod identify;
pub mod inference;
pub mod latent;
pub mod numopt;
pub mod observed;
pub mod report;
pub mod sim;
mod sampling;
pub mod sensitivity;

pub use error::{Error, Result};
pub use identify::{
    bross_attenuation, corrected_cace, dichotomize_weight, naive_cace, CaceEstimate,
    MultiTreatmentMargins, NondiffRates,
};
pub use latent::{
    check_feasibility, forward_map, forward_map_channels, inverse_map, inverse_map_channels, Channel,
    Channels, FeasibilityReport, LatentIvModel, StrongMonoRates,
};
pub use observed::{
    from_counts, recode_outcome, risk_difference, Conditioner, Event, ObservedCounts,
    ObservedDistribution, RiskDiffSpec,
};
pub use bounds::{
    bounds_outcome_nondiff, bounds_outcome_nondiff_with, bounds_outcome_strongmono,
    bounds_outcome_strongmono_with, bounds_treatment_nondiff, bounds_treatment_nondiff_with,
    bounds_treatment_strongmono, bounds_treatment_strongmono_with, testable_conditions, BoundsOptions,
    Condition, ConditionReport, ConditionVariant,
};
pub use report::{BoundsMethod, BoundsReport, Interval, RateBound, SignHandling, Witness};
pub use numopt::{numeric_bounds, Mismeasured, SearchConfig};
pub use sensitivity::{
    cace_diff, cace_diff_outcome, cace_diff_treatment, sensitivity_region, sensitivity_region_grid,
    DiffVariable, DifferentialRates, RateBox,
};
pub use inference::{
    ci_union, ci_wald, test_inequalities, AsymptoticVariance, BoundKind, CiConfig, CiMethod, InequalityTest,
    InequalityTests, UnionCi, WaldCi,
};
pub use sim::{
    latent_model, sample_latent, scenario_draw, sharpness_audit, sharpness_audit_with, simulate_observed, AuditRecord,
    AuditReport, RateRanges, SampleSize, ScenarioSpec, SweepConfig,
};
