//! Design-driven analysis of balanced agricultural field experiments.
//!
//! A declared design (CRD, RCBD, factorial, split-plot, mixed, multi-environment)
//! is compiled into its model and error strata, fitted in closed form, and
//! interpreted hierarchically: only the highest-order significant effects are
//! compared, with Tukey HSD and compact letter displays, under explicit
//! assumption checks.

pub mod data;
pub mod decision;
pub mod design;
pub mod diagnostics;
pub mod dist;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod inference;
pub mod mixed;
pub mod pipeline;
pub mod stability;
pub mod svd;

pub use data::{load_table, partition, Dataset, GroupPartition};
pub use decision::{decide, Recommendation};
pub use design::{compile_effects, parse_design, validate_against_data, DesignSpec, ValidatedDesign};
pub use diagnostics::DiagnosticReport;
pub use engine::{anova, fit, AnovaTable, FittedModel};
pub use error::{Error, Result};
pub use inference::{AdmissibleDomain, ComparisonSet};
pub use pipeline::{analyze, grouped_analyze, Analysis, AnalysisOptions, GroupResult};
