//! Stochastic chains with memory of variable length.
//!
//! A probabilistic context tree pairs a suffix-free set of finite strings
//! (the contexts) with a next-symbol law per context; the chain at each
//! step looks back only as far as the context in force. This crate covers
//! the full loop:
//!
//! - [`tree`]: context trees, validation, truncation, comparison;
//! - [`sampler`]: exact stationary laws and seeded path simulation,
//!   including the unbounded renewal family;
//! - [`counts`]: suffix-window counts and empirical transition laws;
//! - [`estimators`]: the sharpness-statistic estimator with a data-driven
//!   or deterministic candidate range, and the gain-threshold estimator;
//! - [`theory`]: exact cylinder probabilities, canonical Markov
//!   approximations, separation and continuity constants, and closed-form
//!   exponential bounds;
//! - [`format`]: plain-text tree and sample files, raw-text ingestion;
//! - [`harness`]: Monte Carlo recovery experiments with CSV reports.

#![forbid(unsafe_code)]

pub mod alphabet;
pub mod counts;
pub mod error;
pub mod estimators;
pub mod format;
pub mod harness;
pub mod sampler;
pub mod theory;
pub mod tree;

pub use alphabet::{Alphabet, Symbol, SymbolSequence, MAX_ALPHABET};
pub use counts::{build_counts, CountTrie, NodeRef};
pub use error::{Error, Result};
pub use estimators::{
    delta_stat, ell_hat, ell_hat_from_counts, empirical_tree_rissanen, estimate_tree_delta,
    lambda_stat, max_candidate_length, ContextConfig, DeltaConfig, DepthMode, EstimatedTree,
    Provenance,
};
pub use format::{
    ingest_text, load_sample, load_tree, parse_sample, parse_tree, render_sample, render_tree,
    save_sample, save_tree, IngestMode, Ingested,
};
pub use harness::{
    ks_statistic, run_null_calibration, run_recovery_experiment, AlgoSpec, CalibrationResult,
    ExperimentConfig, ExperimentReport, GridSummary, RowRecord, TimingMode, TreeSource,
    CSV_HEADER,
};
pub use sampler::{
    check_renewal_recurrence, pack_stream, renewal_tree, replica_rng, sample_path,
    sample_path_stream, stationary_law, PreparedSampler, QRule, RenewalSpec, StationaryLaw,
};
pub use theory::{
    alpha_stats, beta_k, canonical_approximation, conditional_law, cylinder_probability, d_m,
    deviation_bound, deviation_bound_for, epsilon_m, min_k_condition, recovery_bound,
    recovery_bound_for, AlphaStats, BoundInputs, DeviationInputs,
};
pub use tree::{
    compare_trees, context_of, iid_uniform_binary, ref_tree, truncate_tree, validate_tree,
    Context, ContextTree, ProbabilisticContextTree, TreeDiff, ValidationReport, ROW_TOLERANCE,
};
