//! Tuned-accuracy benchmark for uncertain-inference calculi.
//!
//! The pipeline: sample random three-node inference networks ([`sampler`]),
//! compute the minimum cross-entropy posterior norm on a grid of evidence
//! probes ([`mce`]), fit each calculus's parameters to that norm ([`calculi`],
//! [`tuner`]), and summarize accuracy across networks ([`stats`], [`study`]).

pub mod calculi;
pub mod io;
pub mod joint;
pub mod mce;
pub mod sampler;
pub mod stats;
pub mod study;
pub mod tuner;

pub use calculi::{Calculus, CalculusParams, EvalOptions};
pub use joint::{JointError, JointTable};
pub use mce::{mce_update, EvidenceProbe, MceError, MceSolution};
pub use sampler::{sample_tables, SamplerConfig};
pub use study::{run_study, StudyConfig, StudyError, StudyReport};
pub use tuner::{objective, tune, ProblemSet, TuneResult, TunerConfig, TunerError};
