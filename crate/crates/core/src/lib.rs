//! Analysis pipeline for extreme transformations over mini subject
//! projects: apply body stubs, find the ones the test suite misses,
//! diagnose each miss as no-infection / no-propagation / weak-oracle via
//! two stages of instrumented observation, and synthesize concrete
//! test-improvement suggestions.

pub mod adapter;
pub mod analytics;
pub mod campaign;
pub mod config;
pub mod error;
pub mod insight;
pub mod instrument;
pub mod observe;
pub mod persist;
pub mod rip;
pub mod runner;
pub mod spawn;
pub mod suggest;
pub mod transform;

pub use adapter::{MethodDescriptor, ProjectAdapter, TestCase};
pub use campaign::{diagnose, discover, report, ArtifactPaths, CampaignMeta};
pub use config::{CampaignConfig, ExecutionConfig, StageSelection, RUNNER_MARKER};
pub use error::{Error, Result};
pub use rip::{SymptomClass, SymptomDiagnosis};
pub use suggest::Suggestion;
pub use transform::{Detection, ExtremeTransformation};
