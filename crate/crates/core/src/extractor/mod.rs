//! Java front end and the 21-feature extraction pipeline.

pub mod ast;
pub mod callgraph;
pub mod diff;
pub mod features;
pub mod lexer;
pub mod parser;
pub mod project;
pub mod scaler;
pub mod skeleton;
pub mod testcase;
pub mod vector;

pub use diff::{statement_diff, StatementDiff};
pub use parser::{parse_source, ParsedSource};
pub use project::{assemble_vector, extract_rows, MutantFeatures, Project};
pub use scaler::{apply_scaler, fit_scaler, ScalerStats};
pub use skeleton::{skeleton_modification, Skeleton};
pub use testcase::{test_features, TestFeatures};
pub use vector::{read_features, write_features, FeatureVector, PairRow, FEATURE_NAMES, NUM_FEATURES};
