//! File formats, synthetic data and the command-line front end of the
//! meanfield benchmark.

pub mod archive;
pub mod cli;
pub mod config;
pub mod error;
pub mod report;
pub mod selftest;
pub mod synth;

pub use archive::{read_archive, write_archive, ArchiveKind, ArchiveMeta, TrialArchive};
pub use config::parse_config;
pub use error::CliError;
pub use synth::{SynthSpec, synth_mixed_sources, synth_riemannian_gaussian};
