use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use meanfield::covariance::{oas_covariance, TimeSeriesTrial};
use meanfield::means::{geometric_mean, power_mean, rpme_clean, MeanSpec};
use meanfield::{MethodConfig, RobustConfig, SolverConfig, Spd64};
use meanfield_eval::{comparable_cells, run_pipeline, Dataset, EvalConfig, PipelineScoreTable, PipelineSpec, Session};
use meanfield_stats::{meta_compare, MetaReport};
use serde::Serialize;

use crate::archive::{read_archive, write_archive, ArchiveKind, TrialArchive};
use crate::config::parse_config;
use crate::error::CliError;
use crate::report::format_report;

#[derive(Debug, Parser)]
#[command(name = "meanfield", version, about = "Power-mean field classifiers for SPD covariance matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SolverArgs {
    /// Relative change (power means) or gradient norm per dimension
    /// (geometric mean) at which iteration stops.
    #[arg(long, default_value_t = 1e-7)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 150)]
    pub max_iterations: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, CliError> {
        SolverConfig::new(self.tolerance, self.max_iterations).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic trial archive from a config file.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the power mean of an archive's trials as JSON.
    Mean {
        #[arg(long)]
        archive: PathBuf,
        /// Exponent in [-1, 1]; 0 selects the geometric mean.
        #[arg(long, allow_negative_numbers = true)]
        h: f64,
        /// Only use trials with this label.
        #[arg(long)]
        class: Option<u32>,
        /// Remove outlying trials first (z > 2.5, at most 4 rounds).
        #[arg(long)]
        robust: bool,
        /// Also save the mean as a one-trial covariance archive.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Cross-validate a pipeline and write its score table as JSON.
    Eval {
        /// One archive per session, named `sub-<subject>_ses-<session>.spdt`.
        #[arg(long, required = true, num_args = 1..)]
        archive: Vec<PathBuf>,
        /// e.g. MDM, ADCSP+MF, CSP+TS+LR.
        #[arg(long)]
        pipeline: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value = "synthetic")]
        dataset: String,
        /// Worker threads (results do not depend on it).
        #[arg(long)]
        threads: Option<usize>,
        /// Record per-fold wall-clock time (makes output non-reproducible).
        #[arg(long)]
        time: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Compare two pipelines' score tables with the meta-analysis.
    Compare {
        /// Score table(s) of the reference pipeline.
        #[arg(long = "a", required = true, num_args = 1..)]
        a: Vec<PathBuf>,
        /// Score table(s) of the pipeline tested for improvement.
        #[arg(long = "b", required = true, num_args = 1..)]
        b: Vec<PathBuf>,
        /// Write the report JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print JSON instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Run the built-in oracle checks.
    Selftest,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

/// SPD trials of an archive; time-series trials go through OAS first.
pub fn archive_covariances(archive: &TrialArchive) -> Result<Vec<Spd64>, CliError> {
    match archive.kind {
        ArchiveKind::Covariance => Ok(archive.covariances().expect("covariance kind")),
        ArchiveKind::TimeSeries => archive
            .trials
            .iter()
            .zip(&archive.labels)
            .map(|(m, &l)| Ok(oas_covariance(&TimeSeriesTrial::new(m.clone(), l as usize)?)?))
            .collect(),
    }
}

pub fn load_dataset(paths: &[PathBuf], dataset: &str) -> Result<Dataset, CliError> {
    let mut seen = BTreeSet::new();
    let mut sessions = Vec::with_capacity(paths.len());
    for p in paths {
        let archive = read_archive(p, dataset)?;
        let key = (archive.meta.subject.clone(), archive.meta.session.clone());
        if !seen.insert(key.clone()) {
            return Err(CliError::InvalidInput(format!(
                "subject {} session {} appears twice",
                key.0, key.1
            )));
        }
        let covs = archive_covariances(&archive)?;
        let labels = archive.labels.iter().map(|&l| l as usize).collect();
        sessions.push(Session::new(key.0, key.1, covs, labels)?);
    }
    Ok(Dataset {
        id: dataset.to_string(),
        sessions,
    })
}

#[derive(Debug, Serialize)]
struct MeanOutput {
    h: f64,
    class: Option<u32>,
    n_trials: usize,
    /// Archive indices of the trials the mean was computed from.
    kept: Vec<usize>,
    iterations: usize,
    residual: f64,
    matrix: Vec<Vec<f64>>,
}

fn run_mean(
    path: &Path,
    h: f64,
    class: Option<u32>,
    robust: bool,
    out_path: Option<&Path>,
    cfg: &SolverConfig,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    if !(h.abs() <= 1.0) {
        return Err(CliError::Usage(format!("--h must be in [-1, 1], got {h}")));
    }
    let archive = read_archive(path, "")?;
    let covs = archive_covariances(&archive)?;
    let mut indices: Vec<usize> = (0..covs.len())
        .filter(|&i| class.is_none_or(|c| archive.labels[i] == c))
        .collect();
    if indices.is_empty() {
        return Err(CliError::InvalidInput(format!("no trials with label {}", class.unwrap_or(0))));
    }
    let mut set: Vec<Spd64> = indices.iter().map(|&i| covs[i].clone()).collect();
    let mut cleaned = None;
    if robust {
        let outcome = rpme_clean(&set, &RobustConfig::default(), cfg)?;
        indices = outcome.kept.iter().map(|&k| indices[k]).collect();
        set = outcome.kept.iter().map(|&k| set[k].clone()).collect();
        cleaned = Some(outcome.mean);
    }
    let est = match (h == 0.0, cleaned) {
        (true, Some(mean)) => mean,
        (true, None) => geometric_mean(&set, None, None, cfg)?,
        (false, _) => power_mean(&set, &MeanSpec::uniform(h), None, cfg)?,
    };
    let matrix = est.mean.matrix();
    let report = MeanOutput {
        h,
        class,
        n_trials: set.len(),
        kept: indices,
        iterations: est.iterations,
        residual: est.residual,
        matrix: matrix.rows().into_iter().map(|r| r.to_vec()).collect(),
    };
    if let Some(p) = out_path {
        write_archive(&TrialArchive::covariance(1, vec![0], &[est.mean.clone()])?, p)?;
    }
    emit(out, &to_json(&report))
}

pub fn read_table(path: &Path) -> Result<PipelineScoreTable, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let table: PipelineScoreTable = serde_json::from_str(&text)
        .map_err(|e| CliError::InvalidInput(format!("{}: not a score table: {e}", path.display())))?;
    table.validate()?;
    Ok(table)
}

fn read_tables(paths: &[PathBuf]) -> Result<PipelineScoreTable, CliError> {
    let mut tables = paths.iter().map(|p| read_table(p));
    let first = tables.next().expect("at least one table")?;
    tables.try_fold(first, |acc, t| Ok(acc.merge(t?)?))
}

/// The meta-analysis of `b` over `a` on their common cells.
pub fn compare_tables(a: &PipelineScoreTable, b: &PipelineScoreTable) -> Result<MetaReport, CliError> {
    let (ca, cb) = comparable_cells(a, b)?;
    Ok(meta_compare(&a.pipeline, &ca, &b.pipeline, &cb)?)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { config, out: target } => {
            let text = std::fs::read_to_string(&config).map_err(|e| CliError::io(&config, e))?;
            let archive = parse_config(&text)?.generate()?;
            write_archive(&archive, &target)
        }
        Command::Mean {
            archive,
            h,
            class,
            robust,
            out: target,
            solver,
        } => run_mean(&archive, h, class, robust, target.as_deref(), &solver.config()?, out),
        Command::Eval {
            archive,
            pipeline,
            seed,
            folds,
            dataset,
            threads,
            time,
            out: target,
            solver,
        } => {
            let spec: PipelineSpec = pipeline.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
            if threads == Some(0) {
                return Err(CliError::Usage("--threads must be >= 1".into()));
            }
            let method_cfg = MethodConfig {
                solver: solver.config()?,
                ..MethodConfig::default()
            };
            let cfg = EvalConfig {
                k: folds,
                seed,
                record_time: time,
                threads,
            };
            let data = load_dataset(&archive, &dataset)?;
            let table = run_pipeline(&data, spec, &cfg, &method_cfg, None)?;
            let json = to_json(&table);
            match target {
                Some(p) => write_text(&p, &json),
                None => emit(out, &json),
            }
        }
        Command::Compare { a, b, out: target, json } => {
            let report = compare_tables(&read_tables(&a)?, &read_tables(&b)?)?;
            let text = to_json(&report);
            if let Some(p) = target {
                write_text(&p, &text)?;
            }
            if json {
                emit(out, &text)
            } else {
                emit(out, &format_report(&report))
            }
        }
        Command::Selftest => crate::selftest::run(out),
    }
}
