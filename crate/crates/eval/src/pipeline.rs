use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use meanfield::covariance::{oas_covariance, TimeSeriesTrial};
use meanfield::spatial::{adcsp_fit, csp_fit, SpatialFilter, CSP_FILTERS_PER_CLASS};
use meanfield::{Method, MethodConfig, Model, Spd64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::folds::stratified_kfold;
use crate::metrics::auc_roc;
use crate::table::{PipelineScoreTable, ScoreRow};
use crate::{EvalError, Result};

/// Dimensionality reduction applied before the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterKind {
    None,
    Csp,
    Adcsp,
}

/// A filter and a classifier, written `METHOD`, `CSP+METHOD` or
/// `ADCSP+METHOD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PipelineSpec {
    pub filter: FilterKind,
    pub method: Method,
}

impl PipelineSpec {
    pub fn new(filter: FilterKind, method: Method) -> Self {
        Self { filter, method }
    }
}

impl fmt::Display for PipelineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.filter {
            FilterKind::None => write!(f, "{}", self.method),
            FilterKind::Csp => write!(f, "CSP+{}", self.method),
            FilterKind::Adcsp => write!(f, "ADCSP+{}", self.method),
        }
    }
}

impl FromStr for PipelineSpec {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let upper = t.to_ascii_uppercase();
        let (filter, rest) = if let Some(r) = upper.strip_prefix("ADCSP+") {
            (FilterKind::Adcsp, r)
        } else if let Some(r) = upper.strip_prefix("CSP+") {
            (FilterKind::Csp, r)
        } else {
            (FilterKind::None, upper.as_str())
        };
        let method = Method::from_name(rest).ok_or_else(|| {
            EvalError::InvalidInput(format!(
                "unknown pipeline '{t}'; expected [CSP+|ADCSP+]{{MDM, MDMF, MF, MF_RPME, TS+LR}}"
            ))
        })?;
        Ok(Self { filter, method })
    }
}

/// The trials of one recording session, as covariance matrices.
#[derive(Debug, Clone)]
pub struct Session {
    pub subject: String,
    pub session: String,
    pub covs: Vec<Spd64>,
    pub labels: Vec<usize>,
}

impl Session {
    pub fn new(subject: impl Into<String>, session: impl Into<String>, covs: Vec<Spd64>, labels: Vec<usize>) -> Result<Self> {
        if covs.len() != labels.len() {
            return Err(EvalError::InvalidInput("trials and labels differ in length".into()));
        }
        Ok(Self {
            subject: subject.into(),
            session: session.into(),
            covs,
            labels,
        })
    }

    /// Estimates one OAS covariance per trial, once, before any folding.
    pub fn from_time_series(
        subject: impl Into<String>,
        session: impl Into<String>,
        trials: &[TimeSeriesTrial<f64>],
    ) -> Result<Self> {
        let covs = trials.iter().map(oas_covariance).collect::<meanfield::Result<Vec<_>>>()?;
        let labels = trials.iter().map(|t| t.label).collect();
        Self::new(subject, session, covs, labels)
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub id: String,
    pub sessions: Vec<Session>,
}

/// Cross-validation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub k: usize,
    pub seed: u64,
    /// Record wall-clock fit+score time per fold. Off by default so that
    /// output is reproducible byte for byte.
    pub record_time: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            record_time: false,
            threads: None,
        }
    }
}

/// Identifies one fold of one session.
#[derive(Debug, Clone, Copy)]
pub struct FoldContext<'a> {
    pub dataset: &'a str,
    pub subject: &'a str,
    pub session: &'a str,
    pub fold: usize,
    pub test_indices: &'a [usize],
}

/// Instrumentation of the fits made during a run. Indices refer to the
/// session's trials.
pub trait FitObserver: Sync {
    /// A spatial filter is about to be fit on `train`.
    fn filter_fit(&self, _ctx: &FoldContext<'_>, _train: &[usize]) {}
    /// The classifier is about to be fit on `train`, filtered to `dim`.
    fn classifier_fit(&self, _ctx: &FoldContext<'_>, _train: &[usize], _dim: usize) {}
}

fn fit_filter(kind: FilterKind, covs: &[Spd64], labels: &[usize], cfg: &MethodConfig) -> meanfield::Result<Option<SpatialFilter<f64>>> {
    Ok(match kind {
        FilterKind::None => None,
        FilterKind::Csp => Some(csp_fit(covs, labels, CSP_FILTERS_PER_CLASS, &cfg.solver)?),
        FilterKind::Adcsp => Some(adcsp_fit(covs, labels, &cfg.solver)?.filter),
    })
}

/// Trains on every fold but one and returns the binary scores of the held
/// out trials.
fn run_fold(
    spec: PipelineSpec,
    session: &Session,
    ctx: &FoldContext<'_>,
    method_cfg: &MethodConfig,
    observer: Option<&dyn FitObserver>,
) -> meanfield::Result<Vec<f64>> {
    let test = ctx.test_indices;
    let train: Vec<usize> = (0..session.covs.len()).filter(|i| test.binary_search(i).is_err()).collect();
    let train_covs: Vec<Spd64> = train.iter().map(|&i| session.covs[i].clone()).collect();
    let train_labels: Vec<usize> = train.iter().map(|&i| session.labels[i]).collect();

    if spec.filter != FilterKind::None {
        if let Some(o) = observer {
            o.filter_fit(ctx, &train);
        }
    }
    let filter = fit_filter(spec.filter, &train_covs, &train_labels, method_cfg)?;
    let apply = |c: &Spd64| match &filter {
        Some(f) => f.apply(c),
        None => Ok(c.clone()),
    };
    let train_filtered = train_covs.iter().map(apply).collect::<meanfield::Result<Vec<_>>>()?;
    if let Some(o) = observer {
        o.classifier_fit(ctx, &train, train_filtered[0].dim());
    }
    let model = Model::fit(spec.method, &train_filtered, &train_labels, method_cfg)?;
    test.iter()
        .map(|&i| {
            let p = model.score(&apply(&session.covs[i])?)?;
            Ok(p.score.binary().expect("binary task"))
        })
        .collect()
}

struct Job<'a> {
    session: &'a Session,
    fold: usize,
    test: std::result::Result<Vec<usize>, String>,
}

/// Cross-validates `spec` on every session of `dataset`.
///
/// Failures (fold construction, fitting, scoring, multiclass sessions) are
/// recorded on the affected rows with a missing AUC; the run continues.
pub fn run_pipeline(
    dataset: &Dataset,
    spec: PipelineSpec,
    cfg: &EvalConfig,
    method_cfg: &MethodConfig,
    observer: Option<&dyn FitObserver>,
) -> Result<PipelineScoreTable> {
    if cfg.k < 2 {
        return Err(EvalError::InvalidInput(format!("k must be >= 2, got {}", cfg.k)));
    }
    let mut jobs = Vec::new();
    for session in &dataset.sessions {
        let folds: std::result::Result<Vec<Vec<usize>>, String> = if session.n_classes() != 2 {
            Err(format!(
                "AUC is defined for two classes, session has {}",
                session.n_classes()
            ))
        } else {
            stratified_kfold(&session.labels, cfg.k, cfg.seed).map_err(|e| e.to_string())
        };
        for fold in 0..cfg.k {
            let test = match &folds {
                Ok(f) => Ok(f[fold].clone()),
                Err(e) => Err(e.clone()),
            };
            jobs.push(Job { session, fold, test });
        }
    }

    let evaluate = |job: &Job<'_>| -> ScoreRow {
        let mut row = ScoreRow {
            dataset: dataset.id.clone(),
            subject: job.session.subject.clone(),
            session: job.session.session.clone(),
            fold: job.fold,
            auc: None,
            fold_time_seconds: None,
            error: None,
        };
        let test = match &job.test {
            Ok(t) => t,
            Err(e) => {
                row.error = Some(e.clone());
                return row;
            }
        };
        let ctx = FoldContext {
            dataset: &dataset.id,
            subject: &job.session.subject,
            session: &job.session.session,
            fold: job.fold,
            test_indices: test,
        };
        let start = Instant::now();
        let outcome = run_fold(spec, job.session, &ctx, method_cfg, observer);
        let elapsed = start.elapsed().as_secs_f64();
        if cfg.record_time {
            row.fold_time_seconds = Some(elapsed);
        }
        match outcome {
            Ok(scores) => {
                let positive: Vec<bool> = test.iter().map(|&i| job.session.labels[i] == 1).collect();
                row.auc = auc_roc(&scores, &positive);
                if row.auc.is_none() {
                    row.error = Some("AUC undefined: held-out fold lacks a class".into());
                }
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    };

    let rows: Vec<ScoreRow> = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| EvalError::InvalidInput(format!("cannot start {n} worker threads: {e}")))?
            .install(|| jobs.par_iter().map(evaluate).collect()),
        None => jobs.par_iter().map(evaluate).collect(),
    };
    Ok(PipelineScoreTable::new(spec.to_string(), cfg.k, cfg.seed, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipeline_names_round_trip() {
        for filter in [FilterKind::None, FilterKind::Csp, FilterKind::Adcsp] {
            for method in Method::ALL {
                let spec = PipelineSpec::new(filter, method);
                assert_eq!(spec.to_string().parse::<PipelineSpec>().unwrap(), spec);
            }
        }
        assert_eq!("adcsp+mf".parse::<PipelineSpec>().unwrap(), PipelineSpec::new(FilterKind::Adcsp, Method::Mf));
        assert!("XDAWN+MDM".parse::<PipelineSpec>().is_err());
    }
}
