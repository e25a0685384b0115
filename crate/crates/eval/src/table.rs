use meanfield_stats::ScoreCell;
use serde::{Deserialize, Serialize};

use crate::{EvalError, Result};

/// Version of the score-table JSON layout.
pub const TABLE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub dataset: String,
    pub subject: String,
    pub session: String,
    pub fold: usize,
    /// Missing when the fold failed or AUC is undefined.
    pub auc: Option<f64>,
    /// Wall-clock seconds for fit and score; only recorded on request.
    pub fold_time_seconds: Option<f64>,
    pub error: Option<String>,
}

impl ScoreRow {
    fn key(&self) -> (&str, &str, &str, usize) {
        (&self.dataset, &self.subject, &self.session, self.fold)
    }
}

/// Cross-validation results of one pipeline, rows sorted by
/// `(dataset, subject, session, fold)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineScoreTable {
    pub schema_version: u32,
    pub pipeline: String,
    pub k: usize,
    pub seed: u64,
    pub rows: Vec<ScoreRow>,
}

impl PipelineScoreTable {
    pub fn new(pipeline: String, k: usize, seed: u64, mut rows: Vec<ScoreRow>) -> Self {
        rows.sort_by(|a, b| a.key().cmp(&b.key()));
        Self {
            schema_version: TABLE_SCHEMA_VERSION,
            pipeline,
            k,
            seed,
            rows,
        }
    }

    /// Appends the rows of `other` (same pipeline and settings), keeping the
    /// canonical order.
    pub fn merge(mut self, other: PipelineScoreTable) -> Result<Self> {
        if (self.pipeline.as_str(), self.k, self.seed) != (other.pipeline.as_str(), other.k, other.seed) {
            return Err(EvalError::InvalidInput("tables of different runs cannot be merged".into()));
        }
        self.rows.extend(other.rows);
        Ok(Self::new(self.pipeline, self.k, self.seed, self.rows))
    }

    /// Checks the schema version, AUC range and row uniqueness.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != TABLE_SCHEMA_VERSION {
            return Err(EvalError::InvalidInput(format!(
                "score table schema version {} is not supported (expected {TABLE_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for r in &self.rows {
            if let Some(a) = r.auc {
                if !(0.0..=1.0).contains(&a) {
                    return Err(EvalError::InvalidInput(format!("AUC {a} outside [0, 1]")));
                }
            }
        }
        let mut keys: Vec<_> = self.rows.iter().map(ScoreRow::key).collect();
        keys.sort();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(EvalError::InvalidInput("duplicate rows in score table".into()));
        }
        Ok(())
    }

    /// Mean AUC over rows that have one.
    pub fn mean_auc(&self) -> Option<f64> {
        let v: Vec<f64> = self.rows.iter().filter_map(|r| r.auc).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn cell(r: &ScoreRow, auc: f64) -> ScoreCell {
    ScoreCell {
        dataset: r.dataset.clone(),
        subject: r.subject.clone(),
        session: r.session.clone(),
        fold: r.fold,
        score: auc,
    }
}

/// Paired cells of two tables for a meta comparison. The tables must list
/// the same rows; rows whose AUC is missing in either table are left out of
/// both.
pub fn comparable_cells(a: &PipelineScoreTable, b: &PipelineScoreTable) -> Result<(Vec<ScoreCell>, Vec<ScoreCell>)> {
    let mut ra: Vec<&ScoreRow> = a.rows.iter().collect();
    let mut rb: Vec<&ScoreRow> = b.rows.iter().collect();
    ra.sort_by(|x, y| x.key().cmp(&y.key()));
    rb.sort_by(|x, y| x.key().cmp(&y.key()));
    let describe = |r: &ScoreRow| format!("dataset {}, subject {}, session {}, fold {}", r.dataset, r.subject, r.session, r.fold);
    for i in 0..ra.len().max(rb.len()) {
        match (ra.get(i), rb.get(i)) {
            (Some(x), Some(y)) if x.key() == y.key() => {}
            (Some(x), Some(y)) => {
                let (r, has, lacks) = if x.key() < y.key() { (x, &a.pipeline, &b.pipeline) } else { (y, &b.pipeline, &a.pipeline) };
                return Err(EvalError::InvalidInput(format!("cell mismatch: {} is in {has} but not in {lacks}", describe(r))));
            }
            (Some(x), None) => {
                return Err(EvalError::InvalidInput(format!("cell mismatch: {} is in {} but not in {}", describe(x), a.pipeline, b.pipeline)))
            }
            (None, Some(y)) => {
                return Err(EvalError::InvalidInput(format!("cell mismatch: {} is in {} but not in {}", describe(y), b.pipeline, a.pipeline)))
            }
            (None, None) => unreachable!(),
        }
    }
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    for (x, y) in ra.iter().zip(&rb) {
        if let (Some(p), Some(q)) = (x.auc, y.auc) {
            ca.push(cell(x, p));
            cb.push(cell(y, q));
        }
    }
    Ok((ca, cb))
}
