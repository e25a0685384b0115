use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{invalid, liptak_combine, paired_test, smd, Result, TestMethod};

/// One evaluation cell: the score of a pipeline on one fold of one session
/// of one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCell {
    pub dataset: String,
    pub subject: String,
    pub session: String,
    pub fold: usize,
    pub score: f64,
}

impl ScoreCell {
    fn key(&self) -> (&str, &str, &str, usize) {
        (&self.dataset, &self.subject, &self.session, self.fold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEffect {
    pub dataset: String,
    pub n_subjects: usize,
    pub smd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub degenerate_effect: bool,
    pub test: TestMethod,
    pub p_value: f64,
    /// `√n_subjects`.
    pub weight: f64,
}

/// Version of the meta-report JSON layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Effect of pipeline B over pipeline A per dataset and combined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaReport {
    pub schema_version: u32,
    pub pipeline_a: String,
    pub pipeline_b: String,
    /// Datasets in lexicographic order.
    pub datasets: Vec<DatasetEffect>,
    /// `Σ wᵢ SMDᵢ / Σ wᵢ`.
    pub meta_smd: f64,
    /// Liptak combination of the dataset p-values with the same weights.
    pub combined_p: f64,
}

/// Per dataset, per subject: mean over folds within each session, then mean
/// over sessions.
fn subject_scores(cells: &[&ScoreCell]) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut nested: BTreeMap<&str, BTreeMap<&str, BTreeMap<&str, Vec<f64>>>> = BTreeMap::new();
    for c in cells {
        nested
            .entry(&c.dataset)
            .or_default()
            .entry(&c.subject)
            .or_default()
            .entry(&c.session)
            .or_default()
            .push(c.score);
    }
    nested
        .into_iter()
        .map(|(dataset, subjects)| {
            let per_subject = subjects
                .into_iter()
                .map(|(subject, sessions)| {
                    let session_means: Vec<f64> = sessions
                        .values()
                        .map(|folds| folds.iter().sum::<f64>() / folds.len() as f64)
                        .collect();
                    let score = session_means.iter().sum::<f64>() / session_means.len() as f64;
                    (subject.to_string(), score)
                })
                .collect();
            (dataset.to_string(), per_subject)
        })
        .collect()
}

fn sorted_cells(cells: &[ScoreCell]) -> Vec<&ScoreCell> {
    let mut v: Vec<&ScoreCell> = cells.iter().collect();
    v.sort_by(|x, y| x.key().cmp(&y.key()));
    v
}

fn describe(c: &ScoreCell) -> String {
    format!(
        "dataset {}, subject {}, session {}, fold {}",
        c.dataset, c.subject, c.session, c.fold
    )
}

/// Compares pipeline B against pipeline A over the cells they share.
///
/// Both inputs must cover exactly the same `(dataset, subject, session,
/// fold)` cells. Each dataset gets a paired SMD and a one-sided test of
/// `b − a > 0` on the per-subject scores (exact below 20 subjects, signed
/// rank otherwise); datasets are combined with weights `√n_subjects`.
pub fn meta_compare(
    name_a: &str,
    cells_a: &[ScoreCell],
    name_b: &str,
    cells_b: &[ScoreCell],
) -> Result<MetaReport> {
    if cells_a.is_empty() || cells_b.is_empty() {
        return Err(invalid("no score cells to compare"));
    }
    if let Some(c) = cells_a.iter().chain(cells_b).find(|c| !c.score.is_finite()) {
        return Err(invalid(format!("non-finite score at {}", describe(c))));
    }
    let (sa, sb) = (sorted_cells(cells_a), sorted_cells(cells_b));
    for (name, s) in [(name_a, &sa), (name_b, &sb)] {
        if let Some(w) = s.windows(2).find(|w| w[0].key() == w[1].key()) {
            return Err(invalid(format!("{name} has duplicate cell {}", describe(w[0]))));
        }
    }
    for i in 0..sa.len().max(sb.len()) {
        match (sa.get(i), sb.get(i)) {
            (Some(x), Some(y)) if x.key() == y.key() => {}
            (Some(x), Some(y)) => {
                let first = if x.key() < y.key() { (x, name_a, name_b) } else { (y, name_b, name_a) };
                return Err(invalid(format!(
                    "cell mismatch: {} is in {} but not in {}",
                    describe(first.0),
                    first.1,
                    first.2
                )));
            }
            (Some(x), None) => {
                return Err(invalid(format!("cell mismatch: {} is in {name_a} but not in {name_b}", describe(x))))
            }
            (None, Some(y)) => {
                return Err(invalid(format!("cell mismatch: {} is in {name_b} but not in {name_a}", describe(y))))
            }
            (None, None) => unreachable!(),
        }
    }

    let (ma, mb) = (subject_scores(&sa), subject_scores(&sb));
    let mut datasets = Vec::with_capacity(ma.len());
    for ((dataset, subj_a), subj_b) in ma.iter().zip(mb.values()) {
        let a: Vec<f64> = subj_a.values().copied().collect();
        let b: Vec<f64> = subj_b.values().copied().collect();
        let n = a.len();
        if n < 2 {
            return Err(invalid(format!("dataset {dataset} has {n} subject, at least 2 are needed")));
        }
        let effect = smd(&a, &b)?;
        let diffs: Vec<f64> = b.iter().zip(&a).map(|(y, x)| y - x).collect();
        let test = paired_test(&diffs)?;
        datasets.push(DatasetEffect {
            dataset: dataset.clone(),
            n_subjects: n,
            smd: effect.value,
            ci_low: effect.ci_low,
            ci_high: effect.ci_high,
            degenerate_effect: effect.degenerate,
            test: test.method,
            p_value: test.p_value,
            weight: (n as f64).sqrt(),
        });
    }
    let weights: Vec<f64> = datasets.iter().map(|d| d.weight).collect();
    let p: Vec<f64> = datasets.iter().map(|d| d.p_value).collect();
    let meta_smd = datasets.iter().map(|d| d.weight * d.smd).sum::<f64>() / weights.iter().sum::<f64>();
    Ok(MetaReport {
        schema_version: REPORT_SCHEMA_VERSION,
        pipeline_a: name_a.to_string(),
        pipeline_b: name_b.to_string(),
        datasets,
        meta_smd,
        combined_p: liptak_combine(&p, &weights)?,
    })
}
