//! Covariance classifiers: minimum distance to mean (MDM), minimum distance
//! to mean field (MDMF), mean field with LDA on squared distances (MF), and
//! logistic regression in tangent space (TS+LR).
//!
//! Binary decision scores are oriented so that higher means class 1. Ties in
//! the predicted label go to the lower class index.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::linalg;
use crate::means::{build_mean_field, geometric_mean, rpme_clean, MeanField, RobustConfig, SolverConfig, WarmStart};
use crate::scalar::Real;
use crate::spd::{distance, squared_distance, SpdMatrix};

/// Continuous output of a classifier for one trial.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionScore {
    /// Two classes: a single score, higher meaning class 1.
    Binary(f64),
    /// More classes: one score per class, higher meaning more likely.
    PerClass(Vec<f64>),
}

impl DecisionScore {
    /// The binary score, if this is one.
    pub fn binary(&self) -> Option<f64> {
        match self {
            DecisionScore::Binary(s) => Some(*s),
            DecisionScore::PerClass(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub score: DecisionScore,
}

/// Index of the first minimum.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Index of the first maximum.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Prediction from per-class distances (smaller is closer).
fn from_distances(d: Vec<f64>) -> Prediction {
    let label = argmin(&d);
    let score = if d.len() == 2 {
        DecisionScore::Binary(d[0] - d[1])
    } else {
        DecisionScore::PerClass(d.iter().map(|x| -x).collect())
    };
    Prediction { label, score }
}

/// Prediction from per-class discriminants (larger is more likely).
fn from_discriminants(g: Vec<f64>) -> Prediction {
    let label = argmax(&g);
    let score = if g.len() == 2 {
        DecisionScore::Binary(g[1] - g[0])
    } else {
        DecisionScore::PerClass(g)
    };
    Prediction { label, score }
}

/// Groups trials by label. Labels must be `0..K` with every class present,
/// `K ≥ 2`, at least two trials per class and a common dimension.
pub fn split_by_class<T: Real>(covs: &[SpdMatrix<T>], labels: &[usize]) -> Result<Vec<Vec<SpdMatrix<T>>>> {
    if covs.len() != labels.len() {
        return Err(Error::invalid(format!("{} matrices but {} labels", covs.len(), labels.len())));
    }
    let dim = covs.first().ok_or_else(|| Error::invalid("no training trials"))?.dim();
    if covs.iter().any(|c| c.dim() != dim) {
        return Err(Error::invalid("training matrices differ in dimension"));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<SpdMatrix<T>>> = vec![Vec::new(); n_classes];
    for (c, &l) in covs.iter().zip(labels) {
        groups[l].push(c.clone());
    }
    if n_classes < 2 {
        return Err(Error::invalid("at least two classes are needed"));
    }
    if let Some(c) = groups.iter().position(|g| g.len() < 2) {
        return Err(Error::invalid(format!(
            "class {c} has {} training trials, at least 2 are needed",
            groups[c].len()
        )));
    }
    Ok(groups)
}

fn check_dim(expected: usize, c_dim: usize) -> Result<()> {
    if expected != c_dim {
        return Err(Error::invalid(format!("model has dim {expected}, trial has dim {c_dim}")));
    }
    Ok(())
}

/// One geometric mean per class.
#[derive(Debug, Clone)]
pub struct MdmModel<T: Real> {
    pub means: Vec<SpdMatrix<T>>,
    /// Per-class indices (within the class) kept by robust estimation.
    pub kept: Option<Vec<Vec<usize>>>,
}

pub fn mdm_fit<T: Real>(
    covs: &[SpdMatrix<T>],
    labels: &[usize],
    cfg: &SolverConfig,
    robust: Option<&RobustConfig>,
) -> Result<MdmModel<T>> {
    let groups = split_by_class(covs, labels)?;
    let mut means = Vec::with_capacity(groups.len());
    let mut kept = Vec::new();
    for g in &groups {
        match robust {
            Some(r) => {
                let out = rpme_clean(g, r, cfg)?;
                means.push(out.mean.mean);
                kept.push(out.kept);
            }
            None => means.push(geometric_mean(g, None, None, cfg)?.mean),
        }
    }
    Ok(MdmModel {
        means,
        kept: robust.map(|_| kept),
    })
}

/// Nearest class mean; binary score `d(C, M₀) − d(C, M₁)`.
pub fn mdm_score<T: Real>(model: &MdmModel<T>, c: &SpdMatrix<T>) -> Result<Prediction> {
    check_dim(model.means[0].dim(), c.dim())?;
    let d = model
        .means
        .iter()
        .map(|m| distance(m, c).map(|x| x.as_f64()))
        .collect::<Result<Vec<_>>>()?;
    Ok(from_distances(d))
}

pub fn mdmf_fit<T: Real>(
    covs: &[SpdMatrix<T>],
    labels: &[usize],
    grid: &[f64],
    cfg: &SolverConfig,
    robust: Option<&RobustConfig>,
    warm: WarmStart,
) -> Result<MeanField<T>> {
    let groups = split_by_class(covs, labels)?;
    build_mean_field(&groups, grid, cfg, robust, warm)
}

/// Per class, the distance to the nearest mean of its field; binary score
/// `m₀ − m₁`.
pub fn mdmf_score<T: Real>(field: &MeanField<T>, c: &SpdMatrix<T>) -> Result<Prediction> {
    check_dim(field.dim(), c.dim())?;
    let d = field
        .classes
        .iter()
        .map(|class| {
            class
                .entries
                .iter()
                .map(|e| distance(&e.mean, c).map(|x| x.as_f64()))
                .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(from_distances(d))
}

/// Squared distances of `c` to every mean of the field, class-major then
/// ascending `h`.
pub fn distance_features<T: Real>(field: &MeanField<T>, c: &SpdMatrix<T>) -> Result<Array1<f64>> {
    check_dim(field.dim(), c.dim())?;
    field
        .means()
        .map(|m| squared_distance(m, c).map(|x| x.as_f64()))
        .collect::<Result<Vec<_>>>()
        .map(Array1::from)
}

/// Linear discriminant analysis with a pooled, ridge-regularized covariance
/// and training-frequency priors.
#[derive(Debug, Clone)]
pub struct LdaModel {
    pub class_means: Vec<Array1<f64>>,
    pub pooled_covariance: Array2<f64>,
    pub priors: Vec<f64>,
    /// `Σ⁻¹ μ_c` per class.
    weights: Vec<Array1<f64>>,
    /// `−½ μ_cᵀ Σ⁻¹ μ_c + log prior_c` per class.
    offsets: Vec<f64>,
}

/// Relative size of the ridge added to the pooled covariance:
/// `Σ + LDA_RIDGE · tr(Σ)/k · I` for `k` features.
pub const LDA_RIDGE: f64 = 1e-9;

impl LdaModel {
    /// `features` is `n × k`; `labels` in `0..n_classes`, every class present.
    pub fn fit(features: &Array2<f64>, labels: &[usize], n_classes: usize) -> Result<Self> {
        let (n, k) = features.dim();
        if labels.len() != n {
            return Err(Error::invalid("features and labels differ in length"));
        }
        if n_classes < 2 || labels.iter().any(|&l| l >= n_classes) {
            return Err(Error::invalid("labels must lie in 0..n_classes with n_classes >= 2"));
        }
        let mut counts = vec![0usize; n_classes];
        let mut sums = vec![Array1::<f64>::zeros(k); n_classes];
        for (row, &l) in features.rows().into_iter().zip(labels) {
            counts[l] += 1;
            sums[l] += &row;
        }
        if let Some(c) = counts.iter().position(|&m| m == 0) {
            return Err(Error::invalid(format!("class {c} has no training samples")));
        }
        let class_means: Vec<Array1<f64>> = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &m)| s / m as f64)
            .collect();
        let mut scatter = Array2::<f64>::zeros((k, k));
        for (row, &l) in features.rows().into_iter().zip(labels) {
            let d = (&row - &class_means[l]).insert_axis(Axis(1));
            scatter += &d.dot(&d.t());
        }
        let dof = if n > n_classes { n - n_classes } else { n };
        let mut pooled = scatter / dof as f64;
        let ridge = LDA_RIDGE * pooled.diag().sum() / k as f64;
        for i in 0..k {
            pooled[[i, i]] += ridge;
        }
        let chol = linalg::cholesky(&pooled.view())
            .map_err(|_| Error::numerical("LDA pooled covariance is singular after the ridge"))?;
        let priors: Vec<f64> = counts.iter().map(|&m| m as f64 / n as f64).collect();
        let weights: Vec<Array1<f64>> = class_means.iter().map(|mu| linalg::cholesky_solve(&chol, mu)).collect();
        let offsets = class_means
            .iter()
            .zip(&weights)
            .zip(&priors)
            .map(|((mu, w), p)| -0.5 * mu.dot(w) + p.ln())
            .collect();
        Ok(Self {
            class_means,
            pooled_covariance: pooled,
            priors,
            weights,
            offsets,
        })
    }

    /// `g_c(x) = xᵀ Σ⁻¹ μ_c − ½ μ_cᵀ Σ⁻¹ μ_c + log prior_c` for every class.
    pub fn discriminants(&self, x: &Array1<f64>) -> Result<Vec<f64>> {
        if x.len() != self.class_means[0].len() {
            return Err(Error::invalid(format!(
                "LDA expects {} features, got {}",
                self.class_means[0].len(),
                x.len()
            )));
        }
        Ok(self.weights.iter().zip(&self.offsets).map(|(w, o)| x.dot(w) + o).collect())
    }

    pub fn predict(&self, x: &Array1<f64>) -> Result<Prediction> {
        self.discriminants(x).map(from_discriminants)
    }
}

/// Mean field plus LDA on squared distances to its means.
#[derive(Debug, Clone)]
pub struct MfModel<T: Real> {
    pub field: MeanField<T>,
    pub lda: LdaModel,
}

pub fn mf_fit<T: Real>(
    covs: &[SpdMatrix<T>],
    labels: &[usize],
    grid: &[f64],
    cfg: &SolverConfig,
    robust: Option<&RobustConfig>,
    warm: WarmStart,
) -> Result<MfModel<T>> {
    let field = mdmf_fit(covs, labels, grid, cfg, robust, warm)?;
    let k = field.n_classes() * field.means_per_class();
    let mut features = Array2::<f64>::zeros((covs.len(), k));
    for (i, c) in covs.iter().enumerate() {
        features.row_mut(i).assign(&distance_features(&field, c)?);
    }
    let lda = LdaModel::fit(&features, labels, field.n_classes())?;
    Ok(MfModel { field, lda })
}

/// LDA on the distance features; binary score `g₁ − g₀`.
pub fn mf_score<T: Real>(model: &MfModel<T>, c: &SpdMatrix<T>) -> Result<Prediction> {
    model.lda.predict(&distance_features(&model.field, c)?)
}

/// Upper triangle (row-major) of `log(R^{-1/2} C R^{-1/2})` with the
/// off-diagonal entries scaled by `√2`, so its Euclidean norm is `d(C, R)`.
pub fn tangent_map<T: Real>(c: &SpdMatrix<T>, reference: &SpdMatrix<T>) -> Result<Array1<T>> {
    check_dim(reference.dim(), c.dim())?;
    let n = c.dim();
    let s = linalg::sym_eig(&reference.whiten(c).view())?;
    if s.values.iter().any(|&l| !(l > T::zero())) {
        return Err(Error::numerical("whitened matrix lost positivity"));
    }
    let log = s.map(|l| l.ln());
    let root2 = T::lit(std::f64::consts::SQRT_2);
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        out.push(log[[i, i]]);
        for j in (i + 1)..n {
            out.push(root2 * log[[i, j]]);
        }
    }
    Ok(Array1::from(out))
}

/// Binary L2-penalized logistic regression with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub coef: Array1<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

/// Penalty strength of the TS+LR baseline.
pub const LR_PENALTY: f64 = 1.0;
/// Gradient-norm target of the logistic regression solver.
pub const LR_GRADIENT_TOL: f64 = 1e-8;
const LR_MAX_ITERATIONS: usize = 100;

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    /// Minimizes `Σᵢ log(1 + exp(−sᵢ zᵢ)) + (penalty/2) ‖w‖²` with
    /// `zᵢ = w·xᵢ + b` and `sᵢ = ±1`, by Newton's method with backtracking,
    /// until the gradient norm is at most [`LR_GRADIENT_TOL`].
    pub fn fit(x: &Array2<f64>, y: &[bool], penalty: f64) -> Result<Self> {
        let (n, k) = x.dim();
        if y.len() != n || n == 0 {
            return Err(Error::invalid("features and targets differ in length"));
        }
        if !(penalty > 0.0) {
            return Err(Error::invalid("penalty must be > 0"));
        }
        // augmented design [x, 1], parameter θ = [w, b]
        let mut theta = Array1::<f64>::zeros(k + 1);
        let objective = |theta: &Array1<f64>| -> f64 {
            let w = theta.slice(ndarray::s![..k]);
            let b = theta[k];
            let z = x.dot(&w) + b;
            let loss: f64 = z.iter().zip(y).map(|(&zi, &yi)| log1p_exp(if yi { -zi } else { zi })).sum();
            loss + 0.5 * penalty * w.dot(&w)
        };
        let mut f = objective(&theta);
        for it in 0..=LR_MAX_ITERATIONS {
            let w = theta.slice(ndarray::s![..k]).to_owned();
            let z = x.dot(&w) + theta[k];
            let p: Vec<f64> = z.iter().map(|&zi| sigmoid(zi)).collect();
            let mut grad = Array1::<f64>::zeros(k + 1);
            let mut hess = Array2::<f64>::zeros((k + 1, k + 1));
            for i in 0..n {
                let r = p[i] - if y[i] { 1.0 } else { 0.0 };
                let v = p[i] * (1.0 - p[i]);
                let xi = x.row(i);
                for a in 0..k {
                    grad[a] += r * xi[a];
                    for b in 0..=a {
                        hess[[a, b]] += v * xi[a] * xi[b];
                    }
                    hess[[k, a]] += v * xi[a];
                }
                grad[k] += r;
                hess[[k, k]] += v;
            }
            for a in 0..k {
                grad[a] += penalty * w[a];
                hess[[a, a]] += penalty;
            }
            for a in 0..=k {
                for b in 0..a {
                    hess[[b, a]] = hess[[a, b]];
                }
            }
            let gnorm = grad.dot(&grad).sqrt();
            if gnorm <= LR_GRADIENT_TOL {
                return Ok(Self {
                    coef: w,
                    intercept: theta[k],
                    iterations: it,
                });
            }
            if it == LR_MAX_ITERATIONS {
                return Err(Error::ConvergenceFailure {
                    iterations: it,
                    residual: gnorm,
                    last_iterate: None,
                });
            }
            // the intercept direction can be flat when every p is 0 or 1
            hess[[k, k]] += 1e-12;
            let chol = linalg::cholesky(&hess.view())?;
            let step = linalg::cholesky_solve(&chol, &grad);
            let slope = grad.dot(&step);
            let mut t = 1.0;
            loop {
                let candidate = &theta - &(&step * t);
                let fc = objective(&candidate);
                if fc <= f - 1e-4 * t * slope || t < 1e-10 {
                    theta = candidate;
                    f = fc;
                    break;
                }
                t *= 0.5;
            }
        }
        unreachable!("the loop returns on its last iteration")
    }

    /// Linear logit `w·x + b`.
    pub fn logit(&self, x: &Array1<f64>) -> f64 {
        x.dot(&self.coef) + self.intercept
    }
}

/// Per-feature standardization with training statistics. Constant features
/// are centred but not scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
        Self { mean, scale }
    }

    pub fn transform(&self, x: &Array1<f64>) -> Array1<f64> {
        (x - &self.mean) / &self.scale
    }

    pub fn transform_rows(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.mean) / &self.scale
    }
}

/// Tangent-space logistic regression: one model for two classes, one per
/// class (one-vs-rest) otherwise.
#[derive(Debug, Clone)]
pub struct TsLrModel<T: Real> {
    pub reference: SpdMatrix<T>,
    pub scaler: Standardizer,
    pub models: Vec<LogisticModel>,
}

fn tangent_features<T: Real>(c: &SpdMatrix<T>, reference: &SpdMatrix<T>) -> Result<Array1<f64>> {
    Ok(tangent_map(c, reference)?.mapv(|v| v.as_f64()))
}

pub fn ts_lr_fit<T: Real>(covs: &[SpdMatrix<T>], labels: &[usize], cfg: &SolverConfig) -> Result<TsLrModel<T>> {
    let groups = split_by_class(covs, labels)?;
    let reference = geometric_mean(covs, None, None, cfg)?.mean;
    let dim = reference.dim();
    let mut x = Array2::<f64>::zeros((covs.len(), dim * (dim + 1) / 2));
    for (i, c) in covs.iter().enumerate() {
        x.row_mut(i).assign(&tangent_features(c, &reference)?);
    }
    let scaler = Standardizer::fit(&x);
    let z = scaler.transform_rows(&x);
    let models = if groups.len() == 2 {
        let y: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
        vec![LogisticModel::fit(&z, &y, LR_PENALTY)?]
    } else {
        (0..groups.len())
            .map(|c| {
                let y: Vec<bool> = labels.iter().map(|&l| l == c).collect();
                LogisticModel::fit(&z, &y, LR_PENALTY)
            })
            .collect::<Result<_>>()?
    };
    Ok(TsLrModel {
        reference,
        scaler,
        models,
    })
}

/// Binary: the logit of class 1 (label 1 iff it is positive). Multiclass:
/// the one-vs-rest logits.
pub fn ts_lr_score<T: Real>(model: &TsLrModel<T>, c: &SpdMatrix<T>) -> Result<Prediction> {
    let z = model.scaler.transform(&tangent_features(c, &model.reference)?);
    if model.models.len() == 1 {
        let s = model.models[0].logit(&z);
        return Ok(Prediction {
            label: usize::from(s > 0.0),
            score: DecisionScore::Binary(s),
        });
    }
    let logits: Vec<f64> = model.models.iter().map(|m| m.logit(&z)).collect();
    Ok(Prediction {
        label: argmax(&logits),
        score: DecisionScore::PerClass(logits),
    })
}

/// The classification pipelines compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Mdm,
    Mdmf,
    Mf,
    MfRpme,
    TsLr,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Mdm, Method::Mdmf, Method::Mf, Method::MfRpme, Method::TsLr];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mdm => "MDM",
            Method::Mdmf => "MDMF",
            Method::Mf => "MF",
            Method::MfRpme => "MF_RPME",
            Method::TsLr => "TS+LR",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings shared by every method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub grid: Vec<f64>,
    pub solver: SolverConfig,
    pub robust: RobustConfig,
    pub warm: WarmStart,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            grid: crate::means::DEFAULT_H_GRID.to_vec(),
            solver: SolverConfig::default(),
            robust: RobustConfig::default(),
            warm: WarmStart::Chained,
        }
    }
}

/// Any fitted classifier.
#[derive(Debug, Clone)]
pub enum Model<T: Real> {
    Mdm(MdmModel<T>),
    Mdmf(MeanField<T>),
    Mf(MfModel<T>),
    TsLr(TsLrModel<T>),
}

impl<T: Real> Model<T> {
    pub fn fit(method: Method, covs: &[SpdMatrix<T>], labels: &[usize], cfg: &MethodConfig) -> Result<Self> {
        Ok(match method {
            Method::Mdm => Model::Mdm(mdm_fit(covs, labels, &cfg.solver, None)?),
            Method::Mdmf => Model::Mdmf(mdmf_fit(covs, labels, &cfg.grid, &cfg.solver, None, cfg.warm)?),
            Method::Mf => Model::Mf(mf_fit(covs, labels, &cfg.grid, &cfg.solver, None, cfg.warm)?),
            Method::MfRpme => Model::Mf(mf_fit(
                covs,
                labels,
                &cfg.grid,
                &cfg.solver,
                Some(&cfg.robust),
                cfg.warm,
            )?),
            Method::TsLr => Model::TsLr(ts_lr_fit(covs, labels, &cfg.solver)?),
        })
    }

    pub fn score(&self, c: &SpdMatrix<T>) -> Result<Prediction> {
        match self {
            Model::Mdm(m) => mdm_score(m, c),
            Model::Mdmf(f) => mdmf_score(f, c),
            Model::Mf(m) => mf_score(m, c),
            Model::TsLr(m) => ts_lr_score(m, c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::geodesic;
    use ndarray::array;

    fn diag(d: &[f64]) -> SpdMatrix<f64> {
        SpdMatrix::from_diag(d).unwrap()
    }

    #[test]
    fn mdm_on_identical_trials_returns_them() {
        let a = diag(&[1.0, 2.0]);
        let b = SpdMatrix::new(array![[3.0, 0.5], [0.5, 1.0]]).unwrap();
        let covs = vec![a.clone(), a.clone(), b.clone(), b.clone()];
        let m = mdm_fit(&covs, &[0, 0, 1, 1], &SolverConfig::default(), None).unwrap();
        assert!(linalg::frobenius(&(m.means[0].matrix() - a.matrix()).view()) < 1e-12);
        assert!(linalg::frobenius(&(m.means[1].matrix() - b.matrix()).view()) < 1e-12);
        let p = mdm_score(&m, &a).unwrap();
        assert_eq!(p.label, 0);
        assert!(p.score.binary().unwrap() < 0.0);
    }

    #[test]
    fn equidistant_trial_ties_to_class_zero() {
        let m = MdmModel {
            means: vec![diag(&[1.0, 4.0]), diag(&[4.0, 1.0])],
            kept: None,
        };
        let p = mdm_score(&m, &diag(&[2.0, 2.0])).unwrap();
        assert_eq!(p.label, 0);
        assert_eq!(p.score, DecisionScore::Binary(0.0));
    }

    #[test]
    fn geodesic_point_near_class_one() {
        let m0 = SpdMatrix::new(array![[2.0, 0.3], [0.3, 1.0]]).unwrap();
        let m1 = SpdMatrix::new(array![[1.0, -0.2], [-0.2, 3.0]]).unwrap();
        let c = geodesic(&m0, &m1, 0.9).unwrap();
        let model = MdmModel {
            means: vec![m0.clone(), m1.clone()],
            kept: None,
        };
        let p = mdm_score(&model, &c).unwrap();
        assert_eq!(p.label, 1);
        // d(C, M₀) − d(C, M₁) = (0.9 − 0.1) d(M₀, M₁)
        let total = distance(&m0, &m1).unwrap();
        assert!((p.score.binary().unwrap() - 0.8 * total).abs() < 1e-10 * total);
    }

    #[test]
    fn mdm_rejects_single_class_and_small_classes() {
        let covs = vec![diag(&[1.0]), diag(&[2.0]), diag(&[3.0])];
        assert!(mdm_fit(&covs, &[0, 0, 0], &SolverConfig::default(), None).is_err());
        assert!(mdm_fit(&covs, &[0, 0, 1], &SolverConfig::default(), None).is_err());
    }

    #[test]
    fn mdm_dimension_mismatch() {
        let m = MdmModel {
            means: vec![diag(&[1.0, 1.0]), diag(&[2.0, 2.0])],
            kept: None,
        };
        assert!(matches!(mdm_score(&m, &diag(&[1.0])), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn tangent_vector_of_diagonal() {
        let e = std::f64::consts::E;
        let v = tangent_map(&diag(&[e, e * e]), &SpdMatrix::identity(2)).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14);
        assert!(v[1].abs() < 1e-14);
        assert!((v[2] - 2.0).abs() < 1e-14);
        let z = tangent_map(&diag(&[3.0, 5.0]), &diag(&[3.0, 5.0])).unwrap();
        assert!(z.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn tangent_off_diagonal_scaling() {
        // log of [[a, b], [b, a]] = [[½ log(a²−b²), ½ log((a+b)/(a−b))], ...]
        let (a, b) = (2.0f64, 1.0f64);
        let v = tangent_map(&SpdMatrix::new(array![[a, b], [b, a]]).unwrap(), &SpdMatrix::identity(2)).unwrap();
        let off = 0.5 * ((a + b) / (a - b)).ln();
        assert!((v[1] - std::f64::consts::SQRT_2 * off).abs() < 1e-13);
        assert!((v[0] - 0.5 * (a * a - b * b).ln()).abs() < 1e-13);
    }

    /// Two features, integer data, discriminants by hand:
    /// μ₀ = (1, 2), μ₁ = (3, 2), pooled scatter / (N − K).
    #[test]
    fn lda_matches_hand_computation() {
        let x = array![[0.0, 1.0], [2.0, 3.0], [2.0, 1.0], [4.0, 3.0]];
        let labels = [0, 0, 1, 1];
        let lda = LdaModel::fit(&x, &labels, 2).unwrap();
        // deviations: (−1,−1), (1,1), (−1,−1), (1,1) → scatter [[4,4],[4,4]] / 2
        let ridge = LDA_RIDGE * 4.0 / 2.0;
        let s = [[2.0 + ridge, 2.0], [2.0, 2.0 + ridge]];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        let solve = |v: [f64; 2]| [inv[0][0] * v[0] + inv[0][1] * v[1], inv[1][0] * v[0] + inv[1][1] * v[1]];
        let (mu0, mu1) = ([1.0, 2.0], [3.0, 2.0]);
        let (w0, w1) = (solve(mu0), solve(mu1));
        let q = [1.5, 2.5];
        let g = |w: [f64; 2], mu: [f64; 2]| {
            q[0] * w[0] + q[1] * w[1] - 0.5 * (mu[0] * w[0] + mu[1] * w[1]) + 0.5f64.ln()
        };
        let expect = g(w1, mu1) - g(w0, mu0);
        let got = lda.predict(&Array1::from(q.to_vec())).unwrap().score.binary().unwrap();
        assert!((got - expect).abs() <= 1e-6 * expect.abs().max(1.0), "{got} vs {expect}");
    }

    #[test]
    fn lda_equal_class_means_scores_zero() {
        let x = array![[0.0, 1.0], [2.0, 3.0], [2.0, 3.0], [0.0, 1.0]];
        let lda = LdaModel::fit(&x, &[0, 0, 1, 1], 2).unwrap();
        let p = lda.predict(&array![5.0, -1.0]).unwrap();
        assert!(p.score.binary().unwrap().abs() < 1e-9);
        assert_eq!(p.label, 0);
    }

    #[test]
    fn lda_class_mean_goes_to_its_class() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [5.0, 6.0], [6.0, 5.0]];
        let lda = LdaModel::fit(&x, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(lda.predict(&lda.class_means[0]).unwrap().label, 0);
        assert_eq!(lda.predict(&lda.class_means[1]).unwrap().label, 1);
    }

    #[test]
    fn logistic_on_constant_features_fits_prior_log_odds() {
        let x = Array2::<f64>::zeros((5, 3));
        let y = [true, false, false, true, true];
        let m = LogisticModel::fit(&x, &y, 1.0).unwrap();
        assert!(m.coef.iter().all(|c| c.abs() < 1e-12));
        assert!((m.intercept - (3.0f64 / 2.0).ln()).abs() < 1e-8);
    }

    #[test]
    fn logistic_separates_separable_data_with_finite_weights() {
        let x = array![[-2.0], [-1.0], [1.0], [2.0]];
        let m = LogisticModel::fit(&x, &[false, false, true, true], 1.0).unwrap();
        assert!(m.coef[0] > 0.0 && m.coef[0].is_finite());
        assert!(m.logit(&array![-1.0]) < 0.0 && m.logit(&array![1.0]) > 0.0);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::from_name(m.name()), Some(m));
        }
        assert_eq!(Method::from_name("mf_rpme"), Some(Method::MfRpme));
    }
}
