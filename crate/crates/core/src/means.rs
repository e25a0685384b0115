//! Means of sets of SPD matrices.
//!
//! The power mean `P_h` of `{Cᵢ}` with weights `wᵢ` is the unique SPD solution
//! of `P = Σ wᵢ (P #_h Cᵢ)` for `h ∈ (0, 1]`, and `P_{-h}({Cᵢ}) = P_h({Cᵢ⁻¹})⁻¹`.
//! `h = 1` and `h = −1` are the arithmetic and harmonic means; `h → 0` gives
//! the geometric (Karcher) mean.
//!
//! Power means are solved with the accelerated MPM fixed-point iteration,
//! which works on the inverse square-root factor `X` (`P⁻¹ = XᵀX`):
//!
//! ```text
//! H = Σ wᵢ (X Cᵢ Xᵀ)^h
//! X ← H^(−φ) X,   φ = 0.375 / h
//! ```
//!
//! A fixed point has `H = I`, which is exactly the power-mean equation.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{self, frobenius};
use crate::scalar::Real;
use crate::spd::{distance, SpdMatrix};

/// Convergence parameters shared by all iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_iterations: 150,
        }
    }
}

impl SolverConfig {
    pub fn new(tolerance: f64, max_iterations: usize) -> Result<Self> {
        let cfg = Self {
            tolerance,
            max_iterations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::invalid(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        Ok(())
    }
}

/// Exponent and (optional) weights of a mean. Absent weights mean uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSpec {
    pub h: f64,
    pub weights: Option<Vec<f64>>,
}

impl MeanSpec {
    pub fn uniform(h: f64) -> Self {
        Self { h, weights: None }
    }

    pub fn weighted(h: f64, weights: Vec<f64>) -> Self {
        Self {
            h,
            weights: Some(weights),
        }
    }
}

/// Outcome of an iterative mean computation.
#[derive(Debug, Clone)]
pub struct MeanEstimate<T: Real> {
    pub mean: SpdMatrix<T>,
    pub iterations: usize,
    /// Relative Frobenius change of the last step for power means, Karcher
    /// gradient norm for the geometric mean, 0 for closed forms.
    pub residual: f64,
}

impl<T: Real> MeanEstimate<T> {
    fn closed_form(mean: SpdMatrix<T>) -> Self {
        Self {
            mean,
            iterations: 0,
            residual: 0.0,
        }
    }
}

fn check_set<T: Real>(set: &[SpdMatrix<T>]) -> Result<usize> {
    let first = set.first().ok_or_else(|| Error::invalid("empty matrix set"))?;
    let dim = first.dim();
    if let Some(bad) = set.iter().position(|c| c.dim() != dim) {
        return Err(Error::invalid(format!(
            "matrix {bad} has dim {} but the set has dim {dim}",
            set[bad].dim()
        )));
    }
    Ok(dim)
}

/// Validates explicit weights or produces uniform ones.
pub fn resolve_weights<T: Real>(n: usize, weights: Option<&[f64]>) -> Result<Vec<T>> {
    match weights {
        None => Ok(vec![T::lit(1.0 / n as f64); n]),
        Some(w) => {
            if w.len() != n {
                return Err(Error::invalid(format!("{} weights for {n} matrices", w.len())));
            }
            if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::invalid("weights must be positive"));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("weights sum to {sum}, expected 1")));
            }
            Ok(w.iter().map(|&x| T::lit(x)).collect())
        }
    }
}

fn weighted_sum<T: Real>(mats: impl Iterator<Item = Array2<T>>, w: &[T], dim: usize) -> Array2<T> {
    let mut acc = Array2::<T>::zeros((dim, dim));
    for (m, &wi) in mats.zip(w) {
        acc.scaled_add(wi, &m);
    }
    linalg::symmetrize(&acc)
}

/// `Σ wᵢ Cᵢ`.
pub fn arithmetic_mean<T: Real>(set: &[SpdMatrix<T>], weights: Option<&[f64]>) -> Result<SpdMatrix<T>> {
    let dim = check_set(set)?;
    let w = resolve_weights::<T>(set.len(), weights)?;
    SpdMatrix::new(weighted_sum(set.iter().map(|c| c.matrix().clone()), &w, dim))
}

/// `(Σ wᵢ Cᵢ⁻¹)⁻¹`.
pub fn harmonic_mean<T: Real>(set: &[SpdMatrix<T>], weights: Option<&[f64]>) -> Result<SpdMatrix<T>> {
    let dim = check_set(set)?;
    let w = resolve_weights::<T>(set.len(), weights)?;
    let inv_sum = weighted_sum(set.iter().map(|c| c.inverse().into_inner()), &w, dim);
    Ok(SpdMatrix::new(inv_sum)?.inverse())
}

fn relative_change<T: Real>(new: &Array2<T>, old: &Array2<T>) -> f64 {
    let num = frobenius(&(new - old).view()).as_f64();
    let den = frobenius(&old.view()).as_f64();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Power mean for `h ∈ (0, 1)` starting from `init`.
fn power_mean_positive<T: Real>(
    set: &[SpdMatrix<T>],
    w: &[T],
    h: f64,
    init: &SpdMatrix<T>,
    cfg: &SolverConfig,
) -> Result<MeanEstimate<T>> {
    let dim = init.dim();
    let phi = T::lit(-0.375 / h);
    let exponent = T::lit(h);
    let mut x = init.inv_sqrt_matrix().clone();
    let mut current = init.matrix().clone();
    let mut residual = f64::INFINITY;

    for it in 1..=cfg.max_iterations {
        let terms = set
            .iter()
            .map(|c| {
                let e = linalg::sym_eig(&linalg::congruence(&x.view(), &c.view()).view())?;
                Ok(e.map(|l| l.max(T::min_positive_value()).powf(exponent)))
            })
            .collect::<Result<Vec<_>>>()?;
        let big_h = weighted_sum(terms.into_iter(), w, dim);
        let step = linalg::sym_eig(&big_h.view())?.map(|l| l.powf(phi));
        x = step.dot(&x);

        let gram = linalg::symmetrize(&x.t().dot(&x));
        let next = SpdMatrix::new(gram)?.inverse();
        residual = relative_change(next.matrix(), &current);
        if residual <= cfg.tolerance {
            return Ok(MeanEstimate {
                mean: next,
                iterations: it,
                residual,
            });
        }
        current = next.into_inner();
    }
    Err(Error::ConvergenceFailure {
        iterations: cfg.max_iterations,
        residual,
        last_iterate: Some(current.mapv(|v| v.as_f64())),
    })
}

/// Power mean with exponent `h ∈ [−1, 1] \ {0}`.
///
/// `init` seeds the fixed point; without one the arithmetic mean is used for
/// `h > 0` and the harmonic mean for `h < 0`. The closed forms at `h = ±1`
/// ignore it.
pub fn power_mean<T: Real>(
    set: &[SpdMatrix<T>],
    spec: &MeanSpec,
    init: Option<&SpdMatrix<T>>,
    cfg: &SolverConfig,
) -> Result<MeanEstimate<T>> {
    cfg.validate()?;
    let dim = check_set(set)?;
    let h = spec.h;
    if !(h.abs() <= 1.0) || h == 0.0 {
        return Err(Error::invalid(format!("power mean exponent must be in [-1, 1] \\ {{0}}, got {h}")));
    }
    if let Some(i) = init {
        if i.dim() != dim {
            return Err(Error::invalid("initial estimate has the wrong dimension"));
        }
    }
    let w = resolve_weights::<T>(set.len(), spec.weights.as_deref())?;
    let weights = spec.weights.as_deref();
    if h == 1.0 {
        return Ok(MeanEstimate::closed_form(arithmetic_mean(set, weights)?));
    }
    if h == -1.0 {
        return Ok(MeanEstimate::closed_form(harmonic_mean(set, weights)?));
    }
    if h > 0.0 {
        let start = match init {
            Some(i) => i.clone(),
            None => arithmetic_mean(set, weights)?,
        };
        power_mean_positive(set, &w, h, &start, cfg)
    } else {
        // P_{-h}({C}) = P_h({C⁻¹})⁻¹
        let inverted: Vec<_> = set.iter().map(|c| c.inverse()).collect();
        let start = match init {
            Some(i) => i.inverse(),
            None => arithmetic_mean(&inverted, weights)?,
        };
        match power_mean_positive(&inverted, &w, -h, &start, cfg) {
            Ok(est) => Ok(MeanEstimate {
                mean: est.mean.inverse(),
                ..est
            }),
            Err(Error::ConvergenceFailure {
                iterations,
                residual,
                last_iterate,
            }) => Err(Error::ConvergenceFailure {
                iterations,
                residual,
                last_iterate: last_iterate
                    .and_then(|m| SpdMatrix::new(m).ok())
                    .map(|m| m.inverse().into_inner()),
            }),
            Err(e) => Err(e),
        }
    }
}

/// `Σ wᵢ log(G^{-1/2} Cᵢ G^{-1/2})`, the Riemannian gradient direction of the
/// Karcher cost at `G` (up to sign).
pub fn karcher_gradient<T: Real>(set: &[SpdMatrix<T>], w: &[T], g: &SpdMatrix<T>) -> Result<Array2<T>> {
    let logs = set
        .iter()
        .map(|c| Ok(linalg::sym_eig(&g.whiten(c).view())?.map(|l| l.ln())))
        .collect::<Result<Vec<_>>>()?;
    Ok(weighted_sum(logs.into_iter(), w, g.dim()))
}

/// Geometric (Karcher) mean by the Riemannian gradient flow
/// `G ← G^{1/2} exp(ϑ Σ wᵢ log(G^{-1/2} Cᵢ G^{-1/2})) G^{1/2}`.
///
/// The step `ϑ = 2 / Σ wᵢ ((κᵢ+1)/(κᵢ−1)) log κᵢ`, with `κᵢ` the condition
/// number of `G^{-1/2} Cᵢ G^{-1/2}`, is the one of Bini and Iannazzo. It tends
/// to 1 when the set is concentrated and shrinks on widely spread sets where
/// the unit step overshoots. Stops when the gradient norm is at most
/// `tolerance · dim`.
pub fn geometric_mean<T: Real>(
    set: &[SpdMatrix<T>],
    weights: Option<&[f64]>,
    init: Option<&SpdMatrix<T>>,
    cfg: &SolverConfig,
) -> Result<MeanEstimate<T>> {
    cfg.validate()?;
    let dim = check_set(set)?;
    let w = resolve_weights::<T>(set.len(), weights)?;
    if set.len() == 1 {
        return Ok(MeanEstimate::closed_form(set[0].clone()));
    }
    let mut g = match init {
        Some(i) if i.dim() == dim => i.clone(),
        Some(_) => return Err(Error::invalid("initial estimate has the wrong dimension")),
        None => arithmetic_mean(set, weights)?,
    };
    let threshold = cfg.tolerance * dim as f64;
    let mut norm = f64::INFINITY;
    for it in 1..=cfg.max_iterations {
        let mut grad = Array2::<T>::zeros((dim, dim));
        let mut curvature = 0.0;
        for (c, &wi) in set.iter().zip(&w) {
            let e = linalg::sym_eig(&g.whiten(c).view())?;
            let (hi, lo) = (e.values[0].as_f64(), e.values[dim - 1].as_f64());
            if !(lo > 0.0) {
                return Err(Error::numerical("whitened matrix lost positivity"));
            }
            let kappa = hi / lo;
            let k = if kappa - 1.0 < 1e-6 {
                2.0
            } else {
                (kappa + 1.0) / (kappa - 1.0) * kappa.ln()
            };
            curvature += wi.as_f64() * k;
            grad.scaled_add(wi, &e.map(|l| l.ln()));
        }
        let grad = linalg::symmetrize(&grad);
        norm = frobenius(&grad.view()).as_f64();
        if norm <= threshold {
            return Ok(MeanEstimate {
                mean: g,
                iterations: it,
                residual: norm,
            });
        }
        let step = T::lit(2.0 / curvature);
        let e = linalg::sym_eig(&(grad * step).view())?.map(|l| l.exp());
        g = SpdMatrix::new(linalg::congruence(&g.sqrt_matrix().view(), &e.view()))?;
    }
    Err(Error::ConvergenceFailure {
        iterations: cfg.max_iterations,
        residual: norm,
        last_iterate: Some(g.matrix().mapv(|v| v.as_f64())),
    })
}

/// The 11-point exponent grid `{±1, ±0.75, ±0.5, ±0.25, ±0.1, 0}`, ascending.
pub const DEFAULT_H_GRID: [f64; 11] = [-1.0, -0.75, -0.5, -0.25, -0.1, 0.0, 0.1, 0.25, 0.5, 0.75, 1.0];

/// Parameters of robust power-mean estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustConfig {
    pub z_threshold: f64,
    pub max_rounds: usize,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            z_threshold: 2.5,
            max_rounds: 4,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.z_threshold > 0.0) {
            return Err(Error::invalid("z_threshold must be > 0"));
        }
        if self.max_rounds == 0 {
            return Err(Error::invalid("max_rounds must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RobustOutcome<T: Real> {
    /// Indices (into the input) of the trials that survived, ascending.
    pub kept: Vec<usize>,
    /// Geometric mean of the kept trials.
    pub mean: MeanEstimate<T>,
    /// Number of geometric means computed.
    pub rounds: usize,
}

/// Iterated outlier rejection by standardized geometric distance.
///
/// Each round computes the geometric mean of the current set. Unless it is the
/// last allowed round, every trial whose z-scored distance to that mean
/// exceeds the threshold is dropped and the next round starts. The returned
/// mean is always the one of the returned set. Fewer than three trials, zero
/// spread, or a removal that would leave fewer than two trials end the
/// procedure.
pub fn rpme_clean<T: Real>(
    trials: &[SpdMatrix<T>],
    robust: &RobustConfig,
    cfg: &SolverConfig,
) -> Result<RobustOutcome<T>> {
    robust.validate()?;
    check_set(trials)?;
    let mut kept: Vec<usize> = (0..trials.len()).collect();
    let mut rounds = 0;
    loop {
        let current: Vec<SpdMatrix<T>> = kept.iter().map(|&i| trials[i].clone()).collect();
        let mean = geometric_mean(&current, None, None, cfg)?;
        rounds += 1;
        if kept.len() < 3 || rounds >= robust.max_rounds {
            return Ok(RobustOutcome { kept, mean, rounds });
        }
        let d = current
            .iter()
            .map(|c| distance(c, &mean.mean).map(|x| x.as_f64()))
            .collect::<Result<Vec<_>>>()?;
        let n = d.len() as f64;
        let mu = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        // equal distances up to rounding carry no outlier information
        if !(sd > 1e-12 * mu) {
            return Ok(RobustOutcome { kept, mean, rounds });
        }
        let survivors: Vec<usize> = kept
            .iter()
            .zip(&d)
            .filter(|(_, &di)| (di - mu) / sd <= robust.z_threshold)
            .map(|(&i, _)| i)
            .collect();
        if survivors.len() == kept.len() || survivors.len() < 2 {
            return Ok(RobustOutcome { kept, mean, rounds });
        }
        kept = survivors;
    }
}

/// One entry of a class's mean field.
#[derive(Debug, Clone)]
pub struct FieldEntry<T: Real> {
    pub h: f64,
    pub mean: SpdMatrix<T>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ClassField<T: Real> {
    pub label: usize,
    /// Entries in ascending `h`.
    pub entries: Vec<FieldEntry<T>>,
    /// Trials kept by robust estimation, when it ran.
    pub kept: Option<Vec<usize>>,
}

/// Per-class power means over a common exponent grid.
#[derive(Debug, Clone)]
pub struct MeanField<T: Real> {
    pub classes: Vec<ClassField<T>>,
    pub grid: Vec<f64>,
}

impl<T: Real> MeanField<T> {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn means_per_class(&self) -> usize {
        self.grid.len()
    }

    pub fn dim(&self) -> usize {
        self.classes[0].entries[0].mean.dim()
    }

    pub fn total_iterations(&self) -> usize {
        self.classes
            .iter()
            .flat_map(|c| c.entries.iter().map(|e| e.iterations))
            .sum()
    }

    /// All means, class-major then ascending `h`.
    pub fn means(&self) -> impl Iterator<Item = &SpdMatrix<T>> {
        self.classes.iter().flat_map(|c| c.entries.iter().map(|e| &e.mean))
    }
}

/// Whether successive means along the grid seed each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarmStart {
    /// Positive exponents descend from `h = 1`, negative ones ascend from
    /// `h = −1`, each solve starting at the previous result; the geometric
    /// mean starts at the smallest positive exponent's mean.
    #[default]
    Chained,
    /// Every mean starts from its default initialization.
    Cold,
}

/// Sorted, validated copy of an exponent grid.
pub fn validate_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::invalid("empty exponent grid"));
    }
    if let Some(bad) = grid.iter().find(|h| !(h.abs() <= 1.0)) {
        return Err(Error::invalid(format!("exponent {bad} outside [-1, 1]")));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("duplicate exponents in grid"));
    }
    Ok(sorted)
}

fn class_field<T: Real>(
    trials: &[SpdMatrix<T>],
    grid: &[f64],
    cfg: &SolverConfig,
    warm: WarmStart,
) -> std::result::Result<Vec<FieldEntry<T>>, (f64, Error)> {
    let mut solved: Vec<Option<FieldEntry<T>>> = vec![None; grid.len()];
    let entry = |h: f64, est: MeanEstimate<T>| FieldEntry {
        h,
        mean: est.mean,
        iterations: est.iterations,
        residual: est.residual,
    };

    let chain = |indices: Vec<usize>, solved: &mut Vec<Option<FieldEntry<T>>>| {
        let mut prev: Option<SpdMatrix<T>> = None;
        for i in indices {
            let h = grid[i];
            let init = match warm {
                WarmStart::Chained => prev.as_ref(),
                WarmStart::Cold => None,
            };
            let est = power_mean(trials, &MeanSpec::uniform(h), init, cfg).map_err(|e| (h, e))?;
            prev = Some(est.mean.clone());
            solved[i] = Some(entry(h, est));
        }
        Ok::<_, (f64, Error)>(())
    };
    let positive: Vec<usize> = (0..grid.len()).rev().filter(|&i| grid[i] > 0.0).collect();
    let negative: Vec<usize> = (0..grid.len()).filter(|&i| grid[i] < 0.0).collect();
    chain(positive.clone(), &mut solved)?;
    chain(negative.clone(), &mut solved)?;

    if let Some(zero) = grid.iter().position(|&h| h == 0.0) {
        let seed = match warm {
            WarmStart::Cold => None,
            WarmStart::Chained => positive
                .last()
                .or(negative.last())
                .and_then(|&i| solved[i].as_ref())
                .map(|e| e.mean.clone()),
        };
        let est = geometric_mean(trials, None, seed.as_ref(), cfg).map_err(|e| (0.0, e))?;
        solved[zero] = Some(entry(0.0, est));
    }
    Ok(solved.into_iter().map(|e| e.expect("every grid point solved")).collect())
}

/// Builds the mean field of every class.
///
/// `trials_per_class[c]` holds the trials of class `c`; each class needs at
/// least two. With `robust` set, outliers are removed once per class and the
/// cleaned set is used for every exponent.
pub fn build_mean_field<T: Real>(
    trials_per_class: &[Vec<SpdMatrix<T>>],
    grid: &[f64],
    cfg: &SolverConfig,
    robust: Option<&RobustConfig>,
    warm: WarmStart,
) -> Result<MeanField<T>> {
    cfg.validate()?;
    let grid = validate_grid(grid)?;
    if trials_per_class.is_empty() {
        return Err(Error::invalid("no classes"));
    }
    let dim = check_set(&trials_per_class[0])?;
    let mut classes = Vec::with_capacity(trials_per_class.len());
    for (label, trials) in trials_per_class.iter().enumerate() {
        if trials.len() < 2 {
            return Err(Error::invalid(format!(
                "class {label} has {} trials, at least 2 are needed",
                trials.len()
            )));
        }
        if check_set(trials)? != dim {
            return Err(Error::invalid(format!("class {label} has a different dimension")));
        }
        let wrap = |h: f64, e: Error| Error::MeanField {
            class: label,
            h,
            source: Box::new(e),
        };
        let (set, kept) = match robust {
            Some(r) => {
                let outcome = rpme_clean(trials, r, cfg).map_err(|e| wrap(0.0, e))?;
                let set: Vec<_> = outcome.kept.iter().map(|&i| trials[i].clone()).collect();
                (set, Some(outcome.kept))
            }
            None => (trials.clone(), None),
        };
        let entries = class_field(&set, &grid, cfg, warm).map_err(|(h, e)| wrap(h, e))?;
        classes.push(ClassField { label, entries, kept });
    }
    Ok(MeanField { classes, grid })
}
