//! Dimensionality-reducing spatial filters: CSP by generalized
//! eigendecomposition, Pham's approximate joint diagonalization, and the
//! adaptive two-stage CSP (ADCSP).
//!
//! Row selection everywhere uses a stable ranking on (score descending,
//! index ascending). Scores are compared after rounding to 12 significant
//! digits so that values equal up to floating-point noise fall back to index
//! order.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::{self, SymEigen};
use crate::means::{arithmetic_mean, geometric_mean, SolverConfig};
use crate::scalar::Real;
use crate::spd::SpdMatrix;

/// Input dimension from which ADCSP runs its first (Euclidean, GEVD) stage.
pub const ADCSP_STAGE1_DIM: usize = 28;
/// Input dimension from which ADCSP runs its second (geometric, AJD) stage;
/// also the output dimension of that stage.
pub const ADCSP_STAGE2_DIM: usize = 10;
/// Filters per class of the plain CSP baseline.
pub const CSP_FILTERS_PER_CLASS: usize = 4;

/// A `k × dim` linear map applied as `C ↦ W C Wᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialFilter<T> {
    matrix: Array2<T>,
}

impl<T: Real> SpatialFilter<T> {
    pub fn new(matrix: Array2<T>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() > matrix.ncols() {
            return Err(Error::invalid(format!(
                "a spatial filter must be k x dim with 1 <= k <= dim, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("spatial filter has non-finite entries"));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: Array2::eye(dim),
        }
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.matrix
    }

    pub fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_identity(&self) -> bool {
        self.input_dim() == self.output_dim() && self.matrix == Array2::eye(self.input_dim())
    }

    /// `self` after `first`: `W_self · W_first`.
    pub fn compose(&self, first: &SpatialFilter<T>) -> Result<Self> {
        if self.input_dim() != first.output_dim() {
            return Err(Error::invalid("filter dimensions do not chain"));
        }
        Self::new(self.matrix.dot(&first.matrix))
    }

    pub fn apply(&self, c: &SpdMatrix<T>) -> Result<SpdMatrix<T>> {
        apply_filter(self, c)
    }
}

/// `W C Wᵀ`, checked SPD.
pub fn apply_filter<T: Real>(f: &SpatialFilter<T>, c: &SpdMatrix<T>) -> Result<SpdMatrix<T>> {
    if c.dim() != f.input_dim() {
        return Err(Error::invalid(format!(
            "filter expects dim {}, matrix has dim {}",
            f.input_dim(),
            c.dim()
        )));
    }
    if f.is_identity() {
        return Ok(c.clone());
    }
    c.congruence(&f.matrix.view())
}

/// Scores closer than this compare equal and fall back to index order.
pub const SCORE_RESOLUTION: f64 = 1e-12;

fn rank_key(score: f64) -> i64 {
    if score.is_finite() {
        (score / SCORE_RESOLUTION).round() as i64
    } else {
        i64::MIN
    }
}

/// Indices of the `k` highest scores; ties go to the lower index.
pub fn rank_top<T: Real>(scores: &[T], k: usize) -> Vec<usize> {
    let keys: Vec<i64> = scores.iter().map(|s| rank_key(s.as_f64())).collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| keys[b].cmp(&keys[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Selection by a signed score: components with positive and negative sign
/// are ranked separately by magnitude and interleaved (positive first), so
/// both directions are represented. Once one side runs out the rest are
/// filled by magnitude, and components with no direction (score zero at
/// [`SCORE_RESOLUTION`]) come last in index order.
pub fn rank_alternating<T: Real>(signed: &[T], k: usize) -> Vec<usize> {
    let magnitude: Vec<T> = signed.iter().map(|s| s.abs()).collect();
    let ranked = rank_top(&magnitude, signed.len());
    let key = |i: usize| rank_key(signed[i].as_f64());
    let high: Vec<usize> = ranked.iter().copied().filter(|&i| key(i) > 0).collect();
    let low: Vec<usize> = ranked.iter().copied().filter(|&i| key(i) < 0).collect();
    let mut out = Vec::with_capacity(k);
    let pairs = high.len().min(low.len());
    for p in 0..pairs {
        out.push(high[p]);
        out.push(low[p]);
    }
    out.extend(ranked.iter().copied().filter(|i| !out.contains(i)).collect::<Vec<_>>());
    out.truncate(k);
    out
}

/// Generalized eigenpairs of `a v = λ (a + b) v`, `λ` descending, with the
/// eigenvectors (columns) normalized so that `vᵀ (a + b) v = 1`.
pub fn csp_eigen<T: Real>(a: &SpdMatrix<T>, b: &SpdMatrix<T>) -> Result<SymEigen<T>> {
    if a.dim() != b.dim() {
        return Err(Error::invalid("CSP class means differ in dimension"));
    }
    let composite = SpdMatrix::new(a.matrix() + b.matrix())?;
    let whitening = composite.inv_sqrt_matrix();
    let e = linalg::sym_eig(&linalg::congruence(&whitening.view(), &a.view()).view())?;
    Ok(SymEigen {
        values: e.values,
        vectors: whitening.dot(&e.vectors),
    })
}

/// Two-class CSP filters: the `n_filters` generalized eigenvectors whose
/// eigenvalues are furthest from 1/2, alternating between the largest and
/// the smallest eigenvalues, one per row in selection order.
#[derive(Debug, Clone)]
pub struct CspFit<T: Real> {
    pub filter: SpatialFilter<T>,
    /// Generalized eigenvalue of each selected row.
    pub eigenvalues: Vec<T>,
}

pub fn csp_gevd<T: Real>(mean_a: &SpdMatrix<T>, mean_b: &SpdMatrix<T>, n_filters: usize) -> Result<CspFit<T>> {
    if n_filters == 0 || n_filters % 2 != 0 {
        return Err(Error::invalid(format!("n_filters must be even and positive, got {n_filters}")));
    }
    if n_filters > mean_a.dim() {
        return Err(Error::invalid(format!(
            "{n_filters} filters requested for dim {}",
            mean_a.dim()
        )));
    }
    let e = csp_eigen(mean_a, mean_b)?;
    let half = T::lit(0.5);
    let signed: Vec<T> = e.values.iter().map(|&l| l - half).collect();
    let picked = rank_alternating(&signed, n_filters);
    let mut rows = Array2::zeros((n_filters, mean_a.dim()));
    for (r, &j) in picked.iter().enumerate() {
        rows.row_mut(r).assign(&e.vectors.column(j));
    }
    Ok(CspFit {
        filter: SpatialFilter::new(rows)?,
        eigenvalues: picked.iter().map(|&j| e.values[j]).collect(),
    })
}

/// Result of an approximate joint diagonalization.
#[derive(Debug, Clone)]
pub struct AjdFit<T> {
    /// Demixing matrix `B`; `B Cᵢ Bᵀ` is close to diagonal for every `i`.
    pub demixing: Array2<T>,
    /// Pham's criterion at `B = I` and after every sweep.
    pub criterion: Vec<f64>,
    pub sweeps: usize,
}

/// Pham's criterion `Σᵢ wᵢ [log det diag(Mᵢ) − log det Mᵢ]` with uniform
/// weights, for already-transformed matrices `Mᵢ`.
pub fn pham_criterion<T: Real>(set: &[Array2<T>]) -> Result<f64> {
    let w = 1.0 / set.len() as f64;
    let mut total = 0.0;
    for m in set {
        let l = linalg::cholesky(&m.view())?;
        let log_det: f64 = (0..m.nrows()).map(|i| 2.0 * l[[i, i]].as_f64().ln()).sum();
        let log_diag: f64 = (0..m.nrows()).map(|i| m[[i, i]].as_f64().ln()).sum();
        total += w * (log_diag - log_det);
    }
    Ok(total)
}

/// Pham's approximate joint diagonalization by successive 2×2
/// transformations, uniform weights. Stops when one full sweep lowers the
/// criterion by at most `cfg.tolerance`.
pub fn pham_ajd<T: Real>(set: &[SpdMatrix<T>], cfg: &SolverConfig) -> Result<AjdFit<T>> {
    cfg.validate()?;
    if set.len() < 2 {
        return Err(Error::invalid("joint diagonalization needs at least 2 matrices"));
    }
    let n = set[0].dim();
    if set.iter().any(|c| c.dim() != n) {
        return Err(Error::invalid("matrices differ in dimension"));
    }
    let k = T::lit(set.len() as f64);
    let mut mats: Vec<Array2<T>> = set.iter().map(|c| c.matrix().clone()).collect();
    let mut b = Array2::<T>::eye(n);
    let mut criterion = vec![pham_criterion(&mats)?];
    let one = T::one();
    let floor = T::lit(1e-9);

    for sweep in 1..=cfg.max_iterations {
        for i in 1..n {
            for j in 0..i {
                let (mut g12, mut g21, mut o21, mut o12) = (T::zero(), T::zero(), T::zero(), T::zero());
                for m in &mats {
                    let (cii, cjj, cij) = (m[[i, i]], m[[j, j]], m[[i, j]]);
                    g12 += cij / cii;
                    g21 += cij / cjj;
                    o21 += cii / cjj;
                    o12 += cjj / cii;
                }
                let (g12, g21, o21, o12) = (g12 / k, g21 / k, o21 / k, o12 / k);
                let omega = (o12 * o21).sqrt();
                let ratio = (o21 / o12).sqrt();
                let t1 = (ratio * g12 + g21) / (omega + one);
                let t2 = (ratio * g12 - g21) / (omega - one).max(floor);
                let h12 = t1 + t2;
                let h21 = (t1 - t2) / ratio;
                let denom = one + (one - h12 * h21).max(T::zero()).sqrt();
                let (a, c) = (h12 / denom, h21 / denom);
                if a == T::zero() && c == T::zero() {
                    continue;
                }
                // rows i, j  ←  [[1, −a], [−c, 1]] · rows i, j
                for m in mats.iter_mut() {
                    for col in 0..n {
                        let (ri, rj) = (m[[i, col]], m[[j, col]]);
                        m[[i, col]] = ri - a * rj;
                        m[[j, col]] = rj - c * ri;
                    }
                    for row in 0..n {
                        let (ci, cj) = (m[[row, i]], m[[row, j]]);
                        m[[row, i]] = ci - a * cj;
                        m[[row, j]] = cj - c * ci;
                    }
                }
                for col in 0..n {
                    let (ri, rj) = (b[[i, col]], b[[j, col]]);
                    b[[i, col]] = ri - a * rj;
                    b[[j, col]] = rj - c * ri;
                }
            }
        }
        for m in mats.iter_mut() {
            *m = linalg::symmetrize(m);
        }
        let current = pham_criterion(&mats)?;
        let previous = *criterion.last().expect("seeded");
        criterion.push(current);
        if previous - current <= cfg.tolerance {
            return Ok(AjdFit {
                demixing: b,
                criterion,
                sweeps: sweep,
            });
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: cfg.max_iterations,
        residual: criterion[criterion.len() - 2] - criterion[criterion.len() - 1],
        last_iterate: Some(b.mapv(|x| x.as_f64())),
    })
}

/// Discriminability of each diagonalized component: for two classes the
/// signed `μ₀ⱼ/(μ₀ⱼ+μ₁ⱼ) − 1/2`, for more the largest `|μ_cⱼ/Σ_c μ_cⱼ − 1/K|`.
fn component_scores<T: Real>(diagonals: &[Array1<T>]) -> Vec<T> {
    let k = diagonals.len();
    let share = T::lit(1.0 / k as f64);
    let dim = diagonals[0].len();
    (0..dim)
        .map(|j| {
            let total: T = diagonals.iter().map(|d| d[j]).sum();
            if k == 2 {
                diagonals[0][j] / total - share
            } else {
                diagonals
                    .iter()
                    .map(|d| (d[j] / total - share).abs())
                    .fold(T::zero(), T::max)
            }
        })
        .collect()
}

/// Joint diagonalization of class means followed by selection of the `n_rows`
/// most discriminative rows, each scaled to unit variance under the average
/// class mean.
fn ajd_select<T: Real>(means: &[SpdMatrix<T>], n_rows: usize, cfg: &SolverConfig) -> Result<SpatialFilter<T>> {
    let ajd = pham_ajd(means, cfg)?;
    let b = ajd.demixing;
    let diagonals: Vec<Array1<T>> = means
        .iter()
        .map(|m| linalg::congruence(&b.view(), &m.view()).diag().to_owned())
        .collect();
    let scores = component_scores(&diagonals);
    let picked = if means.len() == 2 {
        rank_alternating(&scores, n_rows)
    } else {
        rank_top(&scores, n_rows)
    };
    let kf = T::lit(means.len() as f64);
    let mut rows = Array2::zeros((picked.len(), b.ncols()));
    for (r, &j) in picked.iter().enumerate() {
        let variance = diagonals.iter().map(|d| d[j]).sum::<T>() / kf;
        rows.row_mut(r).assign(&(&b.row(j) / variance.sqrt()));
    }
    SpatialFilter::new(rows)
}

fn group_by_class<'a, T: Real>(covs: &'a [SpdMatrix<T>], labels: &[usize]) -> Result<Vec<Vec<&'a SpdMatrix<T>>>> {
    if covs.len() != labels.len() {
        return Err(Error::invalid("covariances and labels differ in length"));
    }
    if covs.is_empty() {
        return Err(Error::invalid("no trials"));
    }
    let dim = covs[0].dim();
    if covs.iter().any(|c| c.dim() != dim) {
        return Err(Error::invalid("covariances differ in dimension"));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); n_classes];
    for (c, &l) in covs.iter().zip(labels) {
        groups[l].push(c);
    }
    groups.retain(|g| !g.is_empty());
    if groups.len() < 2 {
        return Err(Error::invalid("spatial filtering needs at least two classes"));
    }
    Ok(groups)
}

fn class_means<T: Real>(
    groups: &[Vec<&SpdMatrix<T>>],
    mean: impl Fn(&[SpdMatrix<T>]) -> Result<SpdMatrix<T>>,
) -> Result<Vec<SpdMatrix<T>>> {
    groups
        .iter()
        .map(|g| {
            let owned: Vec<SpdMatrix<T>> = g.iter().map(|&c| c.clone()).collect();
            mean(&owned)
        })
        .collect()
}

/// Euclidean-mean CSP down to `n_rows` rows: GEVD for two classes, AJD of the
/// class means otherwise.
fn euclidean_csp<T: Real>(groups: &[Vec<&SpdMatrix<T>>], n_rows: usize, cfg: &SolverConfig) -> Result<SpatialFilter<T>> {
    let means = class_means(groups, |s| arithmetic_mean(s, None))?;
    if means.len() == 2 {
        Ok(csp_gevd(&means[0], &means[1], n_rows)?.filter)
    } else {
        ajd_select(&means, n_rows, cfg)
    }
}

/// A fitted ADCSP filter and the dimensions after each stage.
#[derive(Debug, Clone)]
pub struct AdcspFit<T> {
    pub filter: SpatialFilter<T>,
    pub stage1_dim: Option<usize>,
    pub stage2_dim: Option<usize>,
}

/// Adaptive double-stage CSP.
///
/// Stage 1 (input dim ≥ 28): arithmetic class means, GEVD CSP to 28 rows.
/// Stage 2 (dim ≥ 10 after stage 1): geometric class means of the stage-1
/// output, Pham AJD, the 10 most discriminative rows. Below 10 dimensions
/// the identity is returned.
pub fn adcsp_fit<T: Real>(covs: &[SpdMatrix<T>], labels: &[usize], cfg: &SolverConfig) -> Result<AdcspFit<T>> {
    let groups = group_by_class(covs, labels)?;
    let dim = covs[0].dim();
    let mut filter = SpatialFilter::identity(dim);
    let mut stage1_dim = None;
    let mut stage2_dim = None;

    let mut stage_input: Vec<Vec<SpdMatrix<T>>> =
        groups.iter().map(|g| g.iter().map(|&c| c.clone()).collect()).collect();

    if dim >= ADCSP_STAGE1_DIM {
        filter = euclidean_csp(&groups, ADCSP_STAGE1_DIM, cfg)?;
        stage_input = stage_input
            .iter()
            .map(|g| g.iter().map(|c| filter.apply(c)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        stage1_dim = Some(filter.output_dim());
    }

    if filter.output_dim() >= ADCSP_STAGE2_DIM {
        let means = stage_input
            .iter()
            .map(|g| geometric_mean(g, None, None, cfg).map(|e| e.mean))
            .collect::<Result<Vec<_>>>()?;
        let second = ajd_select(&means, ADCSP_STAGE2_DIM, cfg)?;
        filter = if filter.is_identity() { second } else { second.compose(&filter)? };
        stage2_dim = Some(filter.output_dim());
    }

    Ok(AdcspFit {
        filter,
        stage1_dim,
        stage2_dim,
    })
}

/// Plain CSP with `per_class` filters per class on arithmetic class means;
/// the identity when the input is not larger than the requested output.
pub fn csp_fit<T: Real>(
    covs: &[SpdMatrix<T>],
    labels: &[usize],
    per_class: usize,
    cfg: &SolverConfig,
) -> Result<SpatialFilter<T>> {
    let groups = group_by_class(covs, labels)?;
    let dim = covs[0].dim();
    let n_rows = per_class * groups.len();
    if dim <= n_rows {
        return Ok(SpatialFilter::identity(dim));
    }
    euclidean_csp(&groups, n_rows, cfg)
}

/// Off-diagonal energy `Σᵢ ‖off(B Cᵢ Bᵀ)‖²_F`.
pub fn off_diagonal_energy<T: Real>(b: &ArrayView2<'_, T>, set: &[SpdMatrix<T>]) -> T {
    set.iter()
        .map(|c| {
            let m = linalg::congruence(b, &c.view());
            let diag_sq: T = m.diag().iter().map(|&x| x * x).sum();
            m.iter().map(|&x| x * x).sum::<T>() - diag_sq
        })
        .sum()
}

/// Rows of `b` scaled to unit Euclidean norm.
pub fn normalize_rows<T: Real>(b: &Array2<T>) -> Array2<T> {
    let norms = b.map_axis(Axis(1), |r| r.iter().map(|&x| x * x).sum::<T>().sqrt());
    b / &norms.insert_axis(Axis(1))
}
