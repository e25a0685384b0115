//! Per-trial covariance estimation with Oracle Approximating Shrinkage.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spd::SpdMatrix;

/// One multichannel trial, `channels × samples`.
#[derive(Debug, Clone)]
pub struct TimeSeriesTrial<T> {
    data: Array2<T>,
    pub label: usize,
}

impl<T: Real> TimeSeriesTrial<T> {
    pub fn new(data: Array2<T>, label: usize) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::invalid("trial has no channels or no samples"));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("trial contains NaN or infinite samples"));
        }
        if data.ncols() < data.nrows() {
            log::warn!(
                "trial has fewer samples ({}) than channels ({}); the covariance relies on shrinkage",
                data.ncols(),
                data.nrows()
            );
        }
        Ok(Self { data, label })
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<T> {
        &self.data
    }
}

/// Shrunk covariance and the intensity that produced it.
#[derive(Debug, Clone)]
pub struct OasEstimate<T: Real> {
    pub covariance: SpdMatrix<T>,
    pub shrinkage: T,
}

/// Sample covariance of mean-centred rows, normalized by the number of
/// samples.
pub fn sample_covariance<T: Real>(data: &ArrayView2<'_, T>) -> Array2<T> {
    let n = T::lit(data.ncols() as f64);
    let mean = data.mean_axis(Axis(1)).expect("non-empty trial");
    let centred = data - &mean.insert_axis(Axis(1));
    crate::linalg::symmetrize(&(centred.dot(&centred.t()) / n))
}

/// OAS shrinkage intensity for a sample covariance `s` estimated from `n`
/// samples:
///
/// ```text
/// ρ = min(1, [(1 − 2/p) tr(S²) + tr²(S)] / [(n + 1 − 2/p) (tr(S²) − tr²(S)/p)])
/// ```
///
/// When `S` is already a multiple of the identity the denominator vanishes
/// and `ρ = 1` (any value gives the same estimate).
pub fn oas_shrinkage<T: Real>(s: &ArrayView2<'_, T>, n: usize) -> T {
    let p = T::lit(s.nrows() as f64);
    let two = T::lit(2.0);
    let tr = s.diag().sum();
    let tr2: T = s.iter().map(|&x| x * x).sum();
    let num = (T::one() - two / p) * tr2 + tr * tr;
    let den = (T::lit(n as f64) + T::one() - two / p) * (tr2 - tr * tr / p);
    if !(den > T::zero()) {
        return T::one();
    }
    (num / den).max(T::zero()).min(T::one())
}

/// `(1 − ρ) S + ρ (tr(S)/p) I` with the OAS intensity `ρ`.
pub fn oas_estimate<T: Real>(trial: &TimeSeriesTrial<T>) -> Result<OasEstimate<T>> {
    let n = trial.samples();
    if n < 2 {
        return Err(Error::invalid("OAS needs at least 2 samples"));
    }
    let s = sample_covariance(&trial.data.view());
    let p = T::lit(trial.channels() as f64);
    let mu = s.diag().sum() / p;
    if !(mu > T::zero()) {
        return Err(Error::DegenerateInput("every channel is constant".into()));
    }
    let rho = oas_shrinkage(&s.view(), n);
    let mut shrunk = s * (T::one() - rho);
    for i in 0..trial.channels() {
        shrunk[[i, i]] += rho * mu;
    }
    let covariance = SpdMatrix::new(shrunk).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::DegenerateInput(msg),
        other => other,
    })?;
    Ok(OasEstimate {
        covariance,
        shrinkage: rho,
    })
}

pub fn oas_covariance<T: Real>(trial: &TimeSeriesTrial<T>) -> Result<SpdMatrix<T>> {
    oas_estimate(trial).map(|e| e.covariance)
}
