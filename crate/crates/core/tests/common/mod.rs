#![allow(dead_code)]

use meanfield::SpdMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// Random orthogonal matrix by Gram-Schmidt on a Gaussian draw.
pub fn orthogonal(rng: &mut impl Rng, n: usize) -> Array2<f64> {
    let mut q = gaussian(rng, n, n);
    for j in 0..n {
        for k in 0..j {
            let d = q.column(j).dot(&q.column(k));
            let prev = q.column(k).to_owned();
            q.column_mut(j).scaled_add(-d, &prev);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|x| x / norm);
    }
    q
}

/// `Q diag(λ) Qᵀ` with log-uniform eigenvalues in `[1, cond]`.
pub fn random_spd(rng: &mut impl Rng, n: usize, cond: f64) -> SpdMatrix<f64> {
    let q = orthogonal(rng, n);
    let lambda: Vec<f64> = (0..n).map(|_| cond.powf(rng.random::<f64>())).collect();
    from_eig(&q, &lambda)
}

pub fn from_eig(q: &Array2<f64>, lambda: &[f64]) -> SpdMatrix<f64> {
    let n = lambda.len();
    let mut scaled = q.clone();
    for j in 0..n {
        scaled.column_mut(j).mapv_inplace(|x| x * lambda[j]);
    }
    let m = scaled.dot(&q.t());
    let sym = (&m + &m.t()) * 0.5;
    SpdMatrix::new(sym).unwrap()
}

/// Trials scattered around `center` as `center^{1/2} exp(σ S) center^{1/2}`
/// with `S` a symmetric Gaussian matrix.
pub fn scatter(rng: &mut impl Rng, center: &SpdMatrix<f64>, n: usize, sigma: f64) -> Vec<SpdMatrix<f64>> {
    let root = center.sqrt_matrix();
    (0..n)
        .map(|_| {
            let g = gaussian(rng, center.dim(), center.dim());
            let s = (&g + &g.t()) * (sigma / 2.0);
            let e = meanfield::spd::exp_sym(&s.view()).unwrap();
            let m = root.dot(e.matrix()).dot(root);
            SpdMatrix::new((&m + &m.t()) * 0.5).unwrap()
        })
        .collect()
}
