mod common;

use common::*;
use meanfield::classifiers::*;
use meanfield::means::{build_mean_field, WarmStart};
use meanfield::spd::distance;
use meanfield::{SolverConfig, SpdMatrix};
use ndarray::{array, Array1, Array2};

fn two_classes(seed: u64, dim: usize, n: usize, sigma: f64) -> (Vec<SpdMatrix<f64>>, Vec<usize>) {
    let mut r = rng(seed);
    let c0 = random_spd(&mut r, dim, 10.0);
    let c1 = random_spd(&mut r, dim, 10.0);
    let mut covs = scatter(&mut r, &c0, n, sigma);
    covs.extend(scatter(&mut r, &c1, n, sigma));
    (covs, (0..2 * n).map(|i| i / n).collect())
}

fn grid() -> Vec<f64> {
    meanfield::DEFAULT_H_GRID.to_vec()
}

#[test]
fn mf_features_have_one_entry_per_mean() {
    let (covs, labels) = two_classes(1, 4, 6, 0.4);
    let model = mf_fit(&covs, &labels, &grid(), &SolverConfig::default(), None, WarmStart::Chained).unwrap();
    let x = distance_features(&model.field, &covs[0]).unwrap();
    assert_eq!(x.len(), 22);
    assert!(x.iter().all(|&v| v >= 0.0));
    // a trial equal to one of the means has a zero in that coordinate
    let m = model.field.classes[1].entries[3].mean.clone();
    let x = distance_features(&model.field, &m).unwrap();
    assert!(x[11 + 3].abs() < 1e-20);
}

#[test]
fn mdmf_prefers_a_non_geometric_mean() {
    // class 1 = {I, 100 I} spreads its power means from ~2 I (harmonic) to
    // ~50 I (arithmetic); class 0 = {3 I, 3.1 I} is tight around 3 I.
    let eye = |s: f64| SpdMatrix::from_diag(&[s, s]).unwrap();
    let covs = vec![eye(3.0), eye(3.1), eye(1.0), eye(100.0)];
    let labels = [0, 0, 1, 1];
    let cfg = SolverConfig::default();
    let c = eye(2.2);
    let mdm = mdm_fit(&covs, &labels, &cfg, None).unwrap();
    assert_eq!(mdm_score(&mdm, &c).unwrap().label, 0);
    let field = mdmf_fit(&covs, &labels, &grid(), &cfg, None, WarmStart::Chained).unwrap();
    assert_eq!(mdmf_score(&field, &c).unwrap().label, 1);
}

#[test]
fn mdmf_with_identical_means_scores_zero() {
    let c = SpdMatrix::from_diag(&[1.0, 2.0]).unwrap();
    let covs = vec![c.clone(); 4];
    let field = mdmf_fit(&covs, &[0, 0, 1, 1], &grid(), &SolverConfig::default(), None, WarmStart::Chained).unwrap();
    let p = mdmf_score(&field, &SpdMatrix::from_diag(&[3.0, 1.0]).unwrap()).unwrap();
    assert_eq!(p.label, 0);
    assert_eq!(p.score.binary(), Some(0.0));
}

#[test]
fn single_mean_field_reduces_to_mdm() {
    let cfg = SolverConfig::default();
    for seed in 0..4 {
        let (covs, labels) = two_classes(100 + seed, 5, 8, 0.6);
        let (test, _) = two_classes(200 + seed, 5, 6, 0.9);
        let mdm = mdm_fit(&covs, &labels, &cfg, None).unwrap();
        let field = mdmf_fit(&covs, &labels, &[0.0], &cfg, None, WarmStart::Chained).unwrap();
        for c in &test {
            let a = mdm_score(&mdm, c).unwrap();
            let b = mdmf_score(&field, c).unwrap();
            assert_eq!(a, b);
            // MF features with argmin in place of LDA
            let x = distance_features(&field, c).unwrap();
            let label = if x[1] < x[0] { 1 } else { 0 };
            assert_eq!(label, a.label);
        }
    }
}

#[test]
fn robust_fit_is_a_no_op_without_outliers() {
    let cfg = SolverConfig::default();
    let c = SpdMatrix::from_diag(&[1.0, 2.0]).unwrap();
    let d = SpdMatrix::from_diag(&[2.0, 1.0]).unwrap();
    let covs = vec![c.clone(), c.clone(), c, d.clone(), d.clone(), d];
    let labels = [0, 0, 0, 1, 1, 1];
    let plain = mdm_fit(&covs, &labels, &cfg, None).unwrap();
    let robust = mdm_fit(&covs, &labels, &cfg, Some(&Default::default())).unwrap();
    for (a, b) in plain.means.iter().zip(&robust.means) {
        assert_eq!(a.matrix(), b.matrix());
    }
}

#[test]
fn predictions_survive_joint_congruence() {
    let cfg = SolverConfig::default();
    let mut r = rng(7);
    let (covs, labels) = two_classes(8, 4, 8, 0.5);
    let (test, _) = two_classes(9, 4, 5, 0.7);
    let w = gaussian(&mut r, 4, 4) + Array2::<f64>::eye(4) * 2.0;
    let moved = |s: &[SpdMatrix<f64>]| -> Vec<SpdMatrix<f64>> { s.iter().map(|c| c.congruence(&w.view()).unwrap()).collect() };
    let (covs_w, test_w) = (moved(&covs), moved(&test));

    let a = mdm_fit(&covs, &labels, &cfg, None).unwrap();
    let b = mdm_fit(&covs_w, &labels, &cfg, None).unwrap();
    let fa = mf_fit(&covs, &labels, &grid(), &cfg, None, WarmStart::Chained).unwrap();
    let fb = mf_fit(&covs_w, &labels, &grid(), &cfg, None, WarmStart::Chained).unwrap();
    for (c, cw) in test.iter().zip(&test_w) {
        assert_eq!(mdm_score(&a, c).unwrap().label, mdm_score(&b, cw).unwrap().label);
        assert_eq!(mdmf_score(&fa.field, c).unwrap().label, mdmf_score(&fb.field, cw).unwrap().label);
        assert_eq!(mf_score(&fa, c).unwrap().label, mf_score(&fb, cw).unwrap().label);
        let xa = distance_features(&fa.field, c).unwrap();
        let xb = distance_features(&fb.field, cw).unwrap();
        for (p, q) in xa.iter().zip(&xb) {
            assert!((p - q).abs() <= 1e-8 * p.abs().max(1.0), "{p} vs {q}");
        }
    }
}

#[test]
fn scores_are_bit_reproducible() {
    let cfg = MethodConfig::default();
    let (covs, labels) = two_classes(30, 4, 6, 0.5);
    for method in Method::ALL {
        let m1 = Model::fit(method, &covs, &labels, &cfg).unwrap();
        let m2 = Model::fit(method, &covs, &labels, &cfg).unwrap();
        for c in &covs {
            let (s1, s2) = (m1.score(c).unwrap(), m2.score(c).unwrap());
            assert_eq!(s1.score.binary().unwrap().to_bits(), s2.score.binary().unwrap().to_bits());
        }
    }
}

#[test]
fn lda_weight_concentrates_on_the_separating_block() {
    // 22 noisy features; the classes differ only in the two h = 1 slots
    let mut r = rng(40);
    let n = 60;
    let mut x = gaussian(&mut r, 2 * n, 22);
    let labels: Vec<usize> = (0..2 * n).map(|i| i / n).collect();
    for i in n..2 * n {
        x[[i, 10]] += 3.0;
        x[[i, 21]] -= 3.0;
    }
    let lda = LdaModel::fit(&x, &labels, 2).unwrap();
    let e0 = Array1::<f64>::zeros(22);
    // the binary score is affine in x; its gradient is the weight vector
    let base = lda.predict(&e0).unwrap().score.binary().unwrap();
    let w: Vec<f64> = (0..22)
        .map(|j| {
            let mut e = e0.clone();
            e[j] = 1.0;
            lda.predict(&e).unwrap().score.binary().unwrap() - base
        })
        .collect();
    let arg = (0..22).max_by(|&a, &b| w[a].abs().partial_cmp(&w[b].abs()).unwrap()).unwrap();
    assert!(arg == 10 || arg == 21);
}

#[test]
fn tangent_norm_is_the_distance() {
    let mut r = rng(50);
    for dim in [2, 3, 6] {
        for _ in 0..10 {
            let c = random_spd(&mut r, dim, 100.0);
            let reference = random_spd(&mut r, dim, 100.0);
            let v = tangent_map(&c, &reference).unwrap();
            assert_eq!(v.len(), dim * (dim + 1) / 2);
            let d = distance(&c, &reference).unwrap();
            assert!((v.dot(&v).sqrt() - d).abs() <= 1e-8 * d);
        }
    }
}

/// Penalized logistic regression by iteratively reweighted least squares,
/// with its own 3×3 Gaussian elimination.
fn irls_oracle(x: &[[f64; 2]], y: &[f64], penalty: f64) -> [f64; 3] {
    let mut theta = [0.0; 3];
    for _ in 0..100 {
        let mut h = [[0.0; 3]; 3];
        let mut g = [0.0; 3];
        for (xi, &yi) in x.iter().zip(y) {
            let a = [xi[0], xi[1], 1.0];
            let z: f64 = (0..3).map(|j| a[j] * theta[j]).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            for j in 0..3 {
                g[j] += (yi - p) * a[j];
                for k in 0..3 {
                    h[j][k] += p * (1.0 - p) * a[j] * a[k];
                }
            }
        }
        for j in 0..2 {
            g[j] -= penalty * theta[j];
            h[j][j] += penalty;
        }
        // solve h δ = g
        let mut m = [[h[0][0], h[0][1], h[0][2], g[0]], [h[1][0], h[1][1], h[1][2], g[1]], [h[2][0], h[2][1], h[2][2], g[2]]];
        for col in 0..3 {
            let piv = (col..3).max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()).unwrap();
            m.swap(col, piv);
            for row in (col + 1)..3 {
                let f = m[row][col] / m[col][col];
                for k in col..4 {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
        let mut delta = [0.0; 3];
        for row in (0..3).rev() {
            let s: f64 = ((row + 1)..3).map(|k| m[row][k] * delta[k]).sum();
            delta[row] = (m[row][3] - s) / m[row][row];
        }
        for j in 0..3 {
            theta[j] += delta[j];
        }
    }
    theta
}

#[test]
fn logistic_regression_matches_irls_oracle() {
    let x = [[0.5, 1.0], [1.5, -0.5], [-1.0, 0.3], [2.0, 2.0], [0.1, -1.2], [-0.7, -0.4], [1.1, 0.9], [-2.0, 1.5]];
    let y = [1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let theta = irls_oracle(&x, &y, 1.0);
    let xa = Array2::from_shape_fn((8, 2), |(i, j)| x[i][j]);
    let yb: Vec<bool> = y.iter().map(|&v| v > 0.5).collect();
    let model = LogisticModel::fit(&xa, &yb, 1.0).unwrap();
    for xi in &x {
        let expect = theta[0] * xi[0] + theta[1] * xi[1] + theta[2];
        let got = model.logit(&array![xi[0], xi[1]]);
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
    }
}

#[test]
fn ts_lr_separates_distinct_classes() {
    let (covs, labels) = two_classes(60, 3, 15, 0.2);
    let model = ts_lr_fit(&covs, &labels, &SolverConfig::default()).unwrap();
    let correct = covs
        .iter()
        .zip(&labels)
        .filter(|(c, &l)| ts_lr_score(&model, c).unwrap().label == l)
        .count();
    assert_eq!(correct, covs.len());
}

#[test]
fn multiclass_methods_return_per_class_scores() {
    let mut r = rng(70);
    let mut covs = Vec::new();
    let mut labels = Vec::new();
    for class in 0..3 {
        let center = random_spd(&mut r, 3, 10.0);
        covs.extend(scatter(&mut r, &center, 6, 0.2));
        labels.extend(std::iter::repeat(class).take(6));
    }
    let cfg = MethodConfig::default();
    for method in Method::ALL {
        let model = Model::fit(method, &covs, &labels, &cfg).unwrap();
        let p = model.score(&covs[0]).unwrap();
        match p.score {
            DecisionScore::PerClass(v) => assert_eq!(v.len(), 3),
            DecisionScore::Binary(_) => panic!("{method} gave a binary score"),
        }
    }
    let field = build_mean_field(&[covs[..6].to_vec(), covs[6..12].to_vec()], &[0.0], &SolverConfig::default(), None, WarmStart::Chained).unwrap();
    assert_eq!(field.n_classes(), 2);
}
