//! Quick oracle checks runnable from the binary.

use std::io::Write;

use meanfield::classifiers::{mdm_fit, mdm_score, mdmf_fit, mdmf_score};
use meanfield::linalg::frobenius;
use meanfield::means::{geometric_mean, harmonic_mean, power_mean, MeanSpec};
use meanfield::spatial::adcsp_fit;
use meanfield::{SolverConfig, Spd64, WarmStart};
use meanfield_eval::auc_roc;
use meanfield_stats::{exact_permutation_test, liptak_combine};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::archive::{ArchiveMeta, TrialArchive};
use crate::error::CliError;
use crate::synth::{GaussianClass, RiemannianGaussianSpec, synth_riemannian_gaussian};

type Check = fn() -> Result<(), String>;

fn diag(d: &[f64]) -> Spd64 {
    Spd64::from_diag(d).expect("positive diagonal")
}

fn close(got: &Array2<f64>, want: &Array2<f64>, tol: f64) -> Result<(), String> {
    let rel = frobenius(&(got - want).view()) / frobenius(&want.view());
    if rel <= tol {
        Ok(())
    } else {
        Err(format!("relative error {rel:.3e} > {tol:e}"))
    }
}

fn power_mean_scalar_oracle() -> Result<(), String> {
    let set = [diag(&[1.0, 2.0]), diag(&[3.0, 4.0])];
    let cfg = SolverConfig::new(1e-12, 1000).expect("valid");
    let p = power_mean(&set, &MeanSpec::uniform(0.5), None, &cfg).map_err(|e| e.to_string())?;
    let want = |a: f64, b: f64| ((a.sqrt() + b.sqrt()) / 2.0).powi(2);
    close(p.mean.matrix(), diag(&[want(1.0, 3.0), want(2.0, 4.0)]).matrix(), 1e-9)
}

fn geometric_two_point() -> Result<(), String> {
    let g = geometric_mean(&[diag(&[1.0, 1.0]), diag(&[4.0, 9.0])], None, None, &SolverConfig::default())
        .map_err(|e| e.to_string())?;
    close(g.mean.matrix(), diag(&[2.0, 3.0]).matrix(), 1e-6)
}

fn harmonic_closed_form() -> Result<(), String> {
    let h = harmonic_mean(&[diag(&[1.0, 2.0]), diag(&[3.0, 4.0])], None).map_err(|e| e.to_string())?;
    close(h.matrix(), diag(&[1.5, 8.0 / 3.0]).matrix(), 1e-14)
}

fn permutation_three_pairs() -> Result<(), String> {
    let p = exact_permutation_test(&[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?.p_value;
    if p == 0.125 {
        Ok(())
    } else {
        Err(format!("p = {p}"))
    }
}

fn liptak_two_values() -> Result<(), String> {
    let p = liptak_combine(&[0.05, 0.05], &[1.0, 1.0]).map_err(|e| e.to_string())?;
    if (p - 0.01).abs() <= 1e-4 {
        Ok(())
    } else {
        Err(format!("p = {p}"))
    }
}

fn auc_pair_counting() -> Result<(), String> {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(2..40);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8u8))).collect();
        let mut pos: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        pos[0] = true;
        pos[1] = false;
        let (mut num, mut pairs) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if pos[i] && !pos[j] {
                    pairs += 1.0;
                    num += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        let got = auc_roc(&scores, &pos).ok_or("undefined AUC")?;
        if got != num / pairs {
            return Err(format!("{got} vs {}", num / pairs));
        }
    }
    Ok(())
}

fn two_class(dim: usize, n: usize, seed: u64) -> Result<(Vec<Spd64>, Vec<usize>), String> {
    let mut center = vec![1.0; dim];
    center[0] = 3.0;
    let spec = RiemannianGaussianSpec {
        classes: vec![
            GaussianClass {
                center: Spd64::identity(dim),
                sigma: 0.3,
            },
            GaussianClass {
                center: diag(&center),
                sigma: 0.3,
            },
        ],
        trials_per_class: n,
        seed,
    };
    let a = synth_riemannian_gaussian(&spec).map_err(|e| e.to_string())?;
    Ok((a.covariances().expect("covariance"), a.labels.iter().map(|&l| l as usize).collect()))
}

fn adcsp_dimensions() -> Result<(), String> {
    for (dim, want) in [(30, 10), (8, 8)] {
        let (covs, labels) = two_class(dim, 12, 1)?;
        let fit = adcsp_fit(&covs, &labels, &SolverConfig::default()).map_err(|e| e.to_string())?;
        if fit.filter.output_dim() != want {
            return Err(format!("dim {dim} gave {}", fit.filter.output_dim()));
        }
    }
    Ok(())
}

fn mdmf_reduces_to_mdm() -> Result<(), String> {
    let (covs, labels) = two_class(4, 10, 2)?;
    let cfg = SolverConfig::default();
    let mdm = mdm_fit(&covs, &labels, &cfg, None).map_err(|e| e.to_string())?;
    let field = mdmf_fit(&covs, &labels, &[0.0], &cfg, None, WarmStart::Chained).map_err(|e| e.to_string())?;
    for c in &covs {
        let a = mdm_score(&mdm, c).map_err(|e| e.to_string())?;
        let b = mdmf_score(&field, c).map_err(|e| e.to_string())?;
        if a.label != b.label {
            return Err("predictions differ".into());
        }
    }
    Ok(())
}

fn archive_round_trip() -> Result<(), String> {
    let (covs, labels) = two_class(3, 4, 3)?;
    let labels: Vec<u32> = labels.iter().map(|&l| l as u32).collect();
    let a = TrialArchive::covariance(2, labels, &covs).map_err(|e| e.to_string())?;
    let bytes = a.to_bytes().map_err(|e| e.to_string())?;
    let back = TrialArchive::from_bytes(&bytes, ArchiveMeta::default()).map_err(|e| e.to_string())?;
    if back.to_bytes().map_err(|e| e.to_string())? == bytes {
        Ok(())
    } else {
        Err("bytes changed".into())
    }
}

pub const CHECKS: &[(&str, Check)] = &[
    ("power mean matches the scalar oracle", power_mean_scalar_oracle),
    ("geometric mean of two matrices", geometric_two_point),
    ("harmonic mean closed form", harmonic_closed_form),
    ("permutation p for diffs (1, 2, 3)", permutation_three_pairs),
    ("Liptak combination of (0.05, 0.05)", liptak_two_values),
    ("AUC equals pair counting", auc_pair_counting),
    ("ADCSP output dimensions", adcsp_dimensions),
    ("MDMF with grid {0} equals MDM", mdmf_reduces_to_mdm),
    ("archive round trip", archive_round_trip),
];

pub fn run(out: &mut dyn Write) -> Result<(), CliError> {
    let mut failed = Vec::new();
    for (name, check) in CHECKS {
        let line = match check() {
            Ok(()) => format!("pass  {name}\n"),
            Err(e) => {
                failed.push(*name);
                format!("FAIL  {name}: {e}\n")
            }
        };
        out.write_all(line.as_bytes())
            .map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e))?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::SelfTest(failed.join("; ")))
    }
}
