//! Seeded synthetic trial generators.
//!
//! Randomness comes from ChaCha20 seeded with `seed_from_u64(seed)`. Each
//! draw sequence has its own stream (see [`stream_rng`]): stream 0 sets up
//! shared structure (random centers, the mixing matrix) and trial `t` of
//! class `c` reads stream `((c + 1) << 32) | t`. Changing the number of
//! trials or classes therefore never shifts the draws of other trials.

use meanfield::linalg::{congruence, symmetrize, sym_eig};
use meanfield::spd::exp_sym;
use meanfield::Spd64;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::archive::{ArchiveKind, TrialArchive};
use crate::error::CliError;

/// Standard deviation of the sensor noise added to mixed-source trials.
pub const NOISE_STD: f64 = 0.1;
pub const SETUP_STREAM: u64 = 0;

pub fn trial_stream(class: usize, trial: usize) -> u64 {
    ((class as u64 + 1) << 32) | trial as u64
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    rng.sample(StandardNormal)
}

#[derive(Debug, Clone)]
pub struct GaussianClass {
    pub center: Spd64,
    pub sigma: f64,
}

/// Trials `M^{1/2} exp(S) M^{1/2}` around a per-class center `M`.
#[derive(Debug, Clone)]
pub struct RiemannianGaussianSpec {
    pub classes: Vec<GaussianClass>,
    pub trials_per_class: usize,
    pub seed: u64,
}

/// Trials `A · diag(std) · Z + ε` with a shared random mixing matrix `A`.
#[derive(Debug, Clone)]
pub struct MixedSourcesSpec {
    /// Per class, the standard deviation of every source.
    pub profiles: Vec<Vec<f64>>,
    pub channels: usize,
    pub samples: usize,
    pub trials_per_class: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub enum SynthSpec {
    RiemannianGaussian(RiemannianGaussianSpec),
    MixedSources(MixedSourcesSpec),
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::InvalidInput(msg.into())
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let (n_classes, trials) = match self {
            SynthSpec::RiemannianGaussian(s) => {
                let dim = s.classes.first().map_or(0, |c| c.center.dim());
                for (i, c) in s.classes.iter().enumerate() {
                    if !(c.sigma > 0.0) || !c.sigma.is_finite() {
                        return Err(bad(format!("class {i}: sigma must be > 0, got {}", c.sigma)));
                    }
                    if c.center.dim() != dim {
                        return Err(bad(format!("class {i}: center has dim {}, expected {dim}", c.center.dim())));
                    }
                }
                (s.classes.len(), s.trials_per_class)
            }
            SynthSpec::MixedSources(s) => {
                let sources = s.profiles.first().map_or(0, Vec::len);
                if sources == 0 {
                    return Err(bad("source profiles are empty"));
                }
                for (i, p) in s.profiles.iter().enumerate() {
                    if p.len() != sources {
                        return Err(bad(format!("class {i} has {} sources, expected {sources}", p.len())));
                    }
                    if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                        return Err(bad(format!("class {i}: source std must be finite and >= 0")));
                    }
                }
                if s.channels < sources {
                    return Err(bad(format!("{} channels cannot hold {sources} sources", s.channels)));
                }
                if s.samples < 2 {
                    return Err(bad("at least 2 samples per trial are needed"));
                }
                (s.profiles.len(), s.trials_per_class)
            }
        };
        if n_classes < 2 {
            return Err(bad(format!("at least 2 classes are needed, got {n_classes}")));
        }
        if trials == 0 {
            return Err(bad("trials_per_class must be >= 1"));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<TrialArchive, CliError> {
        self.validate()?;
        match self {
            SynthSpec::RiemannianGaussian(s) => synth_riemannian_gaussian(s),
            SynthSpec::MixedSources(s) => synth_mixed_sources(s),
        }
    }
}

/// Symmetric matrix with `N(0, σ²)` diagonal and `N(0, σ²/2)` off-diagonal
/// entries, drawn row by row over the upper triangle.
pub fn symmetric_noise(rng: &mut ChaCha20Rng, dim: usize, sigma: f64) -> Array2<f64> {
    let off = sigma / 2f64.sqrt();
    let mut s = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in i..dim {
            let v = normal(rng) * if i == j { sigma } else { off };
            s[[i, j]] = v;
            s[[j, i]] = v;
        }
    }
    s
}

fn labels(n_classes: usize, per_class: usize) -> Vec<u32> {
    (0..n_classes).flat_map(|c| std::iter::repeat_n(c as u32, per_class)).collect()
}

pub fn synth_riemannian_gaussian(spec: &RiemannianGaussianSpec) -> Result<TrialArchive, CliError> {
    let mut trials = Vec::with_capacity(spec.classes.len() * spec.trials_per_class);
    for (c, class) in spec.classes.iter().enumerate() {
        let root = class.center.sqrt_matrix();
        for t in 0..spec.trials_per_class {
            let mut rng = stream_rng(spec.seed, trial_stream(c, t));
            let s = symmetric_noise(&mut rng, class.center.dim(), class.sigma);
            let e = exp_sym(&s.view())?;
            trials.push(congruence(&root.view(), &e.matrix().view()));
        }
    }
    TrialArchive::new(
        ArchiveKind::Covariance,
        spec.classes.len() as u32,
        labels(spec.classes.len(), spec.trials_per_class),
        trials,
    )
}

/// The `channels × sources` mixing matrix of a mixed-source spec.
pub fn mixing_matrix(seed: u64, channels: usize, sources: usize) -> Array2<f64> {
    let mut rng = stream_rng(seed, SETUP_STREAM);
    Array2::from_shape_simple_fn((channels, sources), || normal(&mut rng))
}

pub fn synth_mixed_sources(spec: &MixedSourcesSpec) -> Result<TrialArchive, CliError> {
    let sources = spec.profiles[0].len();
    let a = mixing_matrix(spec.seed, spec.channels, sources);
    let mut trials = Vec::with_capacity(spec.profiles.len() * spec.trials_per_class);
    for (c, profile) in spec.profiles.iter().enumerate() {
        let mixed = &a * &Array1::from(profile.clone());
        for t in 0..spec.trials_per_class {
            let mut rng = stream_rng(spec.seed, trial_stream(c, t));
            let z = Array2::from_shape_simple_fn((sources, spec.samples), || normal(&mut rng));
            let noise = Array2::from_shape_simple_fn((spec.channels, spec.samples), || NOISE_STD * normal(&mut rng));
            trials.push(mixed.dot(&z) + noise);
        }
    }
    TrialArchive::new(
        ArchiveKind::TimeSeries,
        spec.profiles.len() as u32,
        labels(spec.profiles.len(), spec.trials_per_class),
        trials,
    )
}

/// `Q diag(λ) Qᵀ` with `Q` a random orthonormal basis and `λ` log-uniform in
/// `[1, condition]` (end points included), drawn from stream 0.
pub fn random_center(seed: u64, dim: usize, condition: f64) -> Result<Spd64, CliError> {
    if !(condition >= 1.0) || !condition.is_finite() {
        return Err(bad(format!("center condition must be >= 1, got {condition}")));
    }
    let mut rng = stream_rng(seed, SETUP_STREAM);
    let g = Array2::from_shape_simple_fn((dim, dim), || normal(&mut rng));
    let q = sym_eig(&symmetrize(&(&g + &g.t())).view())?.vectors;
    let mut lambda: Vec<f64> = (0..dim)
        .map(|i| match i {
            0 => 1.0,
            1 => condition,
            _ => condition.powf(rng.random::<f64>()),
        })
        .collect();
    if dim == 1 {
        lambda[0] = 1.0;
    }
    let scaled = &q * &Array1::from(lambda);
    Ok(Spd64::new(symmetrize(&scaled.dot(&q.t())))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use meanfield::spd::distance;

    fn spec(sigma: f64, n: usize) -> RiemannianGaussianSpec {
        RiemannianGaussianSpec {
            classes: vec![
                GaussianClass {
                    center: Spd64::from_diag(&[1.0, 2.0, 3.0]).unwrap(),
                    sigma,
                },
                GaussianClass {
                    center: Spd64::identity(3),
                    sigma,
                },
            ],
            trials_per_class: n,
            seed: 11,
        }
    }

    #[test]
    fn streams_do_not_overlap() {
        let a: f64 = stream_rng(1, trial_stream(0, 0)).random();
        let b: f64 = stream_rng(1, trial_stream(1, 0)).random();
        let c: f64 = stream_rng(1, trial_stream(0, 1)).random();
        assert!(a != b && a != c && b != c);
    }

    #[test]
    fn adding_trials_keeps_earlier_ones() {
        let small = synth_riemannian_gaussian(&spec(0.3, 3)).unwrap();
        let large = synth_riemannian_gaussian(&spec(0.3, 5)).unwrap();
        assert_eq!(small.trials[..3], large.trials[..3]);
        assert_eq!(small.trials[3], large.trials[5]);
    }

    #[test]
    fn off_diagonal_variance_is_half() {
        let mut rng = stream_rng(3, 9);
        let (mut d, mut o) = (0.0, 0.0);
        let n = 4000;
        for _ in 0..n {
            let s = symmetric_noise(&mut rng, 2, 1.0);
            d += s[[0, 0]] * s[[0, 0]];
            o += s[[0, 1]] * s[[0, 1]];
        }
        assert!((d / n as f64 - 1.0).abs() < 0.08);
        assert!((o / n as f64 - 0.5).abs() < 0.04);
    }

    #[test]
    fn random_center_has_requested_condition() {
        let c = random_center(4, 6, 100.0).unwrap();
        assert!((c.condition_number() - 100.0).abs() < 1e-8);
        assert_eq!(c.matrix(), random_center(4, 6, 100.0).unwrap().matrix());
        assert!(distance(&c, &random_center(5, 6, 100.0).unwrap()).unwrap() > 0.1);
    }

    #[test]
    fn rejects_single_class_and_zero_sigma() {
        let mut s = spec(0.1, 2);
        s.classes.pop();
        assert!(SynthSpec::RiemannianGaussian(s).validate().is_err());
        assert!(SynthSpec::RiemannianGaussian(spec(0.0, 2)).validate().is_err());
    }
}
