//! Pilot runs behind the thresholds pinned in the synthetic-data tests.
//!
//! `cargo run --release -p meanfield-cli --example pilot`

use meanfield::means::geometric_mean;
use meanfield::spd::distance;
use meanfield::{MethodConfig, SolverConfig};
use meanfield_cli::cli::archive_covariances;
use meanfield_cli::synth::{random_center, GaussianClass, MixedSourcesSpec, RiemannianGaussianSpec};
use meanfield_cli::{synth_mixed_sources, synth_riemannian_gaussian};
use meanfield_eval::{run_pipeline, Dataset, EvalConfig, Session};

fn main() {
    let center = random_center(17, 4, 10.0).unwrap();
    let spec = RiemannianGaussianSpec {
        classes: vec![
            GaussianClass { center: center.clone(), sigma: 0.1 },
            GaussianClass { center: center.clone(), sigma: 0.1 },
        ],
        trials_per_class: 250,
        seed: 17,
    };
    let covs = synth_riemannian_gaussian(&spec).unwrap().covariances().unwrap();
    let g = geometric_mean(&covs, None, None, &SolverConfig::default()).unwrap();
    println!("geometric mean of 500 trials, sigma 0.1: distance to center {:.4}", distance(&g.mean, &center).unwrap());

    let mut aucs = Vec::new();
    for seed in 0..3 {
        let mut strong = vec![1.0; 8];
        strong[0] = 2.0;
        let spec = MixedSourcesSpec {
            profiles: vec![vec![1.0; 8], strong],
            channels: 64,
            samples: 128,
            trials_per_class: 100,
            seed,
        };
        let archive = synth_mixed_sources(&spec).unwrap();
        let labels = archive.labels.iter().map(|&l| l as usize).collect();
        let session = Session::new("s", "0", archive_covariances(&archive).unwrap(), labels).unwrap();
        let dataset = Dataset { id: "pilot".into(), sessions: vec![session] };
        let cfg = EvalConfig { seed, ..Default::default() };
        let t = run_pipeline(&dataset, "ADCSP+MDM".parse().unwrap(), &cfg, &MethodConfig::default(), None).unwrap();
        aucs.push(t.mean_auc().unwrap());
    }
    println!("mixed sources, 64 channels, one source 4x variance, ADCSP+MDM AUC per seed: {aucs:.4?}");
}
