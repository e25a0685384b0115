//! Generator configuration files.
//!
//! A config is a flat list of `key = value` lines in TOML syntax: strings are
//! quoted, numbers are bare and per-class lists are arrays. Tables are not
//! allowed. See `docs/config.md` for the keys.

use std::collections::BTreeSet;

use meanfield::Spd64;
use ndarray::Array2;
use toml::{Table, Value};

use crate::error::CliError;
use crate::synth::{random_center, GaussianClass, MixedSourcesSpec, RiemannianGaussianSpec, SynthSpec};

const COMMON_KEYS: &[&str] = &["generator", "seed", "trials_per_class", "n_classes"];
const GAUSSIAN_KEYS: &[&str] = &["dim", "sigma", "center", "center_condition", "class_centers"];
const MIXED_KEYS: &[&str] = &["channels", "samples", "source_std"];

fn err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

struct Keys {
    table: Table,
}

impl Keys {
    fn get(&self, key: &str) -> Option<&Value> {
        self.table.get(key)
    }

    fn count(&self, key: &str) -> Result<Option<usize>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(v) => Err(err(format!("`{key}` must be a non-negative integer, got {v}"))),
        }
    }

    fn required_count(&self, key: &str) -> Result<usize, CliError> {
        self.count(key)?.ok_or_else(|| err(format!("missing key `{key}`")))
    }

    fn string(&self, key: &str) -> Result<Option<&str>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(err(format!("`{key}` must be a string, got {v}"))),
        }
    }
}

fn number(key: &str, v: &Value) -> Result<f64, CliError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(err(format!("`{key}` expects numbers, got {other}"))),
    }
}

fn numbers(key: &str, v: &Value) -> Result<Vec<f64>, CliError> {
    match v {
        Value::Array(items) => items.iter().map(|x| number(key, x)).collect(),
        other => Err(err(format!("`{key}` expects an array of numbers, got {other}"))),
    }
}

fn nested(key: &str, v: &Value) -> Result<Vec<Vec<f64>>, CliError> {
    match v {
        Value::Array(items) => items.iter().map(|x| numbers(key, x)).collect(),
        other => Err(err(format!("`{key}` expects an array of arrays, got {other}"))),
    }
}

/// Resolves a per-class class count from the optional `n_classes` key and
/// the lengths of per-class arrays, which must agree.
fn class_count(explicit: Option<usize>, lengths: &[(&str, usize)]) -> Result<usize, CliError> {
    let mut n = explicit;
    for &(key, len) in lengths {
        match n {
            Some(m) if m != len => return Err(err(format!("`{key}` has {len} entries but there are {m} classes"))),
            _ => n = Some(len),
        }
    }
    Ok(n.unwrap_or(2))
}

pub fn parse_config(text: &str) -> Result<SynthSpec, CliError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| err(e.to_string()))?;
    if let Some((k, _)) = table.iter().find(|(_, v)| v.is_table()) {
        return Err(err(format!("`{k}` is a table; only flat key = value lines are allowed")));
    }
    let keys = Keys { table };
    let generator = keys.string("generator")?.ok_or_else(|| err("missing key `generator`"))?;
    let allowed: &[&str] = match generator {
        "riemannian-gaussian" => GAUSSIAN_KEYS,
        "mixed-sources" => MIXED_KEYS,
        other => return Err(err(format!("unknown generator `{other}` (riemannian-gaussian, mixed-sources)"))),
    };
    let known: BTreeSet<&str> = COMMON_KEYS.iter().chain(allowed).copied().collect();
    if let Some(k) = keys.table.keys().find(|k| !known.contains(k.as_str())) {
        return Err(err(format!("unknown key `{k}` for generator {generator}")));
    }
    let seed = match keys.get("seed") {
        Some(Value::Integer(i)) if *i >= 0 => *i as u64,
        Some(v) => return Err(err(format!("`seed` must be a non-negative integer, got {v}"))),
        None => return Err(err("missing key `seed`")),
    };
    let trials_per_class = keys.required_count("trials_per_class")?;
    let explicit_classes = keys.count("n_classes")?;

    let spec = if generator == "riemannian-gaussian" {
        let centers = keys.get("class_centers").map(|v| nested("class_centers", v)).transpose()?;
        let sigmas = match keys.get("sigma") {
            None => return Err(err("missing key `sigma`")),
            Some(v @ Value::Array(_)) => Some(numbers("sigma", v)?),
            Some(_) => None,
        };
        let mut lengths = Vec::new();
        if let Some(c) = &centers {
            lengths.push(("class_centers", c.len()));
        }
        if let Some(s) = &sigmas {
            lengths.push(("sigma", s.len()));
        }
        let n_classes = class_count(explicit_classes, &lengths)?;
        let sigmas = match sigmas {
            Some(s) => s,
            None => vec![number("sigma", keys.get("sigma").expect("checked"))?; n_classes],
        };
        let dim = keys.required_count("dim")?;
        if dim == 0 {
            return Err(err("`dim` must be >= 1"));
        }
        let classes = match centers {
            Some(rows) => {
                if keys.get("center").is_some() || keys.get("center_condition").is_some() {
                    return Err(err("`class_centers` cannot be combined with `center` or `center_condition`"));
                }
                rows.iter()
                    .zip(&sigmas)
                    .enumerate()
                    .map(|(i, (values, &sigma))| Ok(GaussianClass { center: center_from_values(i, values, dim)?, sigma }))
                    .collect::<Result<Vec<_>, CliError>>()?
            }
            None => {
                let condition = keys.get("center_condition").map(|v| number("center_condition", v)).transpose()?;
                let center = match keys.string("center")?.unwrap_or("identity") {
                    "identity" => {
                        if condition.is_some() {
                            return Err(err("`center_condition` only applies to center = \"random\""));
                        }
                        Spd64::identity(dim)
                    }
                    "random" => random_center(seed, dim, condition.unwrap_or(10.0))?,
                    other => return Err(err(format!("`center` must be \"identity\" or \"random\", got `{other}`"))),
                };
                sigmas.iter().map(|&sigma| GaussianClass { center: center.clone(), sigma }).collect()
            }
        };
        SynthSpec::RiemannianGaussian(RiemannianGaussianSpec {
            classes,
            trials_per_class,
            seed,
        })
    } else {
        let profiles = nested("source_std", keys.get("source_std").ok_or_else(|| err("missing key `source_std`"))?)?;
        class_count(explicit_classes, &[("source_std", profiles.len())])?;
        SynthSpec::MixedSources(MixedSourcesSpec {
            profiles,
            channels: keys.required_count("channels")?,
            samples: keys.required_count("samples")?,
            trials_per_class,
            seed,
        })
    };
    spec.validate().map_err(|e| err(e.to_string()))?;
    Ok(spec)
}

/// A center given either as its diagonal (`dim` values) or as a full
/// row-major matrix (`dim²` values).
fn center_from_values(class: usize, values: &[f64], dim: usize) -> Result<Spd64, CliError> {
    let matrix = if values.len() == dim {
        Array2::from_diag(&ndarray::Array1::from(values.to_vec()))
    } else if values.len() == dim * dim {
        Array2::from_shape_vec((dim, dim), values.to_vec()).expect("square length")
    } else {
        return Err(err(format!(
            "class {class} center has {} values, expected {dim} or {}",
            values.len(),
            dim * dim
        )));
    };
    Spd64::new(matrix).map_err(|e| err(format!("class {class} center: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_gaussian() {
        let s = parse_config("generator = \"riemannian-gaussian\"\nseed = 3\ntrials_per_class = 4\ndim = 3\nsigma = 0.2\n").unwrap();
        match s {
            SynthSpec::RiemannianGaussian(g) => {
                assert_eq!(g.classes.len(), 2);
                assert_eq!(g.classes[1].center.dim(), 3);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn per_class_sigma_and_centers() {
        let text = r#"
            generator = "riemannian-gaussian"
            seed = 1
            trials_per_class = 2
            dim = 2
            sigma = [0.1, 0.3, 0.2]
            class_centers = [[1, 2], [2, 1], [1, 0.5, 0.5, 1]]
        "#;
        match parse_config(text).unwrap() {
            SynthSpec::RiemannianGaussian(g) => {
                assert_eq!(g.classes.len(), 3);
                assert_eq!(g.classes[2].center.matrix()[[0, 1]], 0.5);
                assert_eq!(g.classes[1].sigma, 0.3);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn rejects_unknown_keys_and_tables() {
        let base = "generator = \"mixed-sources\"\nseed = 1\ntrials_per_class = 2\nchannels = 4\nsamples = 10\nsource_std = [[1, 1], [1, 2]]\n";
        assert!(parse_config(base).is_ok());
        assert!(matches!(parse_config(&format!("{base}dim = 3\n")), Err(CliError::Config(_))));
        assert!(matches!(parse_config(&format!("{base}[extra]\nx = 1\n")), Err(CliError::Config(_))));
    }

    #[test]
    fn mismatched_class_counts() {
        let text = "generator = \"riemannian-gaussian\"\nseed = 1\ntrials_per_class = 2\ndim = 2\nn_classes = 3\nsigma = [0.1, 0.2]\n";
        assert!(parse_config(text).is_err());
    }
}
