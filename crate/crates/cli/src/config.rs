//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "PAIRWISE_RCD_OUT";

/// Every recognized key with its default value and a short description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("data", "synthetic", "`synthetic` or a path to a LIBSVM file"),
    ("dim", "", "feature dimension override for file data"),
    ("max_n", "2000", "subsample file data to at most this many examples"),
    ("synth_n", "200", "synthetic training-set size"),
    ("synth_d", "20", "synthetic feature dimension"),
    ("synth_features", "gaussian", "`gaussian` or `sparse:K` (K active binary features)"),
    ("synth_labels", "balanced", "`balanced` or `linear` (sign of a random direction)"),
    ("data_seed", "1", "seed for synthetic data and subsampling"),
    ("loss", "auc-logistic", "pairwise loss key"),
    ("optimizer", "rcd", "`rcd` or `sgd`"),
    ("etas", "0.05,0.25,1,4", "comma-separated step-size grid"),
    ("schedule", "scaled", "`scaled` (eta/sqrt(T)) or `constant`"),
    ("passes", "1", "iterations as a multiple of n (ignored when `iterations` is set)"),
    ("iterations", "", "number of iterations T"),
    ("reps", "100", "repetitions"),
    ("seed", "0", "master seed"),
    ("reg_lambda", "0", "Tikhonov coefficient lambda"),
    ("pair_policy", "all-pairs", "`all-pairs` or `sampled:M[:SEED]`"),
    ("execution", "parallel", "`parallel` or `sequential`"),
    ("compare_eta", "0.05", "step size used by `compare`"),
    ("eta", "", "step size for `convergence` and `bounds` (convergence default: 0.5/L~ for RCD, 0.5/L for SGD; bounds default: 0.5/L, or beta/L when reg_lambda > 0)"),
    ("tol", "1e-8", "gradient-norm tolerance for the empirical minimizer"),
    ("max_iters", "200000", "iteration cap for the empirical minimizer"),
    ("beta", "0.5", "beta in (0, 1) for the strongly convex bounds"),
    ("gamma", "", "gamma for the l2 estimation bound (default: optimal)"),
    ("sample_indices", "10", "perturbed indices per repetition in `bounds`"),
    ("measured", "", "key=value file of measured inputs for `bounds`"),
    ("out", "", "output directory (default: $PAIRWISE_RCD_OUT or `out`)"),
];

/// Resolved configuration: defaults, then the config file, then `--key value` overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("{origin}:{}: expected `key = value`", i + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Default for Config {
    fn default() -> Self {
        Config {
            values: KEYS
                .iter()
                .map(|(k, v, _)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl Config {
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), CliError> {
        if !known(key) {
            return Err(CliError::Config(format!("unknown config key `{key}`")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Builds a config from an optional file plus trailing `--key value` tokens.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            for (k, v) in parse_pairs(&text, &path.display().to_string())? {
                cfg.set(&k, v)?;
            }
        }
        let mut tokens = overrides.iter();
        while let Some(tok) = tokens.next() {
            let key = tok.strip_prefix("--").ok_or_else(|| {
                CliError::Config(format!("expected `--key value`, found `{tok}`"))
            })?;
            let (key, value) = match key.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = tokens
                        .next()
                        .ok_or_else(|| CliError::Config(format!("missing value for `--{key}`")))?;
                    (key.to_string(), v.clone())
                }
            };
            cfg.set(&key.replace('-', "_"), value)?;
        }
        Ok(cfg)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("known key")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| CliError::Config(format!("invalid value `{raw}` for `{key}`")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn get_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.raw(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("invalid number `{s}` in `{key}`")))
            })
            .collect()
    }

    /// Output directory: `out`, else the environment variable, else `out`.
    pub fn out_dir(&self) -> PathBuf {
        match self.raw("out") {
            "" => std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from),
            dir => PathBuf::from(dir),
        }
    }

    /// Header lines recording every resolved key except the output location.
    pub fn provenance(&self, command: &str) -> Vec<String> {
        let mut lines = vec![format!("command={command}")];
        lines.extend(
            self.values
                .iter()
                .filter(|(k, _)| k.as_str() != "out")
                .map(|(k, v)| format!("{k}={v}")),
        );
        lines
    }
}
