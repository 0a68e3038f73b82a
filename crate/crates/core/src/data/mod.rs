//! Labeled sparse datasets, train/test splits and neighboring datasets.

mod libsvm;
mod synth;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{arg_err, Error, Result};
use crate::rng::{stream, Purpose};

pub use libsvm::{load_libsvm, parse_libsvm, parse_libsvm_str, to_libsvm_string, write_libsvm};
pub use synth::{ground_truth, synth_gaussian, FeatureModel, LabelRule, SyntheticSource};

/// One labeled example. Feature indices are 0-based and strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    features: Vec<(u32, f64)>,
    label: f64,
}

impl Example {
    pub fn new(features: Vec<(u32, f64)>, label: f64) -> Result<Self> {
        if features.windows(2).any(|w| w[0].0 >= w[1].0) {
            return arg_err("feature indices must be strictly increasing");
        }
        Ok(Example { features, label })
    }

    /// Dense input; zeros are kept so that the stored layout is explicit.
    pub fn from_dense(values: &[f64], label: f64) -> Self {
        let features = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u32, v))
            .collect();
        Example { features, label }
    }

    pub fn features(&self) -> &[(u32, f64)] {
        &self.features
    }

    pub fn label(&self) -> f64 {
        self.label
    }

    /// One past the largest stored index, i.e. the smallest dim that can hold it.
    pub fn min_dim(&self) -> usize {
        self.features.last().map_or(0, |&(i, _)| i as usize + 1)
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.features.iter().map(|&(i, v)| v * w[i as usize]).sum()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.features {
            out[i as usize] = v;
        }
        out
    }

    /// Sparse `self - other`, merged by index.
    pub fn difference(&self, other: &Example) -> Vec<(u32, f64)> {
        let (a, b) = (&self.features, &other.features);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut p, mut q) = (0, 0);
        while p < a.len() || q < b.len() {
            let ia = a.get(p).map_or(u32::MAX, |e| e.0);
            let ib = b.get(q).map_or(u32::MAX, |e| e.0);
            if ia == ib {
                out.push((ia, a[p].1 - b[q].1));
                p += 1;
                q += 1;
            } else if ia < ib {
                out.push((ia, a[p].1));
                p += 1;
            } else {
                out.push((ib, -b[q].1));
                q += 1;
            }
        }
        out
    }

    pub fn squared_distance(&self, other: &Example) -> f64 {
        self.difference(other).iter().map(|&(_, v)| v * v).sum()
    }
}

/// A sample set `S = {z_1, ..., z_n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    dim: usize,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, dim: usize, examples: Vec<Example>) -> Result<Self> {
        if let Some(bad) = examples.iter().position(|e| e.min_dim() > dim) {
            return arg_err(format!(
                "example {bad} has feature index {} beyond dim {dim}",
                examples[bad].min_dim()
            ));
        }
        Ok(Dataset {
            name: name.into(),
            dim,
            examples,
        })
    }

    /// Builds a dataset whose dim is the largest index present.
    pub fn from_examples(name: impl Into<String>, examples: Vec<Example>) -> Self {
        let dim = examples.iter().map(Example::min_dim).max().unwrap_or(0);
        Dataset {
            name: name.into(),
            dim,
            examples,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn example(&self, i: usize) -> &Example {
        &self.examples[i]
    }

    pub fn labels(&self) -> impl Iterator<Item = f64> + '_ {
        self.examples.iter().map(Example::label)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Raises the dimension, e.g. to align a test file with its training file.
    pub fn with_dim(mut self, dim: usize) -> Result<Self> {
        if dim < self.dim {
            return arg_err(format!(
                "dim override {dim} is below the data dim {}",
                self.dim
            ));
        }
        self.dim = dim;
        Ok(self)
    }

    /// Subset by position, preserving the given order.
    pub fn select(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        Dataset {
            name: name.into(),
            dim: self.dim,
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }

    /// Random subset of at most `max_n` examples (original order kept).
    pub fn subsample(&self, max_n: usize, seed: u64) -> Dataset {
        if self.len() <= max_n {
            return self.clone();
        }
        let mut rng = stream(seed, Purpose::Split, 1);
        let mut idx = rand::seq::index::sample(&mut rng, self.len(), max_n).into_vec();
        idx.sort_unstable();
        self.select(&idx, self.name.clone())
    }

    /// Copy of `self` with example `index` replaced.
    pub fn replace(&self, index: usize, example: Example) -> Result<Dataset> {
        if index >= self.len() {
            return arg_err(format!(
                "index {index} out of range for {} examples",
                self.len()
            ));
        }
        if example.min_dim() > self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: example.min_dim(),
            });
        }
        let mut out = self.clone();
        out.examples[index] = example;
        Ok(out)
    }
}

/// Random train/test partition; `|train| = floor(train_fraction * n)`.
///
/// Both parts keep the original relative order of their examples.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return arg_err(format!("train fraction {train_fraction} outside (0, 1)"));
    }
    let n = ds.len();
    let n_train = (train_fraction * n as f64).floor() as usize;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream(seed, Purpose::Split, 0));
    let (train_idx, test_idx) = perm.split_at_mut(n_train);
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((
        ds.select(train_idx, format!("{}-train", ds.name())),
        ds.select(test_idx, format!("{}-test", ds.name())),
    ))
}

/// `S` together with `S_i`, the copy whose example `i` was replaced.
#[derive(Debug, Clone)]
pub struct NeighborPair {
    base: Arc<Dataset>,
    perturbed: Arc<Dataset>,
    replaced_index: usize,
}

impl NeighborPair {
    pub fn base(&self) -> &Arc<Dataset> {
        &self.base
    }

    pub fn perturbed(&self) -> &Arc<Dataset> {
        &self.perturbed
    }

    /// 0-based position of the replaced example.
    pub fn replaced_index(&self) -> usize {
        self.replaced_index
    }

    /// Pair with `perturbed == base`; useful as a sanity baseline.
    pub fn identical(base: Arc<Dataset>, index: usize) -> NeighborPair {
        NeighborPair {
            perturbed: Arc::clone(&base),
            base,
            replaced_index: index,
        }
    }
}

/// Where replacement examples come from.
#[derive(Debug, Clone, Copy)]
pub enum Replacement<'a> {
    /// Uniform draw from a held-out pool.
    Pool(&'a Dataset),
    /// Fresh draw from a known distribution.
    Synthetic(&'a SyntheticSource),
}

/// Draws the position to perturb uniformly from `0..n`.
pub fn random_index(n: usize, seed: u64) -> usize {
    stream(seed, Purpose::Perturbation, 0).random_range(0..n)
}

pub fn make_neighbor(
    ds: &Arc<Dataset>,
    replaced_index: usize,
    replacement: Replacement<'_>,
    seed: u64,
) -> Result<NeighborPair> {
    if replaced_index >= ds.len() {
        return arg_err(format!(
            "replaced index {replaced_index} out of range for {} examples",
            ds.len()
        ));
    }
    let mut rng = stream(seed, Purpose::Perturbation, 1);
    let example = match replacement {
        Replacement::Pool(pool) => {
            if pool.is_empty() {
                return arg_err("replacement pool is empty");
            }
            pool.example(rng.random_range(0..pool.len())).clone()
        }
        Replacement::Synthetic(source) => source.sample_example(&mut rng),
    };
    let perturbed = ds.replace(replaced_index, example)?;
    Ok(NeighborPair {
        base: Arc::clone(ds),
        perturbed: Arc::new(perturbed),
        replaced_index,
    })
}
