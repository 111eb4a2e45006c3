//! Genomes: flat weight vectors for a fixed-topology recurrent network.
//!
//! Layout, every block row-major, blocks in this order:
//!
//! | block        | shape                   | index of `(row, col)`        |
//! |--------------|-------------------------|------------------------------|
//! | input→hidden | `n_hidden × n_inputs`   | `row * n_inputs + col`       |
//! | hidden→hidden| `n_hidden × n_hidden`   | `row * n_hidden + col`       |
//! | hidden bias  | `n_hidden`              | `row`                        |
//! | hidden→output| `n_outputs × n_hidden`  | `row * n_hidden + col`       |
//! | output bias  | `n_outputs`             | `row`                        |
//!
//! Rows index the receiving neuron, columns the sending one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Default hidden layer width.
pub const DEFAULT_HIDDEN: usize = 32;
/// Std-dev of the Gaussian used for fresh organisms.
pub const DEFAULT_INIT_SCALE: f64 = 0.003;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    Discrete,
    Continuous,
}

/// Shape of the recurrent policy network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub n_outputs: usize,
    pub action_mode: ActionMode,
}

impl PolicySpec {
    pub fn new(
        n_inputs: usize,
        n_hidden: usize,
        n_outputs: usize,
        action_mode: ActionMode,
    ) -> Result<Self> {
        let spec = Self {
            n_inputs,
            n_hidden,
            n_outputs,
            action_mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("n_inputs", self.n_inputs),
            ("n_hidden", self.n_hidden),
            ("n_outputs", self.n_outputs),
        ] {
            if value == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        Ok(())
    }

    pub(crate) fn ih_len(&self) -> usize {
        self.n_hidden * self.n_inputs
    }

    pub(crate) fn hh_len(&self) -> usize {
        self.n_hidden * self.n_hidden
    }

    pub(crate) fn ho_len(&self) -> usize {
        self.n_outputs * self.n_hidden
    }
}

/// Number of parameters in a network of the given shape.
pub fn genome_length(spec: &PolicySpec) -> usize {
    spec.ih_len() + spec.hh_len() + spec.n_hidden + spec.ho_len() + spec.n_outputs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    weights: Vec<f64>,
}

impl Genome {
    /// Wraps an explicit weight vector, checking its length against `spec`.
    pub fn from_weights(spec: &PolicySpec, weights: Vec<f64>) -> Result<Self> {
        let expected = genome_length(spec);
        if weights.len() != expected {
            return Err(Error::Dimension {
                what: "genome",
                expected,
                actual: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Contract(format!("genome weight {i} is not finite")));
        }
        Ok(Self { weights })
    }

    pub fn zeros(spec: &PolicySpec) -> Self {
        Self {
            weights: vec![0.0; genome_length(spec)],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }

    /// Euclidean distance between two genomes of equal length.
    pub fn distance(&self, other: &Genome) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Wraps a weight vector without a spec, for optimizers working on
    /// plain parameter vectors.
    pub fn from_raw(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }
}

/// Draws every weight i.i.d. from `N(0, init_scale²)`.
pub fn new_random_genome(spec: &PolicySpec, init_scale: f64, rng: &mut RngStream) -> Genome {
    debug_assert!(init_scale >= 0.0);
    let weights = (0..genome_length(spec))
        .map(|_| init_scale * rng.normal())
        .collect();
    Genome { weights }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MutationConfig {
    /// Std-dev of the additive Gaussian noise.
    pub scale: f64,
    /// Chance that any given weight is perturbed.
    pub per_weight_prob: f64,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self {
            scale: 0.001,
            per_weight_prob: 1.0,
        }
    }
}

impl MutationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(Error::config("mutation.scale", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.per_weight_prob) {
            return Err(Error::config(
                "mutation.per_weight_prob",
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    }
}

/// Returns a perturbed copy of `genome`.
///
/// With `per_weight_prob == 1` every weight receives `scale * N(0,1)` and one
/// normal is drawn per weight. Otherwise each weight first draws a uniform
/// mask coin and only the selected weights draw a normal.
pub fn mutate(genome: &Genome, cfg: &MutationConfig, rng: &mut RngStream) -> Genome {
    let mut child = genome.clone();
    mutate_in_place(&mut child, cfg, rng);
    child
}

pub(crate) fn mutate_in_place(genome: &mut Genome, cfg: &MutationConfig, rng: &mut RngStream) {
    if cfg.per_weight_prob >= 1.0 {
        for w in genome.weights_mut() {
            *w += cfg.scale * rng.normal();
        }
    } else {
        for w in genome.weights_mut() {
            if rng.uniform() < cfg.per_weight_prob {
                *w += cfg.scale * rng.normal();
            }
        }
    }
}
