//! The shared vector space for objects and knowledge.
//!
//! Knowledge `(relation, tail)` pairs are embedded by a deterministic
//! seeded encoder ([`ConceptTable`]); objects are embedded by a trainable
//! linear [`Projection`] followed by L2 normalization. Similarity is
//! cosine, prediction confidence is a sigmoid of temperature-scaled
//! similarity, and the projection is trained with a binary cross-entropy
//! objective over labeled knowledge:
//!
//! ```text
//! L = -sum_i [ y_i * ln s(t * sim_i) + (1 - y_i) * ln (1 - s(t * sim_i)) ]
//! ```
//!
//! where `sim_i = cosine(f_o, f_k_i)`, `s` is the logistic function, and
//! the temperature `t` is trained alongside the weights.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::knowledge::{normalize_field, MaskedTriplet, Triplet};
use crate::seeds;

/// A point in the embedding space (or a raw feature vector).
pub type Vector = Vec<f64>;

/// Initial temperature for fresh projections.
pub const DEFAULT_TEMPERATURE: f64 = 10.0;

/// Lower clamp for logarithm arguments inside the loss.
const LOG_CLAMP: f64 = 1e-12;

/// Temperatures are kept strictly positive during training.
const MIN_TEMPERATURE: f64 = 1e-3;

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `v` to unit length; a zero vector has no direction.
pub fn normalize(v: &[f64]) -> Result<Vector> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Cosine similarity in `[-1, 1]`; errors on zero vectors.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(dot(u, v) / (nu * nv))
}

/// Logistic confidence of a similarity under a temperature.
pub fn confidence(sim: f64, temperature: f64) -> f64 {
    debug_assert!(temperature > 0.0);
    sigmoid(temperature * sim)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Deterministic knowledge encoder: each `(relation, tail)` pair maps to a
/// fixed unit vector drawn from a seeded Gaussian. The head slot of a
/// triplet is ignored, so a triplet and its head-masked pattern encode
/// identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptTable {
    seed: u64,
    dim: usize,
}

impl ConceptTable {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self { seed, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The unit concept vector for a `(relation, tail)` pair.
    pub fn concept(&self, relation: &str, tail: &str) -> Vector {
        let relation = normalize_field(relation);
        let tail = normalize_field(tail);
        let mut rng = seeds::stream(
            self.seed,
            "concept",
            &[seeds::fnv1a(&relation), seeds::fnv1a(&tail)],
        );
        loop {
            let v: Vector = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            if let Ok(unit) = normalize(&v) {
                return unit;
            }
        }
    }

    pub fn encode_triplet(&self, triplet: &Triplet) -> Vector {
        self.concept(triplet.relation(), triplet.tail())
    }

    /// Encodes a masked pattern. Exploration patterns have no tail and
    /// therefore no knowledge feature.
    pub fn encode_masked(&self, pattern: &MaskedTriplet) -> Result<Vector> {
        match pattern.tail() {
            Some(tail) => Ok(self.concept(pattern.relation(), tail)),
            None => Err(Error::MaskedTailUndefined),
        }
    }
}

/// A trainable linear map from raw object features to the embedding space,
/// plus the trained temperature. Weights have shape `d_raw x d`, stored
/// row-major; the embedding of `x` is `normalize(x^T W)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    d_raw: usize,
    d: usize,
    weights: Vec<f64>,
    temperature: f64,
}

impl Projection {
    /// Identity initialization for a square projection.
    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self {
            d_raw: dim,
            d: dim,
            weights,
            temperature: DEFAULT_TEMPERATURE,
        }
    }

    /// Seeded Gaussian initialization for rectangular projections.
    pub fn seeded(d_raw: usize, d: usize, seed: u64) -> Self {
        let mut rng = seeds::stream(seed, "projection-init", &[]);
        let scale = 1.0 / (d_raw as f64).sqrt();
        let weights = (0..d_raw * d)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        Self {
            d_raw,
            d,
            weights,
            temperature: DEFAULT_TEMPERATURE,
        }
    }

    pub fn from_parts(d_raw: usize, d: usize, weights: Vec<f64>, temperature: f64) -> Result<Self> {
        if weights.len() != d_raw * d {
            return Err(Error::DimensionMismatch {
                expected: d_raw * d,
                got: weights.len(),
            });
        }
        if !weights.iter().all(|w| w.is_finite()) || !temperature.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        if temperature <= 0.0 {
            return Err(Error::Checkpoint("temperature must be positive".into()));
        }
        Ok(Self {
            d_raw,
            d,
            weights,
            temperature,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.d_raw
    }

    pub fn output_dim(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// True while the projection still equals its identity initialization.
    pub fn is_initial(&self) -> bool {
        self.d_raw == self.d && *self == Self::identity(self.d)
    }

    /// Unnormalized image of `x` under the weights: `u_j = sum_i x_i W_ij`.
    fn transform(&self, raw: &[f64]) -> Result<Vector> {
        if raw.len() != self.d_raw {
            return Err(Error::DimensionMismatch {
                expected: self.d_raw,
                got: raw.len(),
            });
        }
        let mut u = vec![0.0; self.d];
        for (i, x) in raw.iter().enumerate() {
            if *x == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.d..(i + 1) * self.d];
            for (j, w) in row.iter().enumerate() {
                u[j] += x * w;
            }
        }
        Ok(u)
    }

    /// The unit-norm object embedding of a raw feature vector.
    pub fn project(&self, raw: &[f64]) -> Result<Vector> {
        let u = self.transform(raw)?;
        normalize(&u).map_err(|_| Error::DegenerateProjection)
    }

    /// Writes a versioned text checkpoint; floats are printed with 17
    /// significant digits so the round trip is exact.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_checkpoint())?;
        Ok(())
    }

    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        out.push_str("askworld projection v1\n");
        out.push_str(&format!(
            "{} {} {:.16e}\n",
            self.d_raw, self.d, self.temperature
        ));
        for i in 0..self.d_raw {
            let row: Vec<String> = self.weights[i * self.d..(i + 1) * self.d]
                .iter()
                .map(|w| format!("{w:.16e}"))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_checkpoint(&text)
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != "askworld projection v1" {
            return Err(Error::Checkpoint(format!("bad header {header:?}")));
        }
        let dims = lines
            .next()
            .ok_or_else(|| Error::Checkpoint("missing dimension line".into()))?;
        let parts: Vec<&str> = dims.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::Checkpoint("dimension line needs 3 fields".into()));
        }
        let d_raw: usize = parts[0]
            .parse()
            .map_err(|_| Error::Checkpoint("bad d_raw".into()))?;
        let d: usize = parts[1]
            .parse()
            .map_err(|_| Error::Checkpoint("bad d".into()))?;
        let temperature: f64 = parts[2]
            .parse()
            .map_err(|_| Error::Checkpoint("bad temperature".into()))?;
        let mut weights = Vec::with_capacity(d_raw * d);
        for line in lines {
            for field in line.split_whitespace() {
                weights.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| Error::Checkpoint(format!("bad weight {field:?}")))?,
                );
            }
        }
        Self::from_parts(d_raw, d, weights, temperature)
    }
}

/// One training example: a raw object feature plus binary labels over
/// concept indices (`true` marks knowledge that belongs to the object).
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub raw: Vector,
    pub labels: Vec<(usize, bool)>,
}

/// Gradients of the batch loss with respect to the projection parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<f64>,
    pub temperature: f64,
}

/// Binary cross-entropy of one object against labeled concept vectors.
pub fn bce_loss(proj: &Projection, raw: &[f64], items: &[(&[f64], bool)]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let f_o = proj.project(raw)?;
    let tau = proj.temperature();
    let mut loss = 0.0;
    for (concept, positive) in items {
        let sim = cosine(&f_o, concept)?;
        let p = sigmoid(tau * sim);
        loss -= if *positive {
            p.max(LOG_CLAMP).ln()
        } else {
            (1.0 - p).max(LOG_CLAMP).ln()
        };
    }
    Ok(loss)
}

/// Loss and analytic gradients for one object. Concepts must be unit norm.
fn object_loss_and_grads(
    proj: &Projection,
    raw: &[f64],
    items: &[(&[f64], bool)],
    grad_w: &mut [f64],
    grad_tau: &mut f64,
) -> Result<f64> {
    let u = proj.transform(raw)?;
    let nu = norm(&u);
    if nu == 0.0 || !nu.is_finite() {
        return Err(Error::DegenerateProjection);
    }
    let f_o: Vector = u.iter().map(|x| x / nu).collect();
    let tau = proj.temperature();
    let d = proj.output_dim();

    let mut loss = 0.0;
    // Accumulated dL/d f_o before the normalization Jacobian.
    let mut g_f = vec![0.0; d];
    for (concept, positive) in items {
        let nc = norm(concept);
        if nc == 0.0 {
            return Err(Error::ZeroVector);
        }
        let sim = dot(&f_o, concept) / nc;
        let p = sigmoid(tau * sim);
        let y = if *positive { 1.0 } else { 0.0 };
        loss -= if *positive {
            p.max(LOG_CLAMP).ln()
        } else {
            (1.0 - p).max(LOG_CLAMP).ln()
        };
        let coeff = tau * (p - y) / nc;
        for (g, c) in g_f.iter_mut().zip(concept.iter()) {
            *g += coeff * c;
        }
        *grad_tau += (p - y) * sim;
    }

    // Through f_o = u / |u|:  dL/du = (I - f f^T) g_f / |u|.
    let fg = dot(&f_o, &g_f);
    let g_u: Vector = g_f
        .iter()
        .zip(f_o.iter())
        .map(|(g, f)| (g - fg * f) / nu)
        .collect();
    for (i, x) in raw.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        let row = &mut grad_w[i * d..(i + 1) * d];
        for (slot, g) in row.iter_mut().zip(g_u.iter()) {
            *slot += x * g;
        }
    }
    Ok(loss)
}

/// Mean per-object loss and gradients over a batch.
pub fn batch_loss_and_grads(
    proj: &Projection,
    concepts: &[Vector],
    batch: &[TrainExample],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut grad_w = vec![0.0; proj.weights().len()];
    let mut grad_tau = 0.0;
    let mut loss = 0.0;
    for example in batch {
        let items: Vec<(&[f64], bool)> = example
            .labels
            .iter()
            .map(|(idx, y)| (concepts[*idx].as_slice(), *y))
            .collect();
        loss += object_loss_and_grads(proj, &example.raw, &items, &mut grad_w, &mut grad_tau)?;
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grad_w {
        *g *= scale;
    }
    grad_tau *= scale;
    loss *= scale;
    if !loss.is_finite() || !grad_tau.is_finite() || grad_w.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(format!(
            "loss={loss}, grad_tau={grad_tau}"
        )));
    }
    Ok((
        loss,
        Gradients {
            weights: grad_w,
            temperature: grad_tau,
        },
    ))
}

/// Mean per-object loss of a batch without gradients.
pub fn batch_loss(proj: &Projection, concepts: &[Vector], batch: &[TrainExample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut loss = 0.0;
    for example in batch {
        let items: Vec<(&[f64], bool)> = example
            .labels
            .iter()
            .map(|(idx, y)| (concepts[*idx].as_slice(), *y))
            .collect();
        loss += bce_loss(proj, &example.raw, &items)?;
    }
    Ok(loss / batch.len() as f64)
}

/// One full-batch gradient-descent step on weights and temperature.
/// Returns the pre-update batch loss.
pub fn train_step(
    proj: &mut Projection,
    concepts: &[Vector],
    batch: &[TrainExample],
    learning_rate: f64,
) -> Result<f64> {
    let (loss, grads) = batch_loss_and_grads(proj, concepts, batch)?;
    for (w, g) in proj.weights.iter_mut().zip(grads.weights.iter()) {
        *w -= learning_rate * g;
    }
    proj.temperature = (proj.temperature - learning_rate * grads.temperature).max(MIN_TEMPERATURE);
    Ok(loss)
}
