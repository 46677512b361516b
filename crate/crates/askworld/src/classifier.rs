//! Knowledge-retrieval object recognition.
//!
//! The classifier never predicts a label directly: it scores every distinct
//! `(relation, tail)` pair in the knowledge source against the object
//! embedding, takes the best pair, and resolves the label by head lookup.
//! A label therefore becomes reachable the moment its knowledge enters the
//! source, with no retraining.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::embedding::{
    confidence, cosine, train_step, ConceptTable, Projection, TrainExample, Vector,
};
use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeSource, MaskedTriplet, Triplet};
use crate::seeds;
use crate::world::ObjectInstance;

/// One scored `(relation, tail)` pattern.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnowledgePrediction {
    pub masked: MaskedTriplet,
    pub sim: f64,
    pub conf: f64,
    pub rank: usize,
}

/// A resolved label with the candidate heads it was chosen from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelPrediction {
    pub head: String,
    pub candidates: BTreeSet<String>,
    pub score: f64,
}

/// Accuracy over a dataset, partitioned into known and novel heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub overall: f64,
    pub known: f64,
    pub novel: f64,
    pub n_known: usize,
    pub n_novel: usize,
}

/// Read-only recognition context: a projection plus the concept encoder.
#[derive(Debug, Clone, Copy)]
pub struct ObjectClassifier<'a> {
    pub projection: &'a Projection,
    pub concepts: &'a ConceptTable,
}

impl<'a> ObjectClassifier<'a> {
    pub fn new(projection: &'a Projection, concepts: &'a ConceptTable) -> Self {
        Self {
            projection,
            concepts,
        }
    }

    /// Scores every distinct `(relation, tail)` pair in the source against
    /// the raw object feature. The result is sorted by similarity
    /// descending; ties keep canonical `(relation, tail)` order.
    pub fn score_all(&self, raw: &[f64], source: &KnowledgeSource) -> Result<Vec<KnowledgePrediction>> {
        if source.is_empty() {
            return Err(Error::NoKnowledgeToScore);
        }
        let f_o = self.projection.project(raw)?;
        let tau = self.projection.temperature();
        let mut scored: Vec<KnowledgePrediction> = source
            .rt_pairs()
            .map(|(relation, tail)| {
                let concept = self.concepts.concept(relation, tail);
                let sim = cosine(&f_o, &concept)?;
                Ok(KnowledgePrediction {
                    masked: MaskedTriplet::confirmation(relation, tail),
                    sim,
                    conf: confidence(sim, tau),
                    rank: 0,
                })
            })
            .collect::<Result<_>>()?;
        // Stable sort: equal sims stay in canonical pair order.
        scored.sort_by(|a, b| b.sim.partial_cmp(&a.sim).unwrap_or(std::cmp::Ordering::Equal));
        for (i, prediction) in scored.iter_mut().enumerate() {
            prediction.rank = i + 1;
        }
        Ok(scored)
    }

    /// Predicts the object label: look up the heads of the best pattern,
    /// re-rank multi-head candidates by aggregate confidence over each
    /// head's triplets, and fall back down the ranked list if a pattern has
    /// no head at all.
    pub fn predict_label(&self, raw: &[f64], source: &KnowledgeSource) -> Result<LabelPrediction> {
        let ranked = self.score_all(raw, source)?;
        let f_o = self.projection.project(raw)?;
        self.resolve_label(&ranked, &f_o, source)
    }

    /// Label resolution over an already-ranked pattern list; separated so
    /// the fallback path can be exercised with a source that lacks heads
    /// for the top pattern.
    pub(crate) fn resolve_label(
        &self,
        ranked: &[KnowledgePrediction],
        f_o: &[f64],
        source: &KnowledgeSource,
    ) -> Result<LabelPrediction> {
        let tau = self.projection.temperature();
        for prediction in ranked {
            let tail = prediction
                .masked
                .tail()
                .ok_or_else(|| Error::InvalidQuestionTarget("scored pattern lacks a tail".into()))?;
            let candidates = source.lookup_heads(prediction.masked.relation(), tail);
            if candidates.is_empty() {
                continue;
            }
            let mut best: Option<(String, f64)> = None;
            for head in &candidates {
                let mut aggregate = 0.0;
                for triplet in source.head_triplets(head) {
                    let concept = self.concepts.encode_triplet(triplet);
                    aggregate += confidence(cosine(f_o, &concept)?, tau);
                }
                let better = match &best {
                    None => true,
                    // Strict > keeps the lexicographically first head on ties.
                    Some((_, score)) => aggregate > *score,
                };
                if better {
                    best = Some((head.clone(), aggregate));
                }
            }
            let (head, score) = best.expect("candidates is nonempty");
            return Ok(LabelPrediction {
                head,
                candidates,
                score,
            });
        }
        Err(Error::UnresolvableLabel)
    }

    /// Accuracy of `predict_label` over a dataset, split by whether the
    /// ground-truth head is in `known_heads`. Prediction errors count as
    /// wrong answers.
    pub fn evaluate(
        &self,
        dataset: &[&ObjectInstance],
        source: &KnowledgeSource,
        known_heads: &BTreeSet<String>,
    ) -> Result<AccuracyReport> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut known = (0usize, 0usize);
        let mut novel = (0usize, 0usize);
        for object in dataset {
            let correct = self
                .predict_label(&object.raw, source)
                .map(|p| p.head == object.truth_head)
                .unwrap_or(false);
            let bucket = if known_heads.contains(&object.truth_head) {
                &mut known
            } else {
                &mut novel
            };
            bucket.1 += 1;
            if correct {
                bucket.0 += 1;
            }
        }
        let ratio = |(hits, total): (usize, usize)| {
            if total == 0 {
                0.0
            } else {
                hits as f64 / total as f64
            }
        };
        Ok(AccuracyReport {
            overall: (known.0 + novel.0) as f64 / dataset.len() as f64,
            known: ratio(known),
            novel: ratio(novel),
            n_known: known.1,
            n_novel: novel.1,
        })
    }
}

/// Outcome of a fine-tuning run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FineTuneStats {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs: usize,
}

/// Trains the projection on acquired `(object, triplet)` pairs: each pair is
/// a positive example, with `negatives_per_positive` non-matching patterns
/// sampled from the source as negatives. Runs `epochs` full-batch steps.
#[allow(clippy::too_many_arguments)]
pub fn fine_tune(
    projection: &mut Projection,
    concepts: &ConceptTable,
    pairs: &[(&ObjectInstance, Triplet)],
    source: &KnowledgeSource,
    epochs: usize,
    learning_rate: f64,
    negatives_per_positive: usize,
    seed: u64,
) -> Result<FineTuneStats> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let rts: Vec<(String, String)> = source
        .rt_pairs()
        .map(|(r, t)| (r.to_string(), t.to_string()))
        .collect();
    let concept_vectors: Vec<Vector> = rts.iter().map(|(r, t)| concepts.concept(r, t)).collect();
    let index_of = |relation: &str, tail: &str| {
        rts.binary_search_by(|(r, t)| {
            (r.as_str(), t.as_str()).cmp(&(relation, tail))
        })
        .ok()
    };

    let mut rng = seeds::stream(seed, "fine-tune-negatives", &[]);
    let mut batch = Vec::with_capacity(pairs.len());
    for (object, triplet) in pairs {
        let positive = index_of(triplet.relation(), triplet.tail()).ok_or_else(|| {
            Error::InvalidTriplet(format!("{triplet} is not in the knowledge source"))
        })?;
        let mut labels = vec![(positive, true)];
        let mut guard = 0;
        while labels.len() < 1 + negatives_per_positive && guard < 50 * negatives_per_positive + 50
        {
            guard += 1;
            let candidate = rand::Rng::gen_range(&mut rng, 0..rts.len());
            if candidate != positive && !labels.iter().any(|(i, _)| *i == candidate) {
                labels.push((candidate, false));
            }
        }
        batch.push(TrainExample {
            raw: object.raw.clone(),
            labels,
        });
    }

    let initial_loss = crate::embedding::batch_loss(projection, &concept_vectors, &batch)?;
    let mut final_loss = initial_loss;
    for _ in 0..epochs {
        final_loss = train_step(projection, &concept_vectors, &batch, learning_rate)?;
    }
    Ok(FineTuneStats {
        initial_loss,
        final_loss,
        epochs,
    })
}
