//! Question mode selection by expected utility.
//!
//! Each query instance chooses between two question modes. Confirmation
//! targets the classifier's best guess `[MASK, r, t]` and its utility is
//! the prediction confidence plus the instance similarity. Exploration
//! targets an open pattern `[MASK, r*, MASK]`; the answer is taken to be
//! correct by definition, so its utility is one plus the mean training
//! similarity. The mode with the larger utility wins, ties going to
//! confirmation (the cheaper branch).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{KnowledgePrediction, ObjectClassifier};
use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeSource, MaskedTriplet};
use crate::seeds;
use crate::world::ObjectInstance;

/// The two question generation modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Confirmation,
    Exploration,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Confirmation => write!(f, "confirmation"),
            Mode::Exploration => write!(f, "exploration"),
        }
    }
}

/// Frozen per-episode inputs to the policy: the mean rank-1 training
/// similarity, the relation frequency distribution, and the sampling seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyContext {
    pub mean_sim: f64,
    pub relation_dist: BTreeMap<String, f64>,
    pub seed: u64,
}

impl PolicyContext {
    pub fn new(mean_sim: f64, relation_dist: BTreeMap<String, f64>, seed: u64) -> Self {
        Self {
            mean_sim,
            relation_dist,
            seed,
        }
    }
}

/// Mean over the training objects of their rank-1 similarity.
pub fn estimate_mean_similarity(
    classifier: &ObjectClassifier<'_>,
    train: &[&ObjectInstance],
    source: &KnowledgeSource,
) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for object in train {
        total += classifier.score_all(&object.raw, source)?[0].sim;
    }
    Ok(total / train.len() as f64)
}

/// Branch utility: correctness plus informativeness.
pub fn utility(mode: Mode, conf: f64, sim: f64, ctx: &PolicyContext) -> f64 {
    match mode {
        Mode::Confirmation => conf + sim,
        Mode::Exploration => 1.0 + ctx.mean_sim,
    }
}

/// Samples a relation proportionally to the context's frequency map.
fn sample_relation(ctx: &PolicyContext, rng: &mut impl Rng) -> String {
    let total: f64 = ctx.relation_dist.values().sum();
    let mut remaining = rng.gen::<f64>() * total;
    let mut last = None;
    for (relation, weight) in &ctx.relation_dist {
        remaining -= weight;
        last = Some(relation);
        if remaining <= 0.0 {
            return relation.clone();
        }
    }
    last.expect("relation distribution is nonempty").clone()
}

/// The exploration target for a given instance: `[MASK, r*, MASK]` with
/// `r*` drawn from the relation distribution on the instance's own stream.
pub fn exploration_target(ctx: &PolicyContext, instance: u64) -> MaskedTriplet {
    let mut rng = seeds::stream(ctx.seed, "exploration-relation", &[instance]);
    MaskedTriplet::exploration(&sample_relation(ctx, &mut rng))
}

/// Picks the mode maximizing the branch utility for one instance and builds
/// the matching target pattern. Ties go to confirmation.
pub fn select_mode(
    prediction: &KnowledgePrediction,
    ctx: &PolicyContext,
    instance: u64,
) -> (Mode, MaskedTriplet) {
    let u_conf = utility(Mode::Confirmation, prediction.conf, prediction.sim, ctx);
    let u_exp = utility(Mode::Exploration, prediction.conf, prediction.sim, ctx);
    if u_conf >= u_exp {
        (Mode::Confirmation, prediction.masked.clone())
    } else {
        (Mode::Exploration, exploration_target(ctx, instance))
    }
}

/// A question generation policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Per-instance expected-utility argmax.
    Ours,
    /// Always confirmation.
    AllConf,
    /// Always exploration.
    AllExp,
    /// Uniform coin per instance.
    Random,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Ours, Policy::AllConf, Policy::AllExp, Policy::Random];

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Ours => "ours",
            Policy::AllConf => "all-conf",
            Policy::AllExp => "all-exp",
            Policy::Random => "random",
        }
    }

    /// A policy that always emits the given mode.
    pub fn forced(mode: Mode) -> Policy {
        match mode {
            Mode::Confirmation => Policy::AllConf,
            Mode::Exploration => Policy::AllExp,
        }
    }

    /// Decides the mode and target for one query instance.
    pub fn decide(
        &self,
        prediction: &KnowledgePrediction,
        ctx: &PolicyContext,
        instance: u64,
    ) -> (Mode, MaskedTriplet) {
        match self {
            Policy::Ours => select_mode(prediction, ctx, instance),
            Policy::AllConf => (Mode::Confirmation, prediction.masked.clone()),
            Policy::AllExp => (Mode::Exploration, exploration_target(ctx, instance)),
            Policy::Random => {
                let mut rng = seeds::stream(ctx.seed, "random-mode", &[instance]);
                if rng.gen::<bool>() {
                    (Mode::Confirmation, prediction.masked.clone())
                } else {
                    (Mode::Exploration, exploration_target(ctx, instance))
                }
            }
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Policy::Ours),
            "all-conf" => Ok(Policy::AllConf),
            "all-exp" => Ok(Policy::AllExp),
            "random" => Ok(Policy::Random),
            other => Err(Error::UnknownPolicy(other.to_string())),
        }
    }
}
