//! Template-based question rendering.
//!
//! A question surface is one instantiation of a per-relation template
//! frame. Confirmation frames carry a tail slot and a region slot;
//! exploration frames carry only the region slot. A configurable per-mode
//! corruption model occasionally damages the surface (wrong claimed region
//! or wrong relation frame) while leaving the target pattern intact, which
//! is what the oracle's validity gates exist to catch.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::knowledge::MaskedTriplet;
use crate::oracle::RegionBox;
use crate::policy::Mode;
use crate::world::{ImageInfo, ObjectInstance};

/// Template frames per relation: `(relation, confirmation, exploration)`.
/// `{tail}` and `{region}` are the slots; `{region}` renders as
/// `in region r<index>`.
pub const TEMPLATES: &[(&str, &str, &str)] = &[
    (
        "isa",
        "What is the {tail} {region}?",
        "What kind of thing is the object {region}?",
    ),
    (
        "usedfor",
        "What is the object {region} that is used for {tail}?",
        "What is the object {region} used for?",
    ),
    (
        "madeof",
        "What is the object {region} that is made of {tail}?",
        "What is the object {region} made of?",
    ),
    (
        "capableof",
        "What is the object {region} that can {tail}?",
        "What is the object {region} able to do?",
    ),
    (
        "atlocation",
        "What is the object {region} that is found at the {tail}?",
        "Where is the object {region} usually found?",
    ),
    (
        "hasproperty",
        "What is the object {region} known to be {tail}?",
        "What property does the object {region} have?",
    ),
];

/// The two template frames for a relation.
pub fn templates(relation: &str) -> Result<(&'static str, &'static str)> {
    TEMPLATES
        .iter()
        .find(|(name, _, _)| *name == relation)
        .map(|(_, conf, exp)| (*conf, *exp))
        .ok_or_else(|| Error::UnknownTemplate(relation.to_string()))
}

/// Per-mode probability that a realized question is corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseParams {
    pub p_confirmation: f64,
    pub p_exploration: f64,
}

impl NoiseParams {
    pub const ZERO: NoiseParams = NoiseParams {
        p_confirmation: 0.0,
        p_exploration: 0.0,
    };

    pub fn probability(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Confirmation => self.p_confirmation,
            Mode::Exploration => self.p_exploration,
        }
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            p_confirmation: 0.05,
            p_exploration: 0.45,
        }
    }
}

/// A realized question about one object region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Question {
    pub id: String,
    pub image: usize,
    /// The object the question is about; the oracle's ground-truth target.
    pub target_object: usize,
    /// Region index the surface text points at (differs from the target
    /// object's region when region-swap corruption struck).
    pub claimed_region: usize,
    pub claimed_box: RegionBox,
    pub mode: Mode,
    pub target: MaskedTriplet,
    pub surface: String,
    #[serde(skip)]
    corrupted: bool,
}

impl Question {
    /// Ground-truth corruption flag, for tests and audits only; the oracle
    /// never reads it.
    pub fn was_corrupted(&self) -> bool {
        self.corrupted
    }
}

fn region_ref(index: usize) -> String {
    format!("in region r{index}")
}

fn instantiate(frame: &str, tail: Option<&str>, region_index: usize) -> String {
    let mut surface = frame.replace("{region}", &region_ref(region_index));
    if let Some(tail) = tail {
        surface = surface.replace("{tail}", tail);
    }
    surface
}

/// Renders a target pattern into a question about `object`, possibly
/// corrupting the surface with probability `noise.probability(mode)`.
/// Corruption picks uniformly between claiming a different region of the
/// image and borrowing another relation's frame; it never changes the
/// target pattern itself. `regions` are the image's region boxes, parallel
/// to `image.objects`.
pub fn realize(
    id: &str,
    target: &MaskedTriplet,
    object: &ObjectInstance,
    image: &ImageInfo,
    regions: &[RegionBox],
    mode: Mode,
    noise: &NoiseParams,
    rng: &mut impl Rng,
) -> Result<Question> {
    match mode {
        Mode::Confirmation if target.tail().is_none() => {
            return Err(Error::InvalidQuestionTarget(
                "confirmation target has a masked tail".into(),
            ));
        }
        Mode::Exploration if target.tail().is_some() => {
            return Err(Error::InvalidQuestionTarget(
                "exploration target has an unmasked tail".into(),
            ));
        }
        _ => {}
    }
    templates(target.relation())?;
    if regions.len() != image.objects.len() {
        return Err(Error::InvalidQuestionTarget(format!(
            "image {} has {} objects but {} regions were supplied",
            image.id,
            image.objects.len(),
            regions.len()
        )));
    }

    let true_region = image
        .objects
        .iter()
        .position(|&o| o == object.id)
        .ok_or_else(|| {
            Error::InvalidQuestionTarget(format!(
                "object {} is not part of image {}",
                object.id, image.id
            ))
        })?;

    let mut claimed_region = true_region;
    let mut frame_relation = target.relation().to_string();
    let mut corrupted = false;
    if rng.gen::<f64>() < noise.probability(mode) {
        corrupted = true;
        let swap_region = if image.objects.len() < 2 {
            false // single-region image: only the frame can be damaged
        } else {
            rng.gen::<bool>()
        };
        if swap_region {
            let offset = rng.gen_range(1..image.objects.len());
            claimed_region = (true_region + offset) % image.objects.len();
        } else {
            let others: Vec<&str> = TEMPLATES
                .iter()
                .map(|(name, _, _)| *name)
                .filter(|name| *name != target.relation())
                .collect();
            frame_relation = others[rng.gen_range(0..others.len())].to_string();
        }
    }

    let (conf_frame, exp_frame) = templates(&frame_relation)?;
    let surface = match mode {
        Mode::Confirmation => instantiate(conf_frame, target.tail(), claimed_region),
        Mode::Exploration => instantiate(exp_frame, None, claimed_region),
    };

    Ok(Question {
        id: id.to_string(),
        image: image.id,
        target_object: object.id,
        claimed_region,
        claimed_box: regions[claimed_region],
        mode,
        target: target.clone(),
        surface,
        corrupted,
    })
}
