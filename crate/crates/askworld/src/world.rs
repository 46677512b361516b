//! Seeded synthetic worlds.
//!
//! A world is a pure function of `(config, seed)`: concept vectors, an
//! oracle knowledge base, images made of region boxes, objects whose raw
//! features are noisy sums of their own knowledge concepts, and
//! train/query/test splits with whole heads held out as novel. Novel heads
//! draw their `(relation, tail)` pairs only from pairs some known head
//! already carries, so a retrieval classifier can in principle reach them
//! once their triplets are acquired.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::{normalize, ConceptTable, Vector};
use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeSource, RelationVocabulary, Triplet};
use crate::oracle::RegionBox;
use crate::seeds;

const WORLD_FORMAT_VERSION: u32 = 1;

/// One relation with its sampling weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSpec {
    pub name: String,
    pub weight: f64,
}

/// Everything that parameterizes world generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    /// Embedding dimension of concept vectors.
    pub d: usize,
    /// Raw object feature dimension.
    pub d_raw: usize,
    pub known_heads: usize,
    pub novel_heads: usize,
    pub images: usize,
    pub regions_per_image_min: usize,
    pub regions_per_image_max: usize,
    pub triplets_per_head_min: usize,
    pub triplets_per_head_max: usize,
    /// Probability that a query/test object carries a novel head.
    pub novel_object_rate: f64,
    /// Standard deviation of the Gaussian added to feature centroids.
    pub sigma: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub train_fraction: f64,
    pub query_fraction: f64,
    pub test_fraction: f64,
    pub relations: Vec<RelationSpec>,
    pub tails_per_relation: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            d: 32,
            d_raw: 32,
            known_heads: 90,
            novel_heads: 10,
            images: 600,
            regions_per_image_min: 2,
            regions_per_image_max: 5,
            triplets_per_head_min: 1,
            triplets_per_head_max: 4,
            novel_object_rate: 0.25,
            sigma: 0.1,
            image_width: 640.0,
            image_height: 480.0,
            train_fraction: 0.60,
            query_fraction: 0.25,
            test_fraction: 0.15,
            relations: vec![
                RelationSpec {
                    name: "usedfor".into(),
                    weight: 0.50,
                },
                RelationSpec {
                    name: "isa".into(),
                    weight: 0.25,
                },
                RelationSpec {
                    name: "madeof".into(),
                    weight: 0.0625,
                },
                RelationSpec {
                    name: "capableof".into(),
                    weight: 0.0625,
                },
                RelationSpec {
                    name: "atlocation".into(),
                    weight: 0.0625,
                },
                RelationSpec {
                    name: "hasproperty".into(),
                    weight: 0.0625,
                },
            ],
            tails_per_relation: 18,
        }
    }
}

impl WorldConfig {
    /// A tiny configuration for tests and documentation examples.
    pub fn tiny() -> Self {
        Self {
            d: 8,
            d_raw: 8,
            known_heads: 10,
            novel_heads: 3,
            images: 24,
            tails_per_relation: 6,
            ..Self::default()
        }
    }

    pub fn vocabulary(&self) -> Result<RelationVocabulary> {
        RelationVocabulary::new(self.relations.iter().map(|spec| spec.name.as_str()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InfeasibleConfig(msg));
        if self.d < 2 || self.d_raw < 2 {
            return fail(format!("dimensions too small (d={}, d_raw={})", self.d, self.d_raw));
        }
        if self.known_heads == 0 || self.novel_heads == 0 {
            return fail(format!(
                "novel head fraction must be strictly between 0 and 1 \
                 (known={}, novel={})",
                self.known_heads, self.novel_heads
            ));
        }
        if self.known_heads + self.novel_heads < 2 {
            return fail("need at least 2 heads".into());
        }
        if self.relations.is_empty() {
            return fail("need at least 1 relation".into());
        }
        if self.relations.iter().any(|spec| spec.weight <= 0.0) {
            return fail("relation weights must be positive".into());
        }
        self.vocabulary()?;
        if self.regions_per_image_min < 1 || self.regions_per_image_max < self.regions_per_image_min
        {
            return fail("bad regions-per-image range".into());
        }
        if self.triplets_per_head_min < 1 || self.triplets_per_head_max < self.triplets_per_head_min
        {
            return fail("bad triplets-per-head range".into());
        }
        if !(0.0..=1.0).contains(&self.novel_object_rate) {
            return fail(format!("novel object rate {} out of range", self.novel_object_rate));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return fail(format!("bad noise sigma {}", self.sigma));
        }
        if self.image_width <= 0.0 || self.image_height <= 0.0 {
            return fail("image bounds must be positive".into());
        }
        if self.tails_per_relation == 0 {
            return fail("need at least 1 tail per relation".into());
        }
        let total = self.train_fraction + self.query_fraction + self.test_fraction;
        if (total - 1.0).abs() > 1e-9
            || self.train_fraction <= 0.0
            || self.query_fraction <= 0.0
            || self.test_fraction <= 0.0
        {
            return fail(format!("split fractions must be positive and sum to 1, got {total}"));
        }
        let (train, query, test) = split_counts(self);
        if train == 0 || query == 0 || test == 0 {
            return fail(format!(
                "split too small: {} images give {train}/{query}/{test} train/query/test",
                self.images
            ));
        }
        Ok(())
    }
}

fn split_counts(config: &WorldConfig) -> (usize, usize, usize) {
    let train = (config.images as f64 * config.train_fraction).floor() as usize;
    let query = (config.images as f64 * config.query_fraction).floor() as usize;
    let test = config.images.saturating_sub(train + query);
    (train, query, test)
}

/// A region of an image with its ground-truth label and raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: usize,
    pub image: usize,
    pub region: RegionBox,
    pub truth_head: String,
    pub raw: Vector,
}

/// An image: a coordinate frame holding object regions (no pixels).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: usize,
    pub width: f64,
    pub height: f64,
    pub objects: Vec<usize>,
}

/// Object-id lists per split; images never straddle splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub query: Vec<usize>,
    pub test: Vec<usize>,
}

/// A fully generated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub config: WorldConfig,
    pub seed: u64,
    pub concept_seed: u64,
    pub images: Vec<ImageInfo>,
    pub objects: Vec<ObjectInstance>,
    pub oracle_kb: KnowledgeSource,
    pub splits: Splits,
    pub known_heads: BTreeSet<String>,
    pub novel_heads: BTreeSet<String>,
}

#[derive(Serialize, Deserialize)]
struct WorldFile {
    version: u32,
    world: World,
}

impl World {
    /// Generates a world deterministically from the config and seed.
    pub fn generate(config: WorldConfig, seed: u64) -> Result<World> {
        config.validate()?;
        let vocab = config.vocabulary()?;
        let concept_seed = seeds::mix(seed, &[seeds::fnv1a("concepts")]);
        let concepts = ConceptTable::new(concept_seed, config.d);

        // Head labels: a shuffled slice of the noun pool, known first.
        let total_heads = config.known_heads + config.novel_heads;
        let mut names = head_names(total_heads);
        names.shuffle(&mut seeds::stream(seed, "head-names", &[]));
        let known: Vec<String> = names[..config.known_heads].to_vec();
        let novel: Vec<String> = names[config.known_heads..].to_vec();

        let pools: BTreeMap<String, Vec<String>> = config
            .relations
            .iter()
            .map(|spec| {
                (
                    spec.name.clone(),
                    tail_pool(&spec.name, config.tails_per_relation),
                )
            })
            .collect();

        // Known heads sample (relation, tail) pairs freely.
        let mut oracle_kb = KnowledgeSource::new(vocab.clone());
        for (idx, head) in known.iter().enumerate() {
            let mut rng = seeds::stream(seed, "known-knowledge", &[idx as u64]);
            let count =
                rng.gen_range(config.triplets_per_head_min..=config.triplets_per_head_max);
            let mut chosen: BTreeSet<(String, String)> = BTreeSet::new();
            let mut attempts = 0;
            while chosen.len() < count && attempts < 50 * count {
                attempts += 1;
                chosen.insert(sample_pair(&config, &pools, &mut rng));
            }
            for (relation, tail) in chosen {
                oracle_kb.insert(Triplet::new(head, &relation, &tail, &vocab)?)?;
            }
        }

        // Novel heads draw only from pairs some known head already has, so
        // every oracle pair is reachable from the training knowledge.
        let covered: Vec<(String, String)> = oracle_kb
            .rt_pairs()
            .map(|(r, t)| (r.to_string(), t.to_string()))
            .collect();
        for (idx, head) in novel.iter().enumerate() {
            let mut rng = seeds::stream(seed, "novel-knowledge", &[idx as u64]);
            let want = rng
                .gen_range(config.triplets_per_head_min..=config.triplets_per_head_max)
                .min(covered.len());
            let mut chosen: BTreeSet<(String, String)> = BTreeSet::new();
            while chosen.len() < want {
                let mut accepted = None;
                for _ in 0..50 {
                    let pair = sample_pair(&config, &pools, &mut rng);
                    if !chosen.contains(&pair) && covered.binary_search(&pair).is_ok() {
                        accepted = Some(pair);
                        break;
                    }
                }
                let pair = accepted.unwrap_or_else(|| {
                    let start = rng.gen_range(0..covered.len());
                    (0..covered.len())
                        .map(|k| covered[(start + k) % covered.len()].clone())
                        .find(|pair| !chosen.contains(pair))
                        .expect("want <= covered")
                });
                chosen.insert(pair);
            }
            for (relation, tail) in chosen {
                oracle_kb.insert(Triplet::new(head, &relation, &tail, &vocab)?)?;
            }
        }

        // Optional raw-space lift when d_raw differs from d.
        let lift: Option<Vec<f64>> = if config.d_raw == config.d {
            None
        } else {
            let mut rng = seeds::stream(seed, "lift", &[]);
            let scale = 1.0 / (config.d as f64).sqrt();
            Some(
                (0..config.d_raw * config.d)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
                    .collect(),
            )
        };

        let (n_train, n_query, _) = split_counts(&config);
        let mut images = Vec::with_capacity(config.images);
        let mut objects: Vec<ObjectInstance> = Vec::new();
        let mut splits = Splits {
            train: Vec::new(),
            query: Vec::new(),
            test: Vec::new(),
        };
        for image_idx in 0..config.images {
            let mut rng = seeds::stream(seed, "image", &[image_idx as u64]);
            let n_regions =
                rng.gen_range(config.regions_per_image_min..=config.regions_per_image_max);
            let is_train = image_idx < n_train;
            let is_query = !is_train && image_idx < n_train + n_query;
            let mut object_ids = Vec::with_capacity(n_regions);
            for _ in 0..n_regions {
                let w = rng.gen_range(0.10 * config.image_width..=0.35 * config.image_width);
                let h = rng.gen_range(0.10 * config.image_height..=0.35 * config.image_height);
                let x = rng.gen_range(0.0..=(config.image_width - w));
                let y = rng.gen_range(0.0..=(config.image_height - h));
                let head = if is_train {
                    known[rng.gen_range(0..known.len())].clone()
                } else if rng.gen::<f64>() < config.novel_object_rate {
                    novel[rng.gen_range(0..novel.len())].clone()
                } else {
                    known[rng.gen_range(0..known.len())].clone()
                };
                let raw = raw_feature(&config, &concepts, &oracle_kb, &head, &lift, &mut rng)?;
                let id = objects.len();
                objects.push(ObjectInstance {
                    id,
                    image: image_idx,
                    region: RegionBox::new(x, y, w, h)?,
                    truth_head: head,
                    raw,
                });
                object_ids.push(id);
            }
            let bucket = if is_train {
                &mut splits.train
            } else if is_query {
                &mut splits.query
            } else {
                &mut splits.test
            };
            bucket.extend(object_ids.iter().copied());
            images.push(ImageInfo {
                id: image_idx,
                width: config.image_width,
                height: config.image_height,
                objects: object_ids,
            });
        }

        Ok(World {
            config,
            seed,
            concept_seed,
            images,
            objects,
            oracle_kb,
            splits,
            known_heads: known.into_iter().collect(),
            novel_heads: novel.into_iter().collect(),
        })
    }

    pub fn vocabulary(&self) -> RelationVocabulary {
        self.config
            .vocabulary()
            .expect("generated world has a valid vocabulary")
    }

    pub fn concepts(&self) -> ConceptTable {
        ConceptTable::new(self.concept_seed, self.config.d)
    }

    /// The classifier's starting knowledge: all oracle triplets whose head
    /// is known.
    pub fn train_knowledge(&self) -> KnowledgeSource {
        let mut source = KnowledgeSource::new(self.vocabulary());
        for triplet in self.oracle_kb.iter() {
            if self.known_heads.contains(triplet.head()) {
                source
                    .insert(triplet.clone())
                    .expect("oracle triplets are valid");
            }
        }
        source
    }

    pub fn objects_for(&self, ids: &[usize]) -> Vec<&ObjectInstance> {
        ids.iter().map(|id| &self.objects[*id]).collect()
    }

    pub fn train_objects(&self) -> Vec<&ObjectInstance> {
        self.objects_for(&self.splits.train)
    }

    pub fn query_objects(&self) -> Vec<&ObjectInstance> {
        self.objects_for(&self.splits.query)
    }

    pub fn test_objects(&self) -> Vec<&ObjectInstance> {
        self.objects_for(&self.splits.test)
    }

    /// Region boxes of an image, parallel to its object list.
    pub fn image_regions(&self, image: usize) -> Vec<RegionBox> {
        self.images[image]
            .objects
            .iter()
            .map(|&id| self.objects[id].region)
            .collect()
    }

    /// Every head label in the world, sorted.
    pub fn all_heads(&self) -> Vec<String> {
        self.known_heads
            .iter()
            .chain(self.novel_heads.iter())
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Serializes the world as a versioned JSON document. The output is
    /// canonical: generating and saving the same `(config, seed)` twice
    /// yields byte-identical files.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = WorldFile {
            version: WORLD_FORMAT_VERSION,
            world: self.clone(),
        };
        serde_json::to_string(&file).map_err(|e| Error::WorldFile(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<World> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<World> {
        let file: WorldFile =
            serde_json::from_str(text).map_err(|e| Error::WorldFile(e.to_string()))?;
        if file.version != WORLD_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                expected: WORLD_FORMAT_VERSION,
                got: file.version,
            });
        }
        Ok(file.world)
    }
}

/// Raw object feature: the (optionally lifted) sum of the head's concept
/// vectors plus Gaussian noise, normalized to unit length.
fn raw_feature(
    config: &WorldConfig,
    concepts: &ConceptTable,
    oracle_kb: &KnowledgeSource,
    head: &str,
    lift: &Option<Vec<f64>>,
    rng: &mut impl Rng,
) -> Result<Vector> {
    let mut centroid = vec![0.0; config.d];
    for triplet in oracle_kb.head_triplets(head) {
        let concept = concepts.encode_triplet(triplet);
        for (c, v) in centroid.iter_mut().zip(concept.iter()) {
            *c += v;
        }
    }
    for c in centroid.iter_mut() {
        let noise: f64 = rng.sample(StandardNormal);
        *c += config.sigma * noise;
    }
    let raw = match lift {
        None => centroid,
        Some(matrix) => {
            let mut lifted = vec![0.0; config.d_raw];
            for (i, slot) in lifted.iter_mut().enumerate() {
                let row = &matrix[i * config.d..(i + 1) * config.d];
                *slot = row.iter().zip(centroid.iter()).map(|(a, b)| a * b).sum();
            }
            lifted
        }
    };
    normalize(&raw)
}

fn sample_pair(
    config: &WorldConfig,
    pools: &BTreeMap<String, Vec<String>>,
    rng: &mut impl Rng,
) -> (String, String) {
    let total: f64 = config.relations.iter().map(|spec| spec.weight).sum();
    let mut remaining = rng.gen::<f64>() * total;
    let mut relation = &config.relations[config.relations.len() - 1].name;
    for spec in &config.relations {
        remaining -= spec.weight;
        if remaining <= 0.0 {
            relation = &spec.name;
            break;
        }
    }
    let pool = &pools[relation];
    let tail = pool[rng.gen_range(0..pool.len())].clone();
    (relation.clone(), tail)
}

const HEAD_WORDS: &[&str] = &[
    "dog", "cat", "cup", "bottle", "chair", "table", "bicycle", "car", "airplane", "boat",
    "knife", "fork", "spoon", "plate", "bowl", "lamp", "phone", "laptop", "keyboard", "monitor",
    "book", "pen", "pencil", "backpack", "umbrella", "clock", "watch", "camera", "guitar",
    "piano", "drum", "violin", "shirt", "coat", "hat", "shoe", "sock", "glove", "scarf", "belt",
    "couch", "bed", "pillow", "blanket", "mirror", "window", "door", "ladder", "hammer",
    "wrench", "screwdriver", "saw", "drill", "broom", "bucket", "sponge", "towel", "soap",
    "brush", "comb", "toaster", "kettle", "oven", "fridge", "microwave", "blender", "pan",
    "pot", "tray", "jar", "basket", "box", "bag", "wallet", "key", "coin", "candle", "vase",
    "plant", "flower", "tree", "rock", "ball", "kite", "doll", "puzzle", "robot", "train",
    "bus", "truck", "scooter", "skateboard", "helmet", "tent", "rope", "net", "hook", "nail",
    "screw", "wheel", "tire", "engine", "battery", "wire", "bulb", "switch", "fan", "heater",
    "radio", "television", "speaker", "headphone", "printer", "scanner", "stapler", "scissors",
    "tape", "glue", "banana", "apple",
];

fn head_names(count: usize) -> Vec<String> {
    (0..count)
        .map(|i| {
            let base = HEAD_WORDS[i % HEAD_WORDS.len()];
            if i < HEAD_WORDS.len() {
                base.to_string()
            } else {
                format!("{base}-{}", i / HEAD_WORDS.len() + 1)
            }
        })
        .collect()
}

const TAIL_WORDS: &[(&str, &[&str])] = &[
    (
        "isa",
        &[
            "mammal", "tool", "vehicle", "container", "instrument", "garment", "furniture",
            "appliance", "utensil", "toy", "machine", "device", "structure", "ornament",
            "accessory", "fixture", "gadget", "fastener", "textile", "vessel",
        ],
    ),
    (
        "usedfor",
        &[
            "drinking", "cutting", "cooking", "cleaning", "writing", "carrying", "sitting",
            "sleeping", "playing music", "travel", "storage", "lighting", "measuring",
            "painting", "digging", "fastening", "heating", "cooling", "communication",
            "decoration",
        ],
    ),
    (
        "madeof",
        &[
            "wood", "metal", "plastic", "glass", "ceramic", "leather", "cotton", "wool",
            "rubber", "paper", "stone", "steel", "aluminum", "copper", "bamboo", "silk",
            "clay", "concrete", "cardboard", "fabric",
        ],
    ),
    (
        "capableof",
        &[
            "rolling", "floating", "flying", "barking", "spinning", "bouncing", "folding",
            "stretching", "breaking", "melting", "shining", "ringing", "vibrating",
            "inflating", "swinging", "sliding", "locking", "opening", "charging", "recording",
        ],
    ),
    (
        "atlocation",
        &[
            "kitchen", "bedroom", "office", "garage", "garden", "bathroom", "street", "park",
            "school", "library", "workshop", "farm", "beach", "forest", "market", "museum",
            "airport", "harbor", "stadium", "basement",
        ],
    ),
    (
        "hasproperty",
        &[
            "soft", "hard", "heavy", "light", "sharp", "smooth", "rough", "fragile", "durable",
            "flexible", "transparent", "shiny", "round", "flat", "hollow", "sturdy",
            "portable", "waterproof", "colorful", "compact",
        ],
    ),
];

fn tail_pool(relation: &str, count: usize) -> Vec<String> {
    let base: Vec<String> = match TAIL_WORDS.iter().find(|(name, _)| *name == relation) {
        Some((_, words)) => words.iter().map(|w| w.to_string()).collect(),
        None => (0..count.max(1))
            .map(|i| format!("{relation} trait {i}"))
            .collect(),
    };
    (0..count)
        .map(|i| {
            let word = &base[i % base.len()];
            if i < base.len() {
                word.clone()
            } else {
                format!("{word} {}", i / base.len() + 1)
            }
        })
        .collect()
}
