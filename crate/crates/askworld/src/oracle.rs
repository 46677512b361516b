//! The gated ground-truth answerer.
//!
//! A question is answered only if it survives three validity gates: the
//! head gate (does the question point at the object it was generated
//! for?), the relation gate (does the parsed relation match the target
//! relation?), and the region gate (does the claimed region overlap the
//! target region by IoBB greater than 0.4?). Valid questions are answered
//! with matching triplets from the oracle knowledge source; everything
//! else is a rejection carrying the full gate report.

use std::io::{BufRead, Write};
use std::sync::OnceLock;

use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeSource, RelationVocabulary, Triplet};
use crate::policy::Mode;
use crate::realizer::{Question, TEMPLATES};
use crate::world::World;

/// An axis-aligned region in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl RegionBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidQuestionTarget("non-finite box".into()));
        }
        if x < 0.0 || y < 0.0 || w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidQuestionTarget(format!(
                "degenerate box ({x}, {y}, {w}, {h})"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn intersection_area(&self, other: &RegionBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        ix.max(0.0) * iy.max(0.0)
    }
}

/// Intersection over (target) bounding box: how much of the target region
/// the predicted region covers. Always in `[0, 1]`.
pub fn iobb(predicted: &RegionBox, target: &RegionBox) -> f64 {
    predicted.intersection_area(target) / target.area()
}

/// IoBB plus the strict `> 0.4` validity decision.
pub fn region_gate(predicted: &RegionBox, target: &RegionBox) -> (f64, bool) {
    let value = iobb(predicted, target);
    (value, value > 0.4)
}

/// Relation gate: simple equality of canonical relation names.
pub fn relation_gate(parsed: &str, target: &str) -> bool {
    parsed == target
}

/// Head gate: the simulated VQA answerer looks at the claimed region, names
/// the object whose region overlaps it the most, and with probability
/// `error_rate` blurts a uniformly random wrong label instead. The gate is
/// valid iff the named head equals the intended target object's label.
pub fn head_gate(
    image_objects: &[(String, RegionBox)],
    claimed: &RegionBox,
    true_head: &str,
    all_heads: &[String],
    error_rate: f64,
    rng: &mut impl Rng,
) -> Result<(String, bool)> {
    if image_objects.is_empty() {
        return Err(Error::EmptyImage);
    }
    let mut predicted = &image_objects[0].0;
    let mut best = f64::NEG_INFINITY;
    for (head, region) in image_objects {
        let overlap = iobb(region, claimed);
        if overlap > best {
            best = overlap;
            predicted = head;
        }
    }
    let mut predicted = predicted.clone();
    if rng.gen::<f64>() < error_rate {
        let wrong: Vec<&String> = all_heads.iter().filter(|h| **h != predicted).collect();
        if !wrong.is_empty() {
            predicted = wrong[rng.gen_range(0..wrong.len())].clone();
        }
    }
    let valid = predicted == true_head;
    Ok((predicted, valid))
}

/// What the oracle recovered from a question surface.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parsed {
    pub mode: Mode,
    pub relation: String,
    pub tail: Option<String>,
    pub region_index: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Region,
    Tail,
}

struct FrameMatcher {
    relation: &'static str,
    mode: Mode,
    regex: Regex,
    slots: Vec<Slot>,
}

fn frame_regex(frame: &str) -> (Regex, Vec<Slot>) {
    let mut pattern = String::from("^");
    let mut slots = Vec::new();
    let mut rest = frame;
    while let Some(pos) = rest.find('{') {
        pattern.push_str(&regex::escape(&rest[..pos]));
        let close = rest[pos..].find('}').expect("unterminated slot") + pos;
        match &rest[pos..=close] {
            "{region}" => {
                pattern.push_str("in region r([0-9]+)");
                slots.push(Slot::Region);
            }
            "{tail}" => {
                pattern.push_str("(.+)");
                slots.push(Slot::Tail);
            }
            slot => panic!("unknown slot {slot}"),
        }
        rest = &rest[close + 1..];
    }
    pattern.push_str(&regex::escape(rest));
    pattern.push('$');
    (Regex::new(&pattern).expect("frame regex compiles"), slots)
}

fn matchers() -> &'static [FrameMatcher] {
    static MATCHERS: OnceLock<Vec<FrameMatcher>> = OnceLock::new();
    MATCHERS.get_or_init(|| {
        let mut all = Vec::new();
        for (relation, conf, exp) in TEMPLATES {
            for (mode, frame) in [(Mode::Confirmation, conf), (Mode::Exploration, exp)] {
                let (regex, slots) = frame_regex(frame);
                all.push(FrameMatcher {
                    relation,
                    mode,
                    regex,
                    slots,
                });
            }
        }
        all
    })
}

/// Recovers `(mode, relation, tail, claimed region)` from a surface by
/// matching it against every template frame. Exactly one frame must match.
pub fn parse(surface: &str) -> Result<Parsed> {
    let mut found: Option<Parsed> = None;
    for matcher in matchers() {
        let Some(captures) = matcher.regex.captures(surface) else {
            continue;
        };
        let mut tail = None;
        let mut region_index = None;
        for (i, slot) in matcher.slots.iter().enumerate() {
            let text = captures[i + 1].to_string();
            match slot {
                Slot::Tail => tail = Some(text),
                Slot::Region => {
                    region_index = text.parse::<usize>().ok();
                    if region_index.is_none() {
                        return Err(Error::QuestionParse(surface.to_string()));
                    }
                }
            }
        }
        let parsed = Parsed {
            mode: matcher.mode,
            relation: matcher.relation.to_string(),
            tail,
            region_index: region_index.expect("every frame has a region slot"),
        };
        if found.is_some() {
            return Err(Error::QuestionParse(format!(
                "ambiguous surface {surface:?}"
            )));
        }
        found = Some(parsed);
    }
    found.ok_or_else(|| Error::QuestionParse(surface.to_string()))
}

/// Per-gate outcome of answering one question.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateReport {
    pub parse_ok: bool,
    pub predicted_head: Option<String>,
    pub head_valid: bool,
    pub predicted_relation: Option<String>,
    pub relation_valid: bool,
    pub iobb: Option<f64>,
    pub region_valid: bool,
}

impl GateReport {
    fn rejection() -> Self {
        Self {
            parse_ok: false,
            predicted_head: None,
            head_valid: false,
            predicted_relation: None,
            relation_valid: false,
            iobb: None,
            region_valid: false,
        }
    }

    pub fn all_valid(&self) -> bool {
        self.parse_ok && self.head_valid && self.relation_valid && self.region_valid
    }
}

/// The oracle's verdict: a gate report plus, when every gate passed, the
/// matching knowledge. A `None` answer is a rejection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResponse {
    pub report: GateReport,
    pub answer: Option<Vec<Triplet>>,
}

impl OracleResponse {
    pub fn is_valid(&self) -> bool {
        self.answer.is_some()
    }
}

/// Answers a question against the world's ground truth. All three gates
/// are always evaluated so rejections carry a complete report. On success
/// the returned triplets are exactly the oracle entries `<h, r, *>` for the
/// target object's true head `h` and the parsed relation `r`; confirmation
/// questions are narrowed to the asked tail when the oracle actually holds
/// it.
pub fn answer(
    question: &Question,
    oracle_kb: &KnowledgeSource,
    world: &World,
    head_error_rate: f64,
    rng: &mut impl Rng,
) -> OracleResponse {
    let Ok(parsed) = parse(&question.surface) else {
        return OracleResponse {
            report: GateReport::rejection(),
            answer: None,
        };
    };

    let image = &world.images[question.image];
    let target_object = &world.objects[question.target_object];
    let claimed = match image.objects.get(parsed.region_index) {
        Some(object_id) => world.objects[*object_id].region,
        None => {
            // A surface pointing at a region the image does not have.
            let mut report = GateReport::rejection();
            report.parse_ok = true;
            report.predicted_relation = Some(parsed.relation.clone());
            report.relation_valid = relation_gate(&parsed.relation, question.target.relation());
            return OracleResponse {
                report,
                answer: None,
            };
        }
    };

    let image_objects: Vec<(String, RegionBox)> = image
        .objects
        .iter()
        .map(|&id| (world.objects[id].truth_head.clone(), world.objects[id].region))
        .collect();
    let all_heads = world.all_heads();
    let (predicted_head, head_valid) = match head_gate(
        &image_objects,
        &claimed,
        &target_object.truth_head,
        &all_heads,
        head_error_rate,
        rng,
    ) {
        Ok(outcome) => outcome,
        Err(_) => {
            return OracleResponse {
                report: GateReport::rejection(),
                answer: None,
            }
        }
    };

    let relation_valid = relation_gate(&parsed.relation, question.target.relation());
    let (iobb_value, region_valid) = region_gate(&claimed, &target_object.region);

    let report = GateReport {
        parse_ok: true,
        predicted_head: Some(predicted_head),
        head_valid,
        predicted_relation: Some(parsed.relation.clone()),
        relation_valid,
        iobb: Some(iobb_value),
        region_valid,
    };
    if !report.all_valid() {
        return OracleResponse {
            report,
            answer: None,
        };
    }

    let head = &target_object.truth_head;
    let full: Vec<Triplet> = oracle_kb
        .head_triplets(head)
        .filter(|t| t.relation() == parsed.relation)
        .cloned()
        .collect();
    let triplets = match &parsed.tail {
        Some(tail) => {
            let narrowed: Vec<Triplet> = full
                .iter()
                .filter(|t| t.tail() == tail)
                .cloned()
                .collect();
            // An asked tail the oracle does not hold: answer with the true
            // knowledge for the head and relation instead of nothing.
            if narrowed.is_empty() {
                full
            } else {
                narrowed
            }
        }
        None => full,
    };
    OracleResponse {
        report,
        answer: Some(triplets),
    }
}

/// A prompt/response channel for a human oracle.
pub trait AnswerChannel {
    fn say(&mut self, text: &str) -> std::io::Result<()>;
    /// Next response line, or `None` when the channel is closed.
    fn ask_line(&mut self) -> std::io::Result<Option<String>>;
}

/// Channel over arbitrary reader/writer pairs (stdin/stdout in the CLI,
/// buffers in tests).
pub struct IoChannel<R, W> {
    pub input: R,
    pub output: W,
}

impl<R: BufRead, W: Write> AnswerChannel for IoChannel<R, W> {
    fn say(&mut self, text: &str) -> std::io::Result<()> {
        writeln!(self.output, "{text}")?;
        self.output.flush()
    }

    fn ask_line(&mut self) -> std::io::Result<Option<String>> {
        let mut line = String::new();
        let read = self.input.read_line(&mut line)?;
        if read == 0 {
            return Ok(None);
        }
        Ok(Some(line.trim_end_matches(['\n', '\r']).to_string()))
    }
}

/// Outcome of one interactive exchange.
#[derive(Debug, Clone, PartialEq)]
pub enum InteractiveOutcome {
    Answered(Triplet),
    Rejected,
}

/// Asks a human to answer one question: prints the surface and region,
/// accepts a tab-separated triplet or the word `reject`, and re-prompts on
/// malformed input up to three times before giving up. A closed channel
/// surfaces as an `UnexpectedEof` error so the caller can flush state.
pub fn interactive_answer(
    question: &Question,
    vocab: &RelationVocabulary,
    channel: &mut dyn AnswerChannel,
) -> std::io::Result<InteractiveOutcome> {
    let b = &question.claimed_box;
    channel.say(&format!("[{}] {}", question.id, question.surface))?;
    channel.say(&format!(
        "  region r{} at (x={:.1}, y={:.1}, w={:.1}, h={:.1}) in image {}",
        question.claimed_region, b.x, b.y, b.w, b.h, question.image
    ))?;
    channel.say("  reply with head<TAB>relation<TAB>tail, or 'reject'")?;
    for _ in 0..3 {
        let Some(line) = channel.ask_line()? else {
            return Err(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "answer channel closed",
            ));
        };
        let line = line.trim();
        if line.eq_ignore_ascii_case("reject") {
            return Ok(InteractiveOutcome::Rejected);
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            channel.say("  malformed: expected 3 tab-separated fields or 'reject'")?;
            continue;
        }
        match Triplet::new(fields[0], fields[1], fields[2], vocab) {
            Ok(triplet) => return Ok(InteractiveOutcome::Answered(triplet)),
            Err(e) => channel.say(&format!("  malformed: {e}"))?,
        }
    }
    channel.say("  giving up after 3 malformed replies")?;
    Ok(InteractiveOutcome::Rejected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use proptest::prelude::*;

    fn boxed(x: f64, y: f64, w: f64, h: f64) -> RegionBox {
        RegionBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn iobb_worked_examples() {
        let target = boxed(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iobb(&target, &target), 1.0);

        let disjoint = boxed(20.0, 20.0, 5.0, 5.0);
        assert_eq!(iobb(&disjoint, &target), 0.0);

        // Half-overlapping: intersection 50 over target area 100.
        let predicted = boxed(5.0, 0.0, 10.0, 10.0);
        assert_eq!(iobb(&predicted, &target), 0.5);
        assert!(region_gate(&predicted, &target).1);
    }

    #[test]
    fn region_gate_is_strict_at_the_threshold() {
        let target = boxed(0.0, 0.0, 10.0, 10.0);
        // Intersection 40 over 100 = 0.4 exactly: invalid.
        let predicted = boxed(6.0, 0.0, 10.0, 10.0);
        let (value, valid) = region_gate(&predicted, &target);
        assert_eq!(value, 0.4);
        assert!(!valid);
        assert!(!region_gate(&boxed(50.0, 50.0, 1.0, 1.0), &target).1);
    }

    #[test]
    fn relation_gate_is_equality() {
        assert!(relation_gate("isa", "isa"));
        assert!(!relation_gate("isa", "usedfor"));
    }

    #[test]
    fn head_gate_follows_the_claimed_region() {
        let objects = vec![
            ("dog".to_string(), boxed(0.0, 0.0, 10.0, 10.0)),
            ("cup".to_string(), boxed(100.0, 100.0, 10.0, 10.0)),
        ];
        let heads = vec!["cup".to_string(), "dog".to_string()];
        let mut rng = seeds::stream(0, "head-gate", &[]);

        // Claimed = true region: the gate passes with no error noise.
        let (predicted, valid) =
            head_gate(&objects, &objects[0].1, "dog", &heads, 0.0, &mut rng).unwrap();
        assert_eq!(predicted, "dog");
        assert!(valid);

        // Claimed region swapped to the cup: the answerer names the cup.
        let (predicted, valid) =
            head_gate(&objects, &objects[1].1, "dog", &heads, 0.0, &mut rng).unwrap();
        assert_eq!(predicted, "cup");
        assert!(!valid);

        // Forced error always flips to a wrong label.
        for i in 0..16 {
            let mut rng = seeds::stream(i, "head-gate-flip", &[]);
            let (_, valid) =
                head_gate(&objects, &objects[0].1, "dog", &heads, 1.0, &mut rng).unwrap();
            assert!(!valid);
        }
    }

    #[test]
    fn head_gate_needs_objects() {
        let mut rng = seeds::stream(0, "head-gate-empty", &[]);
        assert!(matches!(
            head_gate(&[], &boxed(0.0, 0.0, 1.0, 1.0), "dog", &[], 0.0, &mut rng),
            Err(Error::EmptyImage)
        ));
    }

    #[test]
    fn parse_inverts_the_templates() {
        let parsed = parse("What is the mammal in region r3?").unwrap();
        assert_eq!(parsed.mode, Mode::Confirmation);
        assert_eq!(parsed.relation, "isa");
        assert_eq!(parsed.tail.as_deref(), Some("mammal"));
        assert_eq!(parsed.region_index, 3);

        let parsed = parse("What is the object in region r3 made of?").unwrap();
        assert_eq!(parsed.mode, Mode::Exploration);
        assert_eq!(parsed.relation, "madeof");
        assert_eq!(parsed.tail, None);
        assert_eq!(parsed.region_index, 3);
    }

    #[test]
    fn parse_rejects_gibberish() {
        assert!(matches!(
            parse("Gibberish?"),
            Err(Error::QuestionParse(_))
        ));
    }

    #[test]
    fn parse_round_trips_every_frame() {
        for (relation, _, _) in TEMPLATES {
            for (mode, tail) in [
                (Mode::Confirmation, Some("soft wood")),
                (Mode::Exploration, None),
            ] {
                let (conf, exp) = crate::realizer::templates(relation).unwrap();
                let frame = match mode {
                    Mode::Confirmation => conf,
                    Mode::Exploration => exp,
                };
                let mut surface = frame.replace("{region}", "in region r7");
                if let Some(tail) = tail {
                    surface = surface.replace("{tail}", tail);
                }
                let parsed = parse(&surface).unwrap();
                assert_eq!(parsed.relation, *relation, "surface {surface:?}");
                assert_eq!(parsed.mode, mode);
                assert_eq!(parsed.tail.as_deref(), tail);
                assert_eq!(parsed.region_index, 7);
            }
        }
    }

    #[test]
    fn interactive_answer_accepts_a_typed_triplet() {
        let question = sample_question();
        let vocab = RelationVocabulary::default();
        let input = std::io::Cursor::new("dog\tIsA\tmammal\n");
        let mut channel = IoChannel {
            input,
            output: Vec::new(),
        };
        let outcome = interactive_answer(&question, &vocab, &mut channel).unwrap();
        let expected = Triplet::new("dog", "isa", "mammal", &vocab).unwrap();
        assert_eq!(outcome, InteractiveOutcome::Answered(expected));
    }

    #[test]
    fn interactive_answer_takes_reject() {
        let question = sample_question();
        let vocab = RelationVocabulary::default();
        let input = std::io::Cursor::new("reject\n");
        let mut channel = IoChannel {
            input,
            output: Vec::new(),
        };
        assert_eq!(
            interactive_answer(&question, &vocab, &mut channel).unwrap(),
            InteractiveOutcome::Rejected
        );
    }

    #[test]
    fn interactive_answer_gives_up_after_three_bad_lines() {
        let question = sample_question();
        let vocab = RelationVocabulary::default();
        let input = std::io::Cursor::new("nope\nstill no\ndog\teats\tbone\n");
        let mut channel = IoChannel {
            input,
            output: Vec::new(),
        };
        assert_eq!(
            interactive_answer(&question, &vocab, &mut channel).unwrap(),
            InteractiveOutcome::Rejected
        );
    }

    #[test]
    fn interactive_answer_surfaces_channel_close() {
        let question = sample_question();
        let vocab = RelationVocabulary::default();
        let input = std::io::Cursor::new("");
        let mut channel = IoChannel {
            input,
            output: Vec::new(),
        };
        let err = interactive_answer(&question, &vocab, &mut channel).unwrap_err();
        assert_eq!(err.kind(), std::io::ErrorKind::UnexpectedEof);
    }

    fn sample_question() -> Question {
        let region = boxed(0.0, 0.0, 10.0, 10.0);
        let object = crate::world::ObjectInstance {
            id: 0,
            image: 0,
            region,
            truth_head: "dog".into(),
            raw: vec![1.0],
        };
        let image = crate::world::ImageInfo {
            id: 0,
            width: 640.0,
            height: 480.0,
            objects: vec![0],
        };
        let mut rng = seeds::stream(0, "sample-question", &[]);
        crate::realizer::realize(
            "q0",
            &crate::knowledge::MaskedTriplet::confirmation("isa", "mammal"),
            &object,
            &image,
            &[region],
            Mode::Confirmation,
            &crate::realizer::NoiseParams::ZERO,
            &mut rng,
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn iobb_properties(
            ax in 0.0f64..200.0, ay in 0.0f64..200.0,
            aw in 1.0f64..100.0, ah in 1.0f64..100.0,
            bx in 0.0f64..200.0, by in 0.0f64..200.0,
            bw in 1.0f64..100.0, bh in 1.0f64..100.0,
            dx in -50.0f64..50.0, dy in -50.0f64..50.0,
        ) {
            let a = boxed(ax, ay, aw, ah);
            let b = boxed(bx, by, bw, bh);
            let value = iobb(&a, &b);
            prop_assert!((0.0..=1.0).contains(&value));
            prop_assert_eq!(iobb(&a, &a), 1.0);

            // Joint translation leaves the overlap ratio unchanged.
            let (sx, sy) = (dx.max(-ax.min(bx)), dy.max(-ay.min(by)));
            let a2 = boxed(ax + sx, ay + sy, aw, ah);
            let b2 = boxed(bx + sx, by + sy, bw, bh);
            prop_assert!((iobb(&a2, &b2) - value).abs() < 1e-9);
        }
    }
}
