//! Question/answer templates for single-turn and multi-turn records.

use octav_core::{render_interval, ClipTimeline, TimeInterval, TimedCaption};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchor::AudioEditPlan;

/// Tolerance when matching a caption boundary to a sound boundary.
const EDGE_EPS: f64 = 1e-6;

/// Instruction phrasings for single-turn questions; `{event}` is replaced by
/// the anchored event name.
pub const INSTRUCTION_VARIANTS: [&str; 20] = [
    "Start and end timestamps should be included while describing what {event} is.",
    "Please include the start and end time when briefly describing what {event} entails.",
    "Start and end timestamps are required while providing a brief description of what {event} involves.",
    "Include the exact start and end times when describing what {event} refers to.",
    "Ensure to mention the start and end timestamps when explaining what {event} covers.",
    "With the start and end times, please provide a brief explanation of what {event} is.",
    "Start and end timestamps should be given alongside a description of what {event} involves.",
    "When describing what {event} is, include the exact start and end time information.",
    "Include start and end time details when summarizing what {event} entails.",
    "Start and end timestamps must be specified when giving a brief description of what {event} refers to.",
    "Describe what {event} is with start and end timestamps.",
    "Please briefly describe what {event} entails, including its exact start and end timestamps.",
    "Provide a brief description of what {event} includes, along with the start and end times.",
    "Give a short description of what {event} is, including the precise start and end time details.",
    "Briefly explain what {event} involves, including its start and end timestamps.",
    "Please summarize what {event} covers, specifying the start and end timestamps.",
    "Give a brief explanation of what {event} is, making sure to include both the start and end times.",
    "Could you describe what {event} refers to, including the exact start and end times?",
    "Please provide a concise overview of what {event} involves, along with start and end time details.",
    "Could you explain what {event} is, ensuring the start and end timestamps are included?",
];

/// Sounds that can be named in refusal turns: the urban-sound classes, human
/// non-speech sounds and a few common others.
pub const DEFAULT_NEGATIVE_LABELS: [&str; 18] = [
    "bird chirping",
    "air conditioner",
    "car horn",
    "children playing",
    "dog bark",
    "drilling",
    "engine idling",
    "gun shot",
    "jackhammer",
    "siren",
    "street music",
    "breathing",
    "coughing",
    "crying",
    "laughing",
    "screaming",
    "sneezing",
    "yawning",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DialogueError {
    #[error("expected {expected} overlay(s), found {found}")]
    OverlayCount { expected: usize, found: usize },
    #[error("no caption {0} the sound at {1}")]
    NoNeighbor(&'static str, String),
    #[error("no negative label differs from the sounds in the record")]
    NoNegativeLabel,
    #[error("annotation list is empty")]
    EmptyAnnotations,
    #[error("annotations contain no audio event")]
    NoAudioEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

impl Turn {
    pub fn user(text: impl Into<String>) -> Self {
        Self { role: Role::User, text: text.into() }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self { role: Role::Assistant, text: text.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Before,
    After,
}

impl Direction {
    fn word(self) -> &'static str {
        match self {
            Direction::Before => "before",
            Direction::After => "after",
        }
    }
}

/// A labelled sound on the chunk timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundMention {
    #[serde(flatten)]
    pub interval: TimeInterval,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Visual,
}

/// One real audio-visual annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvAnnotation {
    #[serde(flatten)]
    pub interval: TimeInterval,
    pub label: String,
    pub modality: Modality,
}

fn label_text(label: &str) -> String {
    label.trim().to_lowercase()
}

fn caption_text(caption: &str) -> &str {
    caption.trim().trim_end_matches('.').trim_end()
}

fn iv(i: &TimeInterval) -> String {
    render_interval(i)
}

fn caption_before<'a>(captions: &'a [TimedCaption], sound: &TimeInterval) -> Option<&'a TimedCaption> {
    captions.iter().rev().find(|c| c.interval.end() <= sound.start() + EDGE_EPS)
}

fn caption_after<'a>(captions: &'a [TimedCaption], sound: &TimeInterval) -> Option<&'a TimedCaption> {
    captions.iter().find(|c| c.interval.start() >= sound.end() - EDGE_EPS)
}

fn neighbor<'a>(
    captions: &'a [TimedCaption],
    sound: &TimeInterval,
    direction: Direction,
) -> Option<&'a TimedCaption> {
    match direction {
        Direction::Before => caption_before(captions, sound),
        Direction::After => caption_after(captions, sound),
    }
}

/// "The sound of {l} is from [a, b]. From [c, d], {caption}."
fn sound_then_caption(label: &str, sound: &TimeInterval, caption: &TimedCaption) -> String {
    format!(
        "The sound of {label} is from {}. From {}, {}.",
        iv(sound),
        iv(&caption.interval),
        caption_text(&caption.caption)
    )
}

fn single_turn(
    captions: &[TimedCaption],
    sound: &SoundMention,
    direction: Direction,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Turn>, DialogueError> {
    let caption = neighbor(captions, &sound.interval, direction)
        .ok_or_else(|| DialogueError::NoNeighbor(direction.word(), iv(&sound.interval)))?;
    let label = label_text(&sound.label);
    let event = format!("the event {} the sound of {label}", direction.word());
    let template = INSTRUCTION_VARIANTS.choose(rng).expect("non-empty");
    Ok(vec![
        Turn::user(template.replace("{event}", &event)),
        Turn::assistant(sound_then_caption(&label, &sound.interval, caption)),
    ])
}

/// One question/answer pair about the timeline's single overlay.
pub fn generate_st_qa(
    timeline: &ClipTimeline,
    plan: &AudioEditPlan,
    seed: u64,
    direction: Direction,
) -> Result<Vec<Turn>, DialogueError> {
    let [overlay] = plan.overlays.as_slice() else {
        return Err(DialogueError::OverlayCount { expected: 1, found: plan.overlays.len() });
    };
    let sound = SoundMention { interval: overlay.interval, label: overlay.label.clone() };
    single_turn(timeline.events(), &sound, direction, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Seeded choice of a negative label not naming any sound in `present`.
pub fn pick_negative_label(
    candidates: &[String],
    present: &[&str],
    rng: &mut impl Rng,
) -> Result<String, DialogueError> {
    let present: Vec<String> = present.iter().map(|l| label_text(l)).collect();
    let usable: Vec<String> = candidates
        .iter()
        .map(|c| label_text(c))
        .filter(|c| !c.is_empty() && !present.contains(c))
        .collect();
    usable.choose(rng).cloned().ok_or(DialogueError::NoNegativeLabel)
}

const TIMESTAMP_REQUEST: &str = "Answer with start and end timestamps.";

/// Question about one sound, preferring what happens after it.
fn sound_pair(captions: &[TimedCaption], sound: &SoundMention) -> [Turn; 2] {
    let label = label_text(&sound.label);
    for direction in [Direction::After, Direction::Before] {
        if let Some(c) = neighbor(captions, &sound.interval, direction) {
            return [
                Turn::user(format!(
                    "What is happening in the video {} the sound of {label}? {TIMESTAMP_REQUEST}",
                    direction.word()
                )),
                Turn::assistant(sound_then_caption(&label, &sound.interval, c)),
            ];
        }
    }
    [
        Turn::user(format!("When can the sound of {label} be heard? {TIMESTAMP_REQUEST}")),
        Turn::assistant(format!("The sound of {label} is from {}.", iv(&sound.interval))),
    ]
}

/// Clarification exchange for two sounds sharing `label`.
fn clarification(
    captions: &[TimedCaption],
    sounds: [&SoundMention; 2],
    label: &str,
    rng: &mut ChaCha8Rng,
) -> Vec<Turn> {
    let target = rng.random_range(0..2);
    let chosen = sounds[target];
    let anchors = [
        caption_before(captions, &sounds[0].interval),
        caption_before(captions, &sounds[1].interval),
    ];
    let distinct = matches!(anchors, [Some(a), Some(b)] if a.interval != b.interval);
    let reference = match anchors[target] {
        Some(c) if distinct => format!("the {label} that happens after {}", caption_text(&c.caption)),
        _ => format!("the {} {label}", ["first", "second"][target]),
    };
    let answer = match caption_after(captions, &chosen.interval) {
        Some(c) => format!(
            "Okay, so the {label} from {}. After this sound of {label}, from {}, {}.",
            iv(&chosen.interval),
            iv(&c.interval),
            caption_text(&c.caption)
        ),
        None => format!("Okay, so the {label} from {}.", iv(&chosen.interval)),
    };
    vec![
        Turn::user(format!(
            "What is happening in the video after the sound of {label}? {TIMESTAMP_REQUEST}"
        )),
        Turn::assistant(format!(
            "There are two sounds of {label}, one from {} and the other one from {}. Which {label} are you referring to?",
            iv(&sounds[0].interval),
            iv(&sounds[1].interval)
        )),
        Turn::user(format!("I am referring to {reference}.")),
        Turn::assistant(answer),
    ]
}

/// Question anchored on a video caption: the sound that follows it and the
/// caption after that sound.
fn caption_anchored(captions: &[TimedCaption], sounds: &[&SoundMention]) -> [Turn; 2] {
    for c in captions {
        let next_sound = sounds
            .iter()
            .filter(|s| s.interval.start() >= c.interval.end() - EDGE_EPS)
            .min_by(|a, b| a.interval.start().total_cmp(&b.interval.start()));
        if let Some(s) = next_sound {
            if let Some(after) = caption_after(captions, &s.interval) {
                let label = label_text(&s.label);
                return [
                    Turn::user(format!(
                        "Thanks, what is happening in the video after {}? {TIMESTAMP_REQUEST}",
                        caption_text(&c.caption)
                    )),
                    Turn::assistant(format!(
                        "There is a sound of {label} from {} and from {}, {}.",
                        iv(&s.interval),
                        iv(&after.interval),
                        caption_text(&after.caption)
                    )),
                ];
            }
        }
    }
    let s = sounds[0];
    let label = label_text(&s.label);
    [
        Turn::user(format!("Thanks, when can the sound of {label} be heard? {TIMESTAMP_REQUEST}")),
        Turn::assistant(format!("The sound of {label} is from {}.", iv(&s.interval))),
    ]
}

/// Four question/answer pairs over captions and the first two sounds:
/// a sound question (with a clarification when both sounds share a label),
/// a caption-anchored question and a refusal about an absent sound.
fn scene_dialogue(
    captions: &[TimedCaption],
    sounds: [&SoundMention; 2],
    negative: &str,
    rng: &mut ChaCha8Rng,
) -> Vec<Turn> {
    let (l0, l1) = (label_text(&sounds[0].label), label_text(&sounds[1].label));
    let mut turns = if l0 == l1 {
        clarification(captions, sounds, &l0, rng)
    } else {
        let mut t = sound_pair(captions, sounds[0]).to_vec();
        t.extend(sound_pair(captions, sounds[1]));
        t
    };
    turns.extend(caption_anchored(captions, &sounds));
    turns.push(Turn::user(format!(
        "Thanks, what is happening in the video after the sound of {negative}? {TIMESTAMP_REQUEST}"
    )));
    turns.push(Turn::assistant(format!("Sorry, there is no sound of {negative}.")));
    turns
}

/// Multi-turn dialogue for a timeline with exactly two overlays.
pub fn generate_mt_dialogue(
    timeline: &ClipTimeline,
    plan: &AudioEditPlan,
    seed: u64,
    negative_labels: &[String],
) -> Result<Vec<Turn>, DialogueError> {
    let [a, b] = plan.overlays.as_slice() else {
        return Err(DialogueError::OverlayCount { expected: 2, found: plan.overlays.len() });
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let negative = pick_negative_label(negative_labels, &[&a.label, &b.label], &mut rng)?;
    let sounds = [
        SoundMention { interval: a.interval, label: a.label.clone() },
        SoundMention { interval: b.interval, label: b.label.clone() },
    ];
    Ok(scene_dialogue(timeline.events(), [&sounds[0], &sounds[1]], &negative, &mut rng))
}

/// Split annotations into visual captions and audio events, each sorted by
/// start time.
pub fn split_annotations(annotations: &[AvAnnotation]) -> (Vec<TimedCaption>, Vec<SoundMention>) {
    let mut captions: Vec<TimedCaption> = Vec::new();
    let mut sounds: Vec<SoundMention> = Vec::new();
    for a in annotations {
        match a.modality {
            Modality::Visual => captions.push(TimedCaption { interval: a.interval, caption: a.label.clone() }),
            Modality::Audio => sounds.push(SoundMention { interval: a.interval, label: a.label.clone() }),
        }
    }
    captions.sort_by(|a, b| a.interval.start().total_cmp(&b.interval.start()));
    sounds.sort_by(|a, b| a.interval.start().total_cmp(&b.interval.start()));
    (captions, sounds)
}

/// Dialogue over real annotated audio events (no sound insertion). One audio
/// event yields a single question/answer pair; two or more yield the
/// multi-turn structure over the first two.
pub fn convert_av_annotations_mt(
    annotations: &[AvAnnotation],
    seed: u64,
    negative_labels: &[String],
) -> Result<Vec<Turn>, DialogueError> {
    if annotations.is_empty() {
        return Err(DialogueError::EmptyAnnotations);
    }
    let (captions, sounds) = split_annotations(annotations);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match sounds.as_slice() {
        [] => Err(DialogueError::NoAudioEvent),
        [only] => {
            let mut directions = vec![Direction::Before, Direction::After];
            if rng.random::<bool>() {
                directions.reverse();
            }
            for d in directions {
                if neighbor(&captions, &only.interval, d).is_some() {
                    return single_turn(&captions, only, d, &mut rng);
                }
            }
            Ok(sound_pair(&captions, only).to_vec())
        }
        [first, second, ..] => {
            let present: Vec<&str> = sounds.iter().map(|s| s.label.as_str()).collect();
            let negative = pick_negative_label(negative_labels, &present, &mut rng)?;
            Ok(scene_dialogue(&captions, [first, second], &negative, &mut rng))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchor::{Overlay, Trim};

    fn tiv(a: f64, b: f64) -> TimeInterval {
        TimeInterval::new(a, b).unwrap()
    }

    fn cap(a: f64, b: f64, text: &str) -> TimedCaption {
        TimedCaption { interval: tiv(a, b), caption: text.into() }
    }

    fn overlay(label: &str, a: f64, b: f64) -> Overlay {
        Overlay {
            sound_id: label.into(),
            label: label.into(),
            interval: tiv(a, b),
            trim: Trim::CutToGap,
            repeats: 1,
        }
    }

    fn plan(overlays: Vec<Overlay>) -> AudioEditPlan {
        AudioEditPlan { mute: true, overlays }
    }

    const SEASONED: &str = "the chicken is seasoned on both sides with salt and pepper then cut it into pieces";
    const BOILED: &str = "the chicken pieces are put to a boiling pot of water, covered and then cooked";

    fn st_timeline() -> ClipTimeline {
        ClipTimeline::new(0.0, 22.0, vec![cap(0.0, 18.0, SEASONED), cap(20.0, 22.0, BOILED)]).unwrap()
    }

    #[test]
    fn st_answers_match_reference_wording() {
        let p = plan(vec![overlay("Trumpet", 18.0, 20.0)]);
        let before = generate_st_qa(&st_timeline(), &p, 3, Direction::Before).unwrap();
        assert_eq!(
            before[1].text,
            "The sound of trumpet is from [18.0, 20.0]. From [0.0, 18.0], the chicken is seasoned on both sides with salt and pepper then cut it into pieces."
        );
        let after = generate_st_qa(&st_timeline(), &p, 3, Direction::After).unwrap();
        assert_eq!(
            after[1].text,
            "The sound of trumpet is from [18.0, 20.0]. From [20.0, 22.0], the chicken pieces are put to a boiling pot of water, covered and then cooked."
        );
        assert_eq!(before[0].role, Role::User);
        assert!(before[0].text.contains("the event before the sound of trumpet"));
    }

    #[test]
    fn st_variant_choice_is_seeded() {
        let p = plan(vec![overlay("trumpet", 18.0, 20.0)]);
        let pick = |seed| generate_st_qa(&st_timeline(), &p, seed, Direction::After).unwrap()[0].text.clone();
        assert_eq!(pick(11), pick(11));
        let distinct: std::collections::HashSet<String> = (0..200).map(pick).collect();
        assert_eq!(distinct.len(), INSTRUCTION_VARIANTS.len());
    }

    #[test]
    fn st_requires_one_overlay() {
        let p = plan(vec![overlay("a", 18.0, 19.0), overlay("b", 19.0, 20.0)]);
        assert!(matches!(
            generate_st_qa(&st_timeline(), &p, 0, Direction::After),
            Err(DialogueError::OverlayCount { expected: 1, found: 2 })
        ));
    }

    fn mt_timeline() -> ClipTimeline {
        ClipTimeline::new(
            0.0,
            50.0,
            vec![
                cap(0.0, 18.0, SEASONED),
                cap(20.0, 22.0, BOILED),
                cap(26.0, 50.0, "celery is chopped to small pieces"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn mt_clarification_for_equal_labels() {
        let p = plan(vec![overlay("laugh", 18.0, 20.0), overlay("laugh", 22.0, 26.0)]);
        let neg = vec!["bird chirping".to_string()];
        let turns = generate_mt_dialogue(&mt_timeline(), &p, 5, &neg).unwrap();
        assert_eq!(turns.len(), 8);
        assert_eq!(
            turns[1].text,
            "There are two sounds of laugh, one from [18.0, 20.0] and the other one from [22.0, 26.0]. Which laugh are you referring to?"
        );
        assert_eq!(turns[7].text, "Sorry, there is no sound of bird chirping.");
        assert!(turns[5].text.starts_with("There is a sound of laugh from [18.0, 20.0] and from [20.0, 22.0], "));
        assert!(turns.iter().enumerate().all(|(i, t)| t.role == if i % 2 == 0 { Role::User } else { Role::Assistant }));
    }

    #[test]
    fn mt_follow_up_resolves_the_chosen_sound() {
        let p = plan(vec![overlay("laugh", 18.0, 20.0), overlay("laugh", 22.0, 26.0)]);
        let neg = vec!["bird chirping".to_string()];
        let mut seen = std::collections::HashSet::new();
        for seed in 0..20 {
            let turns = generate_mt_dialogue(&mt_timeline(), &p, seed, &neg).unwrap();
            if turns[2].text.contains(BOILED) {
                assert!(turns[3].text.starts_with("Okay, so the laugh from [22.0, 26.0]. After this sound of laugh, from [26.0, 50.0]"));
            } else {
                assert!(turns[2].text.contains(SEASONED));
                assert!(turns[3].text.starts_with("Okay, so the laugh from [18.0, 20.0]. After this sound of laugh, from [20.0, 22.0]"));
            }
            seen.insert(turns[2].text.clone());
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn mt_distinct_labels_skip_clarification() {
        let p = plan(vec![overlay("laugh", 18.0, 20.0), overlay("siren", 22.0, 26.0)]);
        let neg: Vec<String> = DEFAULT_NEGATIVE_LABELS.iter().map(|s| s.to_string()).collect();
        let turns = generate_mt_dialogue(&mt_timeline(), &p, 5, &neg).unwrap();
        assert_eq!(turns.len(), 8);
        assert!(turns.iter().all(|t| !t.text.contains("referring")));
        assert_eq!(turns[1].text, format!("The sound of laugh is from [18.0, 20.0]. From [20.0, 22.0], {BOILED}."));
        assert!(turns[3].text.starts_with("The sound of siren is from [22.0, 26.0]. From [26.0, 50.0]"));
        assert!(!turns[7].text.contains("siren"));
    }

    #[test]
    fn negative_label_excludes_present_sounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cands = vec!["Laugh".to_string(), "siren".to_string()];
        for _ in 0..20 {
            assert_eq!(pick_negative_label(&cands, &["laugh"], &mut rng).unwrap(), "siren");
        }
        assert_eq!(
            pick_negative_label(&cands, &["laugh", "SIREN"], &mut rng),
            Err(DialogueError::NoNegativeLabel)
        );
    }

    fn ann(a: f64, b: f64, label: &str, modality: Modality) -> AvAnnotation {
        AvAnnotation { interval: tiv(a, b), label: label.into(), modality }
    }

    #[test]
    fn converted_annotations() {
        let neg = vec!["bird chirping".to_string()];
        let anns = vec![
            ann(0.0, 4.0, "a man plays guitar", Modality::Visual),
            ann(4.0, 6.0, "dog barking", Modality::Audio),
            ann(6.0, 9.0, "the dog runs away", Modality::Visual),
            ann(9.0, 10.0, "car horn", Modality::Audio),
        ];
        let turns = convert_av_annotations_mt(&anns, 1, &neg).unwrap();
        assert_eq!(turns.len(), 8);
        assert!(turns.iter().all(|t| !t.text.contains("referring")));

        let single = convert_av_annotations_mt(&anns[..3], 1, &neg).unwrap();
        assert_eq!(single.len(), 2);
        assert!(single[1].text.starts_with("The sound of dog barking is from [4.0, 6.0]."));

        let dup = vec![
            ann(0.0, 4.0, "a man plays guitar", Modality::Visual),
            ann(4.0, 6.0, "dog barking", Modality::Audio),
            ann(6.0, 9.0, "the dog runs away", Modality::Visual),
            ann(9.0, 10.0, "dog barking", Modality::Audio),
        ];
        let turns = convert_av_annotations_mt(&dup, 1, &neg).unwrap();
        assert!(turns[1].text.ends_with("Which dog barking are you referring to?"));

        assert_eq!(convert_av_annotations_mt(&[], 1, &neg), Err(DialogueError::EmptyAnnotations));
        assert_eq!(
            convert_av_annotations_mt(&anns[..1], 1, &neg),
            Err(DialogueError::NoAudioEvent)
        );
    }

    #[test]
    fn annotations_without_neighbors_still_answer() {
        let neg = vec!["bird chirping".to_string()];
        let anns = vec![ann(0.0, 3.0, "thunder", Modality::Audio), ann(5.0, 6.0, "thunder", Modality::Audio)];
        let turns = convert_av_annotations_mt(&anns, 2, &neg).unwrap();
        assert_eq!(turns.len(), 8);
        assert!(turns[3].text.starts_with("Okay, so the thunder from ["));
    }
}
