//! Optional rewording of template dialogues through a completion endpoint.
//!
//! The rewritten turns must keep every timestamp (to one decimal) and every
//! sound label; otherwise the template text is kept and the record flagged.

use octav_core::client::{complete_text, CompletionClient};
use octav_core::{parse_intervals, TimedCaption};
use serde::{Deserialize, Serialize};

use crate::dialogue::{Role, SoundMention, Turn};

pub const ST_PROMPT: &str = include_str!("../prompts/st.txt");
pub const MT_PROMPT: &str = include_str!("../prompts/mt.txt");
/// Line after which the template dialogue is listed in the prompt.
pub const DRAFT_MARKER: &str = "Draft QA (reword freely, keep every timestamp and sound name):";
/// Tolerance on timestamps surviving the rewrite.
pub const TIMESTAMP_TOLERANCE: f64 = 0.05;
pub const UNPARAPHRASED_FLAG: &str = "unparaphrased";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParaphraseStatus {
    /// No client configured; turns returned unchanged.
    Skipped,
    Paraphrased,
    /// Client or validation failure; template turns kept.
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Paraphrased {
    pub turns: Vec<Turn>,
    pub status: ParaphraseStatus,
}

#[derive(Serialize, Deserialize)]
struct QaLine {
    user: String,
    assistant: String,
}

fn caption_listing(captions: &[TimedCaption], sounds: &[SoundMention]) -> String {
    let mut lines: Vec<String> = captions
        .iter()
        .enumerate()
        .map(|(i, c)| {
            format!(
                "\"video caption {}\": {} from {:.1} to {:.1},",
                i + 1,
                c.caption.trim(),
                c.interval.start(),
                c.interval.end()
            )
        })
        .collect();
    for (i, s) in sounds.iter().enumerate() {
        let name = if sounds.len() == 1 {
            "audio caption".to_string()
        } else {
            format!("audio caption {}", i + 1)
        };
        lines.push(format!(
            "\"{name}\": There is a sound of {} from {:.1} to {:.1},",
            s.label.trim(),
            s.interval.start(),
            s.interval.end()
        ));
    }
    if let Some(last) = lines.last_mut() {
        last.pop();
        last.push('.');
    }
    lines.join("\n")
}

fn pairs(turns: &[Turn]) -> Option<Vec<(&str, &str)>> {
    if !turns.len().is_multiple_of(2) {
        return None;
    }
    turns
        .chunks_exact(2)
        .map(|p| match (&p[0].role, &p[1].role) {
            (Role::User, Role::Assistant) => Some((p[0].text.as_str(), p[1].text.as_str())),
            _ => None,
        })
        .collect()
}

/// Full prompt: instructions with the worked example, the record's captions
/// and the template dialogue as JSON lines.
pub fn build_prompt(turns: &[Turn], captions: &[TimedCaption], sounds: &[SoundMention]) -> String {
    let instructions = if turns.len() > 2 { MT_PROMPT } else { ST_PROMPT };
    let draft: Vec<String> = pairs(turns)
        .unwrap_or_default()
        .into_iter()
        .map(|(u, a)| {
            serde_json::to_string(&QaLine { user: u.into(), assistant: a.into() }).expect("plain strings")
        })
        .collect();
    format!(
        "{instructions}\nTimestamped video and audio captions:\n{}\n\n{DRAFT_MARKER}\n{}\n",
        caption_listing(captions, sounds),
        draft.join("\n")
    )
}

/// Extract `{"user", "assistant"}` JSON lines from a completion.
pub fn parse_qa_lines(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| serde_json::from_str::<QaLine>(l.trim()).ok())
        .map(|q| (q.user, q.assistant))
        .collect()
}

fn same_timestamps(original: &str, rewritten: &str) -> bool {
    let (a, b) = (parse_intervals(original), parse_intervals(rewritten));
    b.malformed == 0
        && a.intervals.len() == b.intervals.len()
        && a.intervals.iter().zip(&b.intervals).all(|(x, y)| {
            (x.start() - y.start()).abs() <= TIMESTAMP_TOLERANCE
                && (x.end() - y.end()).abs() <= TIMESTAMP_TOLERANCE
        })
}

fn keeps_labels(original: &str, rewritten: &str, labels: &[String]) -> bool {
    let (o, r) = (original.to_lowercase(), rewritten.to_lowercase());
    labels
        .iter()
        .map(|l| l.trim().to_lowercase())
        .all(|l| l.is_empty() || !o.contains(&l) || r.contains(&l))
}

/// Check a rewrite against the template; returns the reason on failure.
pub fn validate_rewrite(
    template: &[Turn],
    rewritten: &[(String, String)],
    labels: &[String],
) -> Result<Vec<Turn>, String> {
    let original = pairs(template).ok_or("template is not a user/assistant alternation")?;
    if original.len() != rewritten.len() {
        return Err(format!("expected {} QA lines, got {}", original.len(), rewritten.len()));
    }
    let mut out = Vec::with_capacity(template.len());
    for (n, ((ou, oa), (ru, ra))) in original.iter().zip(rewritten).enumerate() {
        for (o, r) in [(ou, ru), (oa, ra)] {
            if !same_timestamps(o, r) {
                return Err(format!("pair {n}: timestamps changed"));
            }
            if !keeps_labels(o, r, labels) {
                return Err(format!("pair {n}: sound label dropped"));
            }
        }
        out.push(Turn::user(ru.trim()));
        out.push(Turn::assistant(ra.trim()));
    }
    Ok(out)
}

/// Reword `turns` through `client`, keeping timestamps and `labels` intact.
/// Without a client the turns are returned unchanged.
pub fn paraphrase_via_llm(
    turns: &[Turn],
    captions: &[TimedCaption],
    sounds: &[SoundMention],
    labels: &[String],
    client: Option<&dyn CompletionClient>,
) -> Paraphrased {
    let Some(client) = client else {
        return Paraphrased { turns: turns.to_vec(), status: ParaphraseStatus::Skipped };
    };
    let prompt = build_prompt(turns, captions, sounds);
    let outcome = complete_text(client, &prompt)
        .map_err(|e| e.to_string())
        .and_then(|text| validate_rewrite(turns, &parse_qa_lines(&text), labels));
    match outcome {
        Ok(turns) => Paraphrased { turns, status: ParaphraseStatus::Paraphrased },
        Err(reason) => {
            log::warn!("keeping template dialogue: {reason}");
            Paraphrased { turns: turns.to_vec(), status: ParaphraseStatus::Rejected(reason) }
        }
    }
}
