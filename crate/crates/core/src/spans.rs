//! Timestamp spans embedded in answer text.
//!
//! Spans are rendered as `[18.0, 20.0]` (one decimal place). The parser also
//! accepts the `from 18 to 20` form used in captions.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::timecode::TimeInterval;

const NUM: &str = r"[+-]?\d+(?:\.\d+)?";

static SPAN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"\[\s*({NUM})\s*,\s*({NUM})\s*\]|(?i:\bfrom)\s+({NUM})\s*(?:s|sec|seconds)?\s+(?i:to)\s+({NUM})|\[[^\[\]]*\]"
    ))
    .expect("span regex")
});

static WS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").expect("ws regex"));

/// Render an interval with one decimal place, e.g. `[18.0, 20.0]`.
pub fn render_interval(interval: &TimeInterval) -> String {
    format!("[{:.1}, {:.1}]", interval.start(), interval.end())
}

/// Intervals found in a piece of text plus whatever text is left over.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    /// In order of appearance.
    pub intervals: Vec<TimeInterval>,
    /// Input with the recognised spans removed and whitespace collapsed.
    pub residual_text: String,
    /// Span-like fragments that could not be read as a valid interval.
    pub malformed: usize,
}

/// Extract every `[a, b]` and `from X to Y` span. Never fails; unreadable
/// spans are skipped and counted in [`ParsedAnswer::malformed`].
pub fn parse_intervals(text: &str) -> ParsedAnswer {
    let mut intervals = Vec::new();
    let mut malformed = 0;
    let mut residual = String::with_capacity(text.len());
    let mut last = 0;
    for caps in SPAN_RE.captures_iter(text) {
        let whole = caps.get(0).expect("match");
        let bounds = match (caps.get(1), caps.get(2), caps.get(3), caps.get(4)) {
            (Some(a), Some(b), _, _) | (_, _, Some(a), Some(b)) => Some((a.as_str(), b.as_str())),
            _ => None,
        };
        match bounds {
            Some((a, b)) => {
                let parsed = a
                    .parse::<f64>()
                    .ok()
                    .zip(b.parse::<f64>().ok())
                    .and_then(|(a, b)| TimeInterval::new(a, b).ok());
                match parsed {
                    Some(iv) => intervals.push(iv),
                    None => malformed += 1,
                }
            }
            None => {
                // bracketed text without digits is ordinary prose
                if !whole.as_str().bytes().any(|c| c.is_ascii_digit()) {
                    continue;
                }
                malformed += 1;
            }
        }
        residual.push_str(&text[last..whole.start()]);
        residual.push(' ');
        last = whole.end();
    }
    residual.push_str(&text[last..]);
    ParsedAnswer {
        intervals,
        residual_text: WS_RE.replace_all(residual.trim(), " ").into_owned(),
        malformed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> TimeInterval {
        TimeInterval::new(a, b).unwrap()
    }

    #[test]
    fn single_bracket_span() {
        let p = parse_intervals("The sound of trumpet is from [18.0, 20.0].");
        assert_eq!(p.intervals, vec![iv(18.0, 20.0)]);
        assert_eq!(p.residual_text, "The sound of trumpet is from .");
        assert_eq!(p.malformed, 0);
    }

    #[test]
    fn nothing_here() {
        let p = parse_intervals("nothing here");
        assert!(p.intervals.is_empty());
        assert_eq!(p.residual_text, "nothing here");
    }

    #[test]
    fn two_spans_in_order() {
        let p = parse_intervals("one from [18.0, 20.0] and the other one from [22.0, 26.0]");
        assert_eq!(p.intervals, vec![iv(18.0, 20.0), iv(22.0, 26.0)]);
    }

    #[test]
    fn from_to_form() {
        let p = parse_intervals("put the chicken in the pot from 20 to 22, then [30.5, 31]");
        assert_eq!(p.intervals, vec![iv(20.0, 22.0), iv(30.5, 31.0)]);
    }

    #[test]
    fn malformed_spans_are_counted() {
        let p = parse_intervals("bad [20.0, 18.0] and [12.0, ] but [see above] is fine [1, 2]");
        assert_eq!(p.intervals, vec![iv(1.0, 2.0)]);
        assert_eq!(p.malformed, 2);
        assert!(p.residual_text.contains("[see above]"));
    }

    #[test]
    fn render_one_decimal() {
        assert_eq!(render_interval(&iv(18.0, 20.0)), "[18.0, 20.0]");
        assert_eq!(render_interval(&iv(0.0, 18.299999999999997)), "[0.0, 18.3]");
    }
}
