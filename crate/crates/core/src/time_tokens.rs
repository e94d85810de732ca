//! Discrete time tokens and interleaving of modality streams.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeTokenError {
    #[error("time token budget needs K >= 2, got {0}")]
    TooFewTokens(usize),
    #[error("clip duration must be positive and finite, got {0}")]
    InvalidDuration(f64),
    #[error("timestamp {tau} lies outside [0, {duration}]")]
    OutOfRange { tau: f64, duration: f64 },
    #[error("stream mixes {first:?} and {second:?} tokens")]
    MixedKinds { first: TokenKind, second: TokenKind },
    #[error("cannot interleave a stream of time tokens")]
    TimeTokensInput,
    #[error("{kind:?} timestamps decrease: {previous} then {next}")]
    Decreasing {
        kind: TokenKind,
        previous: f64,
        next: f64,
    },
}

/// `K` learnable time tokens spread over a clip of duration `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeTokenBudget {
    k: usize,
    duration: f64,
}

impl TimeTokenBudget {
    pub const DEFAULT_K: usize = 100;

    pub fn new(k: usize, duration: f64) -> Result<Self, TimeTokenError> {
        if k < 2 {
            return Err(TimeTokenError::TooFewTokens(k));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(TimeTokenError::InvalidDuration(duration));
        }
        Ok(Self { k, duration })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Timestamp represented by token `index`.
    pub fn timestamp_of(&self, index: usize) -> f64 {
        index as f64 * self.duration / (self.k - 1) as f64
    }
}

/// `round(tau / T * (K - 1))` with ties rounded away from zero.
pub fn time_token_index(tau: f64, budget: &TimeTokenBudget) -> Result<usize, TimeTokenError> {
    if !(0.0..=budget.duration).contains(&tau) {
        return Err(TimeTokenError::OutOfRange {
            tau,
            duration: budget.duration,
        });
    }
    // f64::round rounds half away from zero
    let index = (tau / budget.duration * (budget.k - 1) as f64).round() as usize;
    Ok(index.min(budget.k - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Video,
    Audio,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub payload: usize,
    pub timestamp: f64,
}

/// An ordered token sequence; timestamps never decrease within a modality.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenStream {
    tokens: Vec<Token>,
}

impl TokenStream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build a single-modality stream from `(payload, timestamp)` pairs.
    pub fn of_kind(
        kind: TokenKind,
        items: impl IntoIterator<Item = (usize, f64)>,
    ) -> Result<Self, TimeTokenError> {
        let mut stream = Self::new();
        for (payload, timestamp) in items {
            stream.push(Token {
                kind,
                payload,
                timestamp,
            })?;
        }
        Ok(stream)
    }

    pub fn push(&mut self, token: Token) -> Result<(), TimeTokenError> {
        if let Some(prev) = self.tokens.iter().rev().find(|t| t.kind == token.kind) {
            if token.timestamp < prev.timestamp {
                return Err(TimeTokenError::Decreasing {
                    kind: token.kind,
                    previous: prev.timestamp,
                    next: token.timestamp,
                });
            }
        }
        self.tokens.push(token);
        Ok(())
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Follow every modality token with the time token for its timestamp:
/// `v1, <k1>, v2, <k2>, ...`.
pub fn interleave(
    stream: &TokenStream,
    budget: &TimeTokenBudget,
) -> Result<TokenStream, TimeTokenError> {
    let Some(first) = stream.tokens.first() else {
        return Ok(TokenStream::new());
    };
    if first.kind == TokenKind::Time {
        return Err(TimeTokenError::TimeTokensInput);
    }
    let mut out = Vec::with_capacity(2 * stream.len());
    for token in &stream.tokens {
        if token.kind != first.kind {
            return Err(TimeTokenError::MixedKinds {
                first: first.kind,
                second: token.kind,
            });
        }
        out.push(*token);
        out.push(Token {
            kind: TokenKind::Time,
            payload: time_token_index(token.timestamp, budget)?,
            timestamp: token.timestamp,
        });
    }
    Ok(TokenStream { tokens: out })
}
