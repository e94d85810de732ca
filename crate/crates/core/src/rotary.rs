//! Rotary embeddings driven by absolute timestamps.
//!
//! Feature pairs `(x[2j], x[2j+1])` are rotated by `theta = -2*pi * p * f_j`
//! where `f_j = base^(-2j/dim)` and `p` is either the token's timestamp in
//! seconds ([`PositionMode::AbsoluteTime`]) or its row index
//! ([`PositionMode::TokenIndex`], the classic index-based variant).
//!
//! Dot products of rotated vectors depend only on the difference of the two
//! positions, so attention scores see relative time.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RotaryError {
    #[error("rotary dimension must be even and positive, got {0}")]
    OddDimension(usize),
    #[error("rotary base must be finite and greater than 1, got {0}")]
    InvalidBase(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix has {rows} rows but {timestamps} timestamps")]
    TimestampCount { rows: usize, timestamps: usize },
    #[error("timestamp {0} is negative or not finite")]
    InvalidTimestamp(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositionMode {
    AbsoluteTime,
    TokenIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotaryTimeConfig {
    dim: usize,
    base: f64,
    mode: PositionMode,
}

impl RotaryTimeConfig {
    pub const DEFAULT_BASE: f64 = 10_000.0;

    pub fn new(dim: usize, base: f64, mode: PositionMode) -> Result<Self, RotaryError> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(RotaryError::OddDimension(dim));
        }
        if !(base > 1.0 && base.is_finite()) {
            return Err(RotaryError::InvalidBase(base));
        }
        Ok(Self { dim, base, mode })
    }

    /// Absolute-time config with the default base.
    pub fn absolute(dim: usize) -> Result<Self, RotaryError> {
        Self::new(dim, Self::DEFAULT_BASE, PositionMode::AbsoluteTime)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn mode(&self) -> PositionMode {
        self.mode
    }
}

/// Per-pair rotation frequencies `base^(-2j/dim)` for `j = 0..dim/2`.
pub fn frequency_schedule(config: &RotaryTimeConfig) -> Vec<f64> {
    pair_frequencies(config.dim, config.base)
}

/// Same as [`frequency_schedule`] without a validated config, for callers
/// (attention heads) that rotate sub-slices of a wider feature vector.
pub fn pair_frequencies(dim: usize, base: f64) -> Vec<f64> {
    (0..dim / 2)
        .map(|j| base.powf(-2.0 * j as f64 / dim as f64))
        .collect()
}

/// Rotate `row` in place for position `position`.
pub fn rotate_in_place(row: &mut [f64], position: f64, freqs: &[f64]) {
    debug_assert_eq!(row.len(), 2 * freqs.len());
    for (pair, &f) in row.chunks_exact_mut(2).zip(freqs) {
        let (sin, cos) = (-TAU * position * f).sin_cos();
        let (x, y) = (pair[0], pair[1]);
        pair[0] = x * cos - y * sin;
        pair[1] = x * sin + y * cos;
    }
}

/// Apply the transpose of the rotation for `position`.
///
/// The rotation is orthogonal, so this is both its inverse and the
/// vector-Jacobian product used when backpropagating through it.
pub fn rotate_transpose_in_place(row: &mut [f64], position: f64, freqs: &[f64]) {
    debug_assert_eq!(row.len(), 2 * freqs.len());
    for (pair, &f) in row.chunks_exact_mut(2).zip(freqs) {
        let (sin, cos) = (-TAU * position * f).sin_cos();
        let (x, y) = (pair[0], pair[1]);
        pair[0] = x * cos + y * sin;
        pair[1] = -x * sin + y * cos;
    }
}

/// A row-major feature matrix with one timestamp per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    timestamps: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        timestamps: Vec<f64>,
    ) -> Result<Self, RotaryError> {
        if values.len() != rows * cols {
            return Err(RotaryError::DimensionMismatch {
                expected: rows * cols,
                actual: values.len(),
            });
        }
        if timestamps.len() != rows {
            return Err(RotaryError::TimestampCount {
                rows,
                timestamps: timestamps.len(),
            });
        }
        if let Some(&bad) = timestamps.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(RotaryError::InvalidTimestamp(bad));
        }
        Ok(Self {
            rows,
            cols,
            values,
            timestamps,
        })
    }

    /// Build from a list of rows.
    pub fn from_rows(rows: &[Vec<f64>], timestamps: Vec<f64>) -> Result<Self, RotaryError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(RotaryError::DimensionMismatch {
                expected: cols,
                actual: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat(), timestamps)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    fn position(&self, i: usize, mode: PositionMode) -> f64 {
        match mode {
            PositionMode::AbsoluteTime => self.timestamps[i],
            PositionMode::TokenIndex => i as f64,
        }
    }
}

/// Rotate every row of `m` pairwise according to `config`.
pub fn apply_rotary(
    m: &EmbeddingMatrix,
    config: &RotaryTimeConfig,
) -> Result<EmbeddingMatrix, RotaryError> {
    if m.cols != config.dim {
        return Err(RotaryError::DimensionMismatch {
            expected: config.dim,
            actual: m.cols,
        });
    }
    let freqs = frequency_schedule(config);
    let mut out = m.clone();
    for i in 0..m.rows {
        let p = m.position(i, config.mode);
        rotate_in_place(&mut out.values[i * m.cols..(i + 1) * m.cols], p, &freqs);
    }
    Ok(out)
}

/// Vector-Jacobian product of [`apply_rotary`] with respect to its input
/// values: given the upstream gradient on the output, return the gradient on
/// the input.
pub fn apply_rotary_backward(
    m: &EmbeddingMatrix,
    grad_out: &[f64],
    config: &RotaryTimeConfig,
) -> Result<Vec<f64>, RotaryError> {
    if m.cols != config.dim {
        return Err(RotaryError::DimensionMismatch {
            expected: config.dim,
            actual: m.cols,
        });
    }
    if grad_out.len() != m.values.len() {
        return Err(RotaryError::DimensionMismatch {
            expected: m.values.len(),
            actual: grad_out.len(),
        });
    }
    let freqs = frequency_schedule(config);
    let mut grad = grad_out.to_vec();
    for i in 0..m.rows {
        let p = m.position(i, config.mode);
        rotate_transpose_in_place(&mut grad[i * m.cols..(i + 1) * m.cols], p, &freqs);
    }
    Ok(grad)
}

/// Dot product of a query rotated to `tau_q` with a key rotated to `tau_k`.
///
/// Positions are taken as given regardless of `config.mode`: in index mode
/// pass the token indices.
pub fn relative_score(
    q: &[f64],
    k: &[f64],
    tau_q: f64,
    tau_k: f64,
    config: &RotaryTimeConfig,
) -> Result<f64, RotaryError> {
    for v in [q, k] {
        if v.len() != config.dim {
            return Err(RotaryError::DimensionMismatch {
                expected: config.dim,
                actual: v.len(),
            });
        }
    }
    let freqs = frequency_schedule(config);
    let mut qr = q.to_vec();
    let mut kr = k.to_vec();
    rotate_in_place(&mut qr, tau_q, &freqs);
    rotate_in_place(&mut kr, tau_k, &freqs);
    Ok(qr.iter().zip(&kr).map(|(a, b)| a * b).sum())
}
