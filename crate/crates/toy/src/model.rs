//! Pre-norm transformer encoder with hand-written backpropagation.
//!
//! Parameters live in one flat `Vec<f64>` addressed through a [`Layout`], so
//! SGD and finite-difference checks can treat them uniformly.
//!
//! Token content is a learned embedding (event class for frames, a blend of
//! sound and background embeddings for audio windows, a learned time-token
//! embedding in ITT mode) plus the question embedding added to every token.
//! The encoder output is RMS-normalised, mean-pooled and projected to class
//! logits. Rotary encodings are applied to queries and keys per head.

use octav_core::rotary::{pair_frequencies, rotate_in_place, rotate_transpose_in_place};
use octav_core::time_tokens::{interleave, TimeTokenBudget, TokenKind, TokenStream};
use octav_core::{audio_window_midpoints, TimeInterval};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{SyntheticSample, AUDIO_WINDOW_SECONDS, SOUND_CLASSES};

const NORM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeEncoding {
    /// Rotary angles from absolute timestamps in seconds.
    Rote,
    /// Rotary angles from token indices.
    RopeIndex,
    /// Learned time tokens interleaved after each modality token, with index
    /// rotary over the longer sequence.
    Itt,
    None,
}

impl TimeEncoding {
    pub const ALL: [TimeEncoding; 4] = [
        TimeEncoding::Rote,
        TimeEncoding::RopeIndex,
        TimeEncoding::Itt,
        TimeEncoding::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimeEncoding::Rote => "rote",
            TimeEncoding::RopeIndex => "rope-index",
            TimeEncoding::Itt => "itt",
            TimeEncoding::None => "none",
        }
    }
}

impl std::str::FromStr for TimeEncoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown time encoding `{s}` (rote|rope-index|itt|none)"))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("dim {dim} must be a positive multiple of 2 * heads ({heads})")]
    HeadSplit { dim: usize, heads: usize },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("need at least 2 classes and K >= 2")]
    TooSmall,
    #[error("rotary base must exceed 1, got {0}")]
    Base(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    /// Feed-forward hidden width.
    pub hidden: usize,
    pub time_encoding: TimeEncoding,
    /// Number of learnable time tokens (ITT).
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub classes: usize,
    pub rotary_base: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            layers: 2,
            heads: 4,
            hidden: 64,
            time_encoding: TimeEncoding::Rote,
            k: 100,
            seed: 0,
            classes: 8,
            rotary_base: 100.0,
            learning_rate: 0.02,
            epochs: 12,
            batch_size: 8,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.heads == 0 || self.dim == 0 || !self.dim.is_multiple_of(2 * self.heads) {
            return Err(ConfigError::HeadSplit {
                dim: self.dim,
                heads: self.heads,
            });
        }
        if self.hidden == 0 {
            return Err(ConfigError::NonPositive("hidden"));
        }
        if self.epochs == 0 {
            return Err(ConfigError::NonPositive("epochs"));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::NonPositive("batch_size"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(ConfigError::NonPositive("learning_rate"));
        }
        if self.classes < 2 || self.k < 2 {
            return Err(ConfigError::TooSmall);
        }
        if !(self.rotary_base > 1.0 && self.rotary_base.is_finite()) {
            return Err(ConfigError::Base(self.rotary_base));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TokenContent {
    Frame(usize),
    Audio { sound: usize, fraction: f64 },
    Time(usize),
}

/// A sample rendered as a token sequence for one time encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInput {
    pub tokens: Vec<TokenContent>,
    /// Rotary position per token (seconds or index); unused without rotary.
    pub positions: Vec<f64>,
    pub query: usize,
    /// Video plus audio tokens, excluding interleaved time tokens.
    pub modality_tokens: usize,
}

impl ModelInput {
    /// Video tokens (one per frame) followed by audio tokens (one per window).
    pub fn encode(sample: &SyntheticSample, encoding: TimeEncoding, k: usize) -> Self {
        let video = TokenStream::of_kind(
            TokenKind::Video,
            sample.frame_events.iter().enumerate().map(|(i, f)| (i, f.timestamp)),
        )
        .expect("frames sorted by time");
        let mids = audio_window_midpoints(sample.duration, AUDIO_WINDOW_SECONDS)
            .expect("positive clip duration");
        let audio =
            TokenStream::of_kind(TokenKind::Audio, mids.iter().enumerate().map(|(i, &t)| (i, t)))
                .expect("window midpoints increase");
        let fraction = |n: usize| {
            let lo = n as f64 * AUDIO_WINDOW_SECONDS;
            let hi = (lo + AUDIO_WINDOW_SECONDS).min(sample.duration);
            let window = TimeInterval::new(lo, hi).expect("window");
            window.intersection_len(&sample.sound.interval) / window.duration()
        };
        let modality_tokens = video.len() + audio.len();

        let streams = if encoding == TimeEncoding::Itt {
            let budget = TimeTokenBudget::new(k, sample.duration).expect("budget");
            vec![
                interleave(&video, &budget).expect("video stream"),
                interleave(&audio, &budget).expect("audio stream"),
            ]
        } else {
            vec![video, audio]
        };
        let mut tokens = Vec::new();
        let mut timestamps = Vec::new();
        for token in streams.iter().flat_map(|s| s.tokens()) {
            tokens.push(match token.kind {
                TokenKind::Video => TokenContent::Frame(sample.frame_events[token.payload].class),
                TokenKind::Audio => TokenContent::Audio {
                    sound: sample.sound.class,
                    fraction: fraction(token.payload),
                },
                TokenKind::Time => TokenContent::Time(token.payload),
            });
            timestamps.push(token.timestamp);
        }
        let positions = match encoding {
            TimeEncoding::Rote => timestamps,
            TimeEncoding::RopeIndex | TimeEncoding::Itt => (0..tokens.len()).map(|i| i as f64).collect(),
            TimeEncoding::None => Vec::new(),
        };
        Self {
            tokens,
            positions,
            query: sample.query.index(),
            modality_tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LayerOffsets {
    norm1: usize,
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    norm2: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    frame_emb: usize,
    sound_emb: usize,
    query_emb: usize,
    time_emb: usize,
    layers: Vec<LayerOffsets>,
    norm_final: usize,
    w_out: usize,
    b_out: usize,
    total: usize,
}

impl Layout {
    fn new(cfg: &ModelConfig) -> Self {
        let (d, f) = (cfg.dim, cfg.hidden);
        let mut next = 0;
        let mut take = |n: usize| {
            let at = next;
            next += n;
            at
        };
        let frame_emb = take(cfg.classes * d);
        // last row is the background (no sound) embedding
        let sound_emb = take((SOUND_CLASSES + 1) * d);
        let query_emb = take(2 * d);
        let time_emb = take(if cfg.time_encoding == TimeEncoding::Itt {
            cfg.k * d
        } else {
            0
        });
        let layers = (0..cfg.layers)
            .map(|_| LayerOffsets {
                norm1: take(d),
                wq: take(d * d),
                wk: take(d * d),
                wv: take(d * d),
                wo: take(d * d),
                norm2: take(d),
                w1: take(f * d),
                b1: take(f),
                w2: take(d * f),
                b2: take(d),
            })
            .collect();
        let norm_final = take(d);
        let w_out = take(cfg.classes * d);
        let b_out = take(cfg.classes);
        Self {
            frame_emb,
            sound_emb,
            query_emb,
            time_emb,
            layers,
            norm_final,
            w_out,
            b_out,
            total: next,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

struct LayerCache {
    x_in: Vec<f64>,
    xn: Vec<f64>,
    rms1: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<f64>,
    o: Vec<f64>,
    x_mid: Vec<f64>,
    hn: Vec<f64>,
    rms2: Vec<f64>,
    u: Vec<f64>,
    g: Vec<f64>,
}

struct Cache {
    layers: Vec<LayerCache>,
    x_last: Vec<f64>,
    rms_final: Vec<f64>,
    pooled: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    layout: Layout,
    params: Vec<f64>,
    freqs: Vec<f64>,
}

impl Model {
    /// Seeded initialisation.
    pub fn new(config: ModelConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (d, f) = (config.dim, config.hidden);
        let mut fill = |params: &mut [f64], std: f64| {
            let normal = Normal::new(0.0, std).expect("std");
            params.iter_mut().for_each(|p| *p = normal.sample(&mut rng));
        };
        let emb_end = layout.layers.first().map_or(layout.norm_final, |l| l.norm1);
        fill(&mut params[layout.frame_emb..emb_end], 1.0);
        let proj = 1.0 / (d as f64).sqrt();
        for l in &layout.layers {
            params[l.norm1..l.norm1 + d].fill(1.0);
            fill(&mut params[l.wq..l.wq + 3 * d * d], proj);
            fill(&mut params[l.wo..l.wo + d * d], 0.5 * proj);
            params[l.norm2..l.norm2 + d].fill(1.0);
            fill(&mut params[l.w1..l.w1 + f * d], proj);
            fill(&mut params[l.w2..l.w2 + d * f], 0.5 / (f as f64).sqrt());
        }
        params[layout.norm_final..layout.norm_final + d].fill(1.0);
        fill(&mut params[layout.w_out..layout.w_out + config.classes * d], proj);
        let freqs = pair_frequencies(config.head_dim(), config.rotary_base);
        Ok(Self {
            config,
            layout,
            params,
            freqs,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn encode(&self, sample: &SyntheticSample) -> ModelInput {
        ModelInput::encode(sample, self.config.time_encoding, self.config.k)
    }

    pub fn logits(&self, input: &ModelInput) -> Vec<f64> {
        let cache = self.forward(input);
        let c = self.config.classes;
        let mut logits = self.params[self.layout.b_out..self.layout.b_out + c].to_vec();
        matvec_add(
            &self.params[self.layout.w_out..],
            &cache.pooled,
            &mut logits,
            c,
            self.config.dim,
        );
        logits
    }

    pub fn predict(&self, input: &ModelInput) -> usize {
        argmax(&self.logits(input))
    }

    /// Cross-entropy loss of `target` for one input.
    pub fn loss(&self, input: &ModelInput, target: usize) -> f64 {
        let cache = self.forward(input);
        -cache.probs[target].max(f64::MIN_POSITIVE).ln()
    }

    /// Loss and its gradient (accumulated into `grad`) for one input.
    pub fn loss_and_grad(&self, input: &ModelInput, target: usize, grad: &mut [f64]) -> f64 {
        assert_eq!(grad.len(), self.layout.total);
        let cache = self.forward(input);
        let loss = -cache.probs[target].max(f64::MIN_POSITIVE).ln();
        self.backward(input, target, &cache, grad);
        loss
    }

    fn check_input(&self, input: &ModelInput) {
        let expected = match self.config.time_encoding {
            TimeEncoding::Itt => 2 * input.modality_tokens,
            _ => input.modality_tokens,
        };
        assert_eq!(
            input.len(),
            expected,
            "{} input must carry {expected} tokens",
            self.config.time_encoding.name()
        );
        if self.uses_rotary() {
            assert_eq!(input.positions.len(), input.len(), "one position per token");
        }
    }

    fn uses_rotary(&self) -> bool {
        self.config.time_encoding != TimeEncoding::None
    }

    fn embed(&self, input: &ModelInput) -> Vec<f64> {
        let d = self.config.dim;
        let p = &self.params;
        let l = &self.layout;
        let query = &p[l.query_emb + input.query * d..][..d];
        let mut x = vec![0.0; input.len() * d];
        for (row, token) in x.chunks_exact_mut(d).zip(&input.tokens) {
            row.copy_from_slice(query);
            match *token {
                TokenContent::Frame(c) => axpy(1.0, &p[l.frame_emb + c * d..][..d], row),
                TokenContent::Audio { sound, fraction } => {
                    axpy(fraction, &p[l.sound_emb + sound * d..][..d], row);
                    axpy(1.0 - fraction, &p[l.sound_emb + SOUND_CLASSES * d..][..d], row);
                }
                TokenContent::Time(k) => axpy(1.0, &p[l.time_emb + k * d..][..d], row),
            }
        }
        x
    }

    fn forward(&self, input: &ModelInput) -> Cache {
        self.check_input(input);
        let cfg = &self.config;
        let (n, d, f, h, hd) = (input.len(), cfg.dim, cfg.hidden, cfg.heads, cfg.head_dim());
        let scale = 1.0 / (hd as f64).sqrt();
        let p = &self.params;
        let mut x = self.embed(input);
        let mut layers = Vec::with_capacity(cfg.layers);
        for lo in &self.layout.layers {
            let x_in = x.clone();
            let (xn, rms1) = rms_norm(&x_in, &p[lo.norm1..lo.norm1 + d], d);
            let mut q = linear_rows(&p[lo.wq..], None, &xn, d, d);
            let mut k = linear_rows(&p[lo.wk..], None, &xn, d, d);
            let v = linear_rows(&p[lo.wv..], None, &xn, d, d);
            if self.uses_rotary() {
                for i in 0..n {
                    for head in 0..h {
                        let at = i * d + head * hd;
                        rotate_in_place(&mut q[at..at + hd], input.positions[i], &self.freqs);
                        rotate_in_place(&mut k[at..at + hd], input.positions[i], &self.freqs);
                    }
                }
            }
            let mut probs = vec![0.0; h * n * n];
            let mut o = vec![0.0; n * d];
            for head in 0..h {
                for i in 0..n {
                    let qi = &q[i * d + head * hd..][..hd];
                    let row = &mut probs[(head * n + i) * n..][..n];
                    for (j, s) in row.iter_mut().enumerate() {
                        *s = dot(qi, &k[j * d + head * hd..][..hd]) * scale;
                    }
                    softmax_in_place(row);
                    let oi = &mut o[i * d + head * hd..][..hd];
                    for (j, &a) in row.iter().enumerate() {
                        axpy(a, &v[j * d + head * hd..][..hd], oi);
                    }
                }
            }
            let attn = linear_rows(&p[lo.wo..], None, &o, d, d);
            let x_mid: Vec<f64> = x_in.iter().zip(&attn).map(|(a, b)| a + b).collect();
            let (hn, rms2) = rms_norm(&x_mid, &p[lo.norm2..lo.norm2 + d], d);
            let u = linear_rows(&p[lo.w1..], Some(&p[lo.b1..lo.b1 + f]), &hn, d, f);
            let g: Vec<f64> = u.iter().map(|&z| gelu(z)).collect();
            let ffn = linear_rows(&p[lo.w2..], Some(&p[lo.b2..lo.b2 + d]), &g, f, d);
            x = x_mid.iter().zip(&ffn).map(|(a, b)| a + b).collect();
            layers.push(LayerCache {
                x_in,
                xn,
                rms1,
                q,
                k,
                v,
                probs,
                o,
                x_mid,
                hn,
                rms2,
                u,
                g,
            });
        }
        let lo = &self.layout;
        let (z, rms_final) = rms_norm(&x, &p[lo.norm_final..lo.norm_final + d], d);
        let mut pooled = vec![0.0; d];
        for row in z.chunks_exact(d) {
            axpy(1.0 / n as f64, row, &mut pooled);
        }
        let mut logits = p[lo.b_out..lo.b_out + cfg.classes].to_vec();
        matvec_add(&p[lo.w_out..], &pooled, &mut logits, cfg.classes, d);
        softmax_in_place(&mut logits);
        Cache {
            layers,
            x_last: x,
            rms_final,
            pooled,
            probs: logits,
        }
    }

    fn backward(&self, input: &ModelInput, target: usize, cache: &Cache, grad: &mut [f64]) {
        let cfg = &self.config;
        let (n, d, f, h, hd, c) = (
            input.len(),
            cfg.dim,
            cfg.hidden,
            cfg.heads,
            cfg.head_dim(),
            cfg.classes,
        );
        let scale = 1.0 / (hd as f64).sqrt();
        let p = &self.params;
        let lo = &self.layout;

        let mut dlogits = cache.probs.clone();
        dlogits[target] -= 1.0;
        grad[lo.b_out..lo.b_out + c]
            .iter_mut()
            .zip(&dlogits)
            .for_each(|(g, v)| *g += v);
        let mut dpooled = vec![0.0; d];
        for (ci, &dl) in dlogits.iter().enumerate() {
            axpy(dl, &cache.pooled, &mut grad[lo.w_out + ci * d..][..d]);
            axpy(dl, &p[lo.w_out + ci * d..][..d], &mut dpooled);
        }
        let dz: Vec<f64> = (0..n)
            .flat_map(|_| dpooled.iter().map(|v| v / n as f64))
            .collect();
        let mut dx = vec![0.0; n * d];
        rms_norm_backward(
            &cache.x_last,
            &p[lo.norm_final..lo.norm_final + d],
            &cache.rms_final,
            &dz,
            d,
            &mut dx,
            &mut grad[lo.norm_final..lo.norm_final + d],
        );

        for (lo_l, lc) in lo.layers.iter().zip(&cache.layers).rev() {
            // feed-forward block: x = x_mid + W2 gelu(W1 hn + b1) + b2
            let mut dg = vec![0.0; n * f];
            linear_rows_backward(&p[lo_l.w2..], &lc.g, &dx, f, d, grad, lo_l.w2, Some(lo_l.b2), &mut dg);
            let du: Vec<f64> = dg.iter().zip(&lc.u).map(|(g, &u)| g * gelu_grad(u)).collect();
            let mut dhn = vec![0.0; n * d];
            linear_rows_backward(&p[lo_l.w1..], &lc.hn, &du, d, f, grad, lo_l.w1, Some(lo_l.b1), &mut dhn);
            let mut dx_mid = dx.clone();
            rms_norm_backward(
                &lc.x_mid,
                &p[lo_l.norm2..lo_l.norm2 + d],
                &lc.rms2,
                &dhn,
                d,
                &mut dx_mid,
                &mut grad[lo_l.norm2..lo_l.norm2 + d],
            );

            // attention block: x_mid = x_in + Wo attn(q, k, v)
            let mut d_o = vec![0.0; n * d];
            linear_rows_backward(&p[lo_l.wo..], &lc.o, &dx_mid, d, d, grad, lo_l.wo, None, &mut d_o);
            let mut dq = vec![0.0; n * d];
            let mut dk = vec![0.0; n * d];
            let mut dv = vec![0.0; n * d];
            let mut dp = vec![0.0; n];
            for head in 0..h {
                for i in 0..n {
                    let probs = &lc.probs[(head * n + i) * n..][..n];
                    let doi = &d_o[i * d + head * hd..][..hd];
                    for j in 0..n {
                        dp[j] = dot(doi, &lc.v[j * d + head * hd..][..hd]);
                        axpy(probs[j], doi, &mut dv[j * d + head * hd..][..hd]);
                    }
                    let mean: f64 = probs.iter().zip(&dp).map(|(a, b)| a * b).sum();
                    let qi = &lc.q[i * d + head * hd..][..hd];
                    for j in 0..n {
                        let ds = probs[j] * (dp[j] - mean) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        axpy(ds, &lc.k[j * d + head * hd..][..hd], &mut dq[i * d + head * hd..][..hd]);
                        axpy(ds, qi, &mut dk[j * d + head * hd..][..hd]);
                    }
                }
            }
            if self.uses_rotary() {
                for i in 0..n {
                    for head in 0..h {
                        let at = i * d + head * hd;
                        rotate_transpose_in_place(&mut dq[at..at + hd], input.positions[i], &self.freqs);
                        rotate_transpose_in_place(&mut dk[at..at + hd], input.positions[i], &self.freqs);
                    }
                }
            }
            let mut dxn = vec![0.0; n * d];
            linear_rows_backward(&p[lo_l.wq..], &lc.xn, &dq, d, d, grad, lo_l.wq, None, &mut dxn);
            linear_rows_backward(&p[lo_l.wk..], &lc.xn, &dk, d, d, grad, lo_l.wk, None, &mut dxn);
            linear_rows_backward(&p[lo_l.wv..], &lc.xn, &dv, d, d, grad, lo_l.wv, None, &mut dxn);
            let mut dx_in = dx_mid.clone();
            rms_norm_backward(
                &lc.x_in,
                &p[lo_l.norm1..lo_l.norm1 + d],
                &lc.rms1,
                &dxn,
                d,
                &mut dx_in,
                &mut grad[lo_l.norm1..lo_l.norm1 + d],
            );
            dx = dx_in;
        }

        // embeddings
        for (row, token) in dx.chunks_exact(d).zip(&input.tokens) {
            axpy(1.0, row, &mut grad[lo.query_emb + input.query * d..][..d]);
            match *token {
                TokenContent::Frame(cls) => axpy(1.0, row, &mut grad[lo.frame_emb + cls * d..][..d]),
                TokenContent::Audio { sound, fraction } => {
                    axpy(fraction, row, &mut grad[lo.sound_emb + sound * d..][..d]);
                    axpy(1.0 - fraction, row, &mut grad[lo.sound_emb + SOUND_CLASSES * d..][..d]);
                }
                TokenContent::Time(k) => axpy(1.0, row, &mut grad[lo.time_emb + k * d..][..d]),
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}

/// `y += W x` for a row-major `out x inp` matrix at the start of `w`.
fn matvec_add(w: &[f64], x: &[f64], y: &mut [f64], out: usize, inp: usize) {
    for (o, yo) in y.iter_mut().enumerate().take(out) {
        *yo += dot(&w[o * inp..][..inp], x);
    }
}

/// Apply `y = W x + b` to each row of `x`.
fn linear_rows(w: &[f64], b: Option<&[f64]>, x: &[f64], inp: usize, out: usize) -> Vec<f64> {
    let rows = x.len() / inp;
    let mut y = vec![0.0; rows * out];
    for (xr, yr) in x.chunks_exact(inp).zip(y.chunks_exact_mut(out)) {
        if let Some(b) = b {
            yr.copy_from_slice(b);
        }
        matvec_add(w, xr, yr, out, inp);
    }
    y
}

/// Backward of [`linear_rows`]: accumulates dW (and db) into `grad` at the
/// given offsets and dx into `dx`.
#[allow(clippy::too_many_arguments)]
fn linear_rows_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    inp: usize,
    out: usize,
    grad: &mut [f64],
    w_at: usize,
    b_at: Option<usize>,
    dx: &mut [f64],
) {
    for ((xr, dyr), dxr) in x
        .chunks_exact(inp)
        .zip(dy.chunks_exact(out))
        .zip(dx.chunks_exact_mut(inp))
    {
        for (o, &g) in dyr.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            axpy(g, xr, &mut grad[w_at + o * inp..][..inp]);
            axpy(g, &w[o * inp..][..inp], dxr);
        }
        if let Some(b_at) = b_at {
            axpy(1.0, dyr, &mut grad[b_at..b_at + out]);
        }
    }
}

fn rms_norm(x: &[f64], gain: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut y = vec![0.0; x.len()];
    let mut rms = Vec::with_capacity(x.len() / d);
    for (xr, yr) in x.chunks_exact(d).zip(y.chunks_exact_mut(d)) {
        let r = (xr.iter().map(|v| v * v).sum::<f64>() / d as f64 + NORM_EPS).sqrt();
        for ((y, &x), &g) in yr.iter_mut().zip(xr).zip(gain) {
            *y = g * x / r;
        }
        rms.push(r);
    }
    (y, rms)
}

/// Accumulates dx into `dx` and dgain into `dgain`.
fn rms_norm_backward(
    x: &[f64],
    gain: &[f64],
    rms: &[f64],
    dy: &[f64],
    d: usize,
    dx: &mut [f64],
    dgain: &mut [f64],
) {
    for (((xr, dyr), dxr), &r) in x
        .chunks_exact(d)
        .zip(dy.chunks_exact(d))
        .zip(dx.chunks_exact_mut(d))
        .zip(rms)
    {
        let mut proj = 0.0;
        for i in 0..d {
            dgain[i] += dyr[i] * xr[i] / r;
            proj += gain[i] * dyr[i] * xr[i];
        }
        let coef = proj / (d as f64 * r * r * r);
        for i in 0..d {
            dxr[i] += gain[i] * dyr[i] / r - xr[i] * coef;
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_dataset, FrameRateMode};

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        let bad = ModelConfig {
            dim: 30,
            ..ModelConfig::default()
        };
        assert!(matches!(bad.validate(), Err(ConfigError::HeadSplit { .. })));
        let bad = ModelConfig {
            rotary_base: 1.0,
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ModelConfig = serde_json::from_str(r#"{"time_encoding": "rope-index", "K": 50}"#).unwrap();
        assert_eq!(cfg.time_encoding, TimeEncoding::RopeIndex);
        assert_eq!(cfg.k, 50);
        assert_eq!(cfg.dim, 32);
    }

    #[test]
    fn encode_lengths() {
        let s = &make_dataset(1, 8, FrameRateMode::Variable, 5).unwrap()[0];
        let plain = ModelInput::encode(s, TimeEncoding::Rote, 100);
        let itt = ModelInput::encode(s, TimeEncoding::Itt, 100);
        assert_eq!(plain.len(), plain.modality_tokens);
        assert_eq!(itt.len(), 2 * itt.modality_tokens);
        assert_eq!(itt.modality_tokens, plain.modality_tokens);
        assert!(matches!(itt.tokens[1], TokenContent::Time(_)));
        assert!(ModelInput::encode(s, TimeEncoding::None, 100).positions.is_empty());
    }

    #[test]
    fn audio_fractions_cover_sound() {
        let s = &make_dataset(1, 8, FrameRateMode::Uniform, 9).unwrap()[0];
        let input = ModelInput::encode(s, TimeEncoding::Rote, 100);
        let covered: f64 = input
            .tokens
            .iter()
            .filter_map(|t| match t {
                TokenContent::Audio { fraction, .. } => Some(fraction * AUDIO_WINDOW_SECONDS),
                _ => None,
            })
            .sum();
        assert!((covered - s.sound.interval.duration()).abs() < 1e-9);
    }

    #[test]
    #[should_panic(expected = "itt input must carry")]
    fn itt_model_rejects_short_context() {
        let s = &make_dataset(1, 8, FrameRateMode::Uniform, 1).unwrap()[0];
        let model = Model::new(ModelConfig {
            time_encoding: TimeEncoding::Itt,
            ..ModelConfig::default()
        })
        .unwrap();
        model.logits(&ModelInput::encode(s, TimeEncoding::Rote, 100));
    }

    #[test]
    fn probabilities_are_normalised() {
        let s = &make_dataset(1, 8, FrameRateMode::Uniform, 1).unwrap()[0];
        let model = Model::new(ModelConfig::default()).unwrap();
        let cache = model.forward(&model.encode(s));
        assert!((cache.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
