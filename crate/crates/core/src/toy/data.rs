use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Input token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(pub Vec<usize>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_vocab(&self, vocab: usize) -> Result<()> {
        match self.0.iter().find(|&&t| t >= vocab) {
            Some(&token) => Err(Error::TokenRange { token, vocab }),
            None => Ok(()),
        }
    }
}

/// `T x D` frames (row-major) plus one stop value per frame.
///
/// For model outputs `stop` holds logits; for training targets it holds 0/1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSeq {
    pub frame_dim: usize,
    pub frames: Vec<f64>,
    pub stop: Vec<f64>,
}

impl FrameSeq {
    pub fn num_frames(&self) -> usize {
        self.stop.len()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * self.frame_dim..(t + 1) * self.frame_dim]
    }

    pub fn same_shape(&self, other: &FrameSeq) -> bool {
        self.frame_dim == other.frame_dim
            && self.frames.len() == other.frames.len()
            && self.stop.len() == other.stop.len()
    }
}

/// `K x D` table of frame prototypes, one row per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub vocab: usize,
    pub frame_dim: usize,
    pub rows: Vec<f64>,
}

pub const MIN_CODEBOOK_DISTANCE: f64 = 0.1;

impl Codebook {
    /// Rows uniform in `[-1, 1]^D`; redrawn until every pair is more than
    /// [`MIN_CODEBOOK_DISTANCE`] apart.
    pub fn generate(seed: u64, vocab: usize, frame_dim: usize) -> Result<Self> {
        if vocab < 2 || frame_dim == 0 {
            return Err(Error::Config(format!(
                "codebook needs K >= 2 and D >= 1, got K={vocab} D={frame_dim}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let rows: Vec<f64> = (0..vocab * frame_dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let cb = Self {
                vocab,
                frame_dim,
                rows,
            };
            if cb.min_pairwise_distance() > MIN_CODEBOOK_DISTANCE {
                return Ok(cb);
            }
        }
        Err(Error::Config(format!(
            "could not draw {vocab} distinct codebook rows in {frame_dim} dimensions"
        )))
    }

    pub fn row(&self, token: usize) -> &[f64] {
        &self.rows[token * self.frame_dim..(token + 1) * self.frame_dim]
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..self.vocab {
            for b in a + 1..self.vocab {
                best = best.min(euclidean(self.row(a), self.row(b)));
            }
        }
        best
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Shape of the synthetic text-to-frames task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub vocab: usize,
    pub frame_dim: usize,
    pub upsample: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub codebook_seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            vocab: 16,
            frame_dim: 8,
            upsample: 2,
            min_len: 4,
            max_len: 12,
            codebook_seed: 7,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab < 2 || self.frame_dim == 0 || self.upsample == 0 {
            return Err(Error::Config(format!(
                "need K >= 2, D >= 1, r >= 1 (got K={} D={} r={})",
                self.vocab, self.frame_dim, self.upsample
            )));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "invalid length range [{}, {}]",
                self.min_len, self.max_len
            )));
        }
        Ok(())
    }

    pub fn codebook(&self) -> Result<Codebook> {
        Codebook::generate(self.codebook_seed, self.vocab, self.frame_dim)
    }

    /// Codebook target for `x`: every frame of token `t` is codebook row `t`;
    /// the stop target is 1 on the final frame only.
    pub fn target_for(&self, codebook: &Codebook, x: &TokenSeq) -> FrameSeq {
        let t_len = x.len() * self.upsample;
        let mut frames = Vec::with_capacity(t_len * self.frame_dim);
        for &tok in &x.0 {
            for _ in 0..self.upsample {
                frames.extend_from_slice(codebook.row(tok));
            }
        }
        let mut stop = vec![0.0; t_len];
        if let Some(last) = stop.last_mut() {
            *last = 1.0;
        }
        FrameSeq {
            frame_dim: self.frame_dim,
            frames,
            stop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub tokens: TokenSeq,
    pub target: FrameSeq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDataset {
    pub task: TaskConfig,
    /// `None` for teacher-labeled or concatenated sets.
    pub seed: Option<u64>,
    pub codebook: Codebook,
    pub teacher_labeled: bool,
    pub examples: Vec<Example>,
}

impl SynthDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn inputs(&self) -> Vec<TokenSeq> {
        self.examples.iter().map(|e| e.tokens.clone()).collect()
    }

    /// `self` followed by `other`; both must share the task.
    pub fn concat(&self, other: &SynthDataset) -> Result<SynthDataset> {
        if self.task != other.task {
            return Err(Error::Config("cannot concatenate datasets of different tasks".into()));
        }
        let mut examples = self.examples.clone();
        examples.extend(other.examples.iter().cloned());
        Ok(SynthDataset {
            task: self.task,
            seed: None,
            codebook: self.codebook.clone(),
            teacher_labeled: self.teacher_labeled || other.teacher_labeled,
            examples,
        })
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Draws `n_pairs` token sequences (length uniform in the task's range,
/// tokens uniform over the vocabulary) with codebook targets.
pub fn gen_dataset(task: &TaskConfig, seed: u64, n_pairs: usize) -> Result<SynthDataset> {
    task.validate()?;
    if n_pairs == 0 {
        return Err(Error::Config("n_pairs must be at least 1".into()));
    }
    let codebook = task.codebook()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n_pairs)
        .map(|_| {
            let len = rng.random_range(task.min_len..=task.max_len);
            let tokens = TokenSeq((0..len).map(|_| rng.random_range(0..task.vocab)).collect());
            let target = task.target_for(&codebook, &tokens);
            Example { tokens, target }
        })
        .collect();
    Ok(SynthDataset {
        task: *task,
        seed: Some(seed),
        codebook,
        teacher_labeled: false,
        examples,
    })
}

/// Deterministic per-epoch shuffle of `0..n`.
pub(crate) fn epoch_order(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}
