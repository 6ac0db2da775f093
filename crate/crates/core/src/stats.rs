//! Mann-Whitney U tests for opinion-score ratings, one-sample z-tests for A/B
//! preference counts, and lower-triangular significance matrices.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const MOS_SCALE: std::ops::RangeInclusive<u8> = 1..=5;
/// Largest pooled sample size [`exact_mwu_p`] will enumerate.
pub const EXACT_LIMIT: usize = 12;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Ratings collected for one condition on the 1..=5 opinion scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSet {
    pub label: String,
    pub scores: Vec<u8>,
}

impl RatingSet {
    pub fn new(label: impl Into<String>, scores: Vec<u8>) -> Result<Self> {
        let label = label.into();
        if scores.is_empty() {
            return Err(Error::Stats(format!("condition `{label}` has no ratings")));
        }
        if let Some(s) = scores.iter().find(|s| !MOS_SCALE.contains(s)) {
            return Err(Error::Stats(format!(
                "condition `{label}` has score {s} outside 1..=5"
            )));
        }
        Ok(Self { label, scores })
    }

    pub fn values(&self) -> Vec<f64> {
        self.scores.iter().map(|&s| f64::from(s)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MwuResult {
    /// U statistic of the first sample.
    pub u: f64,
    pub z: f64,
    pub p_two_sided: f64,
    /// All pooled values tied: variance is zero and `p` is reported as 1.
    pub degenerate: bool,
}

/// Midranks (1-based, ties share the average rank) of the pooled sample.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sum of `t^3 - t` over tie groups.
fn tie_term(pooled: &[f64]) -> f64 {
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|a, b| a == b)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum()
}

fn check_samples(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Stats("both samples must be nonempty".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Stats("samples must be finite".into()));
    }
    Ok(())
}

/// Two-sided Mann-Whitney U test, normal approximation with tie-corrected
/// variance and a 0.5 continuity correction.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MwuResult> {
    check_samples(x, y)?;
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let n = n1 + n2;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let r1: f64 = ranks[..x.len()].iter().sum();
    let u = r1 - n1 * (n1 + 1.0) / 2.0;
    let mean = n1 * n2 / 2.0;
    let var = if n > 1.0 {
        n1 * n2 / 12.0 * ((n + 1.0) - tie_term(&pooled) / (n * (n - 1.0)))
    } else {
        0.0
    };
    if var <= 1e-12 {
        return Ok(MwuResult {
            u,
            z: 0.0,
            p_two_sided: 1.0,
            degenerate: true,
        });
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let p = (2.0 * std_normal().sf(z)).min(1.0);
    Ok(MwuResult {
        u,
        z: if u < mean { -z } else { z },
        p_two_sided: p,
        degenerate: false,
    })
}

pub fn mann_whitney_ratings(x: &RatingSet, y: &RatingSet) -> Result<MwuResult> {
    mann_whitney_u(&x.values(), &y.values())
}

/// Exact two-sided p by enumerating every split of the pooled midranks:
/// the fraction of splits whose `|U - n1 n2 / 2|` is at least the observed one.
pub fn exact_mwu_p(x: &[f64], y: &[f64]) -> Result<f64> {
    check_samples(x, y)?;
    let n = x.len() + y.len();
    if n > EXACT_LIMIT {
        return Err(Error::Stats(format!(
            "exact enumeration limited to {EXACT_LIMIT} pooled values, got {n}"
        )));
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let n1 = x.len();
    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let mean = (n1 * y.len()) as f64 / 2.0;
    let observed = (ranks[..n1].iter().sum::<f64>() - offset - mean).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for subset in 0u32..(1 << n) {
        if subset.count_ones() as usize != n1 {
            continue;
        }
        let r: f64 = (0..n).filter(|i| subset >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        if (r - offset - mean).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbOutcome {
    pub wins: u64,
    pub n: u64,
}

impl AbOutcome {
    pub fn new(wins: u64, n: u64) -> Result<Self> {
        if n == 0 || wins > n {
            return Err(Error::Stats(format!("invalid A/B outcome {wins}/{n}")));
        }
        Ok(Self { wins, n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZTest {
    pub proportion: f64,
    pub z: f64,
    /// One-sided in the direction of the deviation, unless run two-sided.
    pub p: f64,
    pub two_sided: bool,
    pub significant: bool,
}

/// z-test of a preference proportion against 0.5.
pub fn pairwise_z(outcome: AbOutcome, alpha: f64, two_sided: bool) -> ZTest {
    let n = outcome.n as f64;
    let p_hat = outcome.wins as f64 / n;
    let z = (p_hat - 0.5) / (0.25 / n).sqrt();
    let tail = std_normal().sf(z.abs());
    let p = if two_sided { (2.0 * tail).min(1.0) } else { tail };
    ZTest {
        proportion: p_hat,
        z,
        p,
        two_sided,
        significant: p <= alpha,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Significant,
    NotSignificant,
    SelfPair,
}

impl Cell {
    pub fn symbol(self) -> char {
        match self {
            Cell::Significant => '•',
            Cell::NotSignificant => '□',
            Cell::SelfPair => '-',
        }
    }

    fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "•" => Some(Cell::Significant),
            "□" => Some(Cell::NotSignificant),
            "-" => Some(Cell::SelfPair),
            _ => None,
        }
    }
}

/// Row `i` holds cells `(i, 0..=i)`; the last one is the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub alpha: f64,
    /// Two-sided p of each lower-triangle pair, row-major.
    #[serde(default)]
    pub p_values: Vec<Vec<f64>>,
}

impl SignificanceMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<Cell> {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        self.rows.get(i)?.get(j).copied()
    }

    /// Tab-separated grid: a header of labels, then one row per label with
    /// its lower-triangle cells.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.labels {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.rows) {
            out.push_str(label);
            for c in row {
                let _ = write!(out, "\t{}", c.symbol());
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`Self::render`] output. p-values are not part of the text form.
    pub fn parse(text: &str, alpha: f64) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Stats("empty matrix text".into()))?;
        let labels: Vec<String> = header
            .strip_prefix('\t')
            .ok_or_else(|| Error::Stats("matrix header must start with a tab".into()))?
            .split('\t')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::with_capacity(labels.len());
        for (i, line) in lines.enumerate() {
            let mut fields = line.split('\t');
            let label = fields.next().unwrap_or_default();
            if labels.get(i).map(String::as_str) != Some(label) {
                return Err(Error::Stats(format!("row {i} label `{label}` does not match header")));
            }
            let row = fields
                .map(|f| {
                    Cell::from_symbol(f)
                        .ok_or_else(|| Error::Stats(format!("unknown matrix symbol `{f}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != i + 1 || row[i] != Cell::SelfPair {
                return Err(Error::Stats(format!("row {i} is not lower-triangular")));
            }
            rows.push(row);
        }
        if rows.len() != labels.len() {
            return Err(Error::Stats("row count differs from label count".into()));
        }
        Ok(Self {
            labels,
            rows,
            alpha,
            p_values: Vec::new(),
        })
    }
}

/// Pairwise Mann-Whitney U significance between every two conditions.
pub fn significance_matrix(sets: &[RatingSet], alpha: f64) -> Result<SignificanceMatrix> {
    if sets.len() < 2 {
        return Err(Error::Stats("need at least two conditions".into()));
    }
    let mut seen = BTreeSet::new();
    for s in sets {
        if s.label.contains(['\t', '\n', '\r']) {
            return Err(Error::Stats(format!("label `{}` contains a tab or newline", s.label)));
        }
        if !seen.insert(s.label.as_str()) {
            return Err(Error::Stats(format!("duplicate condition label `{}`", s.label)));
        }
    }
    let values: Vec<Vec<f64>> = sets.iter().map(RatingSet::values).collect();
    let mut rows = Vec::with_capacity(sets.len());
    let mut p_values = Vec::with_capacity(sets.len());
    for i in 0..sets.len() {
        let mut row = Vec::with_capacity(i + 1);
        let mut prow = Vec::with_capacity(i);
        for j in 0..i {
            let p = mann_whitney_u(&values[i], &values[j])?.p_two_sided;
            prow.push(p);
            row.push(if p <= alpha {
                Cell::Significant
            } else {
                Cell::NotSignificant
            });
        }
        row.push(Cell::SelfPair);
        rows.push(row);
        p_values.push(prow);
    }
    Ok(SignificanceMatrix {
        labels: sets.iter().map(|s| s.label.clone()).collect(),
        rows,
        alpha,
        p_values,
    })
}
