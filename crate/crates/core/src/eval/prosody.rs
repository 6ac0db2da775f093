use serde::Serialize;

use super::wav::AudioBuffer;
use super::yin::F0Track;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProsodyStats {
    /// `None` when no frame is voiced.
    pub mean_f0: Option<f64>,
    /// Population standard deviation over voiced frames.
    pub std_f0: Option<f64>,
    pub duration_s: f64,
    pub voiced_fraction: f64,
}

pub fn prosody_stats(track: &F0Track, buf: &AudioBuffer) -> ProsodyStats {
    let voiced: Vec<f64> = track.voiced().collect();
    let (mean_f0, std_f0) = if voiced.is_empty() {
        (None, None)
    } else {
        let n = voiced.len() as f64;
        let mean = voiced.iter().sum::<f64>() / n;
        let var = voiced.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / n;
        (Some(mean), Some(var.sqrt()))
    };
    ProsodyStats {
        mean_f0,
        std_f0,
        duration_s: buf.duration_s(),
        voiced_fraction: if track.f0.is_empty() {
            0.0
        } else {
            voiced.len() as f64 / track.f0.len() as f64
        },
    }
}

/// Mean of per-utterance `system - reference` differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchReport {
    pub d_duration_s: f64,
    /// `None` when no pair has a defined f0 on both sides.
    pub d_mean_f0: Option<f64>,
    pub d_std_f0: Option<f64>,
    pub n_pairs: usize,
    /// Pairs contributing to the f0 averages.
    pub n_f0_pairs: usize,
}

pub fn mismatch(system: &[ProsodyStats], reference: &[ProsodyStats]) -> Result<MismatchReport> {
    if system.len() != reference.len() {
        return Err(Error::Config(format!(
            "system has {} utterances, reference {}",
            system.len(),
            reference.len()
        )));
    }
    if system.is_empty() {
        return Err(Error::Empty("utterance list"));
    }
    let n = system.len() as f64;
    let d_duration_s = system
        .iter()
        .zip(reference)
        .map(|(s, r)| s.duration_s - r.duration_s)
        .sum::<f64>()
        / n;
    let f0_pairs: Vec<(f64, f64)> = system
        .iter()
        .zip(reference)
        .filter_map(|(s, r)| {
            Some((s.mean_f0? - r.mean_f0?, s.std_f0? - r.std_f0?))
        })
        .collect();
    let m = f0_pairs.len();
    let avg = |f: fn(&(f64, f64)) -> f64| {
        (m > 0).then(|| f0_pairs.iter().map(f).sum::<f64>() / m as f64)
    };
    Ok(MismatchReport {
        d_duration_s,
        d_mean_f0: avg(|p| p.0),
        d_std_f0: avg(|p| p.1),
        n_pairs: system.len(),
        n_f0_pairs: m,
    })
}
