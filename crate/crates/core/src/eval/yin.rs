//! Frame-wise YIN fundamental frequency estimation.
//!
//! For each frame the difference function
//! `d(tau) = sum_{j < W} (x_j - x_{j+tau})^2` (with `W = frame / 2`) is
//! normalized into the cumulative mean normalized difference
//! `d'(tau) = d(tau) * tau / sum_{1 <= j <= tau} d(j)`, `d'(0) = 1`.
//! The first lag in `[sr/fmax, sr/fmin]` with `d' < threshold` is walked down
//! to its local minimum and refined by parabolic interpolation. A frame with
//! no such lag is unvoiced.

use serde::{Deserialize, Serialize};

use super::wav::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YinParams {
    pub frame: usize,
    pub hop: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub threshold: f64,
}

impl Default for YinParams {
    fn default() -> Self {
        Self {
            frame: 2048,
            hop: 512,
            fmin: 65.0,
            fmax: 1000.0,
            threshold: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Track {
    pub params: YinParams,
    pub sample_rate: u32,
    /// One entry per full frame; `None` is unvoiced.
    pub f0: Vec<Option<f64>>,
}

impl F0Track {
    pub fn voiced(&self) -> impl Iterator<Item = f64> + '_ {
        self.f0.iter().flatten().copied()
    }
}

fn difference(frame: &[f64], window: usize, max_lag: usize, out: &mut [f64]) {
    for (tau, d) in out.iter_mut().enumerate().take(max_lag + 1) {
        *d = frame[..window]
            .iter()
            .zip(&frame[tau..tau + window])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
    }
}

fn cumulative_mean_normalize(d: &mut [f64]) {
    let mut running = 0.0;
    d[0] = 1.0;
    for (tau, v) in d.iter_mut().enumerate().skip(1) {
        running += *v;
        *v = if running > 0.0 {
            *v * tau as f64 / running
        } else {
            1.0
        };
    }
}

/// Refined lag of the accepted dip, or `None` if no lag clears the threshold.
fn pick_lag(cmnd: &[f64], min_lag: usize, threshold: f64) -> Option<f64> {
    let max_lag = cmnd.len() - 1;
    let mut tau = (min_lag..=max_lag).find(|&t| cmnd[t] < threshold)?;
    while tau < max_lag && cmnd[tau + 1] < cmnd[tau] {
        tau += 1;
    }
    if tau == 0 || tau == max_lag {
        return Some(tau as f64);
    }
    let (a, b, c) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
    let denom = a - 2.0 * b + c;
    if denom <= 0.0 {
        return Some(tau as f64);
    }
    let shift = 0.5 * (a - c) / denom;
    Some(tau as f64 + shift.clamp(-1.0, 1.0))
}

pub fn yin_f0(buf: &AudioBuffer, params: &YinParams) -> Result<F0Track> {
    let sr = f64::from(buf.sample_rate);
    if params.hop == 0 {
        return Err(Error::Config("hop must be at least 1".into()));
    }
    if !(params.fmin > 0.0 && params.fmin < params.fmax) {
        return Err(Error::Config(format!(
            "need 0 < fmin < fmax, got [{}, {}]",
            params.fmin, params.fmax
        )));
    }
    if (params.frame as f64) < 2.0 * sr / params.fmin {
        return Err(Error::Config(format!(
            "frame {} shorter than two periods of fmin ({} samples)",
            params.frame,
            (2.0 * sr / params.fmin).ceil()
        )));
    }
    if buf.samples.len() < params.frame {
        return Err(Error::Empty("audio shorter than one analysis frame"));
    }

    let window = params.frame / 2;
    let max_lag = ((sr / params.fmin).ceil() as usize).min(params.frame - window);
    let min_lag = ((sr / params.fmax).floor() as usize).max(1);
    let n_frames = 1 + (buf.samples.len() - params.frame) / params.hop;
    let mut d = vec![0.0; max_lag + 1];
    let f0 = (0..n_frames)
        .map(|i| {
            let frame = &buf.samples[i * params.hop..i * params.hop + params.frame];
            difference(frame, window, max_lag, &mut d);
            cumulative_mean_normalize(&mut d);
            pick_lag(&d, min_lag, params.threshold)
                .map(|lag| sr / lag)
                .filter(|f| (params.fmin..=params.fmax).contains(f))
        })
        .collect();
    Ok(F0Track {
        params: *params,
        sample_rate: buf.sample_rate,
        f0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, sr: u32, secs: f64, amp: f64, phase: f64) -> AudioBuffer {
        let n = (f64::from(sr) * secs) as usize;
        let samples = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(sr) + phase).sin())
            .collect();
        AudioBuffer::new(samples, sr).unwrap()
    }

    #[test]
    fn sine_440() {
        let track = yin_f0(&sine(440.0, 22050, 1.0, 0.5, 0.0), &YinParams::default()).unwrap();
        assert!(!track.f0.is_empty());
        for f in &track.f0 {
            let f = f.expect("voiced");
            assert!((f / 440.0 - 1.0).abs() < 0.01, "{f}");
        }
    }

    #[test]
    fn silence_unvoiced() {
        let buf = AudioBuffer::new(vec![0.0; 8192], 22050).unwrap();
        let track = yin_f0(&buf, &YinParams::default()).unwrap();
        assert_eq!(track.f0.len(), 1 + (8192 - 2048) / 512);
        assert!(track.f0.iter().all(Option::is_none));
    }

    #[test]
    fn short_buffer_errors() {
        let buf = AudioBuffer::new(vec![0.0; 100], 22050).unwrap();
        assert!(yin_f0(&buf, &YinParams::default()).is_err());
    }

    #[test]
    fn frame_too_short_for_fmin() {
        let buf = AudioBuffer::new(vec![0.0; 4096], 22050).unwrap();
        let p = YinParams {
            frame: 512,
            ..YinParams::default()
        };
        assert!(matches!(yin_f0(&buf, &p), Err(Error::Config(_))));
    }

    #[test]
    fn cmnd_convention_on_zero_energy() {
        let mut d = vec![0.0; 5];
        cumulative_mean_normalize(&mut d);
        assert_eq!(d, vec![1.0; 5]);
    }
}
