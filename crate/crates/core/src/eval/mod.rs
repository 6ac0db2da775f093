//! Objective evaluation: WAV input, YIN pitch, prosody mismatch and WER.

pub mod prosody;
pub mod wav;
pub mod wer;
pub mod yin;

pub use prosody::{mismatch, prosody_stats, MismatchReport, ProsodyStats};
pub use wav::{read_wav, write_wav, AudioBuffer};
pub use wer::{edit_distance, wer};
pub use yin::{yin_f0, F0Track, YinParams};
