use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use prunekit::eval::{mismatch, prosody_stats, read_wav, yin_f0, ProsodyStats, YinParams};

use super::{emit, CliError};

#[derive(Args)]
pub struct EvalAudioArgs {
    /// Directory of synthesized WAVs.
    #[arg(long)]
    system: PathBuf,
    /// Directory of reference WAVs with matching file names.
    #[arg(long)]
    reference: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = YinParams::default().frame)]
    frame: usize,
    #[arg(long, default_value_t = YinParams::default().hop)]
    hop: usize,
    #[arg(long, default_value_t = YinParams::default().fmin)]
    fmin: f64,
    #[arg(long, default_value_t = YinParams::default().fmax)]
    fmax: f64,
    #[arg(long, default_value_t = YinParams::default().threshold)]
    threshold: f64,
}

fn wav_names(dir: &Path) -> anyhow::Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let is_wav = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
        if is_wav && path.is_file() {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.insert(name.to_string());
            }
        }
    }
    Ok(names)
}

fn analyze(path: &Path, params: &YinParams) -> prunekit::Result<ProsodyStats> {
    let buf = read_wav(path)?;
    let track = yin_f0(&buf, params)?;
    Ok(prosody_stats(&track, &buf))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const HEADER: [&str; 10] = [
    "file",
    "sys_duration_s",
    "ref_duration_s",
    "sys_mean_f0",
    "ref_mean_f0",
    "sys_std_f0",
    "ref_std_f0",
    "d_duration_s",
    "d_mean_f0",
    "d_std_f0",
];

pub fn run(a: EvalAudioArgs) -> Result<(), CliError> {
    let params = YinParams {
        frame: a.frame,
        hop: a.hop,
        fmin: a.fmin,
        fmax: a.fmax,
        threshold: a.threshold,
    };
    let sys_names = wav_names(&a.system)?;
    let ref_names = wav_names(&a.reference)?;
    for n in sys_names.symmetric_difference(&ref_names) {
        let side = if sys_names.contains(n) { "reference" } else { "system" };
        eprintln!("warning: {n} has no counterpart in the {side} directory");
    }
    let matched: Vec<&String> = sys_names.intersection(&ref_names).collect();
    if matched.is_empty() {
        return Err(anyhow::anyhow!(
            "no file names match between {} and {}",
            a.system.display(),
            a.reference.display()
        )
        .into());
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).context("writing CSV")?;
    let (mut sys_all, mut ref_all) = (Vec::new(), Vec::new());
    for name in matched {
        let pair = analyze(&a.system.join(name), &params)
            .and_then(|s| Ok((s, analyze(&a.reference.join(name), &params)?)));
        let (s, r) = match pair {
            Ok(p) => p,
            Err(e) => {
                eprintln!("warning: skipping {name}: {e}");
                continue;
            }
        };
        let d = |x: Option<f64>, y: Option<f64>| x.zip(y).map(|(x, y)| x - y);
        w.write_record([
            name.clone(),
            s.duration_s.to_string(),
            r.duration_s.to_string(),
            opt(s.mean_f0),
            opt(r.mean_f0),
            opt(s.std_f0),
            opt(r.std_f0),
            (s.duration_s - r.duration_s).to_string(),
            opt(d(s.mean_f0, r.mean_f0)),
            opt(d(s.std_f0, r.std_f0)),
        ])
        .context("writing CSV")?;
        sys_all.push(s);
        ref_all.push(r);
    }
    if sys_all.is_empty() {
        return Err(anyhow::anyhow!("every matched file failed to load").into());
    }
    let m = mismatch(&sys_all, &ref_all)?;
    let blank = String::new;
    w.write_record([
        "summary".to_string(),
        blank(),
        blank(),
        blank(),
        blank(),
        blank(),
        blank(),
        m.d_duration_s.to_string(),
        opt(m.d_mean_f0),
        opt(m.d_std_f0),
    ])
    .context("writing CSV")?;
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
    let body = String::from_utf8(bytes).context("CSV is not UTF-8")?;
    emit(a.out.as_deref(), &body)?;
    Ok(())
}

