use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, Context};
use prunekit::stats::{pairwise_z, significance_matrix, AbOutcome, RatingSet};

use super::{emit, usage, CliError};
use crate::{StatsArgs, StatsMode};

fn reader(path: &Path, header: &[&str]) -> anyhow::Result<csv::Reader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let got: Vec<String> = r
        .headers()
        .context("line 1: unreadable header")?
        .iter()
        .map(str::to_ascii_lowercase)
        .collect();
    if got != header {
        return Err(anyhow!(
            "line 1: expected header `{}`, found `{}`",
            header.join(","),
            got.join(",")
        ));
    }
    Ok(r)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str, line: u64) -> anyhow::Result<T> {
    let raw = rec.get(i).ok_or_else(|| anyhow!("line {line}: missing {what}"))?;
    raw.parse()
        .map_err(|_| anyhow!("line {line}: {what} `{raw}` is not valid"))
}

fn records(r: &mut csv::Reader<File>) -> impl Iterator<Item = anyhow::Result<(u64, csv::StringRecord)>> + '_ {
    r.records().map(|rec| {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            anyhow!("line {line}: {e}")
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        Ok((line, rec))
    })
}

fn mos(a: &StatsArgs) -> Result<String, CliError> {
    let mut r = reader(&a.input, &["condition", "score"])?;
    let mut sets: Vec<(String, Vec<u8>)> = Vec::new();
    for item in records(&mut r) {
        let (line, rec) = item?;
        let label: String = field(&rec, 0, "condition", line)?;
        if label.is_empty() {
            return Err(anyhow!("line {line}: empty condition label").into());
        }
        let score: u8 = field(&rec, 1, "score", line)?;
        if !prunekit::stats::MOS_SCALE.contains(&score) {
            return Err(anyhow!("line {line}: score {score} outside 1..=5").into());
        }
        match sets.iter_mut().find(|(l, _)| *l == label) {
            Some((_, v)) => v.push(score),
            None => sets.push((label, vec![score])),
        }
    }
    if sets.len() < 2 {
        return Err(usage(format!(
            "mos mode needs at least two conditions, found {}",
            sets.len()
        )));
    }
    let sets = sets
        .into_iter()
        .map(|(l, s)| RatingSet::new(l, s))
        .collect::<prunekit::Result<Vec<_>>>()?;
    Ok(significance_matrix(&sets, a.alpha)?.render())
}

fn ab(a: &StatsArgs) -> Result<String, CliError> {
    let mut r = reader(&a.input, &["proposal", "baseline", "wins", "n"])?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["proposal", "baseline", "wins", "n", "proportion", "z", "p", "significant"])
        .context("writing CSV")?;
    let mut rows = 0;
    for item in records(&mut r) {
        let (line, rec) = item?;
        let proposal: String = field(&rec, 0, "proposal", line)?;
        let baseline: String = field(&rec, 1, "baseline", line)?;
        let wins: u64 = field(&rec, 2, "wins", line)?;
        let n: u64 = field(&rec, 3, "n", line)?;
        let outcome = AbOutcome::new(wins, n).map_err(|e| anyhow!("line {line}: {e}"))?;
        let t = pairwise_z(outcome, a.alpha, a.two_sided);
        w.write_record([
            proposal,
            baseline,
            wins.to_string(),
            n.to_string(),
            t.proportion.to_string(),
            t.z.to_string(),
            t.p.to_string(),
            t.significant.to_string(),
        ])
        .context("writing CSV")?;
        rows += 1;
    }
    if rows == 0 {
        return Err(anyhow!("{} has no data rows", a.input.display()).into());
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
    Ok(String::from_utf8(bytes).context("CSV is not UTF-8")?)
}

pub fn run(a: StatsArgs) -> Result<(), CliError> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(usage(format!("alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let body = match a.mode {
        StatsMode::Mos => mos(&a)?,
        StatsMode::Ab => ab(&a)?,
    };
    emit(a.out.as_deref(), &body)?;
    Ok(())
}
