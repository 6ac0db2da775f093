use super::data::{euclidean, Codebook, Example, FrameSeq, SynthDataset, TokenSeq};
use super::model::{sigmoid, ToyModel};
use crate::error::{Error, Result};
use crate::eval::wer::edit_distance;

/// Nearest-codebook decoding of `r`-frame blocks. Decoding ends after the first
/// block whose mean stop probability exceeds 0.5.
pub fn transcribe(frames: &FrameSeq, codebook: &Codebook, upsample: usize) -> Result<TokenSeq> {
    if upsample == 0 || !frames.num_frames().is_multiple_of(upsample) {
        return Err(Error::Shape {
            name: "frames".into(),
            reason: format!(
                "{} frames not divisible by upsample factor {upsample}",
                frames.num_frames()
            ),
        });
    }
    if frames.frame_dim != codebook.frame_dim {
        return Err(Error::Shape {
            name: "frames".into(),
            reason: format!(
                "frame dim {} vs codebook dim {}",
                frames.frame_dim, codebook.frame_dim
            ),
        });
    }
    let mut tokens = Vec::with_capacity(frames.num_frames() / upsample);
    for block in 0..frames.num_frames() / upsample {
        let span = block * upsample..(block + 1) * upsample;
        let best = (0..codebook.vocab)
            .map(|tok| {
                let dist: f64 = span
                    .clone()
                    .map(|t| euclidean(frames.frame(t), codebook.row(tok)))
                    .sum::<f64>()
                    / upsample as f64;
                (tok, dist)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(tok, _)| tok)
            .expect("codebook has at least two rows");
        tokens.push(best);
        let stop_p = span.map(|t| sigmoid(frames.stop[t])).sum::<f64>() / upsample as f64;
        if stop_p > 0.5 {
            break;
        }
    }
    Ok(TokenSeq(tokens))
}

/// Self-labels `xs` with the teacher: frames verbatim, stop targets hardened
/// to 1 where the teacher's stop probability exceeds 0.5.
pub fn synthesize_labels(
    teacher: &ToyModel,
    xs: &[TokenSeq],
    like: &SynthDataset,
) -> Result<SynthDataset> {
    let w = teacher.store().to_flat().into_iter().map(f64::from).collect::<Vec<_>>();
    let net = teacher.net(&w);
    let examples = xs
        .iter()
        .map(|x| {
            let mut target = net.forward(x)?;
            for s in &mut target.stop {
                *s = if sigmoid(*s) > 0.5 { 1.0 } else { 0.0 };
            }
            Ok(Example {
                tokens: x.clone(),
                target,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthDataset {
        task: like.task,
        seed: None,
        codebook: like.codebook.clone(),
        teacher_labeled: true,
        examples,
    })
}

/// Corpus word error rate of `transcribe(forward(x))` against `x`:
/// total edits over total reference length.
pub fn toy_wer(model: &ToyModel, codebook: &Codebook, xs: &[TokenSeq]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Empty("WER evaluation set"));
    }
    let w = model.store().to_flat().into_iter().map(f64::from).collect::<Vec<_>>();
    let net = model.net(&w);
    let (mut edits, mut total) = (0usize, 0usize);
    for x in xs {
        let hyp = transcribe(&net.forward(x)?, codebook, model.dims().upsample)?;
        edits += edit_distance(&x.0, &hyp.0);
        total += x.len();
    }
    Ok(edits as f64 / total as f64)
}
