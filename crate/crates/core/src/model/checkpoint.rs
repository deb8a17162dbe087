use super::{Model, ModelConfig};
use crate::autodiff::Scalar;
use crate::corpus::{TagVocab, Vocab};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Vocabularies stored alongside the weights so a checkpoint is enough to
/// translate raw text.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VocabBundle {
    pub src: Vocab,
    pub tgt: Vocab,
    pub tags: TagVocab,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    precision: String,
    config: ModelConfig,
    vocabs: Option<VocabBundle>,
}

#[derive(Serialize, Deserialize)]
struct TensorLine {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

const FORMAT: &str = "biscale-checkpoint";

/// JSON-lines checkpoint: one header line (config echo, precision, optional
/// vocabularies), then one line per parameter in registration order. Floats
/// use shortest round-trip encoding, so saving is byte-deterministic and
/// loading reproduces values exactly.
pub fn save_checkpoint<F: Scalar>(
    model: &Model<F>,
    vocabs: Option<&VocabBundle>,
    path: &Path,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let header = Header {
        format: FORMAT.to_string(),
        version: 1,
        precision: F::NAME.to_string(),
        config: model.config.clone(),
        vocabs: vocabs.cloned(),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for (_, name, tensor) in model.params.iter() {
        let line = TensorLine {
            name: name.to_string(),
            shape: tensor.shape().to_vec(),
            data: tensor.data().iter().map(|x| x.scalar_to_f64()).collect(),
        };
        writeln!(w, "{}", serde_json::to_string(&line)?)?;
    }
    w.flush()?;
    Ok(())
}

/// Peeks at a checkpoint's precision without loading weights, so a caller
/// can pick the right element type.
pub fn checkpoint_precision(path: &Path) -> Result<String> {
    let mut first = String::new();
    BufReader::new(fs::File::open(path)?).read_line(&mut first)?;
    let header: Header = serde_json::from_str(first.trim_end())
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::Checkpoint(format!(
            "not a {FORMAT} file (format field says {:?})",
            header.format
        )));
    }
    Ok(header.precision)
}

/// Loads a checkpoint saved by [`save_checkpoint`]. Validates the declared
/// precision, that every expected tensor arrives exactly once with the
/// right shape, and that nothing extra is present; errors name the
/// offending tensor.
pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<(Model<F>, Option<VocabBundle>)> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty file".into()))??;
    let header: Header = serde_json::from_str(&first)
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::Checkpoint(format!(
            "not a {FORMAT} file (format field says {:?})",
            header.format
        )));
    }
    if header.precision != F::NAME {
        return Err(Error::Checkpoint(format!(
            "precision mismatch: file holds {}, caller wants {}",
            header.precision,
            F::NAME
        )));
    }

    let mut model = Model::<F>::new_zeroed(header.config)?;
    let mut seen = vec![false; model.params.len()];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TensorLine = serde_json::from_str(&line)
            .map_err(|e| Error::Checkpoint(format!("line {}: {e}", lineno + 2)))?;
        let id = model
            .params
            .iter()
            .find(|(_, name, _)| *name == t.name)
            .map(|(id, _, _)| id)
            .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {:?}", t.name)))?;
        if seen[id.index()] {
            return Err(Error::Checkpoint(format!("duplicate tensor {:?}", t.name)));
        }
        let target = model.params.value_mut(id);
        if target.shape() != t.shape.as_slice() {
            return Err(Error::Checkpoint(format!(
                "tensor {:?} has shape {:?}, expected {:?}",
                t.name,
                t.shape,
                target.shape()
            )));
        }
        if t.data.len() != target.len() {
            return Err(Error::Checkpoint(format!(
                "tensor {:?} carries {} values for shape {:?}",
                t.name,
                t.data.len(),
                t.shape
            )));
        }
        for (dst, src) in target.data_mut().iter_mut().zip(&t.data) {
            *dst = F::scalar_from_f64(*src);
        }
        seen[id.index()] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        let name = model
            .params
            .iter()
            .nth(missing)
            .map(|(_, n, _)| n.to_string())
            .unwrap_or_default();
        return Err(Error::Checkpoint(format!("missing tensor {name:?}")));
    }
    Ok((model, header.vocabs))
}
