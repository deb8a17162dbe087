use super::chunked::ChunkedSentence;
use super::vocab::PAD;
use crate::error::{Error, Result};

/// One source sentence paired with its (possibly annotated) target.
#[derive(Clone, Debug, PartialEq)]
pub struct ParallelExample {
    pub src: Vec<u32>,
    pub tgt: ChunkedSentence,
    pub annotated: bool,
}

/// Examples padded to rectangular id matrices. Masks mark real tokens;
/// every padded position is PAD and masked out. Chunk tags stay ragged
/// since nothing consumes them positionally.
#[derive(Clone, Debug)]
pub struct Batch {
    pub src: Vec<Vec<u32>>,
    pub src_mask: Vec<Vec<bool>>,
    pub tgt: Vec<Vec<u32>>,
    pub tgt_mask: Vec<Vec<bool>>,
    pub boundaries: Vec<Vec<bool>>,
    pub tags: Vec<Vec<u32>>,
    /// True only if every member carries real chunk annotations.
    pub annotated: bool,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    /// Real source length of member `i`.
    pub fn src_len(&self, i: usize) -> usize {
        self.src_mask[i].iter().filter(|&&m| m).count()
    }

    /// Real target length of member `i` (including the EOS token).
    pub fn tgt_len(&self, i: usize) -> usize {
        self.tgt_mask[i].iter().filter(|&&m| m).count()
    }
}

/// Groups examples into fixed-size batches in the order given; the caller
/// shuffles indices beforehand if it wants shuffling. The last batch may be
/// short. Errors on empty input or a zero batch size.
pub fn make_batches(examples: &[ParallelExample], batch_size: usize) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut out = Vec::with_capacity(examples.len().div_ceil(batch_size));
    for group in examples.chunks(batch_size) {
        let jmax = group.iter().map(|e| e.src.len()).max().unwrap_or(0);
        let tmax = group.iter().map(|e| e.tgt.len()).max().unwrap_or(0);
        let mut b = Batch {
            src: Vec::with_capacity(group.len()),
            src_mask: Vec::with_capacity(group.len()),
            tgt: Vec::with_capacity(group.len()),
            tgt_mask: Vec::with_capacity(group.len()),
            boundaries: Vec::with_capacity(group.len()),
            tags: Vec::with_capacity(group.len()),
            annotated: group.iter().all(|e| e.annotated),
        };
        for e in group {
            if e.src.is_empty() {
                return Err(Error::Config("source sentence with no tokens".into()));
            }
            let mut src = e.src.clone();
            let mut src_mask = vec![true; src.len()];
            src.resize(jmax, PAD);
            src_mask.resize(jmax, false);

            let mut tgt = e.tgt.tokens.clone();
            let mut tgt_mask = vec![true; tgt.len()];
            let mut bounds = e.tgt.boundaries.clone();
            tgt.resize(tmax, PAD);
            tgt_mask.resize(tmax, false);
            bounds.resize(tmax, false);

            b.src.push(src);
            b.src_mask.push(src_mask);
            b.tgt.push(tgt);
            b.tgt_mask.push(tgt_mask);
            b.boundaries.push(bounds);
            b.tags.push(e.tgt.tags.clone());
        }
        out.push(b);
    }
    Ok(out)
}
