use super::{ModelParams, ReplayBuilder, END, START};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Greedy decoding from START until END or `max_len` tokens.
///
/// The result excludes START and includes END when it was produced. Ties in
/// the logits go to the lowest token id.
pub fn generate(params: &ModelParams, image: &Tensor, max_len: usize) -> Result<Vec<usize>> {
    if max_len == 0 {
        return Err(Error::Config("max_len must be at least 1".into()));
    }
    let mut builder = ReplayBuilder::new(params, image)?;
    let mut step = builder.push(START)?;
    let mut out = Vec::with_capacity(max_len);
    loop {
        let next = builder.graph().value(step.logits).argmax();
        out.push(next);
        if next == END || out.len() == max_len {
            return Ok(out);
        }
        step = builder.push(next)?;
    }
}
