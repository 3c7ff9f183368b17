//! `PLCM` linear colorizers: magic, u32 channel count, 16-byte labels, then
//! for each of R, G, B the N weights and the bias as f64.

use std::path::Path;

use super::binary::{dim, put_f64, put_label, put_u32, read_file, write_file, Reader};
use crate::colorize::LinearColorizer;
use crate::error::{Error, Result};
use crate::imaging::ChannelLabel;

pub fn encode_linear(model: &LinearColorizer) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(b"PLCM");
    put_u32(&mut out, model.labels().len())?;
    for l in model.labels() {
        put_label(&mut out, &l.to_string())?;
    }
    for v in model.weights().iter().flatten() {
        put_f64(&mut out, *v);
    }
    Ok(out)
}

pub fn decode_linear(bytes: &[u8]) -> Result<LinearColorizer> {
    let mut r = Reader::new("PLCM", bytes)?;
    let n = dim(r.u32()?);
    let labels = (0..n)
        .map(|_| {
            let t = r.label()?;
            t.parse::<ChannelLabel>()
                .map_err(|_| Error::Format(format!("unknown PLCM channel label {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut weights: [Vec<f64>; 3] = Default::default();
    for w in &mut weights {
        *w = r.f64s(n + 1)?;
    }
    r.finish()?;
    LinearColorizer::from_weights(labels, weights)
}

pub fn write_linear(path: &Path, model: &LinearColorizer) -> Result<()> {
    write_file(path, &encode_linear(model)?)
}

pub fn read_linear(path: &Path) -> Result<LinearColorizer> {
    decode_linear(&read_file(path)?).map_err(|e| e.context(path.display().to_string()))
}
