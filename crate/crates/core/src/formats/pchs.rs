//! `PCHS` channel stacks: magic, u16 version, u32 C, u32 H, u32 W, then per
//! channel a 16-byte null-padded label and H*W f32 values.

use std::path::Path;

use super::binary::{dim, put_f32s, put_label, put_u16, put_u32, read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::imaging::{ChannelLabel, ChannelStack, Plane};

pub const VERSION: u16 = 1;

pub fn encode_stack(stack: &ChannelStack) -> Result<Vec<u8>> {
    let (h, w) = stack.dims();
    let mut out = Vec::with_capacity(18 + stack.len() * (16 + h * w * 4));
    out.extend_from_slice(b"PCHS");
    put_u16(&mut out, VERSION);
    put_u32(&mut out, stack.len())?;
    put_u32(&mut out, h)?;
    put_u32(&mut out, w)?;
    for (label, plane) in stack.channels() {
        put_label(&mut out, &label.to_string())?;
        put_f32s(&mut out, &plane.data);
    }
    Ok(out)
}

pub fn decode_stack(bytes: &[u8]) -> Result<ChannelStack> {
    let mut r = Reader::new("PCHS", bytes)?;
    r.version(VERSION)?;
    let (c, h, w) = (dim(r.u32()?), dim(r.u32()?), dim(r.u32()?));
    let mut stack = ChannelStack::new(h, w);
    for i in 0..c {
        let text = r.label()?;
        let label: ChannelLabel = text
            .parse()
            .map_err(|_| Error::Format(format!("unknown PCHS channel label {text:?} (channel {i})")))?;
        let plane = Plane::new(h, w, r.f32s(h.saturating_mul(w))?)?;
        stack.push(label, plane)?;
    }
    r.finish()?;
    Ok(stack)
}

pub fn write_stack(path: &Path, stack: &ChannelStack) -> Result<()> {
    write_file(path, &encode_stack(stack)?)
}

pub fn read_stack(path: &Path) -> Result<ChannelStack> {
    decode_stack(&read_file(path)?).map_err(|e| e.context(path.display().to_string()))
}
