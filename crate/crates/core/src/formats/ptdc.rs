//! `PTDC` signal cubes.
//!
//! Header: magic, u16 version, u32 height, u32 width, u32 n, f64 sample
//! period (ns), f64 pixel pitch (nm), u32 t266, u32 t532, u32 plane flags.
//! Then the samples as f32, row-major pixels with time fastest, then the
//! flagged planes (R266 then Scatter) as f32.

use std::path::Path;

use super::binary::{dim, put_f32s, put_f64, put_u16, put_u32, read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::imaging::Plane;
use crate::signal::{ExcitationSchedule, SignalCube};

pub const VERSION: u16 = 1;
const HAS_R266: u32 = 1;
const HAS_SCATTER: u32 = 2;

pub fn encode_cube(cube: &SignalCube) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(48 + cube.raw_samples().len() * 4);
    out.extend_from_slice(b"PTDC");
    put_u16(&mut out, VERSION);
    put_u32(&mut out, cube.height())?;
    put_u32(&mut out, cube.width())?;
    put_u32(&mut out, cube.n())?;
    put_f64(&mut out, cube.sample_period());
    put_f64(&mut out, cube.pixel_pitch());
    put_u32(&mut out, cube.schedule().t266)?;
    put_u32(&mut out, cube.schedule().t532)?;
    let flags = cube.r266.as_ref().map_or(0, |_| HAS_R266) | cube.scatter.as_ref().map_or(0, |_| HAS_SCATTER);
    put_u32(&mut out, flags as usize)?;
    put_f32s(&mut out, cube.raw_samples());
    for p in [&cube.r266, &cube.scatter].into_iter().flatten() {
        put_f32s(&mut out, &p.data);
    }
    Ok(out)
}

pub fn decode_cube(bytes: &[u8]) -> Result<SignalCube> {
    let mut r = Reader::new("PTDC", bytes)?;
    r.version(VERSION)?;
    let (h, w, n) = (dim(r.u32()?), dim(r.u32()?), dim(r.u32()?));
    let period = r.f64()?;
    let pitch = r.f64()?;
    let (t266, t532) = (dim(r.u32()?), dim(r.u32()?));
    let flags = r.u32()?;
    if flags & !(HAS_R266 | HAS_SCATTER) != 0 {
        return Err(Error::Format(format!("unknown PTDC plane flags {flags:#x}")));
    }
    let count = h
        .checked_mul(w)
        .and_then(|p| p.checked_mul(n))
        .ok_or_else(|| Error::Format("PTDC dimensions overflow".into()))?;
    let samples = r.f32s(count)?;
    let mut plane = |on: bool| -> Result<Option<Plane>> {
        if on {
            Ok(Some(Plane::new(h, w, r.f32s(h * w)?)?))
        } else {
            Ok(None)
        }
    };
    let r266 = plane(flags & HAS_R266 != 0)?;
    let scatter = plane(flags & HAS_SCATTER != 0)?;
    r.finish()?;
    let schedule = ExcitationSchedule::standard(n, t266, t532).map_err(|e| e.context("PTDC header"))?;
    SignalCube::new(h, w, n, period, samples, schedule)?
        .with_pixel_pitch(pitch)
        .with_planes(r266, scatter)
}

pub fn write_cube(path: &Path, cube: &SignalCube) -> Result<()> {
    write_file(path, &encode_cube(cube)?)
}

pub fn read_cube(path: &Path) -> Result<SignalCube> {
    decode_cube(&read_file(path)?).map_err(|e| e.context(path.display().to_string()))
}
