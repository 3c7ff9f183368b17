//! `PFST` feature sets: magic, u16 version, u32 K, u32 n, K*n f32 centroids
//! (column-major, one column per feature), K*n f32 pseudo-inverse
//! (row-major), then seed u64, iterations u32, distortion f64.

use std::path::Path;

use super::binary::{dim, put_f32s, put_f64, put_u16, put_u32, put_u64, read_file, write_file, Reader};
use crate::error::Result;
use crate::features::{FeatureSet, LearnMeta};

pub const VERSION: u16 = 1;

pub fn encode_feature_set(fs: &FeatureSet) -> Result<Vec<u8>> {
    let (k, n) = (fs.k(), fs.n());
    let mut out = Vec::with_capacity(40 + 8 * k * n);
    out.extend_from_slice(b"PFST");
    put_u16(&mut out, VERSION);
    put_u32(&mut out, k)?;
    put_u32(&mut out, n)?;
    let cols: Vec<f32> = fs.centroids().iter().flatten().map(|&v| v as f32).collect();
    put_f32s(&mut out, &cols);
    let pinv: Vec<f32> = fs.pinv().iter().map(|&v| v as f32).collect();
    put_f32s(&mut out, &pinv);
    let meta = fs.meta();
    put_u64(&mut out, meta.seed);
    put_u32(&mut out, meta.iterations as usize)?;
    put_f64(&mut out, meta.distortion);
    Ok(out)
}

pub fn decode_feature_set(bytes: &[u8]) -> Result<FeatureSet> {
    let mut r = Reader::new("PFST", bytes)?;
    r.version(VERSION)?;
    let (k, n) = (dim(r.u32()?), dim(r.u32()?));
    let len = k.saturating_mul(n);
    let cols = r.f32s(len)?;
    let pinv = r.f32s(len)?;
    let meta = LearnMeta { seed: r.u64()?, iterations: r.u32()?, distortion: r.f64()? };
    r.finish()?;
    let centroids = if n == 0 {
        Vec::new()
    } else {
        cols.chunks(n).map(|c| c.iter().map(|&v| v as f64).collect()).collect()
    };
    FeatureSet::from_parts(centroids, pinv.iter().map(|&v| v as f64).collect(), meta)
}

pub fn write_feature_set(path: &Path, fs: &FeatureSet) -> Result<()> {
    write_file(path, &encode_feature_set(fs)?)
}

pub fn read_feature_set(path: &Path) -> Result<FeatureSet> {
    decode_feature_set(&read_file(path)?).map_err(|e| e.context(path.display().to_string()))
}
