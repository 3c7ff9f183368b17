use std::path::Path;

use image::{GrayImage, ImageReader};

use crate::error::{Error, Result};
use crate::imaging::RgbImage;

fn image_err(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path.display().to_string(), io),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

pub fn write_png(path: &Path, rgb: &RgbImage) -> Result<()> {
    let (h, w) = rgb.dims();
    let mut buf = Vec::with_capacity(h * w * 3);
    for i in 0..h * w {
        buf.extend(rgb.planes.iter().map(|p| p[i]));
    }
    let img = image::RgbImage::from_raw(w as u32, h as u32, buf).expect("buffer sized to image");
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| image_err(path, e))
}

/// Any PNG, converted to 8-bit RGB.
pub fn read_png(path: &Path) -> Result<RgbImage> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path.display().to_string(), e))?
        .decode()
        .map_err(|e| image_err(path, e))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut planes: [Vec<u8>; 3] = std::array::from_fn(|_| Vec::with_capacity(h * w));
    for px in img.pixels() {
        for c in 0..3 {
            planes[c].push(px.0[c]);
        }
    }
    RgbImage::new(h, w, planes)
}

pub fn write_gray_png(path: &Path, height: usize, width: usize, data: &[u8]) -> Result<()> {
    if data.len() != height * width {
        return Err(Error::Shape(format!("{height}x{width} gray image needs {} bytes", height * width)));
    }
    let img = GrayImage::from_raw(width as u32, height as u32, data.to_vec()).expect("length checked");
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| image_err(path, e))
}

pub fn read_gray_png(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?
        .decode()
        .map_err(|e| image_err(path, e))?
        .to_luma8();
    Ok((img.height() as usize, img.width() as usize, img.into_raw()))
}
