use std::io::Cursor;
use std::path::Path;

use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::FrameImage;

/// Wire encodings for frames sent to backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "format")]
pub enum ImageFormat {
    Png,
    Jpeg { quality: u8 },
}

impl ImageFormat {
    pub fn mime_type(&self) -> &'static str {
        match self {
            ImageFormat::Png => "image/png",
            ImageFormat::Jpeg { .. } => "image/jpeg",
        }
    }
}

pub fn encode_image(image: &FrameImage, format: ImageFormat) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let (w, h) = image.dimensions();
    let res = match format {
        ImageFormat::Png => {
            PngEncoder::new(&mut out).write_image(image.pixels(), w, h, ExtendedColorType::Rgb8)
        }
        ImageFormat::Jpeg { quality } => {
            if !(1..=100).contains(&quality) {
                return Err(Error::Encoding(format!("jpeg quality {quality} not in 1..=100")));
            }
            JpegEncoder::new_with_quality(&mut out, quality).write_image(
                image.pixels(),
                w,
                h,
                ExtendedColorType::Rgb8,
            )
        }
    };
    res.map_err(|e| Error::Encoding(e.to_string()))?;
    Ok(out)
}

/// Decodes PNG or JPEG bytes into an RGB frame (index 0, timestamp 0).
pub fn decode_image(bytes: &[u8]) -> Result<FrameImage> {
    let img = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::Encoding(e.to_string()))?
        .decode()
        .map_err(|e| Error::Encoding(e.to_string()))?
        .into_rgb8();
    let (w, h) = img.dimensions();
    FrameImage::new(w, h, img.into_raw(), 0, 0.0)
}

pub fn load_image(path: &Path) -> Result<FrameImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::source_error(path, e))?;
    decode_image(&bytes).map_err(|e| Error::source_error(path, e))
}
