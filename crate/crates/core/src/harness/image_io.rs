use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::splat_render::Image;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("png encode: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("png decode: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("unsupported png layout: {0}")]
    Unsupported(String),
}

/// Linear radiance is clamped to [0, 1] and quantized directly, without a
/// transfer curve, so stored values equal rendered values up to rounding.
fn quantize(v: f32, max: f32) -> u32 {
    (v.clamp(0.0, 1.0) * max).round() as u32
}

/// Encodes an RGB PNG at 8 or 16 bits per channel.
pub fn encode_png(img: &Image, sixteen_bit: bool) -> Result<Vec<u8>, ImageError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width, img.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(if sixteen_bit { png::BitDepth::Sixteen } else { png::BitDepth::Eight });
        let mut writer = enc.write_header()?;
        let data: Vec<u8> = if sixteen_bit {
            img.pixels
                .iter()
                .flat_map(|p| p.iter().flat_map(|&v| (quantize(v, 65535.0) as u16).to_be_bytes()))
                .collect()
        } else {
            img.pixels.iter().flat_map(|p| p.map(|v| quantize(v, 255.0) as u8)).collect()
        };
        writer.write_image_data(&data)?;
    }
    Ok(out)
}

pub fn write_png(path: impl AsRef<Path>, img: &Image, sixteen_bit: bool) -> Result<(), ImageError> {
    fs::write(path, encode_png(img, sixteen_bit)?)?;
    Ok(())
}

/// Reads an 8- or 16-bit RGB or RGBA PNG; alpha is dropped.
pub fn read_png(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    decode_png(&fs::read(path)?)
}

/// Decodes an in-memory PNG under the decoder's default memory limit.
pub fn decode_png(data: &[u8]) -> Result<Image, ImageError> {
    let decoder = png::Decoder::new(io::Cursor::new(data));
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| ImageError::Unsupported("image too large".into()))?];
    let info = reader.next_frame(&mut buf)?;
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(ImageError::Unsupported(format!("{other:?}"))),
    };
    let bytes = &buf[..info.buffer_size()];
    let mut img = Image::new(info.width, info.height);
    let sample = |i: usize| -> f32 {
        match info.bit_depth {
            png::BitDepth::Sixteen => u16::from_be_bytes([bytes[2 * i], bytes[2 * i + 1]]) as f32 / 65535.0,
            _ => bytes[i] as f32 / 255.0,
        }
    };
    if !matches!(info.bit_depth, png::BitDepth::Eight | png::BitDepth::Sixteen) {
        return Err(ImageError::Unsupported(format!("bit depth {:?}", info.bit_depth)));
    }
    for (k, px) in img.pixels.iter_mut().enumerate() {
        *px = [0, 1, 2].map(|c| sample(k * channels + c));
    }
    Ok(img)
}
