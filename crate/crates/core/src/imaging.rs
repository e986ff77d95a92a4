//! Image file I/O and the pixel ↔ tensor encodings.
//!
//! Pixels map to quaternions with a zero real part: a gray pixel becomes
//! `(0, g, g, g)` and a color pixel `(0, R, G, B)`, all components normalized
//! to `[0, 1]`. The real-valued baseline sees the same three values as three
//! separate channels.

use crate::error::{Error, Result};
use crate::tensor::{QTensor, RealTensor};
use std::fs;
use std::io::Write;
use std::path::Path;

/// 8-bit RGB image, row-major interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        Ok(ImageBuffer {
            height,
            width,
            data: vec![0; 3 * height * width],
        })
    }

    pub fn from_rgb(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != 3 * height * width {
            return Err(Error::shape(format!(
                "rgb buffer of {} bytes does not match {height}x{width}",
                data.len()
            )));
        }
        Ok(ImageBuffer {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, i: usize, j: usize) -> [u8; 3] {
        let at = 3 * (i * self.width + j);
        [self.data[at], self.data[at + 1], self.data[at + 2]]
    }

    pub fn set_pixel(&mut self, i: usize, j: usize, rgb: [u8; 3]) {
        let at = 3 * (i * self.width + j);
        self.data[at..at + 3].copy_from_slice(&rgb);
    }

    pub fn is_gray(&self) -> bool {
        self.data
            .chunks_exact(3)
            .all(|px| px[0] == px[1] && px[1] == px[2])
    }

    /// Central `h x w` window.
    pub fn center_crop(&self, h: usize, w: usize) -> Result<ImageBuffer> {
        if h == 0 || w == 0 || h > self.height || w > self.width {
            return Err(Error::shape(format!(
                "cannot crop {h}x{w} from {}x{}",
                self.height, self.width
            )));
        }
        let i0 = (self.height - h) / 2;
        let j0 = (self.width - w) / 2;
        let mut out = ImageBuffer::new(h, w)?;
        for i in 0..h {
            let src = 3 * ((i0 + i) * self.width + j0);
            let dst = 3 * i * w;
            out.data[dst..dst + 3 * w].copy_from_slice(&self.data[src..src + 3 * w]);
        }
        Ok(out)
    }
}

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// Load a PNG or binary PPM (P6) file. The format is sniffed from the file
/// contents, not the extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&PNG_MAGIC) {
        decode_png(&bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(&bytes)
    } else {
        Err(Error::UnsupportedFormat(format!(
            "{} is neither PNG nor binary PPM",
            path.display()
        )))
    }
}

/// Save as PNG or binary PPM depending on the file extension.
pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    let bytes = match ext.as_deref() {
        Some("png") => encode_png(img)?,
        Some("ppm") => encode_ppm(img),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "cannot write extension {other:?}; use .png or .ppm"
            )))
        }
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn decode_png(bytes: &[u8]) -> Result<ImageBuffer> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::CorruptData(format!("png decode failed: {e}")))?;
    let rgb = img.to_rgb8();
    ImageBuffer::from_rgb(rgb.height() as usize, rgb.width() as usize, rgb.into_raw())
}

fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(
            &img.data,
            img.width as u32,
            img.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::CorruptData(format!("png encode failed: {e}")))?;
    Ok(out)
}

fn decode_ppm(bytes: &[u8]) -> Result<ImageBuffer> {
    // Header: "P6" <width> <height> <maxval>, tokens separated by whitespace,
    // '#' comments allowed, then a single whitespace byte before the payload.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::CorruptData("ppm header truncated".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::CorruptData("ppm header field is not a number".into()));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are utf8");
        *field = text
            .parse()
            .map_err(|_| Error::CorruptData("ppm header field out of range".into()))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "ppm maxval {maxval} unsupported, expected 255"
        )));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::CorruptData("ppm header missing separator".into())),
    }
    let need = 3 * width * height;
    let payload = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::CorruptData("ppm pixel data truncated".into()))?;
    ImageBuffer::from_rgb(height, width, payload.to_vec())
}

fn encode_ppm(img: &ImageBuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.data.len() + 32);
    write!(out, "P6\n{} {}\n255\n", img.width, img.height).expect("vec write");
    out.extend_from_slice(&img.data);
    out
}

/// BT.601 luma, rounded half-up and written to all three channels.
pub fn to_gray_luma(img: &ImageBuffer) -> ImageBuffer {
    let mut out = img.clone();
    for px in out.data.chunks_exact_mut(3) {
        let luma = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
        let g = luma.round().clamp(0.0, 255.0) as u8;
        px.fill(g);
    }
    out
}

/// Encode a gray image (R = G = B required) as one quaternion channel
/// `(0, g, g, g)` with `g = GS/255`.
pub fn encode_gray_quaternion(img: &ImageBuffer) -> Result<QTensor> {
    if !img.is_gray() {
        return Err(Error::Validation(
            "gray quaternion encoding requires R = G = B on every pixel".into(),
        ));
    }
    let mut t = QTensor::zeros(1, img.height, img.width)?;
    let hw = img.height * img.width;
    for (i, px) in img.data.chunks_exact(3).enumerate() {
        let g = px[0] as f64 / 255.0;
        t.data_mut()[hw + i] = g;
        t.data_mut()[2 * hw + i] = g;
        t.data_mut()[3 * hw + i] = g;
    }
    Ok(t)
}

/// Encode a color image as one quaternion channel `(0, R, G, B) / 255`.
pub fn encode_color_quaternion(img: &ImageBuffer) -> QTensor {
    let mut t = QTensor::zeros(1, img.height, img.width).expect("image dims positive");
    let hw = img.height * img.width;
    for (i, px) in img.data.chunks_exact(3).enumerate() {
        t.data_mut()[hw + i] = px[0] as f64 / 255.0;
        t.data_mut()[2 * hw + i] = px[1] as f64 / 255.0;
        t.data_mut()[3 * hw + i] = px[2] as f64 / 255.0;
    }
    t
}

/// Encode as three real channels in `[0, 1]`. With `gray` set the image must
/// be achromatic and the gray value is repeated on all three channels.
pub fn encode_real(img: &ImageBuffer, gray: bool) -> Result<RealTensor> {
    if gray && !img.is_gray() {
        return Err(Error::Validation(
            "gray real encoding requires R = G = B on every pixel".into(),
        ));
    }
    let mut t = RealTensor::zeros(3, img.height, img.width)?;
    let hw = img.height * img.width;
    for (i, px) in img.data.chunks_exact(3).enumerate() {
        t.data_mut()[i] = px[0] as f64 / 255.0;
        t.data_mut()[hw + i] = px[1] as f64 / 255.0;
        t.data_mut()[2 * hw + i] = px[2] as f64 / 255.0;
    }
    Ok(t)
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Decode a one-channel quaternion tensor back to an image from its
/// `(x, y, z)` components; the real part is discarded.
pub fn decode_quaternion_image(t: &QTensor) -> Result<ImageBuffer> {
    if t.channels() != 1 {
        return Err(Error::shape(format!(
            "quaternion decode expects 1 channel, got {}",
            t.channels()
        )));
    }
    let mut img = ImageBuffer::new(t.height(), t.width())?;
    let (x, y, z) = (t.plane(0, 1), t.plane(0, 2), t.plane(0, 3));
    for i in 0..x.len() {
        img.data[3 * i] = to_byte(x[i]);
        img.data[3 * i + 1] = to_byte(y[i]);
        img.data[3 * i + 2] = to_byte(z[i]);
    }
    Ok(img)
}

/// Decode a three-channel real tensor back to an image.
pub fn decode_real_image(t: &RealTensor) -> Result<ImageBuffer> {
    if t.channels() != 3 {
        return Err(Error::shape(format!(
            "real decode expects 3 channels, got {}",
            t.channels()
        )));
    }
    let mut img = ImageBuffer::new(t.height(), t.width())?;
    let (r, g, b) = (t.channel(0), t.channel(1), t.channel(2));
    for i in 0..r.len() {
        img.data[3 * i] = to_byte(r[i]);
        img.data[3 * i + 1] = to_byte(g[i]);
        img.data[3 * i + 2] = to_byte(b[i]);
    }
    Ok(img)
}
