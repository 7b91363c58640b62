//! RGB rasters and binary PPM (P6) I/O.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0, 0, 0])
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: rgb.repeat(width * height),
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::InvalidArgument(format!(
                "raster {width}×{height} needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.encode_ppm()).map_err(|e| Error::io(path, e))
    }

    pub fn read_ppm(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode_ppm(&bytes).map_err(|reason| Error::Image {
            path: path.to_path_buf(),
            reason,
        })
    }

    /// Parses a binary PPM with max value 255. Header comments are allowed.
    pub fn decode_ppm(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() {
                match bytes[pos] {
                    b'#' => {
                        while pos < bytes.len() && bytes[pos] != b'\n' {
                            pos += 1;
                        }
                    }
                    c if c.is_ascii_whitespace() => pos += 1,
                    _ => break,
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
                pos += 1;
            }
            if start == pos {
                return Err("truncated header".into());
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ASCII header")?);
        }
        if fields[0] != "P6" {
            return Err(format!("unsupported magic {:?}", fields[0]));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| format!("bad header field {s:?}"));
        let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval != 255 {
            return Err(format!("max value {maxval} unsupported"));
        }
        if width == 0 || height == 0 {
            return Err("empty raster".into());
        }
        // exactly one whitespace byte separates the header from the payload
        pos += 1;
        let need = width * height * 3;
        let payload = bytes.get(pos..pos + need).ok_or("truncated pixel data")?;
        Ok(Self {
            width,
            height,
            data: payload.to_vec(),
        })
    }
}

/// Rotates a square raster clockwise by `k·90°`. Lossless.
pub fn rotate_90k(image: &RgbImage, k: u8) -> Result<RgbImage> {
    if image.width != image.height {
        return Err(Error::InvalidArgument(format!(
            "rotate_90k needs a square image, got {}×{}",
            image.width, image.height
        )));
    }
    let n = image.width;
    let mut out = image.clone();
    for _ in 0..(k % 4) {
        let src = out.clone();
        for y in 0..n {
            for x in 0..n {
                // clockwise: (x, y) → (n−1−y, x)
                out.put(n - 1 - y, x, src.get(x, y));
            }
        }
    }
    Ok(out)
}

/// Clockwise `k·90°` rotation of a square boolean mask.
pub fn rotate_mask_90k(mask: &[bool], side: usize, k: u8) -> Vec<bool> {
    let mut out = mask.to_vec();
    for _ in 0..(k % 4) {
        let src = out.clone();
        for y in 0..side {
            for x in 0..side {
                out[x * side + (side - 1 - y)] = src[y * side + x];
            }
        }
    }
    out
}
