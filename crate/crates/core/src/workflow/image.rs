//! 8-bit raster buffers and binary PGM/PPM (P5/P6, maxval 255) codecs.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("invalid image dimensions {width}x{height}x{channels}")]
    BadDimensions { width: usize, height: usize, channels: usize },
    #[error("pixel buffer has {actual} bytes, expected {expected}")]
    BadLength { expected: usize, actual: usize },
    #[error("unsupported or malformed PNM data: {0}")]
    Pnm(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || !(channels == 1 || channels == 3) {
            return Err(ImageError::BadDimensions { width, height, channels });
        }
        let expected = width * height * channels;
        if pixels.len() != expected {
            return Err(ImageError::BadLength {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    fn at(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    pub fn invert(&self) -> Self {
        Self {
            pixels: self.pixels.iter().map(|p| 255 - p).collect(),
            ..self.clone()
        }
    }

    /// Nearest-neighbour resampling: destination pixel (x, y) samples source
    /// (x * w_src / w_dst, y * h_src / h_dst), rounded down.
    pub fn resize(&self, width: usize, height: usize) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::BadDimensions {
                width,
                height,
                channels: self.channels,
            });
        }
        let mut pixels = Vec::with_capacity(width * height * self.channels);
        for y in 0..height {
            let sy = y * self.height / height;
            for x in 0..width {
                let sx = x * self.width / width;
                for c in 0..self.channels {
                    pixels.push(self.at(sx, sy, c));
                }
            }
        }
        Self::new(width, height, self.channels, pixels)
    }

    /// Mean over the (2r+1)² window clipped to the image, rounded half up.
    pub fn box_blur(&self, radius: usize) -> Self {
        if radius == 0 {
            return self.clone();
        }
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for y in 0..self.height {
            let (y0, y1) = (y.saturating_sub(radius), (y + radius).min(self.height - 1));
            for x in 0..self.width {
                let (x0, x1) = (x.saturating_sub(radius), (x + radius).min(self.width - 1));
                let count = ((y1 - y0 + 1) * (x1 - x0 + 1)) as u32;
                for c in 0..self.channels {
                    let mut sum = 0u32;
                    for yy in y0..=y1 {
                        for xx in x0..=x1 {
                            sum += self.at(xx, yy, c) as u32;
                        }
                    }
                    pixels.push(((sum + count / 2) / count) as u8);
                }
            }
        }
        Self {
            pixels,
            ..self.clone()
        }
    }

    pub fn to_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pnm(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(ImageError::Pnm("truncated header".into()));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|e| ImageError::Pnm(e.to_string()))?);
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let channels = match fields[0] {
            "P5" => 1,
            "P6" => 3,
            other => return Err(ImageError::Pnm(format!("unsupported magic {other:?}"))),
        };
        let num = |s: &str| s.parse::<usize>().map_err(|e| ImageError::Pnm(format!("{s:?}: {e}")));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval != 255 {
            return Err(ImageError::Pnm(format!("maxval {maxval} (only 255 supported)")));
        }
        let raster = bytes.get(pos..).unwrap_or_default();
        Self::new(width, height, channels, raster.to_vec())
    }

    pub fn content_type(&self) -> &'static str {
        if self.channels == 1 {
            "image/x-portable-graymap"
        } else {
            "image/x-portable-pixmap"
        }
    }
}
