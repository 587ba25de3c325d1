use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Interleaved RGB image stored as `f32`, row-major from the top-left.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::ShapeMismatch {
                op: "image",
                lhs: vec![height, width, 3],
                rhs: vec![data.len()],
            });
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: [f32; 3]) -> Self {
        let data = (0..width * height).flat_map(|_| value).collect();
        Image {
            width,
            height,
            data,
        }
    }

    pub fn from_f64(width: usize, height: usize, pixels: &[[f64; 3]]) -> Result<Self> {
        Image::new(
            width,
            height,
            pixels.iter().flat_map(|p| p.map(|v| v as f32)).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f32; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn to_f64(&self) -> Vec<[f64; 3]> {
        self.pixels().map(|p| p.map(f64::from)).collect()
    }

    pub fn same_shape(&self, other: &Image) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::ShapeMismatch {
                op: "image",
                lhs: vec![self.height, self.width],
                rhs: vec![other.height, other.width],
            });
        }
        Ok(())
    }

    /// Flat little-endian `f32` dump; the size lives in the dataset manifest.
    pub fn save_f32(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load_f32(path: &Path, width: usize, height: usize) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let want = width * height * 3 * 4;
        if bytes.len() != want {
            return Err(Error::parse(
                path,
                0,
                format!(
                    "expected {want} bytes for {width}x{height}, found {}",
                    bytes.len()
                ),
            ));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Image::new(width, height, data)
    }

    /// 8-bit binary PPM, clamped to `[0, 1]`.
    pub fn save_ppm(&self, path: &Path) -> Result<()> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(
            self.data
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&out).map_err(|e| Error::io(path, e))
    }
}
