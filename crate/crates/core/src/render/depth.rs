use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Magic bytes opening a depth file.
pub const DEPTH_MAGIC: &[u8; 4] = b"ODPT";
/// Header: magic, width (u32 LE), height (u32 LE), reserved u32 (zero).
pub const DEPTH_HEADER_LEN: usize = 16;

/// Row-major `f32` depth raster; `0.0` marks background.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(DEPTH_HEADER_LEN + 4 * self.data.len());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(DEPTH_MAGIC)?;
        w.write_all(&self.width.to_le_bytes())?;
        w.write_all(&self.height.to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        for d in &self.data {
            w.write_all(&d.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |m: &str| Error::InvalidParameter(format!("depth file: {m}"));
        let mut header = [0u8; DEPTH_HEADER_LEN];
        r.read_exact(&mut header)
            .map_err(|_| bad("truncated header"))?;
        if &header[0..4] != DEPTH_MAGIC {
            return Err(bad("bad magic"));
        }
        let width = u32::from_le_bytes(header[4..8].try_into().unwrap());
        let height = u32::from_le_bytes(header[8..12].try_into().unwrap());
        let n = width as usize * height as usize;
        let mut raw = Vec::with_capacity(n * 4);
        r.read_to_end(&mut raw)
            .map_err(|e| Error::io("reading depth payload", e))?;
        if raw.len() != n * 4 {
            return Err(bad(&format!(
                "payload is {} bytes, expected {}",
                raw.len(),
                n * 4
            )));
        }
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }
}
