//! `FSTK` frame-stack files.
//!
//! Layout (little-endian): magic `FSTK`, `u16` version, `u32` width,
//! `u32` height, `u32` frame count, `f64` pitch (rad/pixel), `2 × f64`
//! centre pixel, then `count × height × width` `f32` intensities,
//! frame-major and row-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use crate::model::FrameGeometry;
use crate::synth::{Frame, FrameStack, StackMetadata};

pub const MAGIC: &[u8; 4] = b"FSTK";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 42;

#[derive(Debug, Error)]
pub enum FstkError {
    #[error("not an FSTK file: magic bytes are {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported FSTK version {found}; this build reads version {supported}")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("file is {actual} bytes, shorter than the {expected}-byte header")]
    ShortHeader { expected: usize, actual: usize },

    #[error("invalid header: {0}")]
    InvalidHeader(String),

    #[error("truncated payload: header declares {frames} frames of {width}x{height} ({expected} bytes) but only {actual} bytes follow")]
    Truncated {
        frames: u32,
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },

    #[error("payload is {actual} bytes but the header's dimensions imply {expected}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("frame {frame}, pixel {pixel}: intensity {value} is negative or not finite")]
    InvalidPixel { frame: usize, pixel: usize, value: f32 },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

struct Header {
    width: u32,
    height: u32,
    count: u32,
    pitch: f64,
    center: (f64, f64),
}

fn u16_at(b: &[u8], o: usize) -> u16 {
    u16::from_le_bytes([b[o], b[o + 1]])
}

fn u32_at(b: &[u8], o: usize) -> u32 {
    u32::from_le_bytes(b[o..o + 4].try_into().expect("4-byte slice"))
}

fn f64_at(b: &[u8], o: usize) -> f64 {
    f64::from_le_bytes(b[o..o + 8].try_into().expect("8-byte slice"))
}

fn parse_header(bytes: &[u8]) -> Result<Header, FstkError> {
    if bytes.len() >= 4 && &bytes[..4] != MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(&bytes[..4]);
        return Err(FstkError::BadMagic { found });
    }
    if bytes.len() < HEADER_LEN {
        return Err(FstkError::ShortHeader {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let version = u16_at(bytes, 4);
    if version != VERSION {
        return Err(FstkError::UnsupportedVersion {
            found: version,
            supported: VERSION,
        });
    }
    let h = Header {
        width: u32_at(bytes, 6),
        height: u32_at(bytes, 10),
        count: u32_at(bytes, 14),
        pitch: f64_at(bytes, 18),
        center: (f64_at(bytes, 26), f64_at(bytes, 34)),
    };
    let mut problems = Vec::new();
    if h.width == 0 || h.height == 0 {
        problems.push(format!("frame size {}x{} must be positive", h.width, h.height));
    }
    if h.count == 0 {
        problems.push("frame count must be at least 1".to_string());
    }
    if !(h.pitch > 0.0) || !h.pitch.is_finite() {
        problems.push(format!("pitch {} must be positive", h.pitch));
    }
    if !h.center.0.is_finite() || !h.center.1.is_finite() {
        problems.push("centre pixel must be finite".to_string());
    }
    if !problems.is_empty() {
        return Err(FstkError::InvalidHeader(problems.join("; ")));
    }
    Ok(h)
}

/// Parses a complete FSTK image held in memory.
pub fn decode_stack(bytes: &[u8]) -> Result<FrameStack, FstkError> {
    let h = parse_header(bytes)?;
    let (w, ht) = (h.width as usize, h.height as usize);
    let frame_len = w * ht;
    let expected = frame_len
        .checked_mul(h.count as usize)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| FstkError::InvalidHeader("declared payload size overflows".into()))?;
    let actual = bytes.len() - HEADER_LEN;
    if actual < expected {
        return Err(FstkError::Truncated {
            frames: h.count,
            width: h.width,
            height: h.height,
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(FstkError::SizeMismatch { expected, actual });
    }
    let geometry = FrameGeometry::new(w, ht, h.pitch, h.center)
        .map_err(|e| FstkError::InvalidHeader(e.to_string()))?;
    let payload = &bytes[HEADER_LEN..];
    let mut frames = Vec::with_capacity(h.count as usize);
    for f in 0..h.count as usize {
        let raw = &payload[f * frame_len * 4..(f + 1) * frame_len * 4];
        let mut data = Vec::with_capacity(frame_len);
        for (i, c) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(c.try_into().expect("4-byte chunk"));
            if !(v >= 0.0) || !v.is_finite() {
                return Err(FstkError::InvalidPixel {
                    frame: f,
                    pixel: i,
                    value: v,
                });
            }
            data.push(v);
        }
        let pixels = Array2::from_shape_vec((ht, w), data).expect("length checked above");
        frames.push(Frame::new(pixels, geometry).expect("pixels validated above"));
    }
    FrameStack::new(frames, StackMetadata::default())
        .map_err(|e| FstkError::InvalidHeader(e.to_string()))
}

/// Serializes a stack.
pub fn encode_stack(stack: &FrameStack) -> Result<Vec<u8>, FstkError> {
    let g = stack.geometry();
    let dim = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| FstkError::InvalidHeader(format!("{what} {v} exceeds u32")))
    };
    let (w, h, n) = (dim(g.width, "width")?, dim(g.height, "height")?, dim(stack.len(), "frame count")?);
    let mut out = Vec::with_capacity(HEADER_LEN + stack.len() * g.n_pixels() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&g.pitch.to_le_bytes());
    out.extend_from_slice(&g.center.0.to_le_bytes());
    out.extend_from_slice(&g.center.1.to_le_bytes());
    for f in stack.frames() {
        for v in f.pixels().iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_stack(path: &Path) -> Result<FrameStack, FstkError> {
    let bytes = fs::read(path).map_err(|source| FstkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut stack = decode_stack(&bytes)?;
    stack = FrameStack::new(
        stack.frames().to_vec(),
        StackMetadata {
            seed: None,
            source: path.display().to_string(),
        },
    )
    .expect("decoded stack is consistent");
    Ok(stack)
}

pub fn write_stack(stack: &FrameStack, path: &Path) -> Result<(), FstkError> {
    let bytes = encode_stack(stack)?;
    let io = |source| FstkError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(&bytes).map_err(io)?;
    Ok(())
}
