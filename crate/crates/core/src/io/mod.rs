//! File formats: GHT1 tensors, PFM depth maps, JSON tensors and JSONL.
//!
//! GHT1 layout (little-endian): magic `GHT1`, `u32` dtype code (1 = f32),
//! `u32` rank, `rank` × `u32` dims, then the row-major f32 payload.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayD, IxDyn};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GHT_MAGIC: &[u8; 4] = b"GHT1";
pub const GHT_DTYPE_F32: u32 = 1;

/// Output format for array artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Ght,
    Pfm,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Ght => "ght",
            Format::Pfm => "pfm",
        }
    }

    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Ok(Format::Json),
            Some("ght") => Ok(Format::Ght),
            Some("pfm") => Ok(Format::Pfm),
            _ => Err(Error::Format(format!("cannot infer array format of {}", path.display()))),
        }
    }
}

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// `fs::read` with the path in the error message.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| with_path(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| with_path(path, e))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| with_path(path, e))
}

pub fn encode_ght(a: &ArrayD<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * a.ndim() + 4 * a.len());
    out.extend_from_slice(GHT_MAGIC);
    out.extend_from_slice(&GHT_DTYPE_F32.to_le_bytes());
    out.extend_from_slice(&(a.ndim() as u32).to_le_bytes());
    for &d in a.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in a.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: &mut usize) -> Result<u32> {
    let b = bytes
        .get(*at..*at + 4)
        .ok_or_else(|| Error::Format("GHT1 header truncated".into()))?;
    *at += 4;
    Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
}

pub fn decode_ght(bytes: &[u8]) -> Result<ArrayD<f64>> {
    if bytes.len() < 4 || &bytes[..4] != GHT_MAGIC {
        return Err(Error::Format("missing GHT1 magic".into()));
    }
    let mut at = 4;
    let dtype = read_u32(bytes, &mut at)?;
    if dtype != GHT_DTYPE_F32 {
        return Err(Error::Format(format!("unsupported GHT1 dtype code {dtype}")));
    }
    let rank = read_u32(bytes, &mut at)? as usize;
    let dims = (0..rank)
        .map(|_| read_u32(bytes, &mut at).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let n: usize = dims.iter().product();
    let payload = &bytes[at..];
    if payload.len() != n * 4 {
        return Err(Error::Format(format!(
            "GHT1 payload is {} bytes, dims {dims:?} need {}",
            payload.len(),
            n * 4
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| Error::Format(e.to_string()))
}

/// Grayscale PFM with a negative (little-endian) scale, bottom row first.
pub fn encode_pfm(a: &Array2<f64>) -> Vec<u8> {
    let (h, w) = a.dim();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    for r in (0..h).rev() {
        for c in 0..w {
            out.extend_from_slice(&(a[(r, c)] as f32).to_le_bytes());
        }
    }
    out
}

/// Reads grayscale PFM of either endianness.
pub fn decode_pfm(bytes: &[u8]) -> Result<Array2<f64>> {
    let bad = |m: &str| Error::Format(format!("PFM: {m}"));
    // Three whitespace-terminated header tokens after the magic line.
    let mut tokens = Vec::new();
    let mut at = 0;
    while tokens.len() < 4 {
        while at < bytes.len() && bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        let start = at;
        while at < bytes.len() && !bytes[at].is_ascii_whitespace() {
            at += 1;
        }
        if start == at {
            return Err(bad("header truncated"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..at]).map_err(|_| bad("non-ASCII header"))?);
    }
    // Exactly one whitespace byte separates the header from the payload.
    at += 1;
    match tokens[0] {
        "Pf" => {}
        "PF" => return Err(bad("colour PFM is not supported")),
        m => return Err(bad(&format!("unknown magic {m:?}"))),
    }
    let w: usize = tokens[1].parse().map_err(|_| bad("bad width"))?;
    let h: usize = tokens[2].parse().map_err(|_| bad("bad height"))?;
    let scale: f64 = tokens[3].parse().map_err(|_| bad("bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad("scale must be non-zero"));
    }
    let payload = bytes.get(at..).unwrap_or(&[]);
    if payload.len() != w * h * 4 {
        return Err(bad(&format!("payload is {} bytes, expected {}", payload.len(), w * h * 4)));
    }
    let le = scale < 0.0;
    let mut out = Array2::zeros((h, w));
    for (k, c) in payload.chunks_exact(4).enumerate() {
        let b: [u8; 4] = c.try_into().expect("4 bytes");
        let v = if le { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        out[(h - 1 - k / w, k % w)] = v as f64;
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct JsonTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

pub fn encode_json_tensor(a: &ArrayD<f64>) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec(&JsonTensor {
        shape: a.shape().to_vec(),
        data: a.iter().copied().collect(),
    })?)
}

pub fn decode_json_tensor(bytes: &[u8]) -> Result<ArrayD<f64>> {
    let t: JsonTensor = serde_json::from_slice(bytes)?;
    ArrayD::from_shape_vec(IxDyn(&t.shape), t.data).map_err(|e| Error::Format(e.to_string()))
}

/// Writes an array in `format`. PFM accepts 2-D arrays only.
pub fn write_array(path: &Path, a: &ArrayD<f64>, format: Format) -> Result<()> {
    let bytes = match format {
        Format::Json => encode_json_tensor(a)?,
        Format::Ght => encode_ght(a),
        Format::Pfm => {
            let a2 = a
                .view()
                .into_dimensionality::<ndarray::Ix2>()
                .map_err(|_| Error::Format(format!("PFM holds 2-D maps, got shape {:?}", a.shape())))?;
            encode_pfm(&a2.to_owned())
        }
    };
    write_bytes(path, &bytes)
}

/// Reads an array, choosing the decoder from the extension.
pub fn read_array(path: &Path) -> Result<ArrayD<f64>> {
    let bytes = read_bytes(path)?;
    match Format::from_path(path)? {
        Format::Json => decode_json_tensor(&bytes),
        Format::Ght => decode_ght(&bytes),
        Format::Pfm => Ok(decode_pfm(&bytes)?.into_dyn()),
    }
}

pub fn read_map(path: &Path) -> Result<Array2<f64>> {
    let a = read_array(path)?;
    let shape = a.shape().to_vec();
    a.into_dimensionality()
        .map_err(|_| Error::Shape(format!("{} is not a 2-D map (shape {shape:?})", path.display())))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let r = BufReader::new(fs::File::open(path).map_err(|e| with_path(path, e))?);
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            Error::Format(format!("{} line {}: {e}", path.display(), n + 1))
        })?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_bytes(path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn ght_round_trip() {
        let a = ndarray::Array3::from_shape_fn((2, 3, 4), |(i, j, k)| (i * 12 + j * 4 + k) as f64 * 0.5).into_dyn();
        let bytes = encode_ght(&a);
        assert_eq!(&bytes[..4], b"GHT1");
        assert_eq!(bytes.len(), 4 + 4 + 4 + 3 * 4 + 24 * 4);
        assert_eq!(decode_ght(&bytes).unwrap(), a);
    }

    #[test]
    fn ght_rejects_bad_payload() {
        let mut bytes = encode_ght(&array![[1.0, 2.0]].into_dyn());
        bytes.pop();
        assert!(matches!(decode_ght(&bytes), Err(Error::Format(_))));
        assert!(decode_ght(b"NOPE").is_err());
    }

    #[test]
    fn pfm_round_trip_and_orientation() {
        let a = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let bytes = encode_pfm(&a);
        assert!(bytes.starts_with(b"Pf\n3 2\n-1.0\n"));
        // Bottom row first.
        let first = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(first, 4.0);
        assert_eq!(decode_pfm(&bytes).unwrap(), a);
    }

    #[test]
    fn pfm_big_endian() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        bytes.extend_from_slice(&(-2.0f32).to_be_bytes());
        assert_eq!(decode_pfm(&bytes).unwrap(), array![[1.5, -2.0]]);
    }

    #[test]
    fn json_tensor_and_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let a = array![[0.1, 0.2], [0.3, 0.4]].into_dyn();
        let p = dir.path().join("a.json");
        write_array(&p, &a, Format::Json).unwrap();
        assert_eq!(read_array(&p).unwrap(), a);
        let p = dir.path().join("a.jsonl");
        write_jsonl(&p, &[1u32, 2, 3]).unwrap();
        assert_eq!(read_jsonl::<u32>(&p).unwrap(), vec![1, 2, 3]);
        let p3 = dir.path().join("b.pfm");
        assert!(write_array(&p3, &ndarray::Array3::<f64>::zeros((1, 1, 1)).into_dyn(), Format::Pfm).is_err());
    }
}
