//! Minimal NPY reader/writer.
//!
//! Only little-endian `f4`/`f8` arrays in C order are supported. Files are
//! always written as version 1.0 with the header padded to a 64-byte
//! boundary, matching what `numpy.save` emits. Versions 2.0 and 3.0 are
//! accepted on read.

use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn from_descr(descr: &str) -> Option<Self> {
        match descr {
            "<f4" => Some(Dtype::F32),
            "<f8" => Some(Dtype::F64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
}

impl Header {
    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }

    fn dict(&self) -> String {
        let shape = match self.shape.len() {
            1 => format!("({},)", self.shape[0]),
            _ => {
                let dims: Vec<String> = self.shape.iter().map(|d| d.to_string()).collect();
                format!("({})", dims.join(", "))
            }
        };
        format!(
            "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
            self.dtype.descr(),
            shape
        )
    }

    /// Serialize as a version 1.0 preamble (magic, version, length, dict).
    pub fn encode(&self) -> Vec<u8> {
        let dict = self.dict();
        // magic(6) + version(2) + u16 length(2) + dict + '\n'
        let unpadded = 10 + dict.len() + 1;
        let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
        let header_len = dict.len() + pad + 1;
        let mut out = Vec::with_capacity(10 + header_len);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&(header_len as u16).to_le_bytes());
        out.extend_from_slice(dict.as_bytes());
        out.extend(std::iter::repeat_n(b' ', pad));
        out.push(b'\n');
        out
    }

    /// Parse the preamble; returns the header and the payload offset.
    pub fn decode(bytes: &[u8]) -> std::result::Result<(Header, usize), String> {
        if bytes.len() < 10 || &bytes[..6] != MAGIC {
            return Err("missing NPY magic".into());
        }
        let (len, start) = match bytes[6] {
            1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
            2 | 3 => {
                if bytes.len() < 12 {
                    return Err("truncated header length".into());
                }
                let len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
                (len as usize, 12)
            }
            v => return Err(format!("unsupported NPY version {v}")),
        };
        let end = start + len;
        if bytes.len() < end {
            return Err("truncated header".into());
        }
        let text = std::str::from_utf8(&bytes[start..end])
            .map_err(|_| "header is not valid text".to_string())?;
        let dict = parse_dict(text.trim_end())?;

        let descr = dict.descr.ok_or("header lacks 'descr'")?;
        let dtype =
            Dtype::from_descr(&descr).ok_or_else(|| format!("unsupported dtype {descr:?}"))?;
        if dict.fortran_order.ok_or("header lacks 'fortran_order'")? {
            return Err("Fortran-ordered arrays are not supported".into());
        }
        let shape = dict.shape.ok_or("header lacks 'shape'")?;
        Ok((Header { dtype, shape }, end))
    }
}

#[derive(Default)]
struct Dict {
    descr: Option<String>,
    fortran_order: Option<bool>,
    shape: Option<Vec<usize>>,
}

struct Cursor<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> std::result::Result<(), String> {
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            other => Err(format!(
                "expected {:?} in header, found {:?}",
                c as char,
                other.map(|b| b as char)
            )),
        }
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let quote = self.peek().ok_or("unexpected end of header")?;
        if quote != b'\'' && quote != b'"' {
            return Err("expected quoted string in header".into());
        }
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos >= self.s.len() {
            return Err("unterminated string in header".into());
        }
        let out = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(out)
    }

    fn word(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("")
    }

    fn tuple(&mut self) -> std::result::Result<Vec<usize>, String> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            match self.peek() {
                Some(b')') => {
                    self.pos += 1;
                    return Ok(dims);
                }
                Some(b',') => self.pos += 1,
                Some(_) => {
                    let w = self.word();
                    let d = w
                        .parse::<usize>()
                        .map_err(|_| format!("bad shape entry {w:?}"))?;
                    dims.push(d);
                }
                None => return Err("unterminated shape tuple".into()),
            }
        }
    }
}

fn parse_dict(text: &str) -> std::result::Result<Dict, String> {
    let mut c = Cursor {
        s: text.as_bytes(),
        pos: 0,
    };
    let mut dict = Dict::default();
    c.expect(b'{')?;
    loop {
        match c.peek() {
            Some(b'}') => break,
            Some(b',') => {
                c.pos += 1;
                continue;
            }
            None => return Err("unterminated header dict".into()),
            _ => {}
        }
        let key = c.string()?;
        c.expect(b':')?;
        match key.as_str() {
            "descr" => dict.descr = Some(c.string()?),
            "fortran_order" => {
                dict.fortran_order = Some(match c.word() {
                    "True" => true,
                    "False" => false,
                    w => return Err(format!("bad fortran_order {w:?}")),
                })
            }
            "shape" => dict.shape = Some(c.tuple()?),
            other => return Err(format!("unexpected header key {other:?}")),
        }
    }
    Ok(dict)
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedTensor {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Read an array, returning its header and the raw little-endian payload.
pub fn read_raw(path: &Path) -> Result<(Header, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, offset) = Header::decode(&bytes).map_err(|r| malformed(path, r))?;
    let payload = bytes[offset..].to_vec();
    let expected = header.element_count() * header.dtype.width();
    if payload.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "{}: header shape {:?} needs {} values, file holds {} bytes ({} values)",
            path.display(),
            header.shape,
            header.element_count(),
            payload.len(),
            payload.len() as f64 / header.dtype.width() as f64,
        )));
    }
    Ok((header, payload))
}

pub fn read_f32(path: &Path) -> Result<(Vec<usize>, Vec<f32>)> {
    let (header, payload) = read_raw(path)?;
    if header.dtype != Dtype::F32 {
        return Err(malformed(path, "expected dtype <f4"));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((header.shape, values))
}

pub fn read_f64(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let (header, payload) = read_raw(path)?;
    if header.dtype != Dtype::F64 {
        return Err(malformed(path, "expected dtype <f8"));
    }
    let values = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    Ok((header.shape, values))
}

fn write_bytes(path: &Path, header: &Header, payload: Vec<u8>) -> Result<()> {
    let mut out = header.encode();
    out.extend(payload);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn check_len(shape: &[usize], len: usize) -> Result<()> {
    let n: usize = shape.iter().product();
    if n != len {
        return Err(Error::ShapeMismatch(format!(
            "shape {shape:?} needs {n} values, got {len}"
        )));
    }
    Ok(())
}

pub fn write_f32(path: &Path, shape: &[usize], values: &[f32]) -> Result<()> {
    check_len(shape, values.len())?;
    let header = Header {
        dtype: Dtype::F32,
        shape: shape.to_vec(),
    };
    let payload = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_bytes(path, &header, payload)
}

pub fn write_f64(path: &Path, shape: &[usize], values: &[f64]) -> Result<()> {
    check_len(shape, values.len())?;
    let header = Header {
        dtype: Dtype::F64,
        shape: shape.to_vec(),
    };
    let payload = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_bytes(path, &header, payload)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_64_byte_aligned() {
        for shape in [vec![1, 1, 1], vec![48, 1000, 1024], vec![7]] {
            let h = Header {
                dtype: Dtype::F32,
                shape,
            };
            let enc = h.encode();
            assert_eq!(enc.len() % 64, 0);
            assert_eq!(*enc.last().unwrap(), b'\n');
            let (back, off) = Header::decode(&enc).unwrap();
            assert_eq!(back, h);
            assert_eq!(off, enc.len());
        }
    }

    #[test]
    fn numpy_style_header_parses() {
        // Byte layout produced by numpy.save for np.zeros((2, 3, 4), '<f4').
        let dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3, 4), }";
        let mut bytes = b"\x93NUMPY\x01\x00".to_vec();
        let total = 118usize; // 128 - 10
        bytes.extend_from_slice(&(total as u16).to_le_bytes());
        bytes.extend_from_slice(dict.as_bytes());
        bytes.extend(std::iter::repeat_n(b' ', total - dict.len() - 1));
        bytes.push(b'\n');
        let (h, off) = Header::decode(&bytes).unwrap();
        assert_eq!(h.shape, vec![2, 3, 4]);
        assert_eq!(h.dtype, Dtype::F32);
        assert_eq!(off, 128);
        // Our encoder emits the identical preamble.
        assert_eq!(h.encode(), bytes);
    }

    #[test]
    fn rejects_fortran_order_and_other_dtypes() {
        let fortran = "{'descr': '<f4', 'fortran_order': True, 'shape': (1,), }";
        let int = "{'descr': '<i4', 'fortran_order': False, 'shape': (1,), }";
        for dict in [fortran, int] {
            let mut bytes = b"\x93NUMPY\x01\x00".to_vec();
            bytes.extend_from_slice(&((dict.len() + 1) as u16).to_le_bytes());
            bytes.extend_from_slice(dict.as_bytes());
            bytes.push(b'\n');
            assert!(Header::decode(&bytes).is_err());
        }
    }

    #[test]
    fn f64_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.npy");
        let vals = [1.5, -0.0, f64::MIN_POSITIVE, 1e300];
        write_f64(&p, &[4], &vals).unwrap();
        let (shape, back) = read_f64(&p).unwrap();
        assert_eq!(shape, vec![4]);
        for (a, b) in vals.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
