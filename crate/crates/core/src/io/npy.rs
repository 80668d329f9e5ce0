//! Reading and writing the numpy `.npy` container.
//!
//! Only what embedding files need is supported: format versions 1.0 and 2.0,
//! little-endian `f4`/`f8` element types, C order. Arrays of any rank are
//! decoded here; callers decide which shapes they accept.
//!
//! Format reference: <https://numpy.org/doc/stable/reference/generated/numpy.lib.format.html>

use std::io::Write;

use crate::error::{Error, Result};

pub(crate) const MAGIC: &[u8; 6] = b"\x93NUMPY";

/// Header block alignment used by numpy >= 1.16.
const HEADER_ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F4,
    F8,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F4 => 4,
            Dtype::F8 => 8,
        }
    }

    fn descr(self) -> &'static str {
        match self {
            Dtype::F4 => "<f4",
            Dtype::F8 => "<f8",
        }
    }
}

/// A decoded array, widened to `f64`, in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub dtype: Dtype,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn read_npy(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(Error::MalformedHeader("bad magic string".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, prefix) = match (major, minor) {
        (1, 0) => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        (2, 0) => {
            if bytes.len() < 12 {
                return Err(Error::MalformedHeader("truncated header length".into()));
            }
            let len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
            (len as usize, 12)
        }
        _ => {
            return Err(Error::MalformedHeader(format!(
                "unsupported format version {major}.{minor}"
            )))
        }
    };
    let body_start = prefix + header_len;
    if bytes.len() < body_start {
        return Err(Error::MalformedHeader("header extends past end of file".into()));
    }
    let header = std::str::from_utf8(&bytes[prefix..body_start])
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    let dict = HeaderDict::parse(header)?;

    let dtype = match dict.descr.as_str() {
        "<f4" => Dtype::F4,
        "<f8" => Dtype::F8,
        other => return Err(Error::UnsupportedDtype(other.to_string())),
    };
    if dict.fortran_order {
        return Err(Error::FortranOrder);
    }

    let count: usize = dict.shape.iter().product();
    let body = &bytes[body_start..];
    let expected = count * dtype.size();
    if body.len() < expected {
        return Err(Error::TruncatedData {
            expected,
            found: body.len(),
        });
    }
    let data = match dtype {
        Dtype::F4 => body[..expected]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::F8 => body[..expected]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Ok(NpyArray {
        dtype,
        shape: dict.shape,
        data,
    })
}

/// Writes a row-major `f64` array as npy version 1.0 (falling back to 2.0
/// only when the header would not fit a 16-bit length).
pub fn write_npy_f64<W: Write>(writer: &mut W, shape: &[usize], data: &[f64]) -> std::io::Result<()> {
    debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    let shape_repr = match shape {
        [n] => format!("({n},)"),
        dims => format!(
            "({})",
            dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        Dtype::F8.descr(),
        shape_repr
    );

    let mut version = 1u8;
    let mut prefix = MAGIC.len() + 2 + 2;
    // +1 for the terminating newline
    let mut total = (prefix + dict.len() + 1).next_multiple_of(HEADER_ALIGN);
    if total - prefix > u16::MAX as usize {
        version = 2;
        prefix += 2;
        total = (prefix + dict.len() + 1).next_multiple_of(HEADER_ALIGN);
    }
    let header_len = total - prefix;

    writer.write_all(MAGIC)?;
    writer.write_all(&[version, 0])?;
    if version == 1 {
        writer.write_all(&(header_len as u16).to_le_bytes())?;
    } else {
        writer.write_all(&(header_len as u32).to_le_bytes())?;
    }
    writer.write_all(dict.as_bytes())?;
    let padding = header_len - dict.len() - 1;
    writer.write_all(&vec![b' '; padding])?;
    writer.write_all(b"\n")?;
    for v in data {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

#[derive(Debug)]
struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

#[derive(Debug)]
enum Literal {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

impl HeaderDict {
    fn parse(text: &str) -> Result<Self> {
        let mut parser = LiteralParser {
            src: text.trim_end().as_bytes(),
            pos: 0,
        };
        let entries = parser.dict()?;
        let mut descr = None;
        let mut fortran_order = None;
        let mut shape = None;
        for (key, value) in entries {
            match (key.as_str(), value) {
                ("descr", Literal::Str(s)) => descr = Some(s),
                ("fortran_order", Literal::Bool(b)) => fortran_order = Some(b),
                ("shape", Literal::Tuple(t)) => shape = Some(t),
                (k, v) => return Err(Error::MalformedHeader(format!("unexpected entry {k:?}: {v:?}"))),
            }
        }
        Ok(HeaderDict {
            descr: descr.ok_or_else(|| Error::MalformedHeader("missing 'descr'".into()))?,
            fortran_order: fortran_order.ok_or_else(|| Error::MalformedHeader("missing 'fortran_order'".into()))?,
            shape: shape.ok_or_else(|| Error::MalformedHeader("missing 'shape'".into()))?,
        })
    }
}

/// Just enough of a Python literal parser for npy header dicts.
struct LiteralParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl LiteralParser<'_> {
    fn err(&self, what: &str) -> Error {
        Error::MalformedHeader(format!("{what} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, byte: u8) -> Result<()> {
        if self.peek() == Some(byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", byte as char)))
        }
    }

    fn dict(&mut self) -> Result<Vec<(String, Literal)>> {
        self.expect(b'{')?;
        let mut entries = Vec::new();
        loop {
            if self.peek() == Some(b'}') {
                self.pos += 1;
                break;
            }
            let key = self.string()?;
            self.expect(b':')?;
            let value = self.value()?;
            entries.push((key, value));
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {}
                _ => return Err(self.err("expected ',' or '}'")),
            }
        }
        if self.peek().is_some() {
            return Err(self.err("trailing characters"));
        }
        Ok(entries)
    }

    fn value(&mut self) -> Result<Literal> {
        match self.peek() {
            Some(b'\'') | Some(b'"') => self.string().map(Literal::Str),
            Some(b'(') => self.tuple().map(Literal::Tuple),
            Some(b'T') | Some(b'F') => {
                let rest = &self.src[self.pos..];
                if rest.starts_with(b"True") {
                    self.pos += 4;
                    Ok(Literal::Bool(true))
                } else if rest.starts_with(b"False") {
                    self.pos += 5;
                    Ok(Literal::Bool(false))
                } else {
                    Err(self.err("bad literal"))
                }
            }
            _ => Err(self.err("unsupported value")),
        }
    }

    fn string(&mut self) -> Result<String> {
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return Err(self.err("expected string")),
        };
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos >= self.src.len() {
            return Err(self.err("unterminated string"));
        }
        let s = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(s)
    }

    fn tuple(&mut self) -> Result<Vec<usize>> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            match self.peek() {
                Some(b')') => {
                    self.pos += 1;
                    return Ok(dims);
                }
                Some(c) if c.is_ascii_digit() => {
                    let start = self.pos;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                    let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    // numpy < 2 may write long suffixes, e.g. `(3L, 4L)`
                    if self.src.get(self.pos) == Some(&b'L') {
                        self.pos += 1;
                    }
                    dims.push(text.parse().map_err(|_| self.err("dimension overflow"))?);
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {}
                        _ => return Err(self.err("expected ',' or ')'")),
                    }
                }
                _ => return Err(self.err("expected dimension")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(shape: &[usize], data: &[f64]) -> Vec<u8> {
        let mut out = Vec::new();
        write_npy_f64(&mut out, shape, data).unwrap();
        out
    }

    fn raw(version: u8, dict: &str, body: &[u8]) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&[version, 0]);
        let mut header = dict.to_string();
        header.push('\n');
        if version == 1 {
            out.extend_from_slice(&(header.len() as u16).to_le_bytes());
        } else {
            out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        }
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(body);
        out
    }

    #[test]
    fn header_is_aligned_and_matches_numpy_layout() {
        let bytes = encode(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + header_len) % 64, 0);
        let header = std::str::from_utf8(&bytes[10..10 + header_len]).unwrap();
        assert!(header.starts_with("{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }"));
        assert!(header.ends_with('\n'));
        assert_eq!(bytes.len(), 10 + header_len + 32);
    }

    #[test]
    fn decodes_what_it_encodes() {
        let arr = read_npy(&encode(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])).unwrap();
        assert_eq!(arr.shape, vec![2, 3]);
        assert_eq!(arr.dtype, Dtype::F8);
        assert_eq!(arr.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn widens_f4_and_reads_version_2() {
        let body: Vec<u8> = [1.5f32, -2.25].iter().flat_map(|v| v.to_le_bytes()).collect();
        let bytes = raw(2, "{'descr': '<f4', 'fortran_order': False, 'shape': (1, 2), }", &body);
        let arr = read_npy(&bytes).unwrap();
        assert_eq!(arr.dtype, Dtype::F4);
        assert_eq!(arr.data, vec![1.5, -2.25]);
    }

    #[test]
    fn one_dimensional_shape_parses() {
        let arr = read_npy(&encode(&[3], &[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(arr.shape, vec![3]);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let mut bytes = encode(&[1, 1], &[0.0]);
        bytes[1] = b'X';
        assert!(matches!(read_npy(&bytes), Err(Error::MalformedHeader(_))));

        let mut bytes = encode(&[1, 1], &[0.0]);
        bytes[6] = 3;
        assert!(matches!(read_npy(&bytes), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn rejects_other_dtypes() {
        for descr in [">f8", "<i4", "|u1", "<c16"] {
            let dict = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': (1, 1), }}");
            let bytes = raw(1, &dict, &[0u8; 16]);
            match read_npy(&bytes) {
                Err(Error::UnsupportedDtype(d)) => assert_eq!(d, descr),
                other => panic!("{descr}: {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_fortran_order() {
        let bytes = raw(
            1,
            "{'descr': '<f8', 'fortran_order': True, 'shape': (1, 1), }",
            &[0u8; 8],
        );
        assert!(matches!(read_npy(&bytes), Err(Error::FortranOrder)));
    }

    #[test]
    fn rejects_truncated_body() {
        let bytes = raw(
            1,
            "{'descr': '<f8', 'fortran_order': False, 'shape': (2, 2), }",
            &[0u8; 24],
        );
        assert!(matches!(
            read_npy(&bytes),
            Err(Error::TruncatedData {
                expected: 32,
                found: 24
            })
        ));
    }

    #[test]
    fn rejects_garbage_dict() {
        let bytes = raw(1, "{'descr': '<f8', 'shape': [1, 1]}", &[0u8; 8]);
        assert!(matches!(read_npy(&bytes), Err(Error::MalformedHeader(_))));
        let bytes = raw(1, "{'descr': '<f8', 'shape': (1, 1), }", &[0u8; 8]);
        assert!(matches!(read_npy(&bytes), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn accepts_python2_long_suffix() {
        let bytes = raw(
            1,
            "{'descr': '<f8', 'fortran_order': False, 'shape': (1L, 2L), }",
            &[0u8; 16],
        );
        assert_eq!(read_npy(&bytes).unwrap().shape, vec![1, 2]);
    }
}
