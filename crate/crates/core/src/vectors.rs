//! Account-keyed embedding tables and their on-disk formats.
//!
//! Both formats start with an ASCII `<count> <dim>` line. Text rows are
//! `<id> <f1> ... <fd>`; binary rows are `<id> ` followed by `dim`
//! little-endian `f32` values and a newline.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::train::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmbeddingFormat {
    #[default]
    Text,
    Binary,
}

impl EmbeddingFormat {
    /// `.bin` files are binary, everything else text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => EmbeddingFormat::Binary,
            _ => EmbeddingFormat::Text,
        }
    }
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "txt" => Ok(EmbeddingFormat::Text),
            "binary" | "bin" => Ok(EmbeddingFormat::Binary),
            other => Err(Error::Config(format!("unknown embedding format {other:?}"))),
        }
    }
}

impl fmt::Display for EmbeddingFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingFormat::Text => "text",
            EmbeddingFormat::Binary => "binary",
        })
    }
}

/// Embedding vectors addressed by account id.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyedVectors {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Matrix<f32>,
}

impl KeyedVectors {
    pub fn new(ids: Vec<String>, vectors: Matrix<f32>) -> Result<Self> {
        if ids.len() != vectors.rows() {
            return Err(Error::InvalidArgument(format!(
                "{} ids for {} vectors",
                ids.len(),
                vectors.rows()
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate id {id:?}")));
            }
        }
        Ok(KeyedVectors { ids, index, vectors })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Row index of `id`, or an unknown-entity error naming it.
    pub fn lookup(&self, id: &str) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| Error::UnknownEntity(id.to_owned()))
    }

    pub fn vector(&self, idx: usize) -> &[f32] {
        self.vectors.row(idx)
    }

    pub fn get(&self, id: &str) -> Result<&[f32]> {
        Ok(self.vector(self.lookup(id)?))
    }

    pub fn matrix(&self) -> &Matrix<f32> {
        &self.vectors
    }

    /// A copy with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        let data = self.vectors.as_slice().iter().map(|x| x * factor).collect();
        KeyedVectors {
            ids: self.ids.clone(),
            index: self.index.clone(),
            vectors: Matrix::from_vec(self.vectors.rows(), self.vectors.dim(), data),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        match format {
            EmbeddingFormat::Text => self.write_text(&mut out),
            EmbeddingFormat::Binary => self.write_binary(&mut out),
        }
        .map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn load(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        match format {
            EmbeddingFormat::Text => Self::read_text(reader),
            EmbeddingFormat::Binary => Self::read_binary(reader),
        }
        .map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    fn check_ids_writable(&self) -> Result<()> {
        match self.ids.iter().find(|id| id.is_empty() || id.contains(char::is_whitespace)) {
            Some(bad) => Err(Error::InvalidArgument(format!(
                "id {bad:?} cannot be stored in a space-separated embedding file"
            ))),
            None => Ok(()),
        }
    }

    pub fn write_text<W: Write>(&self, out: &mut W) -> Result<()> {
        self.check_ids_writable()?;
        let io = |e| Error::io("<embeddings>", e);
        writeln!(out, "{} {}", self.len(), self.dim()).map_err(io)?;
        for (i, id) in self.ids.iter().enumerate() {
            write!(out, "{id}").map_err(io)?;
            for x in self.vector(i) {
                write!(out, " {x}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn write_binary<W: Write>(&self, out: &mut W) -> Result<()> {
        self.check_ids_writable()?;
        let io = |e| Error::io("<embeddings>", e);
        writeln!(out, "{} {}", self.len(), self.dim()).map_err(io)?;
        for (i, id) in self.ids.iter().enumerate() {
            out.write_all(id.as_bytes()).map_err(io)?;
            out.write_all(b" ").map_err(io)?;
            for x in self.vector(i) {
                out.write_all(&x.to_le_bytes()).map_err(io)?;
            }
            out.write_all(b"\n").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read_text<R: BufRead>(mut reader: R) -> Result<Self> {
        let (count, dim) = read_header(&mut reader)?;
        let mut ids = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        let mut line = String::new();
        let mut row = 0;
        loop {
            line.clear();
            let n = reader
                .read_line(&mut line)
                .map_err(|e| Error::io("<embeddings>", e))?;
            if n == 0 {
                break;
            }
            let trimmed = line.trim_end();
            if trimmed.is_empty() {
                continue;
            }
            if row == count {
                return Err(Error::Format(format!("more than the {count} vectors declared in the header")));
            }
            let mut fields = trimmed.split(' ');
            let id = fields.next().unwrap_or_default();
            let before = data.len();
            for field in fields {
                let x: f32 = field
                    .parse()
                    .map_err(|_| Error::Format(format!("vector {row}: bad component {field:?}")))?;
                data.push(x);
            }
            if data.len() - before != dim {
                return Err(Error::Format(format!(
                    "vector {row} ({id}) has {} components, header says {dim}",
                    data.len() - before
                )));
            }
            ids.push(id.to_owned());
            row += 1;
        }
        if row != count {
            return Err(Error::Format(format!("header declares {count} vectors, found {row}")));
        }
        KeyedVectors::new(ids, Matrix::from_vec(count, dim, data))
            .map_err(|e| Error::Format(e.to_string()))
    }

    pub fn read_binary<R: BufRead>(mut reader: R) -> Result<Self> {
        let (count, dim) = read_header(&mut reader)?;
        let mut ids = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        let mut id_buf = Vec::new();
        let mut bytes = vec![0u8; dim * 4];
        for row in 0..count {
            id_buf.clear();
            reader
                .read_until(b' ', &mut id_buf)
                .map_err(|e| Error::io("<embeddings>", e))?;
            // Tolerate the newline that terminates the previous row.
            while id_buf.first() == Some(&b'\n') {
                id_buf.remove(0);
            }
            if id_buf.pop() != Some(b' ') || id_buf.is_empty() {
                return Err(Error::Format(format!("truncated file at vector {row} of {count}")));
            }
            let id = String::from_utf8(id_buf.clone())
                .map_err(|_| Error::Format(format!("vector {row}: id is not UTF-8")))?;
            reader
                .read_exact(&mut bytes)
                .map_err(|_| Error::Format(format!("truncated file in vector {row} ({id})")))?;
            data.extend(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
            );
            ids.push(id);
        }
        let mut rest = Vec::new();
        reader
            .read_to_end(&mut rest)
            .map_err(|e| Error::io("<embeddings>", e))?;
        if rest.iter().any(|&b| b != b'\n') {
            return Err(Error::Format(format!("trailing data after the {count} declared vectors")));
        }
        KeyedVectors::new(ids, Matrix::from_vec(count, dim, data))
            .map_err(|e| Error::Format(e.to_string()))
    }
}

fn read_header<R: BufRead>(reader: &mut R) -> Result<(usize, usize)> {
    let mut header = String::new();
    reader
        .read_line(&mut header)
        .map_err(|e| Error::io("<embeddings>", e))?;
    let mut parts = header.split_whitespace();
    match (
        parts.next().and_then(|p| p.parse().ok()),
        parts.next().and_then(|p| p.parse().ok()),
        parts.next(),
    ) {
        (Some(count), Some(dim), None) => Ok((count, dim)),
        _ => Err(Error::Format(format!("bad header {:?}", header.trim_end()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> KeyedVectors {
        let data = vec![0.1f32, -2.5, 1e-7, 3.25, 0.333_333_34, -0.0];
        KeyedVectors::new(vec!["a".into(), "b".into()], Matrix::from_vec(2, 3, data)).unwrap()
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let kv = sample();
        let mut buf = Vec::new();
        kv.write_binary(&mut buf).unwrap();
        let back = KeyedVectors::read_binary(buf.as_slice()).unwrap();
        let bits = |k: &KeyedVectors| k.matrix().as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&kv));
        assert_eq!(back.ids(), kv.ids());
    }

    #[test]
    fn text_round_trip_within_precision() {
        let kv = sample();
        let mut buf = Vec::new();
        kv.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("2 3\na "));
        let back = KeyedVectors::read_text(buf.as_slice()).unwrap();
        for (x, y) in kv.matrix().as_slice().iter().zip(back.matrix().as_slice()) {
            assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn truncated_files_are_format_errors() {
        let kv = sample();
        let mut buf = Vec::new();
        kv.write_binary(&mut buf).unwrap();
        let cut = &buf[..buf.len() - 5];
        assert!(matches!(KeyedVectors::read_binary(cut), Err(Error::Format(_))));

        let text = "3 2\na 1 2\nb 3 4\n";
        assert!(matches!(KeyedVectors::read_text(text.as_bytes()), Err(Error::Format(_))));
        let text = "2 2\na 1 2\nb 3\n";
        assert!(matches!(KeyedVectors::read_text(text.as_bytes()), Err(Error::Format(_))));
        assert!(matches!(KeyedVectors::read_text("".as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn ids_with_spaces_are_rejected() {
        let kv = KeyedVectors::new(vec!["a b".into()], Matrix::zeros(1, 1)).unwrap();
        assert!(kv.write_text(&mut Vec::new()).is_err());
    }
}
