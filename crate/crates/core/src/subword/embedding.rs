use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;

use super::Vocab;
use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{PwiError, Result};

/// Half-width of the uniform range used for every randomized embedding row.
pub const INIT_RANGE: f64 = 0.05;

/// A `[rows × dim]` lookup matrix stored as a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EmbeddingTable {
    pub param: ParamId,
    pub rows: usize,
    pub dim: usize,
}

impl EmbeddingTable {
    pub fn random<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        rows: usize,
        dim: usize,
        trainable: bool,
        rng: &mut R,
    ) -> Result<Self> {
        Self::from_tensor(store, name, Tensor::uniform(&[rows, dim], INIT_RANGE, rng), trainable)
    }

    pub fn from_tensor(store: &mut ParamStore, name: &str, matrix: Tensor, trainable: bool) -> Result<Self> {
        if matrix.shape().len() != 2 {
            return Err(PwiError::invalid("embedding matrix must be 2-d"));
        }
        let (rows, dim) = (matrix.shape()[0], matrix.shape()[1]);
        let param = store.add(name, matrix, !trainable)?;
        Ok(EmbeddingTable { param, rows, dim })
    }

    /// `[ids.len() × dim]`; ids past the table map to UNK.
    pub fn lookup(&self, g: &mut Graph<'_>, ids: &[usize]) -> Result<Var> {
        let ids: Vec<usize> = ids
            .iter()
            .map(|&i| if i < self.rows { i } else { Vocab::UNK_ID })
            .collect();
        let table = g.param(self.param);
        g.gather_rows(table, &ids)
    }

    pub fn row<'a>(&self, store: &'a ParamStore, id: usize) -> &'a [f64] {
        store.value(self.param).row(id)
    }
}

/// Vectors read from a `word v1 … vd` text file. Row layout follows `vocab`;
/// the `<unk>`/`<pad>` rows are randomized.
#[derive(Clone, Debug)]
pub struct Pretrained {
    pub vocab: Vocab,
    pub vectors: Tensor,
    pub duplicates: usize,
}

impl Pretrained {
    pub fn dim(&self) -> usize {
        self.vectors.shape()[1]
    }

    /// Number of words from the file (specials excluded).
    pub fn word_count(&self) -> usize {
        self.vocab.len() - 2
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        match self.vocab.get(word) {
            Some(id) if id >= 2 => Some(self.vectors.row(id)),
            _ => None,
        }
    }

    /// A `[vocab.len() × dim]` matrix for `vocab`: in-vocabulary rows copy the
    /// file vector, all others are drawn from `[-0.05, 0.05]`. Returns the
    /// matrix and the number of copied rows.
    pub fn table_for<R: Rng>(&self, vocab: &Vocab, rng: &mut R) -> (Tensor, usize) {
        let mut m = Tensor::uniform(&[vocab.len(), self.dim()], INIT_RANGE, rng);
        let mut inv = 0;
        for (id, word) in vocab.tokens().iter().enumerate().skip(2) {
            if let Some(v) = self.vector(word) {
                m.row_mut(id).copy_from_slice(v);
                inv += 1;
            }
        }
        (m, inv)
    }
}

pub fn load_pretrained<R: Rng>(path: &Path, rng: &mut R) -> Result<Pretrained> {
    let f = File::open(path).map_err(|e| PwiError::io(path, e))?;
    parse_pretrained(BufReader::new(f), path, rng)
}

/// Parses the pretrained text format. The first non-blank line fixes the
/// dimensionality; a duplicate word keeps its first vector.
pub fn parse_pretrained<B: BufRead, R: Rng>(reader: B, path: &Path, rng: &mut R) -> Result<Pretrained> {
    let mut vocab = Vocab::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut dim: Option<usize> = None;
    let mut duplicates = 0;
    let mut first_line: HashMap<usize, usize> = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| PwiError::io(path, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let word = parts.next().unwrap_or_default();
        let values: std::result::Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let values = values.map_err(|e| PwiError::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: format!("bad number: {e}"),
        })?;
        let d = *dim.get_or_insert(values.len());
        if values.is_empty() || values.len() != d {
            return Err(PwiError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("expected {d} values, found {}", values.len()),
            });
        }
        if word.is_empty() {
            return Err(PwiError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: "missing word".into(),
            });
        }
        if let Some(id) = vocab.get(word) {
            duplicates += 1;
            log::warn!(
                "{}:{lineno}: duplicate word `{word}` (first seen on line {}); keeping the first vector",
                path.display(),
                first_line.get(&id).copied().unwrap_or(0)
            );
            continue;
        }
        let id = vocab.insert(word);
        first_line.insert(id, lineno);
        rows.extend(values);
    }
    let dim = dim.ok_or_else(|| PwiError::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: "no vectors in file".into(),
    })?;
    let specials = Tensor::uniform(&[2, dim], INIT_RANGE, rng);
    let mut data = specials.into_data();
    data.extend(rows);
    let vectors = Tensor::new(vec![vocab.len(), dim], data)?;
    Ok(Pretrained {
        vocab,
        vectors,
        duplicates,
    })
}

/// Writes `word v1 … vd` lines, the same format [`load_pretrained`] reads.
pub fn write_vectors<'a, W: Write>(
    mut w: W,
    rows: impl IntoIterator<Item = (&'a str, &'a [f64])>,
) -> std::io::Result<()> {
    for (word, v) in rows {
        write!(w, "{word}")?;
        for x in v {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse(text: &str) -> Result<Pretrained> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        parse_pretrained(text.as_bytes(), Path::new("mem.txt"), &mut rng)
    }

    #[test]
    fn three_lines_dim_four() {
        let p = parse("a 1 2 3 4\nb 0 0 0 1\nc -1 -2 -3 -4\n").unwrap();
        assert_eq!(p.vectors.shape(), &[5, 4]);
        assert_eq!(p.vector("c").unwrap(), &[-1.0, -2.0, -3.0, -4.0]);
        assert_eq!(p.word_count(), 3);
    }

    #[test]
    fn ragged_line_reports_line_number() {
        let err = parse("a 1 2\nb 1 2 3\n").unwrap_err();
        match err {
            PwiError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_keeps_first() {
        let p = parse("a 1 1\na 2 2\n").unwrap();
        assert_eq!(p.duplicates, 1);
        assert_eq!(p.vector("a").unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn absent_words_get_small_uniform_vectors() {
        let p = parse("known 0.5 0.5 0.5\n").unwrap();
        let vocab = Vocab::from_counts(["known", "unknown", "other"], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (m, inv) = p.table_for(&vocab, &mut rng);
        assert_eq!(inv, 1);
        assert_eq!(m.row(vocab.id("known")), &[0.5, 0.5, 0.5]);
        for w in ["unknown", "other"] {
            assert!(m.row(vocab.id(w)).iter().all(|v| v.abs() <= INIT_RANGE));
        }
    }

    #[test]
    fn write_then_read_round_trip() {
        let mut buf = Vec::new();
        let v1 = [0.25, -1.5];
        write_vectors(&mut buf, [("x", &v1[..])]).unwrap();
        let p = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(p.vector("x").unwrap(), &v1);
    }
}
