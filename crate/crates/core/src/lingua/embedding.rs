use std::collections::HashMap;
use std::io::BufRead;

use super::LinguaError;
use crate::scalar::{from_usize, Real};

/// Word vectors sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    dimension: usize,
    vectors: HashMap<String, Vec<T>>,
}

impl<T: Real> EmbeddingTable<T> {
    pub fn new(dimension: usize) -> Result<Self, LinguaError> {
        if dimension == 0 {
            return Err(LinguaError::ZeroDimension);
        }
        Ok(Self { dimension, vectors: HashMap::new() })
    }

    pub fn from_pairs<I, S>(dimension: usize, pairs: I) -> Result<Self, LinguaError>
    where
        I: IntoIterator<Item = (S, Vec<T>)>,
        S: Into<String>,
    {
        let mut table = Self::new(dimension)?;
        for (token, vector) in pairs {
            table.insert(token, vector)?;
        }
        Ok(table)
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<T>) -> Result<(), LinguaError> {
        let token = token.into();
        if vector.len() != self.dimension {
            return Err(LinguaError::DimensionMismatch { token, expected: self.dimension, found: vector.len() });
        }
        self.vectors.insert(token, vector);
        Ok(())
    }

    /// Reads the whitespace-separated text format: one `token v1 ... vd`
    /// per line, with an optional leading `count dim` header line.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, LinguaError> {
        let mut table: Option<Self> = None;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| LinguaError::Io(e.to_string()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if idx == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                let dim: usize = fields[1].parse().expect("checked");
                table = Some(Self::new(dim)?);
                continue;
            }
            let values = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .and_then(T::from_f64)
                        .ok_or_else(|| LinguaError::Parse { line: line_no, message: format!("bad number {f:?}") })
                })
                .collect::<Result<Vec<T>, _>>()?;
            let table = match table.as_mut() {
                Some(t) => t,
                None => table.insert(Self::new(values.len())?),
            };
            table.insert(fields[0].to_lowercase(), values)?;
        }
        table.ok_or(LinguaError::Parse { line: 0, message: "empty embedding file".into() })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[T]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Unweighted mean of the vectors of in-vocabulary tokens; `None` when
    /// no token is in the vocabulary.
    pub fn document_vector<S: AsRef<str>>(&self, tokens: &[S]) -> Option<Vec<T>> {
        let mut sum = vec![T::zero(); self.dimension];
        let mut hits = 0usize;
        for v in tokens.iter().filter_map(|t| self.get(t.as_ref())) {
            for (acc, &x) in sum.iter_mut().zip(v) {
                *acc = *acc + x;
            }
            hits += 1;
        }
        if hits == 0 {
            return None;
        }
        let n = from_usize::<T>(hits);
        Some(sum.into_iter().map(|x| x / n).collect())
    }
}

/// Cosine similarity; `None` if either vector has zero norm.
pub fn cosine<T: Real>(a: &[T], b: &[T]) -> Option<T> {
    debug_assert_eq!(a.len(), b.len());
    let (mut dot, mut na, mut nb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    let denom = na.sqrt() * nb.sqrt();
    if denom > T::zero() {
        Some((dot / denom).max(-T::one()).min(T::one()))
    } else {
        None
    }
}
