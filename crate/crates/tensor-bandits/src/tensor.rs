//! Dense order-N tensors stored row-major (last index fastest) and the
//! multilinear primitives built on them. Modes are 0-based throughout the
//! crate. All arithmetic is f64; elements are required to be finite.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("bad tensor shape {shape:?}")));
        }
        let count: usize = shape.iter().product();
        if data.len() != count {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {count} elements, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("tensor elements must be finite".into()));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let count: usize = shape.iter().product();
        DenseTensor {
            shape,
            data: vec![0.0; count],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Tensor order N.
    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row-major flat index of a multi-index.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut f = 0;
        for (i, (&ix, &d)) in idx.iter().zip(&self.shape).enumerate() {
            debug_assert!(ix < d, "index {ix} out of bounds for mode {i}");
            f = f * d + ix;
        }
        f
    }

    /// Multi-index of a row-major flat index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for n in (0..self.shape.len()).rev() {
            idx[n] = flat % self.shape[n];
            flat /= self.shape[n];
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let f = self.flat_index(idx);
        self.data[f] = v;
    }

    /// Sum of elementwise products. Both tensors must have the same shape.
    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "inner product shapes differ: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(Error::Shape("subtraction shapes differ".into()));
        }
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Mode-n product with a matrix `b` of shape (d', shape[n]): contracts
    /// index n of the tensor against the columns of `b`, replacing d_n by d'.
    pub fn mode_n_product(&self, b: &Matrix, n: usize) -> Result<DenseTensor> {
        if n >= self.shape.len() {
            return Err(Error::Invalid(format!(
                "mode {n} out of range for order {}",
                self.shape.len()
            )));
        }
        if b.cols != self.shape[n] {
            return Err(Error::Shape(format!(
                "mode-{n} product needs {} matrix columns, got {}",
                self.shape[n], b.cols
            )));
        }
        let d_n = self.shape[n];
        let d_new = b.rows;
        let inner_sz: usize = self.shape[n + 1..].iter().product();
        let outer_sz: usize = self.shape[..n].iter().product();
        let mut out_shape = self.shape.clone();
        out_shape[n] = d_new;
        let mut out = vec![0.0; outer_sz * d_new * inner_sz];
        for o in 0..outer_sz {
            let src_base = o * d_n * inner_sz;
            let dst_base = o * d_new * inner_sz;
            for i in 0..d_n {
                let src = &self.data[src_base + i * inner_sz..src_base + (i + 1) * inner_sz];
                for j in 0..d_new {
                    let w = b.get(j, i);
                    if w == 0.0 {
                        continue;
                    }
                    let dst = &mut out[dst_base + j * inner_sz..dst_base + (j + 1) * inner_sz];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        Ok(DenseTensor {
            shape: out_shape,
            data: out,
        })
    }

    /// Mode-n unfolding: shape (d_n, Π_{m≠n} d_m). Columns iterate over the
    /// remaining modes in their original order, first remaining mode slowest.
    pub fn matricize(&self, n: usize) -> Matrix {
        assert!(n < self.shape.len(), "mode out of range");
        let d_n = self.shape[n];
        let inner_sz: usize = self.shape[n + 1..].iter().product();
        let outer_sz: usize = self.shape[..n].iter().product();
        let cols = outer_sz * inner_sz;
        let mut m = Matrix::zeros(d_n, cols);
        for o in 0..outer_sz {
            for i in 0..d_n {
                for k in 0..inner_sz {
                    let v = self.data[(o * d_n + i) * inner_sz + k];
                    m.set(i, o * inner_sz + k, v);
                }
            }
        }
        m
    }

    /// Row-major flattening.
    pub fn vectorize(&self) -> Vec<f64> {
        self.data.clone()
    }

    /// Flattening reordered by a permutation of flat indices:
    /// `out[k] = data[perm[k]]`. Applying the same permutation to both
    /// arguments of an inner product leaves it unchanged.
    pub fn vectorize_perm(&self, perm: &[usize]) -> Result<Vec<f64>> {
        if perm.len() != self.data.len() {
            return Err(Error::Invalid(format!(
                "permutation length {} does not match element count {}",
                perm.len(),
                self.data.len()
            )));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::Invalid("not a permutation of flat indices".into()));
            }
            seen[p] = true;
        }
        Ok(perm.iter().map(|&p| self.data[p]).collect())
    }

    /// Serialize in the "TNSR 1" text format: a header line
    /// `TNSR 1 N d_1 ... d_N`, then one element per line in row-major order
    /// with round-trip precision.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        write!(s, "TNSR 1 {}", self.shape.len()).unwrap();
        for d in &self.shape {
            write!(s, " {d}").unwrap();
        }
        s.push('\n');
        for v in &self.data {
            // {:e} round-trips f64 exactly and stays compact for any scale.
            writeln!(s, "{v:e}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty tensor file".into()))?;
        let mut tok = header.split_whitespace();
        match (tok.next(), tok.next()) {
            (Some("TNSR"), Some("1")) => {}
            _ => return Err(Error::Parse("expected header `TNSR 1 N d_1 ... d_N`".into())),
        }
        let order: usize = tok
            .next()
            .ok_or_else(|| Error::Parse("missing tensor order".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad tensor order: {e}")))?;
        let mut shape = Vec::with_capacity(order);
        for _ in 0..order {
            let d: usize = tok
                .next()
                .ok_or_else(|| Error::Parse("missing dimension in header".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad dimension: {e}")))?;
            shape.push(d);
        }
        if tok.next().is_some() {
            return Err(Error::Parse("trailing tokens in header".into()));
        }
        let count: usize = shape.iter().product();
        let mut data = Vec::with_capacity(count);
        for line in lines {
            let v: f64 = line
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("bad element `{}`: {e}", line.trim())))?;
            data.push(v);
        }
        if data.len() != count {
            return Err(Error::Parse(format!(
                "expected {count} elements, found {}",
                data.len()
            )));
        }
        DenseTensor::new(shape, data)
    }
}
