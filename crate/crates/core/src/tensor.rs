//! Dense tensors and CP models.
//!
//! Every tensor in the crate uses the same linearization: the last index
//! varies fastest (row-major over the dimension list). Unfoldings, Khatri-Rao
//! products and the `.net` data order all follow this rule, so
//!
//! ```text
//! unfold(reconstruct(M), m) = A_m · diag(w) · khatri_rao(A_0, .., A_{m-1}, A_{m+1}, .., A_{k-1})ᵀ
//! ```
//!
//! holds with the remaining factors taken in increasing mode order.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense order-k array of `f64` with row-major layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr")]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct TensorRepr {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<TensorRepr> for Tensor {
    type Error = Error;

    fn try_from(repr: TensorRepr) -> Result<Self> {
        Tensor::from_flat(repr.dims, repr.data)
    }
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::structural("tensor order must be at least 1"));
    }
    if let Some(pos) = dims.iter().position(|&d| d == 0) {
        return Err(Error::structural(format!("dimension {pos} is zero")));
    }
    Ok(dims.iter().product())
}

impl Tensor {
    pub fn from_flat(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected = check_dims(&dims)?;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = check_dims(&dims)?;
        Ok(Tensor {
            dims,
            data: vec![0.0; len],
        })
    }

    /// Outer product `v_1 ⊗ … ⊗ v_k`.
    pub fn rank_one<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::structural("rank-one tensor needs at least one vector"));
        }
        let dims: Vec<usize> = vectors.iter().map(|v| v.as_ref().len()).collect();
        let mut out = Tensor::zeros(dims)?;
        let mut odo = Odometer::new(&out.dims);
        for value in out.data.iter_mut() {
            *value = odo
                .index()
                .iter()
                .zip(vectors)
                .map(|(&i, v)| v.as_ref()[i])
                .product();
            odo.advance();
        }
        Ok(out)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        strides(&self.dims)
    }

    pub fn linear_index(&self, index: &[usize]) -> Option<usize> {
        if index.len() != self.dims.len() {
            return None;
        }
        let mut lin = 0;
        for (&i, &d) in index.iter().zip(&self.dims) {
            if i >= d {
                return None;
            }
            lin = lin * d + i;
        }
        Some(lin)
    }

    pub fn get(&self, index: &[usize]) -> Option<f64> {
        self.linear_index(index).map(|lin| self.data[lin])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn check_same_dims(&self, other: &Tensor) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::structural(format!(
                "dimension mismatch: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// `max |a − b|` over all entries.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn frobenius_dist(&self, other: &Tensor) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Mode-`mode` matricization: `n_mode × ∏_{j≠mode} n_j`, the remaining
    /// modes linearized row-major in increasing mode order.
    pub fn unfold(&self, mode: usize) -> Result<DMatrix<f64>> {
        let (outer, n, inner) = self.split_at_mode(mode)?;
        let cols = outer * inner;
        let mut m = DMatrix::zeros(n, cols);
        for o in 0..outer {
            for i in 0..n {
                let src = &self.data[(o * n + i) * inner..(o * n + i + 1) * inner];
                for (c, &v) in src.iter().enumerate() {
                    m[(i, o * inner + c)] = v;
                }
            }
        }
        Ok(m)
    }

    /// Inverse of [`Tensor::unfold`].
    pub fn fold(matrix: &DMatrix<f64>, mode: usize, dims: &[usize]) -> Result<Tensor> {
        let mut out = Tensor::zeros(dims.to_vec())?;
        let (outer, n, inner) = out.split_at_mode(mode)?;
        if matrix.nrows() != n || matrix.ncols() != outer * inner {
            return Err(Error::structural(format!(
                "cannot fold a {}x{} matrix into dims {:?} along mode {mode}",
                matrix.nrows(),
                matrix.ncols(),
                dims
            )));
        }
        for o in 0..outer {
            for i in 0..n {
                for c in 0..inner {
                    out.data[(o * n + i) * inner + c] = matrix[(i, o * inner + c)];
                }
            }
        }
        Ok(out)
    }

    fn split_at_mode(&self, mode: usize) -> Result<(usize, usize, usize)> {
        if mode >= self.order() {
            return Err(Error::structural(format!(
                "mode {mode} out of range for order {}",
                self.order()
            )));
        }
        let outer = self.dims[..mode].iter().product();
        let inner = self.dims[mode + 1..].iter().product();
        Ok((outer, self.dims[mode], inner))
    }

    /// Sum over one mode, dropping it. Summing an order-1 tensor yields a
    /// single-entry tensor of dims `[1]`.
    pub fn sum_mode(&self, mode: usize) -> Result<Tensor> {
        let (outer, n, inner) = self.split_at_mode(mode)?;
        let mut dims: Vec<usize> = self.dims.clone();
        dims.remove(mode);
        if dims.is_empty() {
            dims.push(1);
        }
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for i in 0..n {
                for c in 0..inner {
                    data[o * inner + c] += self.data[(o * n + i) * inner + c];
                }
            }
        }
        Tensor::from_flat(dims, data)
    }

    /// Drop modes of size one. Returns the squeezed tensor and the removed
    /// mode positions. At least one mode is always kept.
    pub fn squeeze(&self) -> (Tensor, Vec<usize>) {
        let removed: Vec<usize> = (0..self.order()).filter(|&j| self.dims[j] == 1).collect();
        let mut dims: Vec<usize> = self.dims.iter().copied().filter(|&d| d != 1).collect();
        if dims.is_empty() {
            dims.push(1);
            let removed = removed[..removed.len() - 1].to_vec();
            return (
                Tensor {
                    dims,
                    data: self.data.clone(),
                },
                removed,
            );
        }
        (
            Tensor {
                dims,
                data: self.data.clone(),
            },
            removed,
        )
    }
}

impl std::ops::Index<&[usize]> for Tensor {
    type Output = f64;

    fn index(&self, index: &[usize]) -> &f64 {
        let lin = self
            .linear_index(index)
            .unwrap_or_else(|| panic!("index {index:?} out of bounds for dims {:?}", self.dims));
        &self.data[lin]
    }
}

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for j in (0..dims.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * dims[j + 1];
    }
    s
}

/// Row-major multi-index counter.
#[derive(Debug, Clone)]
pub struct Odometer<'a> {
    dims: &'a [usize],
    index: Vec<usize>,
}

impl<'a> Odometer<'a> {
    pub fn new(dims: &'a [usize]) -> Self {
        Odometer {
            dims,
            index: vec![0; dims.len()],
        }
    }

    pub fn index(&self) -> &[usize] {
        &self.index
    }

    /// Step to the next index; wraps to all zeros after the last one.
    pub fn advance(&mut self) {
        for j in (0..self.dims.len()).rev() {
            self.index[j] += 1;
            if self.index[j] < self.dims[j] {
                return;
            }
            self.index[j] = 0;
        }
    }
}

/// Column-wise Kronecker product. Row index of the output is the row-major
/// linearization of the input row indices, first matrix slowest.
pub fn khatri_rao(matrices: &[&DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let (first, rest) = matrices
        .split_first()
        .ok_or_else(|| Error::structural("Khatri-Rao product of an empty list"))?;
    let r = first.ncols();
    if let Some(bad) = rest.iter().find(|m| m.ncols() != r) {
        return Err(Error::structural(format!(
            "Khatri-Rao column mismatch: {} vs {}",
            r,
            bad.ncols()
        )));
    }
    let mut acc = (*first).clone();
    for m in rest {
        let rows = acc.nrows() * m.nrows();
        let mut next = DMatrix::zeros(rows, r);
        for t in 0..r {
            for a in 0..acc.nrows() {
                for b in 0..m.nrows() {
                    next[(a * m.nrows() + b, t)] = acc[(a, t)] * m[(b, t)];
                }
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// A sum of `rank` weighted rank-one terms. Factor `j` is an `n_j × rank`
/// matrix whose column `t` is the mode-`j` vector of term `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpModel {
    dims: Vec<usize>,
    factors: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
}

impl CpModel {
    pub fn new(factors: Vec<DMatrix<f64>>, weights: Vec<f64>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::structural("CP model needs at least one factor"))?;
        let rank = first.ncols();
        if rank == 0 {
            return Err(Error::structural("CP rank must be at least 1"));
        }
        for (j, f) in factors.iter().enumerate() {
            if f.ncols() != rank {
                return Err(Error::structural(format!(
                    "factor {j} has {} columns, expected {rank}",
                    f.ncols()
                )));
            }
            if f.nrows() == 0 {
                return Err(Error::structural(format!("factor {j} has no rows")));
            }
        }
        if weights.len() != rank {
            return Err(Error::structural(format!(
                "{} weights for rank {rank}",
                weights.len()
            )));
        }
        let dims = factors.iter().map(|f| f.nrows()).collect();
        Ok(CpModel {
            dims,
            factors,
            weights,
        })
    }

    /// Model with unit weights.
    pub fn from_factors(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        let rank = factors.first().map_or(0, |f| f.ncols());
        Self::new(factors, vec![1.0; rank])
    }

    pub fn zeros(dims: &[usize], rank: usize) -> Result<Self> {
        check_dims(dims)?;
        Self::from_factors(dims.iter().map(|&n| DMatrix::zeros(n, rank)).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn factor(&self, mode: usize) -> &DMatrix<f64> {
        &self.factors[mode]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The `k` vectors of term `t`.
    pub fn term_vectors(&self, t: usize) -> Vec<Vec<f64>> {
        self.factors
            .iter()
            .map(|f| f.column(t).iter().copied().collect())
            .collect()
    }

    pub fn reconstruct(&self) -> Tensor {
        let len: usize = self.dims.iter().product();
        let mut data = vec![0.0; len];
        let mut odo = Odometer::new(&self.dims);
        for value in data.iter_mut() {
            let idx = odo.index();
            let mut sum = 0.0;
            for (t, &w) in self.weights.iter().enumerate() {
                let mut p = w;
                for (f, &i) in self.factors.iter().zip(idx) {
                    p *= f[(i, t)];
                }
                sum += p;
            }
            *value = sum;
            odo.advance();
        }
        Tensor {
            dims: self.dims.clone(),
            data,
        }
    }

    /// Same tensor with weights folded into the first factor.
    pub fn with_weights_absorbed(&self) -> CpModel {
        let mut factors = self.factors.clone();
        for (t, &w) in self.weights.iter().enumerate() {
            factors[0].column_mut(t).scale_mut(w);
        }
        CpModel {
            dims: self.dims.clone(),
            factors,
            weights: vec![1.0; self.rank()],
        }
    }

    /// Same tensor with unit-norm factor columns; column norms move into the
    /// weights. Terms with a zero column get weight 0 and are left as is.
    pub fn normalized(&self) -> CpModel {
        let mut factors = self.factors.clone();
        let mut weights = self.weights.clone();
        for t in 0..self.rank() {
            let norms: Vec<f64> = factors.iter().map(|f| f.column(t).norm()).collect();
            if norms.contains(&0.0) {
                weights[t] = 0.0;
                continue;
            }
            for (f, n) in factors.iter_mut().zip(&norms) {
                f.column_mut(t).unscale_mut(*n);
            }
            weights[t] *= norms.iter().product::<f64>();
        }
        CpModel {
            dims: self.dims.clone(),
            factors,
            weights,
        }
    }

    /// Model with one more term appended.
    pub fn with_term(&self, vectors: &[Vec<f64>], weight: f64) -> Result<CpModel> {
        if vectors.len() != self.order() {
            return Err(Error::structural(format!(
                "{} vectors for an order-{} model",
                vectors.len(),
                self.order()
            )));
        }
        let r = self.rank();
        let mut factors = Vec::with_capacity(self.order());
        for (f, v) in self.factors.iter().zip(vectors) {
            if v.len() != f.nrows() {
                return Err(Error::structural("term vector length differs from factor rows"));
            }
            let mut g = f.clone().resize_horizontally(r + 1, 0.0);
            for (i, &x) in v.iter().enumerate() {
                g[(i, r)] = x;
            }
            factors.push(g);
        }
        let mut weights = self.weights.clone();
        weights.push(weight);
        CpModel::new(factors, weights)
    }
}

#[derive(Serialize, Deserialize)]
struct CpModelRepr {
    dims: Vec<usize>,
    rank: usize,
    weights: Vec<f64>,
    /// One row-major `n_j × rank` matrix per mode.
    factors: Vec<Vec<f64>>,
}

impl Serialize for CpModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let factors = self
            .factors
            .iter()
            .map(|f| f.transpose().as_slice().to_vec())
            .collect();
        CpModelRepr {
            dims: self.dims.clone(),
            rank: self.rank(),
            weights: self.weights.clone(),
            factors,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CpModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = CpModelRepr::deserialize(d)?;
        if repr.factors.len() != repr.dims.len() {
            return Err(D::Error::custom("factor count differs from order"));
        }
        let mut factors = Vec::with_capacity(repr.dims.len());
        for (&n, flat) in repr.dims.iter().zip(&repr.factors) {
            if flat.len() != n * repr.rank {
                return Err(D::Error::custom(format!(
                    "factor has {} entries, expected {}",
                    flat.len(),
                    n * repr.rank
                )));
            }
            factors.push(DMatrix::from_row_slice(n, repr.rank, flat));
        }
        CpModel::new(factors, repr.weights).map_err(D::Error::custom)
    }
}
