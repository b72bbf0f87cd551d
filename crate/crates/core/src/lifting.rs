//! The lifted measurement operator.
//!
//! A tensor `W` lives in `C^mu (x) C^n` and is stored as a column-major
//! `mu x n` matrix: rows index the channel coordinate, columns index the
//! signal coordinate, so `vec(h (x) beta)` lists `beta_0 h, beta_1 h, ...`.
//! The operator maps `W` to `sum_col W[:, col] * Q[:, col]` (circular
//! convolution modulo `mu`), which equals `h * (Q beta)` on rank-one inputs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::error::{Error, Result};
use crate::signals::{Codebook, SparseSignal};
use crate::vector::{self, C64, ZERO};

/// Largest explicit matrix (in entries) that [`build_b`] will materialize.
pub const EXPLICIT_ENTRY_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedTensor {
    mu: usize,
    n: usize,
    data: Vec<C64>,
}

impl LiftedTensor {
    pub fn zeros(mu: usize, n: usize) -> Self {
        Self {
            mu,
            n,
            data: vec![ZERO; mu * n],
        }
    }

    /// Wraps column-major data, i.e. `vec(W)`.
    pub fn from_vec(mu: usize, n: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != mu * n {
            return Err(Error::Dimension {
                context: "lifted tensor data",
                expected: mu * n,
                got: data.len(),
            });
        }
        Ok(Self { mu, n, data })
    }

    /// `h (x) beta`, entry `(j, l) = h_j beta_l`.
    pub fn rank_one(h: &[C64], beta: &[C64]) -> Self {
        let (mu, n) = (h.len(), beta.len());
        let mut data = Vec::with_capacity(mu * n);
        for b in beta {
            data.extend(h.iter().map(|x| x * b));
        }
        Self { mu, n, data }
    }

    /// `h (x) beta` for a sparse `beta`.
    pub fn rank_one_sparse(h: &[C64], beta: &SparseSignal) -> Self {
        let mut t = Self::zeros(h.len(), beta.n());
        for (&col, &b) in beta.support().iter().zip(beta.values()) {
            for (row, x) in h.iter().enumerate() {
                t.data[row + col * t.mu] = x * b;
            }
        }
        t
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row + col * self.mu]
    }

    pub fn set(&mut self, row: usize, col: usize, v: C64) {
        self.data[row + col * self.mu] = v;
    }

    pub fn column(&self, col: usize) -> &[C64] {
        &self.data[col * self.mu..(col + 1) * self.mu]
    }

    pub fn column_mut(&mut self, col: usize) -> &mut [C64] {
        let mu = self.mu;
        &mut self.data[col * mu..(col + 1) * mu]
    }

    /// `vec(W)`: column-major stacking.
    pub fn as_vec(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        vector::norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        vector::all_finite(&self.data)
    }

    /// Positions `(row, col)` of nonzero entries, ordered by column then row.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for col in 0..self.n {
            for row in 0..self.mu {
                if self.get(row, col) != ZERO {
                    out.push((row, col));
                }
            }
        }
        out
    }

    pub fn nonzero_columns(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&c| self.column(c).iter().any(|v| *v != ZERO))
            .collect()
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if (self.mu, self.n) != (other.mu, other.n) {
            return Err(Error::Dimension {
                context: "lifted tensor shape",
                expected: self.mu * self.n,
                got: other.mu * other.n,
            });
        }
        Ok(())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: C64, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x + a * y).collect();
        Ok(Self {
            mu: self.mu,
            n: self.n,
            data,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_same_shape(other)?;
        Ok(vector::inner(&self.data, &other.data))
    }

    /// `||self - other|| / ||other||` (or the absolute error when `other` is zero).
    pub fn relative_error_to(&self, other: &Self) -> Result<f64> {
        let diff = self.sub(other)?.norm();
        let base = other.norm();
        Ok(if base == 0.0 { diff } else { diff / base })
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_column_slice(self.mu, self.n, &self.data)
    }
}

/// The lifted operator `C` defined by a codebook.
#[derive(Debug, Clone)]
pub struct MeasurementOp {
    codebook: Codebook,
    column_spectra: Vec<Vec<C64>>,
}

impl MeasurementOp {
    pub fn new(codebook: Codebook) -> Self {
        let column_spectra = (0..codebook.n())
            .map(|c| dft::forward(codebook.column(c)))
            .collect();
        Self {
            codebook,
            column_spectra,
        }
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn mu(&self) -> usize {
        self.codebook.mu()
    }

    pub fn n(&self) -> usize {
        self.codebook.n()
    }

    fn check_tensor(&self, w: &LiftedTensor) -> Result<()> {
        if (w.mu, w.n) != (self.mu(), self.n()) {
            return Err(Error::Dimension {
                context: "measurement operator input",
                expected: self.mu() * self.n(),
                got: w.mu * w.n,
            });
        }
        Ok(())
    }

    fn check_measurement(&self, y: &[C64]) -> Result<()> {
        if y.len() != self.mu() {
            return Err(Error::Dimension {
                context: "measurement vector",
                expected: self.mu(),
                got: y.len(),
            });
        }
        Ok(())
    }

    /// `C(W) = sum_col W[:, col] * Q[:, col]`.
    pub fn apply(&self, w: &LiftedTensor) -> Result<Vec<C64>> {
        self.check_tensor(w)?;
        let mu = self.mu();
        let mut acc = vec![ZERO; mu];
        let mut buf = vec![ZERO; mu];
        for col in 0..self.n() {
            let column = w.column(col);
            if column.iter().all(|v| *v == ZERO) {
                continue;
            }
            buf.copy_from_slice(column);
            dft::forward_in_place(&mut buf);
            for ((a, b), q) in acc.iter_mut().zip(&buf).zip(&self.column_spectra[col]) {
                *a += b * q;
            }
        }
        dft::inverse_in_place(&mut acc);
        Ok(acc)
    }

    /// `C*(y)`: column `col` is the circular cross-correlation of `y` with
    /// `Q[:, col]`, i.e. `(C* y)[j, col] = sum_i y_i conj(Q[(i - j) mod mu, col])`.
    pub fn apply_adjoint(&self, y: &[C64]) -> Result<LiftedTensor> {
        self.check_measurement(y)?;
        let mu = self.mu();
        let y_hat = dft::forward(y);
        let mut out = LiftedTensor::zeros(mu, self.n());
        if y.iter().all(|v| *v == ZERO) {
            return Ok(out);
        }
        for col in 0..self.n() {
            let dst = out.column_mut(col);
            for ((d, a), q) in dst.iter_mut().zip(&y_hat).zip(&self.column_spectra[col]) {
                *d = a * q.conj();
            }
            dft::inverse_in_place(dst);
        }
        Ok(out)
    }

    /// `C(e_row (x) e_col)`: the codebook column circularly shifted by `row`.
    pub fn atom(&self, row: usize, col: usize) -> Vec<C64> {
        let mu = self.mu();
        let q = self.codebook.column(col);
        (0..mu).map(|i| q[(i + mu - row) % mu]).collect()
    }

    /// Dense `mu x |support|` matrix of the operator restricted to `support`.
    pub fn restricted_matrix(&self, support: &[(usize, usize)]) -> DMatrix<C64> {
        let mu = self.mu();
        let mut m = DMatrix::zeros(mu, support.len());
        for (j, &(row, col)) in support.iter().enumerate() {
            let q = self.codebook.column(col);
            for i in 0..mu {
                m[(i, j)] = q[(i + mu - row) % mu];
            }
        }
        m
    }

    /// The full operator as an explicit `mu x (mu n)` matrix `B (Q (x) I_mu)`,
    /// acting on `vec(W)`. Only for small validation sizes.
    pub fn explicit_matrix(&self) -> Result<DMatrix<C64>> {
        let (mu, n) = (self.mu(), self.n());
        let b = build_b(mu, mu)?;
        guard_size(mu * mu * mu * n)?;
        // (Q (x) I_mu)[(k mu + i), (col mu + j)] = Q[k, col] * delta_ij
        let mut kron = DMatrix::<C64>::zeros(mu * mu, mu * n);
        for k in 0..mu {
            for col in 0..n {
                let q = self.codebook.entry(k, col);
                for i in 0..mu {
                    kron[(k * mu + i, col * mu + i)] = q;
                }
            }
        }
        Ok(b.map(|v| C64::new(v, 0.0)) * kron)
    }
}

fn guard_size(entries: usize) -> Result<()> {
    if entries > EXPLICIT_ENTRY_CAP {
        return Err(Error::StateSpaceTooLarge {
            size: entries as f64,
            limit: EXPLICIT_ENTRY_CAP as f64,
        });
    }
    Ok(())
}

/// The explicit 0/1 shift-sum matrix with `B[i, j mu + l] = 1` iff
/// `i == (j + l) mod mu`, of size `mu x (mu * blocks)`.
///
/// With `blocks == mu`, `B vec(h x^T) = h * x` for `h, x` in `C^mu`.
pub fn build_b(mu: usize, blocks: usize) -> Result<DMatrix<f64>> {
    if mu == 0 || blocks == 0 {
        return Err(Error::param("build_b needs positive dimensions"));
    }
    guard_size(mu * mu * blocks)?;
    let mut b = DMatrix::zeros(mu, mu * blocks);
    for j in 0..blocks {
        for l in 0..mu {
            b[((j + l) % mu, j * mu + l)] = 1.0;
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{circular_convolve, complex_normal, gen_channel, gen_codebook, gen_sparse_signal, ValueDist};
    use crate::vector::relative_difference;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(mu: usize, n: usize, r: &mut ChaCha8Rng) -> LiftedTensor {
        LiftedTensor::from_vec(mu, n, (0..mu * n).map(|_| complex_normal(r, 1.0)).collect()).unwrap()
    }

    fn random_op(mu: usize, n: usize, r: &mut ChaCha8Rng) -> MeasurementOp {
        MeasurementOp::new(gen_codebook(mu, n, r).unwrap())
    }

    #[test]
    fn rank_one_matches_direct_convolution() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let op = random_op(16, 32, &mut r);
        let h = gen_channel(16, 2, &mut r).unwrap();
        let beta = gen_sparse_signal(32, 3, ValueDist::ComplexNormal, &mut r).unwrap();
        let w = LiftedTensor::rank_one_sparse(&h.dense(), &beta);
        let qb = op.codebook().apply_sparse(&beta).unwrap();
        let direct = circular_convolve(&h.dense(), &qb).unwrap();
        assert!(relative_difference(&op.apply(&w).unwrap(), &direct) < 1e-11);
    }

    #[test]
    fn zero_in_zero_out() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let op = random_op(8, 10, &mut r);
        assert!(op.apply(&LiftedTensor::zeros(8, 10)).unwrap().iter().all(|v| *v == ZERO));
        assert!(op.apply_adjoint(&vec![ZERO; 8]).unwrap().as_vec().iter().all(|v| *v == ZERO));
    }

    #[test]
    fn identity_codebook_passes_beta_through() {
        let op = MeasurementOp::new(Codebook::identity(4, 4).unwrap());
        let beta: Vec<C64> = (0..4).map(|i| C64::new(i as f64 + 1.0, -(i as f64))).collect();
        let w = LiftedTensor::rank_one(&vector::unit(4, 0), &beta);
        assert!(relative_difference(&op.apply(&w).unwrap(), &beta) < 1e-14);
    }

    #[test]
    fn adjoint_identity_on_random_probes() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let op = random_op(12, 20, &mut r);
        for _ in 0..100 {
            let w = random_tensor(12, 20, &mut r);
            let y: Vec<C64> = (0..12).map(|_| complex_normal(&mut r, 1.0)).collect();
            let lhs = vector::inner(&op.apply(&w).unwrap(), &y);
            let rhs = w.inner(&op.apply_adjoint(&y).unwrap()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-11 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn adjoint_matches_explicit_transpose() {
        let op = MeasurementOp::new(Codebook::identity(2, 2).unwrap());
        let y = vector::unit(2, 0);
        let adj = op.apply_adjoint(&y).unwrap();
        let m = op.explicit_matrix().unwrap();
        let expected = m.adjoint() * DVector::from_column_slice(&y);
        assert!(relative_difference(adj.as_vec(), expected.as_slice()) < 1e-14);
    }

    #[test]
    fn b_first_block_is_identity() {
        let b = build_b(2, 2).unwrap();
        assert_eq!(b[(0, 0)], 1.0);
        assert_eq!(b[(1, 1)], 1.0);
        assert_eq!(b[(0, 1)], 0.0);
        assert_eq!(b[(1, 0)], 0.0);
    }

    #[test]
    fn b_wraps_modulo_mu() {
        let mu = 4;
        let b = build_b(mu, mu).unwrap();
        assert_eq!(b[(0, mu + (mu - 1))], 1.0);
        for col in 0..mu * mu {
            assert_eq!((0..mu).map(|i| b[(i, col)]).sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn b_size_guard() {
        assert!(matches!(build_b(1000, 1000), Err(Error::StateSpaceTooLarge { .. })));
    }

    #[test]
    fn explicit_matrix_agrees_with_fast_apply() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let op = random_op(4, 6, &mut r);
        let w = random_tensor(4, 6, &mut r);
        let m = op.explicit_matrix().unwrap();
        let slow = m * DVector::from_column_slice(w.as_vec());
        assert!(relative_difference(&op.apply(&w).unwrap(), slow.as_slice()) < 1e-12);
    }

    #[test]
    fn linearity() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let op = random_op(10, 14, &mut r);
        let w1 = random_tensor(10, 14, &mut r);
        let w2 = random_tensor(10, 14, &mut r);
        let (a, b) = (C64::new(0.3, -1.2), C64::new(-2.0, 0.5));
        let combo = w1.axpy(a, &w2.axpy(b - C64::new(1.0, 0.0), &w2).unwrap()).unwrap();
        // combo = w1 + a * b * w2
        let lhs = op.apply(&combo).unwrap();
        let y1 = op.apply(&w1).unwrap();
        let y2 = op.apply(&w2).unwrap();
        let rhs: Vec<C64> = y1.iter().zip(&y2).map(|(u, v)| u + a * b * v).collect();
        assert!(relative_difference(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn atoms_match_unit_tensors() {
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let op = random_op(5, 7, &mut r);
        let mut w = LiftedTensor::zeros(5, 7);
        w.set(3, 2, C64::new(1.0, 0.0));
        assert!(relative_difference(&op.apply(&w).unwrap(), &op.atom(3, 2)) < 1e-13);
        let m = op.restricted_matrix(&[(3, 2)]);
        assert!(relative_difference(m.column(0).as_slice(), &op.atom(3, 2)) < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let op = random_op(4, 6, &mut r);
        assert!(op.apply(&LiftedTensor::zeros(4, 5)).is_err());
        assert!(op.apply_adjoint(&[ZERO; 3]).is_err());
    }
}
