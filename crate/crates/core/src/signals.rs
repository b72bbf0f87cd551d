//! Random objects of the signal model: sparse signals, multipath channels,
//! codebooks, additive noise, and the circular convolution primitive.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dft;
use crate::error::{Error, Result};
use crate::vector::{self, C64, ZERO};

/// Distribution of the nonzero values of a sparse signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValueDist {
    /// Real values uniform on `(0, 1]`.
    Uniform,
    /// Circularly-symmetric complex normal with `E|z|^2 = 1`.
    #[default]
    ComplexNormal,
}

/// Draw from `CN(0, variance)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

fn draw_value<R: Rng + ?Sized>(dist: ValueDist, rng: &mut R) -> C64 {
    loop {
        let v = match dist {
            // 1 - [0, 1) = (0, 1]
            ValueDist::Uniform => C64::new(1.0 - rng.random::<f64>(), 0.0),
            ValueDist::ComplexNormal => complex_normal(rng, 1.0),
        };
        if v != ZERO {
            return v;
        }
    }
}

fn sorted_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut support = index::sample(rng, n, k).into_vec();
    support.sort_unstable();
    support
}

/// A `k`-sparse vector in `C^n` with explicit support and nonzero values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    n: usize,
    support: Vec<usize>,
    values: Vec<C64>,
}

impl SparseSignal {
    /// Builds a signal, sorting the support. Rejects duplicate or
    /// out-of-range indices and zero values.
    pub fn new(n: usize, support: Vec<usize>, values: Vec<C64>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::Dimension {
                context: "sparse signal values",
                expected: support.len(),
                got: values.len(),
            });
        }
        let mut pairs: Vec<(usize, C64)> = support.into_iter().zip(values).collect();
        pairs.sort_by_key(|p| p.0);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::param(format!("duplicate support index {}", w[0].0)));
            }
        }
        if let Some(&(i, _)) = pairs.iter().find(|p| p.0 >= n) {
            return Err(Error::param(format!("support index {i} outside [0, {n})")));
        }
        if pairs.iter().any(|p| p.1 == ZERO) {
            return Err(Error::param("sparse signal values must be nonzero"));
        }
        let (support, values) = pairs.into_iter().unzip();
        Ok(Self { n, support, values })
    }

    /// The all-zero signal (sparsity 0).
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            support: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn dense(&self) -> Vec<C64> {
        let mut x = vec![ZERO; self.n];
        for (&i, &v) in self.support.iter().zip(&self.values) {
            x[i] = v;
        }
        x
    }

    /// Returns a copy with every value multiplied by `factor` (nonzero).
    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            n: self.n,
            support: self.support.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Draws a `k`-sparse signal with uniformly random support.
pub fn gen_sparse_signal<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    dist: ValueDist,
    rng: &mut R,
) -> Result<SparseSignal> {
    if k == 0 || k > n {
        return Err(Error::param(format!("sparsity k={k} must satisfy 0 < k <= n={n}")));
    }
    let support = sorted_subset(rng, n, k);
    let values = (0..k).map(|_| draw_value(dist, rng)).collect();
    Ok(SparseSignal { n, support, values })
}

/// An `s`-path multipath impulse response in `C^mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    mu: usize,
    support: Vec<usize>,
    gains: Vec<C64>,
}

impl Channel {
    pub fn new(mu: usize, support: Vec<usize>, gains: Vec<C64>) -> Result<Self> {
        let sig = SparseSignal::new(mu, support, gains)?;
        Ok(Self {
            mu,
            support: sig.support,
            gains: sig.values,
        })
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn s(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn gains(&self) -> &[C64] {
        &self.gains
    }

    pub fn dense(&self) -> Vec<C64> {
        let mut h = vec![ZERO; self.mu];
        for (&i, &g) in self.support.iter().zip(&self.gains) {
            h[i] = g;
        }
        h
    }
}

/// Draws an `s`-sparse channel with `CN(0, 1)` gains at distinct uniform
/// positions.
pub fn gen_channel<R: Rng + ?Sized>(mu: usize, s: usize, rng: &mut R) -> Result<Channel> {
    if s == 0 || s > mu {
        return Err(Error::param(format!("channel sparsity s={s} must satisfy 0 < s <= mu={mu}")));
    }
    let support = sorted_subset(rng, mu, s);
    let gains = (0..s)
        .map(|_| draw_value(ValueDist::ComplexNormal, rng))
        .collect();
    Ok(Channel { mu, support, gains })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CodebookKind {
    #[default]
    Complex,
    Real,
}

/// Public `mu x n` coding matrix, stored column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    mu: usize,
    n: usize,
    entries: Vec<C64>,
}

impl Codebook {
    /// Wraps explicit column-major entries.
    pub fn from_columns(mu: usize, n: usize, entries: Vec<C64>) -> Result<Self> {
        if mu == 0 || mu > n {
            return Err(Error::param(format!("codebook needs 0 < mu <= n, got mu={mu}, n={n}")));
        }
        if entries.len() != mu * n {
            return Err(Error::Dimension {
                context: "codebook entries",
                expected: mu * n,
                got: entries.len(),
            });
        }
        if !vector::all_finite(&entries) {
            return Err(Error::param("codebook entries must be finite"));
        }
        Ok(Self { mu, n, entries })
    }

    /// `Q = [I_mu | 0]`, handy for hand-checkable cases.
    pub fn identity(mu: usize, n: usize) -> Result<Self> {
        let mut entries = vec![ZERO; mu * n];
        for i in 0..mu {
            entries[i + i * mu] = C64::new(1.0, 0.0);
        }
        Self::from_columns(mu, n, entries)
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.entries[row + col * self.mu]
    }

    pub fn column(&self, col: usize) -> &[C64] {
        &self.entries[col * self.mu..(col + 1) * self.mu]
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    /// `Q x` for a dense `x` of length `n`.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                context: "codebook input",
                expected: self.n,
                got: x.len(),
            });
        }
        let mut out = vec![ZERO; self.mu];
        for (col, &xc) in x.iter().enumerate() {
            if xc == ZERO {
                continue;
            }
            for (o, q) in out.iter_mut().zip(self.column(col)) {
                *o += q * xc;
            }
        }
        Ok(out)
    }

    /// `Q beta` exploiting sparsity.
    pub fn apply_sparse(&self, beta: &SparseSignal) -> Result<Vec<C64>> {
        if beta.n() != self.n {
            return Err(Error::Dimension {
                context: "codebook input",
                expected: self.n,
                got: beta.n(),
            });
        }
        let mut out = vec![ZERO; self.mu];
        for (&col, &v) in beta.support().iter().zip(beta.values()) {
            for (o, q) in out.iter_mut().zip(self.column(col)) {
                *o += q * v;
            }
        }
        Ok(out)
    }
}

/// Draws a complex Gaussian codebook with per-entry variance `1/mu`.
pub fn gen_codebook<R: Rng + ?Sized>(mu: usize, n: usize, rng: &mut R) -> Result<Codebook> {
    gen_codebook_with(mu, n, CodebookKind::Complex, rng)
}

pub fn gen_codebook_with<R: Rng + ?Sized>(
    mu: usize,
    n: usize,
    kind: CodebookKind,
    rng: &mut R,
) -> Result<Codebook> {
    if mu == 0 || mu > n {
        return Err(Error::param(format!("codebook needs 0 < mu <= n, got mu={mu}, n={n}")));
    }
    let var = 1.0 / mu as f64;
    let entries = (0..mu * n)
        .map(|_| match kind {
            CodebookKind::Complex => complex_normal(rng, var),
            CodebookKind::Real => {
                let z: f64 = StandardNormal.sample(rng);
                C64::new(z * var.sqrt(), 0.0)
            }
        })
        .collect();
    Ok(Codebook { mu, n, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Receiver noise `sigma^2`.
    Measurement,
    /// Eavesdropper channel deviation `varsigma^2`.
    ChannelDeviation,
}

/// Noise level in dB relative to the realized signal power. `+inf` is noiseless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub kind: NoiseKind,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, kind: NoiseKind) -> Result<Self> {
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(Error::param(format!("snr_db must be finite or +inf, got {snr_db}")));
        }
        Ok(Self { snr_db, kind })
    }

    pub fn noiseless(kind: NoiseKind) -> Self {
        Self {
            snr_db: f64::INFINITY,
            kind,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }
}

/// Circular convolution `(a * b)_i = sum_j a_j b_{(i - j) mod N}` via FFT.
pub fn circular_convolve(a: &[C64], b: &[C64]) -> Result<Vec<C64>> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            context: "circular convolution",
            expected: a.len(),
            got: b.len(),
        });
    }
    let fa = dft::forward(a);
    let mut fb = dft::forward(b);
    for (x, y) in fb.iter_mut().zip(&fa) {
        *x *= y;
    }
    dft::inverse_in_place(&mut fb);
    Ok(fb)
}

/// Per-entry noise variance giving `||x||^2 / E||w||^2 = 10^(snr/10)`.
pub fn noise_variance(x: &[C64], snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::param(format!("snr_db must be finite or +inf, got {snr_db}")));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let power = vector::norm_sqr(x);
    if power == 0.0 {
        return Err(Error::param("cannot set a finite SNR against a zero signal"));
    }
    Ok(power / (x.len() as f64 * 10f64.powf(snr_db / 10.0)))
}

/// Adds complex white Gaussian noise at the given SNR (dB) relative to the
/// realized power of `x`.
pub fn add_awgn<R: Rng + ?Sized>(x: &[C64], snr_db: f64, rng: &mut R) -> Result<Vec<C64>> {
    let var = noise_variance(x, snr_db)?;
    if var == 0.0 {
        return Ok(x.to_vec());
    }
    Ok(x.iter().map(|v| v + complex_normal(rng, var)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::{relative_difference, unit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn naive_convolve(a: &[C64], b: &[C64]) -> Vec<C64> {
        let n = a.len();
        (0..n)
            .map(|i| (0..n).map(|j| a[j] * b[(i + n - j) % n]).sum())
            .collect()
    }

    fn random_vec(n: usize, r: &mut ChaCha8Rng) -> Vec<C64> {
        (0..n).map(|_| complex_normal(r, 1.0)).collect()
    }

    #[test]
    fn sparse_signal_experiment_shape() {
        let sig = gen_sparse_signal(128, 4, ValueDist::ComplexNormal, &mut rng(1)).unwrap();
        assert_eq!(sig.k(), 4);
        assert_eq!(sig.dense().iter().filter(|v| **v != ZERO).count(), 4);
    }

    #[test]
    fn full_support_forced() {
        let sig = gen_sparse_signal(8, 8, ValueDist::Uniform, &mut rng(2)).unwrap();
        assert_eq!(sig.support(), &[0, 1, 2, 3, 4, 5, 6, 7]);
        assert!(sig.values().iter().all(|v| v.re > 0.0 && v.re <= 1.0 && v.im == 0.0));
    }

    #[test]
    fn sparse_signal_is_seed_deterministic() {
        let a = gen_sparse_signal(16, 3, ValueDist::ComplexNormal, &mut rng(42)).unwrap();
        let b = gen_sparse_signal(16, 3, ValueDist::ComplexNormal, &mut rng(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sparse_signal_rejects_k_above_n() {
        assert!(matches!(
            gen_sparse_signal(4, 5, ValueDist::Uniform, &mut rng(0)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn sparse_signal_constructor_validates() {
        let one = C64::new(1.0, 0.0);
        assert!(SparseSignal::new(4, vec![1, 1], vec![one, one]).is_err());
        assert!(SparseSignal::new(4, vec![4], vec![one]).is_err());
        assert!(SparseSignal::new(4, vec![0], vec![ZERO]).is_err());
        let s = SparseSignal::new(4, vec![3, 0], vec![one, one * 2.0]).unwrap();
        assert_eq!(s.support(), &[0, 3]);
        assert_eq!(s.values()[0], one * 2.0);
    }

    #[test]
    fn support_frequencies_are_uniform() {
        let (n, k, draws) = (16usize, 2usize, 100_000usize);
        let mut counts = vec![0usize; n];
        let mut r = rng(7);
        for _ in 0..draws {
            for &i in gen_sparse_signal(n, k, ValueDist::Uniform, &mut r)
                .unwrap()
                .support()
            {
                counts[i] += 1;
            }
        }
        let p = k as f64 / n as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - p).abs() <= 3.0 * se, "frequency {f} vs {p} (se {se})");
        }
    }

    #[test]
    fn channel_shapes() {
        let h = gen_channel(100, 5, &mut rng(3)).unwrap();
        assert_eq!(h.s(), 5);
        assert_eq!(h.dense().iter().filter(|v| **v != ZERO).count(), 5);

        let single = gen_channel(1, 1, &mut rng(4)).unwrap();
        assert_eq!(single.support(), &[0]);
        assert_eq!(single.dense()[0], single.gains()[0]);

        assert_eq!(gen_channel(30, 3, &mut rng(5)).unwrap(), gen_channel(30, 3, &mut rng(5)).unwrap());
        assert!(gen_channel(3, 4, &mut rng(5)).is_err());
    }

    #[test]
    fn codebook_variance_matches_one_over_mu() {
        let mu = 100;
        let q = gen_codebook(mu, 10_000, &mut rng(11)).unwrap();
        let mean = q.entries().iter().map(|v| v.norm_sqr()).sum::<f64>() / q.entries().len() as f64;
        let target = 1.0 / mu as f64;
        assert!((mean - target).abs() / target < 0.01, "mean {mean}");
    }

    #[test]
    fn codebook_dimension_rules() {
        let q = gen_codebook(100, 128, &mut rng(1)).unwrap();
        assert_eq!((q.mu(), q.n()), (100, 128));
        assert!(gen_codebook(4, 4, &mut rng(1)).is_ok());
        assert!(gen_codebook(5, 4, &mut rng(1)).is_err());
        let real = gen_codebook_with(4, 6, CodebookKind::Real, &mut rng(1)).unwrap();
        assert!(real.entries().iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn unit_vectors_add_indices_modulo_length() {
        let out = circular_convolve(&unit(4, 2), &unit(4, 3)).unwrap();
        assert!(relative_difference(&out, &unit(4, 1)) < 1e-15);
    }

    #[test]
    fn convolution_identity_element() {
        let a = random_vec(9, &mut rng(8));
        let out = circular_convolve(&a, &unit(9, 0)).unwrap();
        assert!(relative_difference(&out, &a) < 1e-14);
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let mut r = rng(9);
        let a = random_vec(64, &mut r);
        let b = random_vec(64, &mut r);
        let fast = circular_convolve(&a, &b).unwrap();
        assert!(relative_difference(&fast, &naive_convolve(&a, &b)) < 1e-12);
    }

    #[test]
    fn convolution_length_mismatch() {
        assert!(circular_convolve(&unit(3, 0), &unit(4, 0)).is_err());
    }

    #[test]
    fn awgn_noiseless_is_identity() {
        let x = random_vec(10, &mut rng(1));
        assert_eq!(add_awgn(&x, f64::INFINITY, &mut rng(2)).unwrap(), x);
        assert!(add_awgn(&vec![ZERO; 4], 10.0, &mut rng(2)).is_err());
        assert!(add_awgn(&x, f64::NAN, &mut rng(2)).is_err());
    }

    #[test]
    fn awgn_empirical_snr() {
        let mut r = rng(21);
        let x = random_vec(100, &mut r);
        let target = 30.0;
        let mut noise_power = 0.0;
        let draws = 10_000;
        for _ in 0..draws {
            let y = add_awgn(&x, target, &mut r).unwrap();
            noise_power += vector::norm_sqr(&vector::sub(&y, &x));
        }
        noise_power /= draws as f64;
        let snr = 10.0 * (vector::norm_sqr(&x) / noise_power).log10();
        assert!((snr - target).abs() < 0.5, "empirical snr {snr}");
    }
}
