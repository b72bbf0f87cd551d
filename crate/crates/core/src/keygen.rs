//! Secret extraction and the round-based key agreement protocol.
//!
//! After recovering `h (x) beta_other`, each party forms
//! `c = DFT(vec(h (x) beta_other)) .* DFT(vec(e_0 (x) beta_own))`. Because
//! `vec(h (x) beta) = h_up * beta_up` (zero-padded `h`, `mu`-strided `beta`),
//! both sides obtain `DFT(h_up) .* DFT(beta_A_up) .* DFT(beta_B_up)`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dft;
use crate::error::{Error, Result};
use crate::hihtp::{self, HihtpConfig};
use crate::lifting::{LiftedTensor, MeasurementOp};
use crate::rng;
use crate::signals::{
    add_awgn, circular_convolve, gen_channel, gen_codebook_with, gen_sparse_signal, Channel,
    CodebookKind, SparseSignal, ValueDist,
};
use crate::security::ln_choose;
use crate::vector::{self, C64, ZERO};

/// `h` zero-padded into `C^(n mu)`.
pub fn upsample_h(h: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![ZERO; h.len() * n];
    out[..h.len()].copy_from_slice(h);
    out
}

/// `beta` spread onto every `mu`-th coordinate of `C^(n mu)`.
pub fn upsample_beta(beta: &[C64], mu: usize) -> Vec<C64> {
    let mut out = vec![ZERO; beta.len() * mu];
    for (k, &b) in beta.iter().enumerate() {
        out[k * mu] = b;
    }
    out
}

/// Checks `vec(h (x) beta) == h_up * beta_up` to `1e-11` relative.
pub fn tensor_vec_identity_check(h: &[C64], beta: &[C64]) -> bool {
    let lhs = LiftedTensor::rank_one(h, beta);
    let rhs = match circular_convolve(&upsample_h(h, beta.len()), &upsample_beta(beta, h.len())) {
        Ok(v) => v,
        Err(_) => return false,
    };
    vector::relative_difference(lhs.as_vec(), &rhs) <= 1e-11
}

/// The length-`n mu` shared secret of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Secret {
    pub c: Vec<C64>,
    pub round_index: usize,
}

/// `DFT(vec(recovered)) .* DFT(own_beta_up)`.
pub fn compute_secret(recovered: &LiftedTensor, own_beta: &SparseSignal) -> Result<Secret> {
    if recovered.n() != own_beta.n() {
        return Err(Error::Dimension {
            context: "secret computation",
            expected: recovered.n(),
            got: own_beta.n(),
        });
    }
    let mut c = dft::forward(recovered.as_vec());
    let own = dft::forward(&upsample_beta(&own_beta.dense(), recovered.mu()));
    for (x, y) in c.iter_mut().zip(&own) {
        *x *= y;
    }
    Ok(Secret { c, round_index: 0 })
}

/// `DFT(h_up) .* DFT(beta_a_up) .* DFT(beta_b_up)`, the value both parties
/// reach when recovery is exact.
pub fn ideal_secret(h: &[C64], beta_a: &[C64], beta_b: &[C64]) -> Vec<C64> {
    let mu = h.len();
    let n = beta_a.len();
    let fh = dft::forward(&upsample_h(h, n));
    let fa = dft::forward(&upsample_beta(beta_a, mu));
    let fb = dft::forward(&upsample_beta(beta_b, mu));
    fh.iter().zip(&fa).zip(&fb).map(|((x, y), z)| x * y * z).collect()
}

pub fn normalize_secret(c: &[C64]) -> Result<Vec<C64>> {
    let norm = vector::norm(c);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateSecret);
    }
    Ok(c.iter().map(|v| v / norm).collect())
}

/// `sqrt(mean |a_i - b_i|^2)`.
pub fn rmse(a: &[C64], b: &[C64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            context: "rmse",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("rmse of empty vectors".into()));
    }
    Ok((vector::norm_sqr(&vector::sub(a, b)) / a.len() as f64).sqrt())
}

/// `c / max_i |c_i|`, so every entry has modulus at most one.
pub fn peak_normalize(c: &[C64]) -> Result<Vec<C64>> {
    let peak = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::DegenerateSecret);
    }
    Ok(c.iter().map(|v| v / peak).collect())
}

/// RMSE between peak-normalized secrets, taken over the `2 N` real
/// coordinates (real and imaginary parts). This is the figure reported by
/// the experiments; uncorrelated secrets land near 0.2.
pub fn normalized_rmse(a: &[C64], b: &[C64]) -> Result<f64> {
    let pa = peak_normalize(a)?;
    let pb = peak_normalize(b)?;
    Ok(rmse(&pa, &pb)? / std::f64::consts::SQRT_2)
}

/// Clipping range of the scalar quantizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum ClipRange {
    /// `[-m s, m s]` with `s` the RMS of the real and imaginary components.
    StdMultiple(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerConfig {
    /// Bits per complex entry; half go to each of the real and imaginary parts.
    pub theta: usize,
    pub clip: ClipRange,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            theta: 2,
            clip: ClipRange::StdMultiple(3.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantized {
    pub bits: Vec<bool>,
    /// Half-width of the clipping range actually used.
    pub clip: f64,
    pub theta: usize,
}

impl QuantizerConfig {
    fn levels(&self) -> usize {
        1usize << (self.theta / 2)
    }

    fn validate(&self) -> Result<()> {
        if self.theta < 2 || self.theta % 2 != 0 || self.theta > 32 {
            return Err(Error::param(format!("theta must be even and in [2, 32], got {}", self.theta)));
        }
        match self.clip {
            ClipRange::StdMultiple(m) | ClipRange::Fixed(m) if !(m.is_finite() && m >= 0.0) => {
                Err(Error::param("clipping parameter must be finite and non-negative"))
            }
            _ => Ok(()),
        }
    }

    /// Reproduction point of cell `index` for half-width `clip`.
    pub fn reproduction_point(&self, index: usize, clip: f64) -> f64 {
        let width = 2.0 * clip / self.levels() as f64;
        -clip + (index as f64 + 0.5) * width
    }

    fn cell(&self, x: f64, clip: f64) -> usize {
        let levels = self.levels();
        if clip == 0.0 {
            return levels / 2;
        }
        let pos = ((x + clip) / (2.0 * clip) * levels as f64).floor();
        pos.clamp(0.0, (levels - 1) as f64) as usize
    }
}

/// Uniform scalar quantization of real and imaginary parts, `theta / 2` bits
/// each, most significant bit first.
pub fn quantize(c: &[C64], cfg: &QuantizerConfig) -> Result<Quantized> {
    cfg.validate()?;
    if !vector::all_finite(c) {
        return Err(Error::param("cannot quantize non-finite entries"));
    }
    let clip = match cfg.clip {
        ClipRange::Fixed(r) => r,
        ClipRange::StdMultiple(m) => {
            if c.is_empty() {
                0.0
            } else {
                m * (vector::norm_sqr(c) / (2 * c.len()) as f64).sqrt()
            }
        }
    };
    let half = cfg.theta / 2;
    let mut bits = Vec::with_capacity(c.len() * cfg.theta);
    for v in c {
        for x in [v.re, v.im] {
            let idx = cfg.cell(x, clip);
            for b in (0..half).rev() {
                bits.push((idx >> b) & 1 == 1);
            }
        }
    }
    Ok(Quantized {
        bits,
        clip,
        theta: cfg.theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family", content = "seed")]
pub enum HashFamily {
    /// Vector multiply-shift over 64-bit blocks with 128-bit seeded
    /// multipliers; each output word is `(b + sum a_i x_i mod 2^128) >> 64`.
    MultiplyShift(u64),
    /// SHA-256 in counter mode, truncated.
    Sha256,
}

impl Default for HashFamily {
    fn default() -> Self {
        HashFamily::MultiplyShift(0x5eed_f00d)
    }
}

fn pack_blocks(bits: &[bool]) -> Vec<u64> {
    let mut blocks: Vec<u64> = bits
        .chunks(64)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
        })
        .collect();
    // length block separates inputs that differ only by trailing zeros
    blocks.push(bits.len() as u64);
    blocks
}

fn word_bits(word: u64, take: usize, out: &mut Vec<bool>) {
    for i in 0..take {
        out.push((word >> (63 - i)) & 1 == 1);
    }
}

/// Compresses `bits` into a `key_len`-bit key with the given hash family.
pub fn hash_key(bits: &[bool], key_len: usize, family: HashFamily) -> Result<Vec<bool>> {
    if key_len > bits.len() {
        return Err(Error::param(format!(
            "key length {key_len} exceeds input length {}",
            bits.len()
        )));
    }
    let blocks = pack_blocks(bits);
    let words = key_len.div_ceil(64);
    let mut key = Vec::with_capacity(key_len);
    for j in 0..words {
        let take = (key_len - 64 * j).min(64);
        let word = match family {
            HashFamily::MultiplyShift(seed) => {
                let mut params = ChaCha8Rng::seed_from_u64(rng::derive_seed(seed, 0x6861_7368, j as u64));
                let mut draw = || ((params.next_u64() as u128) << 64) | params.next_u64() as u128;
                let mut acc = draw();
                for &x in &blocks {
                    acc = acc.wrapping_add(draw().wrapping_mul(x as u128));
                }
                (acc >> 64) as u64
            }
            HashFamily::Sha256 => {
                let mut hasher = Sha256::new();
                hasher.update((j as u64).to_le_bytes());
                for x in &blocks {
                    hasher.update(x.to_le_bytes());
                }
                let digest = hasher.finalize();
                let mut w = [0u8; 8];
                w.copy_from_slice(&digest[..8]);
                u64::from_be_bytes(w)
            }
        };
        word_bits(word, take, &mut key);
    }
    Ok(key)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyMaterial {
    pub bits: Vec<bool>,
    pub key: Vec<bool>,
    pub theta: usize,
    pub rounds: usize,
    pub clip: f64,
    pub family: HashFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n: usize,
    pub mu: usize,
    pub k: usize,
    pub s: usize,
    /// Number of rounds `m`.
    pub rounds: usize,
    /// Receiver SNR in dB; `inf` for noiseless.
    pub snr_db: f64,
    pub value_dist: ValueDist,
    pub codebook: CodebookKind,
    /// Solver settings; its `s`/`k` are overridden by the fields above.
    pub hihtp: HihtpConfig,
    pub quantizer: QuantizerConfig,
    pub key_len: usize,
    pub hash: HashFamily,
    /// Keep one channel draw for all rounds instead of redrawing per round.
    pub static_channel: bool,
}

impl ProtocolConfig {
    pub fn new(n: usize, mu: usize, k: usize, s: usize) -> Self {
        Self {
            n,
            mu,
            k,
            s,
            rounds: 1,
            snr_db: f64::INFINITY,
            value_dist: ValueDist::ComplexNormal,
            codebook: CodebookKind::Complex,
            hihtp: HihtpConfig::new(s, k),
            quantizer: QuantizerConfig::default(),
            key_len: 128,
            hash: HashFamily::default(),
            static_channel: false,
        }
    }

    pub fn solver(&self) -> HihtpConfig {
        HihtpConfig {
            s: self.s,
            k: self.k,
            ..self.hihtp
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::param("need 0 < k <= n"));
        }
        if self.s == 0 || self.s > self.mu {
            return Err(Error::param("need 0 < s <= mu"));
        }
        if self.mu == 0 || self.mu > self.n {
            return Err(Error::param("need 0 < mu <= n"));
        }
        if self.rounds == 0 {
            return Err(Error::param("need at least one round"));
        }
        if self.snr_db.is_nan() {
            return Err(Error::param("snr_db is NaN"));
        }
        self.solver().validate()?;
        self.quantizer.validate()?;
        let total_bits = self.rounds * self.n * self.mu * self.quantizer.theta;
        if self.key_len > total_bits {
            return Err(Error::param(format!("key_len {} exceeds {total_bits} quantized bits", self.key_len)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundParams {
    pub n: usize,
    pub mu: usize,
    pub k: usize,
    pub s: usize,
    pub snr_db: f64,
}

/// One JSON-exportable record per protocol round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTranscript {
    pub seed: u64,
    pub round: usize,
    pub params: RoundParams,
    pub rmse: f64,
    pub alice_residual: f64,
    pub bob_residual: f64,
    pub alice_iterations: usize,
    pub bob_iterations: usize,
    /// Quantized bits of this round agree on both sides.
    pub key_agreement: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationMetrics {
    /// `log2 C(n, k)`: support entropy of one signal.
    pub support_bits: f64,
    /// `log2 C(2k, k)`: ways to split the joint support between the parties.
    pub split_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOutcome {
    pub alice: KeyMaterial,
    pub bob: KeyMaterial,
    pub keys_agree: bool,
    pub per_round_rmse: Vec<f64>,
    pub transcripts: Vec<RoundTranscript>,
    pub information: InformationMetrics,
}

/// One simulated full-duplex exchange with the raw (unnormalized) secrets.
#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub channel: Channel,
    pub beta_a: SparseSignal,
    pub beta_b: SparseSignal,
    pub alice: Secret,
    pub bob: Secret,
    pub alice_fit: hihtp::HihtpResult,
    pub bob_fit: hihtp::HihtpResult,
}

/// Draws both signals, forms the two noisy measurements over `channel`, and
/// runs each party's recovery and secret computation.
pub fn exchange<R: Rng + ?Sized>(
    op: &MeasurementOp,
    channel: &Channel,
    cfg: &ProtocolConfig,
    rng: &mut R,
) -> Result<RoundOutput> {
    let beta_a = gen_sparse_signal(cfg.n, cfg.k, cfg.value_dist, rng)?;
    let beta_b = gen_sparse_signal(cfg.n, cfg.k, cfg.value_dist, rng)?;
    exchange_with(op, channel, beta_a, beta_b, cfg, rng)
}

/// [`exchange`] with caller-supplied signals.
pub fn exchange_with<R: Rng + ?Sized>(
    op: &MeasurementOp,
    channel: &Channel,
    beta_a: SparseSignal,
    beta_b: SparseSignal,
    cfg: &ProtocolConfig,
    rng: &mut R,
) -> Result<RoundOutput> {
    let h = channel.dense();
    let solver = cfg.solver();

    let clean_a = op.apply(&LiftedTensor::rank_one_sparse(&h, &beta_b))?;
    let clean_b = op.apply(&LiftedTensor::rank_one_sparse(&h, &beta_a))?;
    let y_a = add_awgn(&clean_a, cfg.snr_db, rng)?;
    let y_b = add_awgn(&clean_b, cfg.snr_db, rng)?;

    let alice_fit = hihtp::solve(op, &y_a, &solver, None)?;
    let bob_fit = hihtp::solve(op, &y_b, &solver, None)?;
    let alice = compute_secret(&alice_fit.tensor, &beta_a)?;
    let bob = compute_secret(&bob_fit.tensor, &beta_b)?;
    Ok(RoundOutput {
        channel: channel.clone(),
        beta_a,
        beta_b,
        alice,
        bob,
        alice_fit,
        bob_fit,
    })
}

/// Runs `cfg.rounds` rounds, then quantizes and hashes each side's
/// concatenated normalized secrets. No reconciliation is attempted.
pub fn run_protocol(cfg: &ProtocolConfig, seed: u64) -> Result<ProtocolOutcome> {
    cfg.validate()?;
    let mut rng = rng::seeded(seed);
    let codebook = gen_codebook_with(cfg.mu, cfg.n, cfg.codebook, &mut rng)?;
    let op = MeasurementOp::new(codebook);
    let mut channel = gen_channel(cfg.mu, cfg.s, &mut rng)?;

    let mut alice_all = Vec::with_capacity(cfg.rounds * cfg.n * cfg.mu);
    let mut bob_all = Vec::with_capacity(cfg.rounds * cfg.n * cfg.mu);
    let mut per_round_rmse = Vec::with_capacity(cfg.rounds);
    let mut transcripts = Vec::with_capacity(cfg.rounds);

    for round in 0..cfg.rounds {
        if round > 0 && !cfg.static_channel {
            channel = gen_channel(cfg.mu, cfg.s, &mut rng).map_err(|e| e.in_round(round))?;
        }
        let out = exchange(&op, &channel, cfg, &mut rng).map_err(|e| e.in_round(round))?;
        let a = normalize_secret(&out.alice.c).map_err(|e| e.in_round(round))?;
        let b = normalize_secret(&out.bob.c).map_err(|e| e.in_round(round))?;
        let err = normalized_rmse(&out.alice.c, &out.bob.c)?;
        let qa = quantize(&a, &cfg.quantizer)?;
        let qb = quantize(&b, &cfg.quantizer)?;
        per_round_rmse.push(err);
        transcripts.push(RoundTranscript {
            seed,
            round,
            params: RoundParams {
                n: cfg.n,
                mu: cfg.mu,
                k: cfg.k,
                s: cfg.s,
                snr_db: cfg.snr_db,
            },
            rmse: err,
            alice_residual: out.alice_fit.residual,
            bob_residual: out.bob_fit.residual,
            alice_iterations: out.alice_fit.iterations,
            bob_iterations: out.bob_fit.iterations,
            key_agreement: qa.bits == qb.bits,
        });
        alice_all.extend(a);
        bob_all.extend(b);
    }

    let derive = |secret: &[C64]| -> Result<KeyMaterial> {
        let q = quantize(secret, &cfg.quantizer)?;
        let key = hash_key(&q.bits, cfg.key_len, cfg.hash)?;
        Ok(KeyMaterial {
            bits: q.bits,
            key,
            theta: cfg.quantizer.theta,
            rounds: cfg.rounds,
            clip: q.clip,
            family: cfg.hash,
        })
    };
    let alice = derive(&alice_all)?;
    let bob = derive(&bob_all)?;
    let ln2 = std::f64::consts::LN_2;
    Ok(ProtocolOutcome {
        keys_agree: alice.key == bob.key,
        alice,
        bob,
        per_round_rmse,
        transcripts,
        information: InformationMetrics {
            support_bits: ln_choose(cfg.n as u64, cfg.k as u64) / ln2,
            split_bits: ln_choose(2 * cfg.k as u64, cfg.k as u64) / ln2,
        },
    })
}
