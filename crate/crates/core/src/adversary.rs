//! Eavesdropper models and the magnitude-sorting key recovery attack.
//!
//! Eve hears both transmissions at once:
//! `y_E = (h + n_A) * Q beta_A + (gamma h + n_B) * Q beta_B + n_E`,
//! where `n_A`, `n_B` are Gaussian deviations on the support of `h`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hihtp::{self, HihtpConfig};
use crate::keygen::{ideal_secret, normalize_secret, normalized_rmse, peak_normalize, Secret};
use crate::lifting::{LiftedTensor, MeasurementOp};
use crate::signals::{complex_normal, noise_variance, Channel, SparseSignal};
use crate::vector::{self, C64, ZERO};

/// Default elementwise tolerance for a successful recovery.
pub const SUCCESS_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// Eve's channels are exact scalings of the reciprocal channel.
    #[default]
    Identical,
    /// Only the channel from Bob deviates.
    OneDeviated,
    BothDeviated,
}

/// How the deviation on Bob's channel relates to `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationModel {
    /// `h_BE = gamma h + n_B`.
    #[default]
    Additive,
    /// `h_BE = gamma (h + n_B)`: the deviation grows with the gain, so both
    /// of Eve's channels sit at the same channel-to-deviation ratio.
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveParams {
    pub gamma: f64,
    /// Standard deviation of the channel deviations.
    pub varsigma: f64,
    /// Measurement SNR at Eve in dB (`+inf` for noiseless).
    pub snr_db: f64,
    pub channel_mode: ChannelMode,
    #[serde(default)]
    pub deviation: DeviationModel,
}

impl EveParams {
    pub fn new(gamma: f64, snr_db: f64) -> Self {
        Self {
            gamma,
            varsigma: 0.0,
            snr_db,
            channel_mode: ChannelMode::Identical,
            deviation: DeviationModel::Additive,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::param(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.varsigma >= 0.0 && self.varsigma.is_finite()) {
            return Err(Error::param("varsigma must be non-negative"));
        }
        if self.snr_db.is_nan() {
            return Err(Error::param("snr_db is NaN"));
        }
        Ok(())
    }
}

/// Deviation std for a given channel-to-deviation power ratio in dB,
/// measured per nonzero tap of `h`.
pub fn varsigma_for_snr(h: &Channel, deviation_snr_db: f64) -> f64 {
    let per_tap = vector::norm_sqr(h.gains()) / h.s().max(1) as f64;
    (per_tap / 10f64.powf(deviation_snr_db / 10.0)).sqrt()
}

fn deviation<R: Rng + ?Sized>(h: &Channel, varsigma: f64, rng: &mut R) -> Vec<C64> {
    let mut out = vec![ZERO; h.mu()];
    if varsigma > 0.0 {
        for &i in h.support() {
            out[i] = complex_normal(rng, varsigma * varsigma);
        }
    }
    out
}

/// `(h_{A->E}, h_{B->E})` as dense length-`mu` vectors.
pub fn eve_channels<R: Rng + ?Sized>(h: &Channel, params: &EveParams, rng: &mut R) -> Result<(Vec<C64>, Vec<C64>)> {
    params.validate()?;
    let base = h.dense();
    let n_a = match params.channel_mode {
        ChannelMode::BothDeviated => deviation(h, params.varsigma, rng),
        _ => vec![ZERO; h.mu()],
    };
    let n_b = match params.channel_mode {
        ChannelMode::Identical => vec![ZERO; h.mu()],
        _ => deviation(h, params.varsigma, rng),
    };
    let h_ae = base.iter().zip(&n_a).map(|(h, n)| h + n).collect();
    let h_be = base
        .iter()
        .zip(&n_b)
        .map(|(h, n)| match params.deviation {
            DeviationModel::Additive => h * params.gamma + n,
            DeviationModel::Proportional => (h + n) * params.gamma,
        })
        .collect();
    Ok((h_ae, h_be))
}

fn superposed(h_ae: &[C64], h_be: &[C64], beta_a: &SparseSignal, beta_b: &SparseSignal) -> Result<LiftedTensor> {
    LiftedTensor::rank_one_sparse(h_ae, beta_a).axpy(C64::new(1.0, 0.0), &LiftedTensor::rank_one_sparse(h_be, beta_b))
}

fn check_dims(op: &MeasurementOp, h: &Channel, a: &SparseSignal, b: &SparseSignal) -> Result<()> {
    if h.mu() != op.mu() {
        return Err(Error::Dimension {
            context: "eve channel",
            expected: op.mu(),
            got: h.mu(),
        });
    }
    for beta in [a, b] {
        if beta.n() != op.n() {
            return Err(Error::Dimension {
                context: "eve signal",
                expected: op.n(),
                got: beta.n(),
            });
        }
    }
    Ok(())
}

/// Eve's received vector.
pub fn eve_observe<R: Rng + ?Sized>(
    h: &Channel,
    op: &MeasurementOp,
    beta_a: &SparseSignal,
    beta_b: &SparseSignal,
    params: &EveParams,
    rng: &mut R,
) -> Result<Vec<C64>> {
    check_dims(op, h, beta_a, beta_b)?;
    let (h_ae, h_be) = eve_channels(h, params, rng)?;
    let clean = op.apply(&superposed(&h_ae, &h_be, beta_a, beta_b)?)?;
    let variance = eve_noise_variance(h, op, beta_a, beta_b, params.snr_db)?;
    Ok(clean
        .into_iter()
        .map(|v| if variance > 0.0 { v + complex_normal(rng, variance) } else { v })
        .collect())
}

/// Eve's noise level: `snr_db` is measured against the reference
/// superposition `h * Q (beta_A + beta_B)` (unit gains, no deviations), so
/// the noise floor is shared with the legitimate receivers and does not
/// shrink when `gamma` boosts one transmitter.
pub fn eve_noise_variance(
    h: &Channel,
    op: &MeasurementOp,
    beta_a: &SparseSignal,
    beta_b: &SparseSignal,
    snr_db: f64,
) -> Result<f64> {
    let base = h.dense();
    let reference = op.apply(&superposed(&base, &base, beta_a, beta_b)?)?;
    noise_variance(&reference, snr_db)
}

/// A solved observation handed to Eve by an ideal support oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleObservation {
    pub tensor: LiftedTensor,
    pub support: Vec<(usize, usize)>,
    /// The restricted operator was singular; white noise was used instead.
    pub rank_deficient: bool,
}

/// `sigma^2 (C_S^* C_S)^-1` for the operator restricted to `support`.
/// Returns `None` when the restricted operator is rank deficient.
pub fn oracle_covariance(op: &MeasurementOp, support: &[(usize, usize)], variance: f64) -> Option<DMatrix<C64>> {
    let a = op.restricted_matrix(support);
    let gram = a.adjoint() * a;
    gram.try_inverse().map(|inv| inv * C64::new(variance, 0.0))
}

/// Draws `C_S^+ w` with `w ~ CN(0, variance I_mu)`; falls back to white
/// noise on the support when `C_S` lacks full column rank.
pub fn oracle_noise<R: Rng + ?Sized>(
    op: &MeasurementOp,
    support: &[(usize, usize)],
    variance: f64,
    rng: &mut R,
) -> Result<(Vec<C64>, bool)> {
    let m = support.len();
    if variance == 0.0 {
        return Ok((vec![ZERO; m], false));
    }
    let a = op.restricted_matrix(support);
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let full_rank = m <= op.mu() && smax > 0.0 && smin > 1e-10 * smax;
    if !full_rank {
        return Ok(((0..m).map(|_| complex_normal(rng, variance)).collect(), true));
    }
    let pinv = a.pseudo_inverse(1e-12 * smax).map_err(|e| Error::Factorization(e.to_string()))?;
    let w = DVector::from_iterator(op.mu(), (0..op.mu()).map(|_| complex_normal(rng, variance)));
    Ok(((pinv * w).iter().copied().collect(), false))
}

/// `h_AE (x) beta_A + h_BE (x) beta_B + noise`, with the noise shaped as the
/// error of a least-squares fit on the true support.
pub fn eve_oracle_observe<R: Rng + ?Sized>(
    h: &Channel,
    beta_a: &SparseSignal,
    beta_b: &SparseSignal,
    params: &EveParams,
    op: &MeasurementOp,
    rng: &mut R,
) -> Result<OracleObservation> {
    check_dims(op, h, beta_a, beta_b)?;
    let (h_ae, h_be) = eve_channels(h, params, rng)?;
    let mut tensor = superposed(&h_ae, &h_be, beta_a, beta_b)?;
    let mut cols: Vec<usize> = beta_a.support().iter().chain(beta_b.support()).copied().collect();
    cols.sort_unstable();
    cols.dedup();
    let support: Vec<(usize, usize)> = cols
        .iter()
        .flat_map(|&c| h.support().iter().map(move |&r| (r, c)))
        .collect();
    let variance = eve_noise_variance(h, op, beta_a, beta_b, params.snr_db)?;
    let (noise, rank_deficient) = oracle_noise(op, &support, variance, rng)?;
    for (&(r, c), v) in support.iter().zip(noise) {
        let cur = tensor.get(r, c);
        tensor.set(r, c, cur + v);
    }
    Ok(OracleObservation {
        tensor,
        support,
        rank_deficient,
    })
}

/// What Eve is scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackTruth {
    pub beta_a: SparseSignal,
    pub beta_b: SparseSignal,
    /// Noise-free shared secret.
    pub ideal: Vec<C64>,
    pub alice: Vec<C64>,
    pub bob: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    /// Normalized, phase-aligned to the ideal secret.
    pub recovered_secret: Secret,
    /// Normalized RMSE (see `keygen::normalized_rmse`) after phase alignment.
    pub rmse_to_alice: f64,
    pub rmse_to_bob: f64,
    pub rmse_to_ideal: f64,
    pub max_deviation: f64,
    pub success: bool,
    /// Eve split the joint support exactly into the two parties' supports.
    pub support_correct: bool,
    pub residual: f64,
    pub iterations: usize,
}

/// Rotates `c` by the single phase maximizing its correlation with `target`.
pub fn align_phase(c: &[C64], target: &[C64]) -> Vec<C64> {
    let ip = vector::inner(c, target);
    if ip.norm() == 0.0 {
        return c.to_vec();
    }
    let rot = ip / ip.norm();
    c.iter().map(|v| v * rot).collect()
}

pub fn max_deviation(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `max_i |c_eve_i - c_true_i| <= tol`.
pub fn attack_success(c_eve: &[C64], c_true: &[C64], tol: f64) -> Result<bool> {
    if c_eve.len() != c_true.len() {
        return Err(Error::Dimension {
            context: "attack comparison",
            expected: c_true.len(),
            got: c_eve.len(),
        });
    }
    Ok(max_deviation(c_eve, c_true) <= tol)
}

/// Leading singular pair of a recovered tensor as `(h, x)` with
/// `W ~= h (x) x`.
pub fn rank_one_factors(w: &LiftedTensor) -> Result<(Vec<C64>, Vec<C64>)> {
    if w.norm() == 0.0 {
        return Err(Error::Factorization("zero tensor has no rank-one factor".into()));
    }
    let svd = w.to_matrix().svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Factorization("SVD did not return singular vectors".into())),
    };
    let (top, sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (i, &s)| if s > best.1 { (i, s) } else { best });
    let h = u.column(top).iter().map(|v| v * sigma).collect();
    let x = vt.row(top).iter().copied().collect();
    Ok((h, x))
}

/// Splits `x` by magnitude: the `k` largest entries go to the stronger
/// party (Bob when `gamma >= 1`), the next `k` to the other. Bob's block is
/// divided by `gamma`. Returns dense `(beta_a, beta_b)` estimates.
pub fn split_by_magnitude(x: &[C64], k: usize, gamma: f64) -> (Vec<C64>, Vec<C64>) {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].norm().total_cmp(&x[a].norm()).then(a.cmp(&b)));
    let top = &order[..k.min(order.len())];
    let next = &order[k.min(order.len())..(2 * k).min(order.len())];
    let (bob_idx, alice_idx) = if gamma >= 1.0 { (top, next) } else { (next, top) };
    let mut a = vec![ZERO; x.len()];
    let mut b = vec![ZERO; x.len()];
    for &i in alice_idx {
        a[i] = x[i];
    }
    for &i in bob_idx {
        b[i] = x[i] / gamma;
    }
    (a, b)
}

fn support_of(v: &[C64]) -> Vec<usize> {
    v.iter().enumerate().filter(|(_, x)| x.norm() > 0.0).map(|(i, _)| i).collect()
}

// normalized RMSE after phase alignment; a zero guess scores as the target alone
fn score(eve: &[C64], target: &[C64]) -> Result<f64> {
    if eve.iter().all(|v| *v == ZERO) {
        return Ok(vector::norm(&peak_normalize(target)?) / (2.0 * target.len() as f64).sqrt());
    }
    normalized_rmse(&align_phase(eve, target), target)
}

/// Recovers the superposition with sparsity `(s, 2k)`, factors it, splits
/// by magnitude and rebuilds the secret.
pub fn eve_attack(
    y_e: &[C64],
    op: &MeasurementOp,
    s: usize,
    k: usize,
    gamma_hint: f64,
    cfg: &HihtpConfig,
    truth: &AttackTruth,
) -> Result<AttackReport> {
    if !(gamma_hint > 0.0 && gamma_hint.is_finite()) {
        return Err(Error::param("gamma hint must be positive"));
    }
    let solver = HihtpConfig { s, k: 2 * k, ..*cfg };
    let fit = hihtp::solve(op, y_e, &solver, None)?;
    let (h, x) = rank_one_factors(&fit.tensor)?;
    let (beta_a, beta_b) = split_by_magnitude(&x, k, gamma_hint);
    let c = ideal_secret(&h, &beta_a, &beta_b);

    let ideal = normalize_secret(&truth.ideal)?;
    // an empty split leaves Eve with nothing; score it as a zero guess
    let eve = match normalize_secret(&c) {
        Ok(c) => align_phase(&c, &ideal),
        Err(_) => vec![ZERO; c.len()],
    };
    let alice = normalize_secret(&truth.alice)?;
    let bob = normalize_secret(&truth.bob)?;
    let max_dev = max_deviation(&eve, &ideal);

    let mut got_a = support_of(&beta_a);
    let mut got_b = support_of(&beta_b);
    got_a.sort_unstable();
    got_b.sort_unstable();
    let support_correct = got_a == truth.beta_a.support() && got_b == truth.beta_b.support();

    Ok(AttackReport {
        rmse_to_alice: score(&eve, &alice)?,
        rmse_to_bob: score(&eve, &bob)?,
        rmse_to_ideal: score(&eve, &ideal)?,
        max_deviation: max_dev,
        success: attack_success(&eve, &ideal, SUCCESS_TOL)?,
        support_correct,
        recovered_secret: Secret {
            c: eve,
            round_index: 0,
        },
        residual: fit.residual,
        iterations: fit.iterations,
    })
}
