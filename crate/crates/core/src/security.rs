//! Entropy bounds for the shared secret and brute-force oracles that check
//! the combinatorial and probabilistic ingredients behind them.
//!
//! All entropies are in nats; convert with [`nats_to_bits`] for display.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::complex_normal;
use crate::vector::C64;

/// Largest number of enumerated configurations accepted by the oracles.
pub const ENUMERATION_CAP: f64 = 1e7;
/// Largest number of support splits accepted by [`verify_injectivity`].
pub const SPLIT_CAP: u64 = 100_000;
/// Value tolerance when comparing images of the secret map.
pub const IMAGE_TOL: f64 = 1e-9;

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// `ln C(n, k)`, zero when `k > n` is not allowed (returns `-inf`).
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
}

/// Exact `C(n, k)` (saturating).
pub fn choose(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc * (n as u128 - k as u128 + i) / i;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::param(format!(
            "gamma must lie in (0, 1], got {gamma}; use 1/gamma for the stronger party"
        )));
    }
    Ok(())
}

/// `C(2k,k)^-1 (1 - d^(2k)) / (1 - d)^k + d^k` with `d = 1 - gamma`: the
/// bound on the probability that ordering by magnitude separates the parties.
pub fn separation_bound(k: usize, delta: f64) -> f64 {
    let k32 = k as i32;
    let binom = ln_choose(2 * k as u64, k as u64).exp();
    (1.0 - delta.powi(2 * k32)) / ((1.0 - delta).powi(k32) * binom) + delta.powi(k32)
}

/// Lower bound (nats) on `H(beta_A | beta_A + gamma beta_B)` for disjoint
/// supports and uniform `[0, 1]` values.
pub fn h_gamma(k: usize, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    let delta = 1.0 - gamma;
    if delta == 0.0 {
        return Ok(ln_choose(2 * k as u64, k as u64));
    }
    Ok(-separation_bound(k, delta).ln())
}

/// `s ln(1 + 2k varsigma^2 / sigma^2)`: entropy lost to channel deviations.
pub fn h_noise(s: usize, k: usize, varsigma: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma must be positive and finite"));
    }
    if !(varsigma >= 0.0 && varsigma.is_finite()) {
        return Err(Error::param("varsigma must be non-negative and finite"));
    }
    let ratio = varsigma * varsigma / (sigma * sigma);
    Ok(s as f64 * (2.0 * k as f64 * ratio).ln_1p())
}

/// A bound together with a flag for regimes where it says nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    /// Unclamped formula value.
    pub raw: f64,
    /// `max(raw, 0)` for reporting.
    pub value: f64,
    pub vacuous: bool,
}

impl Bound {
    fn from_raw(raw: f64, vacuous: bool) -> Self {
        let vacuous = vacuous || !(raw > 0.0);
        Self {
            raw,
            value: if vacuous { 0.0 } else { raw },
            vacuous,
        }
    }
}

/// `(1 - 17 k^4 / n) (H_gamma(k) - 1)`.
pub fn noiseless_bound(n: usize, k: usize, gamma: f64) -> Result<Bound> {
    if n == 0 {
        return Err(Error::param("n must be positive"));
    }
    let prefactor = 1.0 - 17.0 * (k as f64).powi(4) / n as f64;
    let inner = h_gamma(k, gamma)? - 1.0;
    Ok(Bound::from_raw(prefactor * inner, prefactor <= 0.0 || inner <= 0.0))
}

/// Noiseless bound minus [`h_noise`].
pub fn noisy_bound(n: usize, k: usize, s: usize, gamma: f64, varsigma: f64, sigma: f64) -> Result<Bound> {
    let base = noiseless_bound(n, k, gamma)?;
    let loss = h_noise(s, k, varsigma, sigma)?;
    Ok(Bound::from_raw(base.raw - loss, base.vacuous))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRate {
    /// `beta H_gamma(k) - H_noise(s)` in nats per round.
    pub rate: f64,
    /// False when the rate is not positive.
    pub achievable: bool,
}

pub fn key_rate(k: usize, s: usize, gamma: f64, varsigma: f64, sigma: f64, beta_slack: f64) -> Result<KeyRate> {
    if !(beta_slack > 0.0 && beta_slack < 1.0) {
        return Err(Error::param("beta slack must lie in (0, 1)"));
    }
    let rate = beta_slack * h_gamma(k, gamma)? - h_noise(s, k, varsigma, sigma)?;
    Ok(KeyRate {
        rate,
        achievable: rate > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyParams {
    pub n: usize,
    pub k: usize,
    pub s: usize,
    pub gamma: f64,
    pub varsigma: f64,
    pub sigma: f64,
    pub beta_slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub h_gamma: f64,
    pub h_noise: f64,
    pub noiseless_bound: Bound,
    pub noisy_bound: Bound,
    pub key_rate: KeyRate,
    pub params: EntropyParams,
}

impl EntropyReport {
    pub fn compute(params: EntropyParams) -> Result<Self> {
        let EntropyParams {
            n,
            k,
            s,
            gamma,
            varsigma,
            sigma,
            beta_slack,
        } = params;
        Ok(Self {
            h_gamma: h_gamma(k, gamma)?,
            h_noise: h_noise(s, k, varsigma, sigma)?,
            noiseless_bound: noiseless_bound(n, k, gamma)?,
            noisy_bound: noisy_bound(n, k, s, gamma, varsigma, sigma)?,
            key_rate: key_rate(k, s, gamma, varsigma, sigma, beta_slack)?,
            params,
        })
    }
}

/// Result of checking the sum-set condition on a joint support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumSetWitness {
    pub sigma_union: Vec<usize>,
    /// Distinct values of `a + b mod n` over unordered pairs `a != b`.
    pub sumset_size: usize,
    pub event_e: bool,
    pub reason: Option<String>,
}

fn pair_sums(set: &[usize], n: usize) -> usize {
    let mut sums = Vec::with_capacity(set.len() * set.len() / 2);
    for (i, &a) in set.iter().enumerate() {
        for &b in &set[i + 1..] {
            sums.push((a + b) % n);
        }
    }
    sums.sort_unstable();
    sums.dedup();
    sums.len()
}

/// Event `E` on an explicit joint support of size `2k`.
pub fn sumset_event(sigma_union: &[usize], k: usize, n: usize) -> SumSetWitness {
    let mut union = sigma_union.to_vec();
    union.sort_unstable();
    union.dedup();
    let sumset_size = pair_sums(&union, n);
    let (event_e, reason) = if union.len() < 2 * k {
        (false, Some(format!("union {} < 2k = {}", union.len(), 2 * k)))
    } else if sumset_size != k * (2 * k - 1) {
        (
            false,
            Some(format!("pairwise sums collide: {} distinct < k(2k-1) = {}", sumset_size, k * (2 * k - 1))),
        )
    } else {
        (true, None)
    };
    SumSetWitness {
        sigma_union: union,
        sumset_size,
        event_e,
        reason,
    }
}

/// Event `E` for the supports of the two parties.
pub fn check_sumset(sigma_a: &[usize], sigma_b: &[usize], n: usize) -> Result<SumSetWitness> {
    if sigma_a.len() != sigma_b.len() {
        return Err(Error::param("both supports must have the same size k"));
    }
    if let Some(&i) = sigma_a.iter().chain(sigma_b).find(|&&i| i >= n) {
        return Err(Error::param(format!("index {i} outside [0, {n})")));
    }
    let k = sigma_a.len();
    let joined: Vec<usize> = sigma_a.iter().chain(sigma_b).copied().collect();
    Ok(sumset_event(&joined, k, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventProbEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    /// `17 k^4 / n`.
    pub bound: f64,
    /// `p_hat <= bound + 3 stderr`.
    pub holds: bool,
    pub trials: usize,
}

/// Monte Carlo estimate of `P(E^c)` for independent uniform supports.
pub fn estimate_event_prob<R: Rng + ?Sized>(n: usize, k: usize, trials: usize, rng: &mut R) -> Result<EventProbEstimate> {
    if k == 0 || k > n || trials == 0 {
        return Err(Error::param("need 0 < k <= n and trials > 0"));
    }
    let mut failures = 0usize;
    for _ in 0..trials {
        let a = rand::seq::index::sample(rng, n, k).into_vec();
        let b = rand::seq::index::sample(rng, n, k).into_vec();
        if !check_sumset(&a, &b, n)?.event_e {
            failures += 1;
        }
    }
    let p_hat = failures as f64 / trials as f64;
    let stderr = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
    let bound = 17.0 * (k as f64).powi(4) / n as f64;
    Ok(EventProbEstimate {
        p_hat,
        stderr,
        bound,
        holds: p_hat <= bound + 3.0 * stderr,
        trials,
    })
}

/// Exact `P(E^c)` by enumerating all ordered support pairs (small `n` only).
pub fn exact_event_prob(n: usize, k: usize) -> Result<f64> {
    let subsets = k_subsets(n, k);
    let total = (subsets.len() as f64).powi(2);
    if total > ENUMERATION_CAP {
        return Err(Error::StateSpaceTooLarge {
            size: total,
            limit: ENUMERATION_CAP,
        });
    }
    let mut failures = 0usize;
    for a in &subsets {
        for b in &subsets {
            if !check_sumset(a, b, n)?.event_e {
                failures += 1;
            }
        }
    }
    Ok(failures as f64 / total)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `Psi(mu) = mu * (nu - mu)` where `mu` keeps the coordinates of
/// `sigma_union` selected by `chosen` (positions into `sigma_union`).
/// Returned as sorted `(index, value)` pairs, exact zeros dropped.
pub fn psi(sigma_union: &[usize], alpha: &[C64], chosen: &[usize], n: usize) -> Vec<(usize, C64)> {
    let mut in_mu = vec![false; sigma_union.len()];
    for &c in chosen {
        in_mu[c] = true;
    }
    let mut acc: HashMap<usize, C64> = HashMap::new();
    for (i, &a) in sigma_union.iter().enumerate() {
        if !in_mu[i] {
            continue;
        }
        for (j, &b) in sigma_union.iter().enumerate() {
            if in_mu[j] {
                continue;
            }
            *acc.entry((a + b) % n).or_default() += alpha[i] * alpha[j];
        }
    }
    let mut out: Vec<(usize, C64)> = acc.into_iter().filter(|(_, v)| v.norm() > 0.0).collect();
    out.sort_by_key(|p| p.0);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub injective: bool,
    /// Two inequivalent supports (as index sets) with equal images.
    pub counterexample: Option<(Vec<usize>, Vec<usize>)>,
    /// Number of equivalence classes `{sigma, Sigma \ sigma}` compared.
    pub classes: usize,
    /// Pairs with equal support whose values differ by less than `1e-6` but
    /// more than the comparison tolerance.
    pub boundary_cases: usize,
}

/// Exhaustively checks that `Psi` separates all `k`-subsets of a `2k`-set
/// up to complementation.
pub fn verify_injectivity(sigma_union: &[usize], alpha: &[C64], n: usize) -> Result<InjectivityReport> {
    let m = sigma_union.len();
    if m == 0 || m % 2 != 0 {
        return Err(Error::param("joint support must have even, positive size 2k"));
    }
    if alpha.len() != m {
        return Err(Error::Dimension {
            context: "injectivity values",
            expected: m,
            got: alpha.len(),
        });
    }
    if alpha.iter().any(|a| a.norm() == 0.0) {
        return Err(Error::param("values on the joint support must be nonzero"));
    }
    let mut sorted = sigma_union.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != m || sorted.iter().any(|&i| i >= n) {
        return Err(Error::param("joint support must hold distinct indices in [0, n)"));
    }
    let k = m / 2;
    let splits = choose(m as u64, k as u64);
    if splits > SPLIT_CAP {
        return Err(Error::StateSpaceTooLarge {
            size: splits as f64,
            limit: SPLIT_CAP as f64,
        });
    }

    // one representative per class: the subset containing position 0
    let reps: Vec<Vec<usize>> = k_subsets(m - 1, k - 1)
        .into_iter()
        .map(|rest| std::iter::once(0).chain(rest.into_iter().map(|p| p + 1)).collect())
        .collect();
    let images: Vec<Vec<(usize, C64)>> = reps.iter().map(|c| psi(sigma_union, alpha, c, n)).collect();
    let scale = images
        .iter()
        .flat_map(|im| im.iter().map(|p| p.1.norm()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);

    let mut by_support: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for (i, im) in images.iter().enumerate() {
        let supp: Vec<usize> = im
            .iter()
            .filter(|p| p.1.norm() > IMAGE_TOL * scale)
            .map(|p| p.0)
            .collect();
        by_support.entry(supp).or_default().push(i);
    }
    let value_at = |im: &[(usize, C64)], idx: usize| {
        im.iter().find(|p| p.0 == idx).map(|p| p.1).unwrap_or_default()
    };

    let mut counterexample = None;
    let mut boundary_cases = 0;
    let mut groups: Vec<(&Vec<usize>, &Vec<usize>)> = by_support.iter().collect();
    groups.sort();
    for (supp, members) in groups {
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                let diff = supp
                    .iter()
                    .map(|&idx| (value_at(&images[i], idx) - value_at(&images[j], idx)).norm())
                    .fold(0.0, f64::max)
                    / scale;
                if diff <= IMAGE_TOL {
                    if counterexample.is_none() {
                        let to_idx = |c: &[usize]| c.iter().map(|&p| sigma_union[p]).collect::<Vec<_>>();
                        counterexample = Some((to_idx(&reps[i]), to_idx(&reps[j])));
                    }
                } else if diff < 1e-6 {
                    boundary_cases += 1;
                }
            }
        }
    }
    Ok(InjectivityReport {
        injective: counterexample.is_none(),
        counterexample,
        classes: reps.len(),
        boundary_cases,
    })
}

/// Random nonzero complex values for injectivity checks.
pub fn random_alpha<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<C64> {
    (0..m)
        .map(|_| loop {
            let v = complex_normal(rng, 1.0);
            if v.norm() > 0.0 {
                break v;
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportConditioning {
    /// Supports drawn uniformly among disjoint pairs.
    Disjoint,
    /// Independent uniform supports, overlaps allowed (values add).
    Unconditioned,
}

/// Exact `H(beta_A | obs)` in nats for a discretized model.
///
/// Values are uniform on the grid `{1, ..., L} / L`. The eavesdropper sees
/// `beta_A + gamma beta_B` at the grid resolution: entry `i` is observed as
/// level `a_i + round(gamma b_i)` (half rounds up), where `a_i`, `b_i` are the
/// grid levels of the two signals (zero off-support).
pub fn brute_force_conditional_entropy(
    n: usize,
    k: usize,
    gamma: f64,
    alpha_levels: usize,
    conditioning: SupportConditioning,
) -> Result<f64> {
    if k == 0 || alpha_levels == 0 || !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::param("need k >= 1, alpha_levels >= 1 and finite gamma >= 0"));
    }
    if conditioning == SupportConditioning::Disjoint && 2 * k > n {
        return Err(Error::param("disjoint supports need 2k <= n"));
    }
    if k > n {
        return Err(Error::param("need k <= n"));
    }
    let levels = alpha_levels;
    let pairs = match conditioning {
        SupportConditioning::Disjoint => ln_choose(n as u64, 2 * k as u64) + ln_choose(2 * k as u64, k as u64),
        SupportConditioning::Unconditioned => 2.0 * ln_choose(n as u64, k as u64),
    }
    .exp();
    let size = pairs * (levels as f64).powi(2 * k as i32);
    if size > ENUMERATION_CAP {
        return Err(Error::StateSpaceTooLarge {
            size,
            limit: ENUMERATION_CAP,
        });
    }

    let scaled: Vec<u64> = (0..=levels).map(|b| (gamma * b as f64 + 0.5).floor() as u64).collect();
    let obs_base = levels as u128 + scaled[levels] as u128 + 1;
    let a_base = levels as u128 + 1;
    if (n as f64) * (obs_base as f64).log2() > 126.0 {
        return Err(Error::param("observation alphabet too large to encode"));
    }
    // observations of distinct unions never coincide unless a B entry rounds to zero
    let vanishing = scaled[1] == 0;

    let total = size.round();
    let mut entropy = 0.0;
    let mut map: HashMap<u128, Vec<(u128, u32)>> = HashMap::new();
    let flush = |map: &mut HashMap<u128, Vec<(u128, u32)>>, entropy: &mut f64| {
        for counts in map.values() {
            let n_obs: u32 = counts.iter().map(|c| c.1).sum();
            for &(_, c) in counts {
                let c = c as f64;
                *entropy -= c / total * (c / n_obs as f64).ln();
            }
        }
        map.clear();
    };

    let unions: Vec<Vec<usize>> = match conditioning {
        SupportConditioning::Disjoint => k_subsets(n, 2 * k),
        SupportConditioning::Unconditioned => (k..=(2 * k).min(n)).flat_map(|u| k_subsets(n, u)).collect(),
    };
    let mut a_levels = vec![0u64; k];
    let mut b_levels = vec![0u64; k];
    for union in unions {
        let u = union.len();
        let picks = k_subsets(u, k);
        for sa in &picks {
            for sb in &picks {
                let covers = {
                    let mut hit = vec![false; u];
                    sa.iter().chain(sb).for_each(|&p| hit[p] = true);
                    hit.iter().all(|&h| h)
                };
                if !covers {
                    continue;
                }
                if conditioning == SupportConditioning::Disjoint && sa.iter().any(|p| sb.contains(p)) {
                    continue;
                }
                for_each_levels(&mut a_levels, levels, &mut |a| {
                    let a_key = sa
                        .iter()
                        .zip(a)
                        .fold(0u128, |acc, (&p, &l)| acc + l as u128 * a_base.pow(union[p] as u32));
                    for_each_levels(&mut b_levels, levels, &mut |b| {
                        let mut obs = vec![0u64; u];
                        for (&p, &l) in sa.iter().zip(a) {
                            obs[p] += l;
                        }
                        for (&p, &l) in sb.iter().zip(b) {
                            obs[p] += scaled[l as usize];
                        }
                        let key = union
                            .iter()
                            .zip(&obs)
                            .fold(0u128, |acc, (&i, &o)| acc + o as u128 * obs_base.pow(i as u32));
                        let entry = map.entry(key).or_default();
                        match entry.iter_mut().find(|e| e.0 == a_key) {
                            Some(e) => e.1 += 1,
                            None => entry.push((a_key, 1)),
                        }
                    });
                });
            }
        }
        if !vanishing {
            flush(&mut map, &mut entropy);
        }
    }
    flush(&mut map, &mut entropy);
    Ok(entropy.max(0.0))
}

/// Calls `f` with every vector in `{1..=levels}^len`, reusing `buf`.
fn for_each_levels(buf: &mut Vec<u64>, levels: usize, f: &mut dyn FnMut(&[u64])) {
    let len = buf.len();
    buf.iter_mut().for_each(|v| *v = 1);
    loop {
        f(buf);
        let mut i = 0;
        loop {
            if i == len {
                return;
            }
            if buf[i] < levels as u64 {
                buf[i] += 1;
                break;
            }
            buf[i] = 1;
            i += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum SeparationMethod {
    ClosedFormBound,
    /// Exact value by integrating the order-statistics densities.
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    pub value: f64,
    /// Standard error for Monte Carlo estimates, zero otherwise.
    pub stderr: f64,
}

/// `P((1 - delta) max_{i<k} a_i <= min_{i>=k} a_i)` for `2k` i.i.d.
/// uniform `[0, 1]` values, or its closed-form upper bound.
pub fn ml_separation_prob(k: usize, delta: f64, method: SeparationMethod) -> Result<Probability> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::param("delta must lie in [0, 1)"));
    }
    match method {
        SeparationMethod::ClosedFormBound => Ok(Probability {
            value: separation_bound(k, delta),
            stderr: 0.0,
        }),
        SeparationMethod::Exact => {
            // k / g^k * int_0^g x^k (1-x)^(k-1) dx + delta^k, with g = 1 - delta
            let g = 1.0 - delta;
            let mut integral = 0.0;
            for j in 0..k {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let p = (k + j + 1) as i32;
                integral += sign * choose(k as u64 - 1, j as u64) as f64 * g.powi(p) / p as f64;
            }
            Ok(Probability {
                value: k as f64 / g.powi(k as i32) * integral + delta.powi(k as i32),
                stderr: 0.0,
            })
        }
        SeparationMethod::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::param("samples must be positive"));
            }
            let mut rng = crate::rng::seeded(seed);
            let mut hits = 0usize;
            for _ in 0..samples {
                let mut max_a: f64 = 0.0;
                for _ in 0..k {
                    max_a = max_a.max(rng.random::<f64>());
                }
                let mut min_b: f64 = 1.0;
                for _ in 0..k {
                    min_b = min_b.min(rng.random::<f64>());
                }
                if (1.0 - delta) * max_a <= min_b {
                    hits += 1;
                }
            }
            let p = hits as f64 / samples as f64;
            Ok(Probability {
                value: p,
                stderr: (p * (1.0 - p) / samples as f64).sqrt(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binomials() {
        assert_eq!(choose(6, 3), 20);
        assert_eq!(choose(4, 5), 0);
        assert!((ln_choose(8, 4) - 70f64.ln()).abs() < 1e-12);
        assert_eq!(k_subsets(4, 2).len(), 6);
        assert_eq!(k_subsets(3, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn h_gamma_examples() {
        assert!((h_gamma(3, 1.0).unwrap() - 20f64.ln()).abs() < 1e-12);
        // near gamma = 1 the bound tracks ln C(2k,k) - k delta
        let k = 20;
        let delta = 1e-3;
        let approx = ln_choose(2 * k as u64, k as u64) - k as f64 * delta;
        assert!((h_gamma(k, 1.0 - delta).unwrap() - approx).abs() < 0.05);
        assert!(h_gamma(4, 1e-6).unwrap() < 0.0);
        assert!(h_gamma(4, 0.0).is_err());
        assert!(h_gamma(4, 1.5).is_err());
    }

    #[test]
    fn h_noise_examples() {
        assert_eq!(h_noise(5, 4, 0.0, 1.0).unwrap(), 0.0);
        let (s, k, r) = (3usize, 4usize, 1e-4f64);
        let approx = 2.0 * (k * s) as f64 * r;
        assert!((h_noise(s, k, r.sqrt(), 1.0).unwrap() - approx).abs() < 1e-6);
        // s=3, k=4, ratio 0.25 -> 3 ln(1 + 2) = 3 ln 3
        assert!((h_noise(3, 4, 0.5, 1.0).unwrap() - 3.0 * 3f64.ln()).abs() < 1e-14);
        assert!(h_noise(3, 4, 0.5, 0.0).is_err());
    }

    #[test]
    fn noiseless_bound_examples() {
        let b = noiseless_bound(17 * 256, 4, 1.0).unwrap();
        assert!(b.vacuous);
        assert_eq!(b.raw, 0.0);
        let b = noiseless_bound(1_000_000, 4, 1.0).unwrap();
        let expected = (1.0 - 17.0 * 256.0 / 1e6) * (70f64.ln() - 1.0);
        assert!((b.raw - expected).abs() < 1e-12);
        assert!(!b.vacuous);
        assert!(noiseless_bound(1_000_000, 4, 1e-6).unwrap().vacuous);
    }

    #[test]
    fn key_rate_examples() {
        let r = key_rate(4, 3, 1.0, 0.0, 1.0, 0.999_999).unwrap();
        assert!((r.rate - 70f64.ln()).abs() < 1e-5);
        let r = key_rate(4, 30, 1.0, 1.0, 0.1, 0.5).unwrap();
        assert!(!r.achievable);
        let r = key_rate(4, 3, 0.9, 0.05, 0.5, 0.7).unwrap();
        let expected = 0.7 * h_gamma(4, 0.9).unwrap() - 3.0 * (8.0 * 0.01f64).ln_1p();
        assert!((r.rate - expected).abs() < 1e-12);
        assert!(key_rate(4, 3, 0.9, 0.05, 0.5, 1.0).is_err());
    }

    #[test]
    fn report_identity() {
        let rep = EntropyReport::compute(EntropyParams {
            n: 1 << 20,
            k: 4,
            s: 3,
            gamma: 0.8,
            varsigma: 0.1,
            sigma: 0.3,
            beta_slack: 0.9,
        })
        .unwrap();
        assert!((rep.noisy_bound.raw - (rep.noiseless_bound.raw - rep.h_noise)).abs() < 1e-12);
    }

    #[test]
    fn sumset_examples() {
        let w = check_sumset(&[0, 1], &[0, 3], 8).unwrap();
        assert_eq!(w.sigma_union, vec![0, 1, 3]);
        assert!(!w.event_e);
        assert!(w.reason.unwrap().contains("union"));

        let w = sumset_event(&[0, 1, 3, 7], 2, 13);
        assert_eq!(w.sumset_size, 6);
        assert!(w.event_e);

        let w = sumset_event(&[0, 1, 2, 3], 2, 13);
        assert!(!w.event_e);
    }

    #[test]
    fn event_probability_small_cases() {
        // k = 1: E holds iff the two indices differ
        let p = exact_event_prob(7, 1).unwrap();
        assert!((p - 1.0 / 7.0).abs() < 1e-12);
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let est = estimate_event_prob(7, 1, 100_000, &mut r).unwrap();
        assert!((est.p_hat - p).abs() < 4.0 * est.stderr.max(1e-4));
        let big = estimate_event_prob(1 << 40, 2, 1000, &mut r).unwrap();
        assert_eq!(big.p_hat, 0.0);
    }

    #[test]
    fn psi_is_symmetric_under_complement() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let sigma = [0usize, 1, 3, 7];
        let alpha = random_alpha(4, &mut r);
        let a = psi(&sigma, &alpha, &[0, 2], 13);
        let b = psi(&sigma, &alpha, &[1, 3], 13);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).norm() < 1e-14);
        }
    }

    #[test]
    fn injectivity_on_sidon_set() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let rep = verify_injectivity(&[0, 1, 3, 7], &random_alpha(4, &mut r), 13).unwrap();
        assert!(rep.injective);
        assert_eq!(rep.classes, 3);
    }

    #[test]
    fn injectivity_reports_structured_collision() {
        // {0,1,3,4} has repeated pairwise sums mod 6; with these signs the
        // splits {0,1} and {0,4} both map to -e_3 + e_5
        let one = C64::new(1.0, 0.0);
        let alpha = vec![-one, one, one, one];
        assert!(!sumset_event(&[0, 1, 3, 4], 2, 6).event_e);
        let rep = verify_injectivity(&[0, 1, 3, 4], &alpha, 6).unwrap();
        assert!(!rep.injective);
        assert_eq!(rep.counterexample, Some((vec![0, 1], vec![0, 4])));
    }

    #[test]
    fn injectivity_rejects_bad_input() {
        let ones = vec![C64::new(1.0, 0.0); 3];
        assert!(verify_injectivity(&[0, 1, 2], &ones, 8).is_err());
        let ones = vec![C64::new(1.0, 0.0); 4];
        assert!(verify_injectivity(&[0, 1, 1, 2], &ones, 8).is_err());
    }

    #[test]
    fn entropy_oracle_degenerate_cases() {
        let h = brute_force_conditional_entropy(6, 2, 1.0, 1, SupportConditioning::Disjoint).unwrap();
        assert!((h - 6f64.ln()).abs() < 1e-12);
        let h = brute_force_conditional_entropy(6, 2, 0.0, 3, SupportConditioning::Disjoint).unwrap();
        assert!(h.abs() < 1e-12);
        assert!(brute_force_conditional_entropy(40, 4, 1.0, 8, SupportConditioning::Disjoint).is_err());
    }

    #[test]
    fn entropy_oracle_unconditioned_runs() {
        let h = brute_force_conditional_entropy(5, 1, 1.0, 2, SupportConditioning::Unconditioned).unwrap();
        assert!(h > 0.0 && h < (5f64).ln());
    }

    #[test]
    fn separation_probability_methods_agree_at_zero_delta() {
        for k in 1..=4 {
            let bound = ml_separation_prob(k, 0.0, SeparationMethod::ClosedFormBound).unwrap().value;
            let exact = ml_separation_prob(k, 0.0, SeparationMethod::Exact).unwrap().value;
            let inv = 1.0 / choose(2 * k as u64, k as u64) as f64;
            assert!((bound - inv).abs() < 1e-14);
            assert!((exact - inv).abs() < 1e-12);
        }
    }

    #[test]
    fn separation_exact_below_bound() {
        for k in 1..=8 {
            for delta in [0.05, 0.1, 0.3, 0.5, 0.9] {
                let bound = ml_separation_prob(k, delta, SeparationMethod::ClosedFormBound).unwrap().value;
                let exact = ml_separation_prob(k, delta, SeparationMethod::Exact).unwrap().value;
                assert!(exact <= bound + 1e-12, "k={k} delta={delta}: {exact} > {bound}");
            }
        }
    }
}
