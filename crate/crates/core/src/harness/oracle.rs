use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::rows::write_csv;
use crate::error::Result;
use crate::rng::{derive_seed, seeded};
use crate::security::{
    brute_force_conditional_entropy, choose, estimate_event_prob, h_gamma, k_subsets, ml_separation_prob,
    random_alpha, sumset_event, verify_injectivity, SeparationMethod, SupportConditioning,
};
use crate::vector::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleSuite {
    /// Reduced sample sizes, for smoke tests.
    Quick,
    Full,
}

/// One verification with its margin. `passed` is decided against
/// `threshold` in the direction stated by `detail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub closed_form: Option<f64>,
    pub monte_carlo: Option<f64>,
    pub stderr: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub suite: OracleSuite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn failures(&self) -> impl Iterator<Item = &OracleCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn separation_checks(suite: OracleSuite, seed: u64, out: &mut Vec<OracleCheck>) -> Result<()> {
    let samples = match suite {
        OracleSuite::Quick => 100_000,
        OracleSuite::Full => 1_000_000,
    };
    for (i, k) in [2usize, 3, 4].into_iter().enumerate() {
        for (j, delta) in [0.0, 0.1, 0.3, 0.5].into_iter().enumerate() {
            let bound = ml_separation_prob(k, delta, SeparationMethod::ClosedFormBound)?.value;
            let mc = ml_separation_prob(
                k,
                delta,
                SeparationMethod::MonteCarlo {
                    samples,
                    seed: derive_seed(seed, 1, (i * 4 + j) as u64),
                },
            )?;
            let mut passed = mc.value <= bound + 3.0 * mc.stderr;
            let mut detail = format!("monte carlo <= bound + 3 stderr ({samples} samples)");
            if delta == 0.0 {
                let exact = 1.0 / choose(2 * k as u64, k as u64) as f64;
                let eq = (mc.value - exact).abs() <= 3.0 * mc.stderr;
                passed &= eq;
                detail.push_str(&format!("; |mc - 1/C(2k,k)| = {:.2e} within 3 stderr: {eq}", (mc.value - exact).abs()));
            }
            out.push(OracleCheck {
                name: format!("separation_bound k={k} delta={delta}"),
                passed,
                value: mc.value,
                threshold: bound + 3.0 * mc.stderr,
                closed_form: Some(bound),
                monte_carlo: Some(mc.value),
                stderr: Some(mc.stderr),
                detail,
            });
        }
    }
    Ok(())
}

/// Exhaustive injectivity over every 4-subset of `[n]` satisfying the
/// sum-set event, `draws` random value vectors each.
pub fn injectivity_sweep(n: usize, draws: usize, seed: u64) -> Result<(usize, usize, Option<String>)> {
    let mut rng = seeded(seed);
    let (mut tested, mut collisions) = (0, 0);
    let mut first = None;
    for sigma in k_subsets(n, 4) {
        if !sumset_event(&sigma, 2, n).event_e {
            continue;
        }
        for _ in 0..draws {
            let rep = verify_injectivity(&sigma, &random_alpha(4, &mut rng), n)?;
            tested += 1;
            if let Some((x, y)) = rep.counterexample {
                collisions += 1;
                first.get_or_insert(format!("sigma={sigma:?}: {x:?} ~ {y:?}"));
            }
        }
    }
    Ok((tested, collisions, first))
}

fn injectivity_checks(seed: u64, out: &mut Vec<OracleCheck>) -> Result<()> {
    let (tested, collisions, first) = injectivity_sweep(13, 5, derive_seed(seed, 2, 0))?;
    out.push(OracleCheck {
        name: "injectivity n=13 k=2".into(),
        passed: collisions == 0 && tested > 0,
        value: collisions as f64,
        threshold: 0.0,
        closed_form: None,
        monte_carlo: None,
        stderr: None,
        detail: match first {
            Some(c) => format!("{collisions} collisions in {tested} draws; first {c}"),
            None => format!("no collisions in {tested} draws"),
        },
    });

    // negative control: repeated pairwise sums with signed values collide
    let one = C64::new(1.0, 0.0);
    let rep = verify_injectivity(&[0, 1, 3, 4], &[-one, one, one, one], 6)?;
    out.push(OracleCheck {
        name: "injectivity negative control".into(),
        passed: rep.counterexample.is_some(),
        value: if rep.injective { 0.0 } else { 1.0 },
        threshold: 1.0,
        closed_form: None,
        monte_carlo: None,
        stderr: None,
        detail: match rep.counterexample {
            Some((x, y)) => format!("counterexample reported: {x:?} ~ {y:?} on sigma=[0, 1, 3, 4], n=6"),
            None => "expected a collision, none reported".into(),
        },
    });
    Ok(())
}

fn entropy_checks(suite: OracleSuite, out: &mut Vec<OracleCheck>) -> Result<()> {
    let (n, levels) = match suite {
        OracleSuite::Quick => (6, 4),
        OracleSuite::Full => (10, 8),
    };
    for gamma in [0.8, 0.9, 1.0] {
        let h = brute_force_conditional_entropy(n, 2, gamma, levels, SupportConditioning::Disjoint)?;
        let bound = h_gamma(2, gamma)?;
        out.push(OracleCheck {
            name: format!("entropy n={n} k=2 levels={levels} gamma={gamma}"),
            passed: h >= bound - 0.1,
            value: h,
            threshold: bound - 0.1,
            closed_form: Some(bound),
            monte_carlo: None,
            stderr: None,
            detail: "brute force >= closed form - 0.1 nat".into(),
        });
    }
    let h = brute_force_conditional_entropy(n, 2, 1.0, 1, SupportConditioning::Disjoint)?;
    let exact = 6f64.ln();
    out.push(OracleCheck {
        name: format!("entropy n={n} k=2 levels=1 gamma=1"),
        passed: (h - exact).abs() <= 1e-12,
        value: h,
        threshold: exact,
        closed_form: Some(exact),
        monte_carlo: None,
        stderr: None,
        detail: "single value level: equals ln C(4,2)".into(),
    });
    Ok(())
}

fn event_checks(suite: OracleSuite, seed: u64, out: &mut Vec<OracleCheck>) -> Result<()> {
    let trials = match suite {
        OracleSuite::Quick => 10_000,
        OracleSuite::Full => 100_000,
    };
    for (i, (k, n)) in [(2usize, 512usize), (3, 8192)].into_iter().enumerate() {
        let mut rng = seeded(derive_seed(seed, 3, i as u64));
        let est = estimate_event_prob(n, k, trials, &mut rng)?;
        out.push(OracleCheck {
            name: format!("event probability k={k} n={n}"),
            passed: est.p_hat <= est.bound,
            value: est.p_hat,
            threshold: est.bound,
            closed_form: Some(est.bound),
            monte_carlo: Some(est.p_hat),
            stderr: Some(est.stderr),
            detail: format!("empirical P(E^c) <= 17k^4/n over {trials} draws"),
        });
    }
    Ok(())
}

/// Runs every brute-force verification and reports pass/fail with margins.
pub fn run_oracle_suite(suite: OracleSuite, seed: u64) -> Result<OracleReport> {
    let mut checks = Vec::new();
    separation_checks(suite, seed, &mut checks)?;
    injectivity_checks(seed, &mut checks)?;
    entropy_checks(suite, &mut checks)?;
    event_checks(suite, seed, &mut checks)?;
    Ok(OracleReport {
        suite,
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Writes `oracle_suite.json` and `oracle_suite.csv`.
pub fn write_oracle_report(report: &OracleReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json = dir.join("oracle_suite.json");
    let csv = dir.join("oracle_suite.csv");
    std::fs::write(&json, serde_json::to_string_pretty(report)? + "\n")?;
    write_csv(&csv, &report.checks)?;
    Ok(vec![json, csv])
}
