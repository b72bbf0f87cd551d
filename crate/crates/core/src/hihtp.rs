//! Hierarchical hard thresholding pursuit for `(s, k)`-sparse tensors.
//!
//! Each iteration takes a gradient step on `||y - C(W)||^2`, projects onto
//! tensors with at most `k` nonzero columns that are each at most `s`-sparse,
//! and refits by least squares on the selected support.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::{LiftedTensor, MeasurementOp};
use crate::vector::{self, C64, ZERO};

/// Singular values below `RANK_TOL * sigma_max` are treated as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum StepRule {
    /// Constant gradient step.
    Fixed(f64),
    /// Exact line search along the gradient, `||g||^2 / ||C(g)||^2`.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HihtpConfig {
    /// Nonzeros kept per column (channel sparsity).
    pub s: usize,
    /// Nonzero columns kept (signal sparsity).
    pub k: usize,
    pub max_iter: usize,
    /// Stop once `||y - C(W)|| <= tol * ||y||`.
    pub tol: f64,
    pub step: StepRule,
}

impl HihtpConfig {
    pub fn new(s: usize, k: usize) -> Self {
        Self {
            s,
            k,
            max_iter: 100,
            tol: 1e-10,
            step: StepRule::Fixed(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || self.k == 0 {
            return Err(Error::param("sparsity levels s and k must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol must be positive"));
        }
        if let StepRule::Fixed(a) = self.step {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::param("fixed step size must be positive and finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ResidualTolerance,
    SupportStable,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Residual of the thresholded gradient step before refitting.
    pub projected_residual: f64,
    /// Residual after the least-squares refit.
    pub residual: f64,
    pub support_changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HihtpResult {
    pub tensor: LiftedTensor,
    pub support: Vec<(usize, usize)>,
    pub iterations: usize,
    pub residual: f64,
    pub stop: StopReason,
    pub trace: Vec<IterationRecord>,
}

/// Best `(s, k)`-sparse approximation: keep the `s` largest entries of every
/// column, then the `k` columns with the largest remaining norm. Ties go to
/// the lowest index. The returned support always has
/// `min(s, mu) * min(k, n)` positions, ordered by column then row.
pub fn project_sk(w: &LiftedTensor, s: usize, k: usize) -> (LiftedTensor, Vec<(usize, usize)>) {
    let (mu, n) = (w.mu(), w.n());
    let s = s.min(mu);
    let k = k.min(n);

    let mut rows_per_col: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut energy: Vec<(usize, f64)> = Vec::with_capacity(n);
    for col in 0..n {
        let column = w.column(col);
        let mut idx: Vec<usize> = (0..mu).collect();
        // stable sort keeps lower row first among equal magnitudes
        idx.sort_by(|&a, &b| column[b].norm_sqr().total_cmp(&column[a].norm_sqr()));
        idx.truncate(s);
        idx.sort_unstable();
        energy.push((col, idx.iter().map(|&r| column[r].norm_sqr()).sum()));
        rows_per_col.push(idx);
    }
    energy.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut cols: Vec<usize> = energy.iter().take(k).map(|e| e.0).collect();
    cols.sort_unstable();

    let mut out = LiftedTensor::zeros(mu, n);
    let mut support = Vec::with_capacity(s * k);
    for col in cols {
        for &row in &rows_per_col[col] {
            out.set(row, col, w.get(row, col));
            support.push((row, col));
        }
    }
    (out, support)
}

/// Outcome of a support-restricted least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    pub tensor: LiftedTensor,
    pub residual: f64,
    /// `sigma_max / sigma_min` of the restricted operator (infinite when singular).
    pub condition: f64,
    /// Set when the restricted operator has numerical rank below `|support|`;
    /// the minimum-norm solution is returned in that case.
    pub rank_deficient: bool,
}

/// Minimizes `||y - C(W)||` over tensors supported on `support`.
pub fn restricted_least_squares(
    op: &MeasurementOp,
    y: &[C64],
    support: &[(usize, usize)],
) -> Result<LeastSquaresFit> {
    let (mu, n) = (op.mu(), op.n());
    if y.len() != mu {
        return Err(Error::Dimension {
            context: "least-squares measurement",
            expected: mu,
            got: y.len(),
        });
    }
    if let Some(&(r, c)) = support.iter().find(|&&(r, c)| r >= mu || c >= n) {
        return Err(Error::param(format!("support position ({r}, {c}) outside {mu}x{n}")));
    }
    let mut tensor = LiftedTensor::zeros(mu, n);
    if support.is_empty() {
        return Ok(LeastSquaresFit {
            tensor,
            residual: vector::norm(y),
            condition: 1.0,
            rank_deficient: false,
        });
    }

    let a = op.restricted_matrix(support);
    let b = DVector::from_column_slice(y);
    let (coeffs, condition, rank_deficient) = min_norm_solve(a, &b)?;
    for (&(row, col), &v) in support.iter().zip(coeffs.iter()) {
        tensor.set(row, col, v);
    }
    let residual = vector::norm(&vector::sub(y, &op.apply(&tensor)?));
    Ok(LeastSquaresFit {
        tensor,
        residual,
        condition,
        rank_deficient,
    })
}

fn min_norm_solve(a: DMatrix<C64>, b: &DVector<C64>) -> Result<(DVector<C64>, f64, bool)> {
    let cols = a.ncols();
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = if sv.len() < cols {
        0.0
    } else {
        sv.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let cutoff = RANK_TOL * smax;
    let rank = sv.iter().filter(|&&s| s > cutoff).count();
    let x = svd
        .solve(b, cutoff.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Factorization(e.to_string()))?;
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    Ok((x, condition, rank < cols))
}

/// Runs HiHTP from `init` (zero when `None`).
pub fn solve(
    op: &MeasurementOp,
    y: &[C64],
    cfg: &HihtpConfig,
    init: Option<&LiftedTensor>,
) -> Result<HihtpResult> {
    cfg.validate()?;
    let (mu, n) = (op.mu(), op.n());
    if y.len() != mu {
        return Err(Error::Dimension {
            context: "HiHTP measurement",
            expected: mu,
            got: y.len(),
        });
    }
    if !vector::all_finite(y) {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut w = match init {
        Some(w0) => {
            if (w0.mu(), w0.n()) != (mu, n) {
                return Err(Error::Dimension {
                    context: "HiHTP initial tensor",
                    expected: mu * n,
                    got: w0.mu() * w0.n(),
                });
            }
            w0.clone()
        }
        None => LiftedTensor::zeros(mu, n),
    };
    let y_norm = vector::norm(y);
    let mut residual_vec = vector::sub(y, &op.apply(&w)?);
    let mut prev_support: Option<Vec<(usize, usize)>> = None;
    let mut trace = Vec::new();

    for iteration in 1..=cfg.max_iter {
        let grad = op.apply_adjoint(&residual_vec)?;
        let step = match cfg.step {
            StepRule::Fixed(a) => a,
            StepRule::Adaptive => {
                // line search along the gradient restricted to the current
                // support (or the support the gradient itself points to)
                let current = w.support();
                let g = if current.is_empty() {
                    project_sk(&grad, cfg.s, cfg.k).0
                } else {
                    restrict(&grad, &current)
                };
                let g2 = g.norm().powi(2);
                let cg2 = vector::norm_sqr(&op.apply(&g)?);
                if cg2 > 0.0 {
                    g2 / cg2
                } else {
                    1.0
                }
            }
        };
        let half = w.axpy(C64::new(step, 0.0), &grad)?;
        if !half.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        let (projected, support) = project_sk(&half, cfg.s, cfg.k);
        let projected_residual = vector::norm(&vector::sub(y, &op.apply(&projected)?));
        let fit = restricted_least_squares(op, y, &support)?;
        if !fit.tensor.is_finite() || !fit.residual.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        w = fit.tensor;
        residual_vec = vector::sub(y, &op.apply(&w)?);
        let residual = vector::norm(&residual_vec);
        let support_changed = prev_support.as_ref() != Some(&support);
        trace.push(IterationRecord {
            iteration,
            projected_residual,
            residual,
            support_changed,
        });

        let stop = if residual <= cfg.tol * y_norm {
            Some(StopReason::ResidualTolerance)
        } else if !support_changed {
            Some(StopReason::SupportStable)
        } else if iteration == cfg.max_iter {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if let Some(stop) = stop {
            return Ok(HihtpResult {
                tensor: w,
                support,
                iterations: iteration,
                residual,
                stop,
                trace,
            });
        }
        prev_support = Some(support);
    }
    unreachable!("loop returns on the final iteration")
}

/// Restricts `w` to the positions in `support`, zeroing everything else.
pub fn restrict(w: &LiftedTensor, support: &[(usize, usize)]) -> LiftedTensor {
    let mut out = LiftedTensor::zeros(w.mu(), w.n());
    for &(r, c) in support {
        out.set(r, c, w.get(r, c));
    }
    out
}

/// Is `w` at most `(s, k)`-sparse (<= k nonzero columns, each <= s nonzeros)?
pub fn is_sk_sparse(w: &LiftedTensor, s: usize, k: usize) -> bool {
    let cols = w.nonzero_columns();
    cols.len() <= k
        && cols
            .iter()
            .all(|&c| w.column(c).iter().filter(|v| **v != ZERO).count() <= s)
}
