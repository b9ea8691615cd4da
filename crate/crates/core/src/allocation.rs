//! Portfolio weight solvers: risk parity, maximum risk diversification, and
//! complex valued risk diversification, plus the shared simplex-constrained
//! optimizer and a brute-force grid oracle for testing.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk_models::{CovarianceKind, HermitianCovariance, SpectralDecomposition};

/// Eigenvalues at or below this fraction of the largest are treated as null
/// directions and contribute exactly zero.
const NULL_EIGENVALUE_FACTOR: f64 = 1e-12;

/// Portfolio weights on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub assets: Vec<String>,
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(assets: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if assets.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} assets but {} weights",
                assets.len(),
                weights.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { assets, weights })
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.weights.clone())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("asset,weight\n");
        for (a, w) in self.assets.iter().zip(&self.weights) {
            out.push_str(&format!("{a},{w}\n"));
        }
        out
    }
}

/// Euler decomposition of portfolio volatility into per-asset shares.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskContribution {
    /// Portfolio volatility, per-period units.
    pub sigma: f64,
    /// Per-asset contributions; these sum to sigma.
    pub contributions: Vec<f64>,
}

/// Eigen-space risk distribution and its entropy for a given weight vector.
#[derive(Debug, Clone)]
pub struct DiversificationProfile {
    pub transformed_weights: Vec<Complex64>,
    pub contributions: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    /// Long-only, fully invested: w >= 0, sum w = 1.
    #[default]
    LongOnlySimplex,
    /// Only sum w = 1; weights may be negative.
    SumToOneOnly,
}

/// Feasible set for the weight solvers.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub kind: ConstraintKind,
    /// Optional per-asset (lower, upper) bounds on top of the kind.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl ConstraintSet {
    pub fn long_only() -> Self {
        Self::default()
    }

    fn effective_bounds(&self, m: usize) -> Result<Option<Vec<(f64, f64)>>> {
        let base = match self.kind {
            ConstraintKind::LongOnlySimplex => (0.0, f64::INFINITY),
            ConstraintKind::SumToOneOnly => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let bounds = match &self.bounds {
            None => {
                if self.kind == ConstraintKind::LongOnlySimplex {
                    return Ok(None); // plain simplex, exact projection
                }
                vec![base; m]
            }
            Some(b) => {
                if b.len() != m {
                    return Err(Error::DimensionMismatch(format!(
                        "{} bounds for {} assets",
                        b.len(),
                        m
                    )));
                }
                b.iter()
                    .map(|&(lo, hi)| (lo.max(base.0), hi.min(base.1)))
                    .collect()
            }
        };
        let lo_sum: f64 = bounds.iter().map(|b| b.0.max(-1e300)).sum();
        let hi_sum: f64 = bounds.iter().map(|b| b.1.min(1e300)).sum();
        if lo_sum > 1.0 + 1e-12 || hi_sum < 1.0 - 1e-12 {
            return Err(Error::Validation(
                "infeasible constraint set: bounds do not admit sum(w) = 1".into(),
            ));
        }
        Ok(Some(bounds))
    }

    /// Euclidean projection onto the feasible set.
    pub fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        match self.effective_bounds(y.len())? {
            None => Ok(project_simplex(y)),
            Some(bounds) => {
                if self.kind == ConstraintKind::SumToOneOnly && self.bounds.is_none() {
                    // Pure hyperplane projection has a closed form.
                    let shift = (y.sum() - 1.0) / y.len() as f64;
                    return Ok(y.map(|v| v - shift));
                }
                Ok(project_box_simplex(y, &bounds))
            }
        }
    }
}

/// Exact projection onto {w : w >= 0, sum w = 1} via the sort-based method.
fn project_simplex(y: &DVector<f64>) -> DVector<f64> {
    let mut sorted: Vec<f64> = y.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    y.map(|v| (v - tau).max(0.0))
}

/// Projection onto {w : lo <= w <= hi, sum w = 1} by bisection on the
/// hyperplane multiplier.
fn project_box_simplex(y: &DVector<f64>, bounds: &[(f64, f64)]) -> DVector<f64> {
    let clamp_sum = |tau: f64| -> f64 {
        y.iter()
            .zip(bounds)
            .map(|(&v, &(lo, hi))| (v - tau).clamp(lo, hi))
            .sum()
    };
    let spread = y.amax().max(1.0) + bounds.iter().map(|b| b.0.abs().min(1e300).max(b.1.abs().min(1e300))).fold(1.0, f64::max);
    let mut lo = -spread - 1.0;
    let mut hi = spread + 1.0;
    while clamp_sum(lo) < 1.0 {
        lo = lo * 2.0 - 1.0;
    }
    while clamp_sum(hi) > 1.0 {
        hi = hi * 2.0 + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clamp_sum(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    DVector::from_iterator(
        y.len(),
        y.iter()
            .zip(bounds)
            .map(|(&v, &(lo, hi))| (v - tau).clamp(lo, hi)),
    )
}

/// Options shared by all iterative solvers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Convergence tolerance on the projected-gradient norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Multi-start count: the uniform point plus seeded Dirichlet draws.
    pub num_starts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 10_000,
            num_starts: 8,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartReport {
    pub start: usize,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport {
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub residual: f64,
    pub starts: Vec<StartReport>,
}

/// A solved weight vector together with its convergence report.
#[derive(Debug, Clone)]
pub struct Solution {
    pub weights: DVector<f64>,
    pub report: SolverReport,
}

/// Portfolio variance w' Sigma w.
pub fn portfolio_variance(w: &DVector<f64>, cov: &HermitianCovariance) -> Result<f64> {
    if cov.kind != CovarianceKind::Real {
        return Err(Error::Validation(
            "portfolio variance requires a real-kind covariance".into(),
        ));
    }
    if w.len() != cov.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weight length {} vs covariance dim {}",
            w.len(),
            cov.dim()
        )));
    }
    let sigma = cov.real_matrix();
    Ok((w.transpose() * &sigma * w)[(0, 0)])
}

/// Per-asset risk contributions sigma_m = w_m (Sigma w)_m / sigma.
pub fn risk_contributions(w: &DVector<f64>, cov: &HermitianCovariance) -> Result<RiskContribution> {
    let var = portfolio_variance(w, cov)?;
    if var <= 0.0 {
        return Err(Error::Degenerate(
            "zero portfolio variance, risk contributions undefined".into(),
        ));
    }
    let sigma = var.sqrt();
    let sw = cov.real_matrix() * w;
    let contributions: Vec<f64> = w
        .iter()
        .zip(sw.iter())
        .map(|(&wi, &qi)| wi * qi / sigma)
        .collect();
    Ok(RiskContribution {
        sigma,
        contributions,
    })
}

/// Entropy of the eigen-space risk distribution: transform the weights,
/// form per-eigenmode risk contributions, normalize, take Shannon entropy.
pub fn diversification_entropy(
    w: &DVector<f64>,
    decomp: &SpectralDecomposition,
) -> Result<DiversificationProfile> {
    if w.len() != decomp.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weight length {} vs decomposition dim {}",
            w.len(),
            decomp.dim()
        )));
    }
    let obj = EntropyObjective::new(decomp);
    let (transformed, contributions, total) = obj.contributions(w);
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "weights lie in the null space of the covariance".into(),
        ));
    }
    let probabilities: Vec<f64> = contributions.iter().map(|v| v / total).collect();
    let entropy = probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    Ok(DiversificationProfile {
        transformed_weights: transformed,
        contributions,
        probabilities,
        entropy,
    })
}

/// Differentiable eigen-entropy objective H(w) with its analytic gradient.
///
/// v_m = lambda_m |(U w)_m|^2, p = v / sum(v), H = -sum p ln p. Null
/// eigenvalues are zeroed so they contribute no gradient noise.
pub struct EntropyObjective {
    u: DMatrix<Complex64>,
    lambdas: Vec<f64>,
}

impl EntropyObjective {
    pub fn new(decomp: &SpectralDecomposition) -> Self {
        let lam_max = decomp.eigenvalues.max();
        let cutoff = NULL_EIGENVALUE_FACTOR * lam_max;
        let lambdas = decomp
            .eigenvalues
            .iter()
            .map(|&l| if l <= cutoff { 0.0 } else { l })
            .collect();
        Self {
            u: decomp.eigenvectors.clone(),
            lambdas,
        }
    }

    fn transformed(&self, w: &DVector<f64>) -> Vec<Complex64> {
        let m = self.lambdas.len();
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| self.u[(i, j)] * w[j])
                    .sum::<Complex64>()
            })
            .collect()
    }

    fn contributions(&self, w: &DVector<f64>) -> (Vec<Complex64>, Vec<f64>, f64) {
        let wt = self.transformed(w);
        let v: Vec<f64> = wt
            .iter()
            .zip(&self.lambdas)
            .map(|(z, &l)| if l == 0.0 { 0.0 } else { l * z.norm_sqr() })
            .collect();
        let total = v.iter().sum();
        (wt, v, total)
    }

    pub fn value(&self, w: &DVector<f64>) -> f64 {
        let (_, v, total) = self.contributions(w);
        if total <= 0.0 {
            return f64::NEG_INFINITY;
        }
        v.iter()
            .filter(|&&vi| vi > 0.0)
            .map(|&vi| {
                let p = vi / total;
                -p * p.ln()
            })
            .sum()
    }

    pub fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        let m = self.lambdas.len();
        let (wt, v, total) = self.contributions(w);
        if total <= 0.0 {
            return DVector::zeros(m);
        }
        let h: f64 = v
            .iter()
            .filter(|&&vi| vi > 0.0)
            .map(|&vi| {
                let p = vi / total;
                -p * p.ln()
            })
            .sum();
        // dH/dv_k = -(ln p_k + H) / total; dv_k/dw_j = 2 lambda_k Re(conj(w~_k) U_kj).
        let mut grad = DVector::zeros(m);
        for k in 0..m {
            if self.lambdas[k] == 0.0 || v[k] <= 0.0 {
                continue;
            }
            let p = v[k] / total;
            let dh_dv = -(p.ln() + h) / total;
            let coeff = 2.0 * self.lambdas[k] * dh_dv;
            for j in 0..m {
                grad[j] += coeff * (wt[k].conj() * self.u[(k, j)]).re;
            }
        }
        grad
    }
}

/// Projected-gradient ascent with backtracking line search and multi-start.
///
/// Starts are the uniform point followed by Dirichlet(1) draws from a
/// ChaCha stream seeded by `opts.seed`; results merge deterministically.
pub fn maximize_on_simplex<F, G>(
    objective: F,
    gradient: G,
    m: usize,
    constraints: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<Solution>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<DVector<f64>> = Vec::with_capacity(opts.num_starts.max(1));
    starts.push(constraints.project(&DVector::from_element(m, 1.0 / m as f64))?);
    while starts.len() < opts.num_starts.max(1) {
        // Dirichlet(1) via normalized exponentials.
        let draw = DVector::from_iterator(
            m,
            (0..m).map(|_| -(rng.gen_range(0.0f64..1.0).max(f64::MIN_POSITIVE)).ln()),
        );
        let point = &draw / draw.sum();
        starts.push(constraints.project(&point)?);
    }

    let mut reports = Vec::with_capacity(starts.len());
    let mut finals: Vec<(DVector<f64>, f64, bool)> = Vec::with_capacity(starts.len());
    let mut total_iterations = 0;

    for (si, start) in starts.into_iter().enumerate() {
        let mut w = start;
        let mut fw = objective(&w);
        let mut step = 1.0;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        let mut iterations = 0;

        for _ in 0..opts.max_iterations {
            iterations += 1;
            let g = gradient(&w);
            residual = (constraints.project(&(&w + &g))? - &w).norm();
            if residual <= opts.tolerance {
                converged = true;
                break;
            }
            // Backtracking Armijo line search along the projection arc.
            let mut t = step * 2.0;
            let mut advanced = false;
            for _ in 0..60 {
                let cand = constraints.project(&(&w + &g * t))?;
                let fc = objective(&cand);
                let dir = &cand - &w;
                if fc >= fw + 1e-4 * g.dot(&dir) && fc > fw {
                    w = cand;
                    fw = fc;
                    step = t;
                    advanced = true;
                    break;
                }
                t *= 0.5;
            }
            if !advanced {
                // Objective improvements have fallen below machine
                // precision. Scan a geometric ladder of step sizes and keep
                // contracting the projected-gradient residual directly.
                let mut best: Option<(DVector<f64>, f64, f64)> = None;
                for k in (-40..=10).rev() {
                    let t = 2.0f64.powi(k);
                    let cand = constraints.project(&(&w + &g * t))?;
                    let cand_res =
                        (constraints.project(&(&cand + gradient(&cand)))? - &cand).norm();
                    let fc = objective(&cand);
                    if cand_res < residual
                        && fc >= fw - 1e-12 * fw.abs().max(1.0)
                        && best.as_ref().is_none_or(|(_, _, r)| cand_res < *r)
                    {
                        best = Some((cand, fc, cand_res));
                    }
                }
                match best {
                    Some((cand, fc, cand_res)) => {
                        w = cand;
                        fw = fc;
                        residual = cand_res;
                        if residual <= opts.tolerance {
                            converged = true;
                            break;
                        }
                    }
                    None => {
                        converged = residual <= opts.tolerance;
                        break;
                    }
                }
            }
        }

        total_iterations += iterations;
        reports.push(StartReport {
            start: si,
            iterations,
            converged,
            objective: fw,
            residual,
        });
        finals.push((w, fw, converged));
    }

    // Deterministic merge: best objective, ties broken by maximal weight
    // entropy, then lexicographically smallest weights.
    let best_obj = finals
        .iter()
        .map(|(_, f, _)| *f)
        .fold(f64::NEG_INFINITY, f64::max);
    let obj_tie = 1e-9 * best_obj.abs().max(1.0);
    let weight_entropy = |w: &DVector<f64>| -> f64 {
        w.iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| -x * x.ln())
            .sum()
    };
    let mut best: Option<(DVector<f64>, f64, bool)> = None;
    for (w, f, c) in finals {
        if f < best_obj - obj_tie {
            continue;
        }
        match &best {
            None => best = Some((w, f, c)),
            Some((bw, _, _)) => {
                let (we, bwe) = (weight_entropy(&w), weight_entropy(bw));
                let better = if (we - bwe).abs() > 1e-12 {
                    we > bwe
                } else {
                    lex_less(&w, bw)
                };
                if better {
                    let c = c || best.as_ref().unwrap().2;
                    best = Some((w, f, c));
                }
            }
        }
    }
    let (weights, objective_value, _) = best.expect("at least one start");
    let any_converged = reports.iter().any(|r| r.converged);
    let residual = reports
        .iter()
        .map(|r| r.residual)
        .fold(f64::INFINITY, f64::min);

    let report = SolverReport {
        converged: any_converged,
        iterations: total_iterations,
        objective: objective_value,
        residual,
        starts: reports,
    };
    if !any_converged {
        return Err(Error::NonConvergence {
            iterations: total_iterations,
            residual,
            best_weights: weights.iter().copied().collect(),
        });
    }
    Ok(Solution { weights, report })
}

fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if (x - y).abs() > 1e-15 {
            return x < y;
        }
    }
    false
}

/// Equal-risk-contribution weights.
///
/// The long-only default is solved through the convex reformulation
/// min_x 0.5 x' Sigma x - (1/M) sum ln x_i (Newton with line search), whose
/// optimum has x_i (Sigma x)_i all equal; w = x / sum(x). Other constraint
/// sets fall back to projected-gradient minimization of the squared
/// contribution residual.
pub fn solve_risk_parity(
    cov: &HermitianCovariance,
    constraints: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<Solution> {
    if cov.kind != CovarianceKind::Real {
        return Err(Error::Validation("risk parity requires a real covariance".into()));
    }
    let m = cov.dim();
    let sigma = cov.real_matrix();
    for i in 0..m {
        if sigma[(i, i)] <= 0.0 {
            return Err(Error::Degenerate(format!(
                "risk parity needs a strictly positive diagonal, asset {i} has variance {}",
                sigma[(i, i)]
            )));
        }
    }

    let default_set = constraints.kind == ConstraintKind::LongOnlySimplex && constraints.bounds.is_none();
    if default_set {
        return risk_parity_newton(&sigma, opts);
    }

    // General constraint sets: minimize sum_m (sigma_m - sigma/M)^2.
    let mf = m as f64;
    let objective = |w: &DVector<f64>| -> f64 {
        let q = &sigma * w;
        let var = w.dot(&q);
        if var <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let s = var.sqrt();
        -(0..m)
            .map(|i| (w[i] * q[i] / s - s / mf).powi(2))
            .sum::<f64>()
    };
    let gradient = |w: &DVector<f64>| -> DVector<f64> {
        let q = &sigma * w;
        let var = w.dot(&q);
        if var <= 0.0 {
            return DVector::zeros(m);
        }
        let s = var.sqrt();
        let mut grad = DVector::zeros(m);
        for i in 0..m {
            let ri = w[i] * q[i] / s - s / mf;
            for j in 0..m {
                let d_sigma_i = (if i == j { q[i] } else { 0.0 } + w[i] * sigma[(i, j)]) / s
                    - w[i] * q[i] * q[j] / (s * var);
                let d_s = q[j] / s;
                grad[j] -= 2.0 * ri * (d_sigma_i - d_s / mf);
            }
        }
        grad
    };
    maximize_on_simplex(objective, gradient, m, constraints, opts)
}

fn risk_parity_newton(sigma: &DMatrix<f64>, opts: &SolverOptions) -> Result<Solution> {
    let m = sigma.nrows();
    let mf = m as f64;
    let f = |x: &DVector<f64>| -> f64 {
        0.5 * x.dot(&(sigma * x)) - x.iter().map(|&v| v.ln()).sum::<f64>() / mf
    };
    let mut x = DVector::from_iterator(m, (0..m).map(|i| 1.0 / (mf * sigma[(i, i)].sqrt())));
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..200 {
        iterations += 1;
        let lin = sigma * &x;
        let barrier = DVector::from_iterator(m, x.iter().map(|&v| 1.0 / (mf * v)));
        let grad = &lin - &barrier;
        let scale = lin.norm() + barrier.norm();
        residual = grad.norm();
        if residual <= 1e-12 * scale {
            converged = true;
            break;
        }
        let mut hess = sigma.clone();
        for i in 0..m {
            hess[(i, i)] += 1.0 / (mf * x[i] * x[i]);
        }
        let step = hess
            .cholesky()
            .map(|ch| ch.solve(&grad))
            .ok_or_else(|| Error::Numerical("risk parity Hessian not positive definite".into()))?;
        let fx = f(&x);
        let grad_norm = |v: &DVector<f64>| -> f64 {
            (sigma * v - DVector::from_iterator(m, v.iter().map(|&u| 1.0 / (mf * u)))).norm()
        };
        let mut t = 1.0;
        let mut advanced = false;
        while t >= 1e-14 {
            let cand = &x - &step * t;
            if cand.iter().all(|&v| v > 0.0)
                && (f(&cand) < fx || grad_norm(&cand) < residual)
            {
                x = cand;
                advanced = true;
                break;
            }
            t *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    let weights = &x / x.sum();
    if !converged {
        // Line search may stall at machine precision; accept if the risk
        // contributions are already equal to well within tolerance.
        let q = sigma * &weights;
        let s = weights.dot(&q).sqrt();
        if s > 0.0 {
            let target = s / mf;
            let max_dev = (0..m)
                .map(|i| (weights[i] * q[i] / s - target).abs())
                .fold(0.0, f64::max);
            converged = max_dev <= 1e-9 * s;
        }
    }
    let report = SolverReport {
        converged,
        iterations,
        objective: -f(&x),
        residual,
        starts: vec![StartReport {
            start: 0,
            iterations,
            converged,
            objective: -f(&x),
            residual,
        }],
    };
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            residual,
            best_weights: weights.iter().copied().collect(),
        });
    }
    let _ = opts;
    Ok(Solution { weights, report })
}

/// Maximum risk diversification: maximize the eigen-entropy of a real
/// covariance's risk distribution.
pub fn solve_mrd(
    cov: &HermitianCovariance,
    constraints: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<Solution> {
    if cov.kind != CovarianceKind::Real {
        return Err(Error::Validation("MRD requires a real-kind covariance".into()));
    }
    solve_entropy(cov, constraints, opts)
}

/// Complex valued risk diversification: the same entropy maximization on the
/// complex covariance of analytic signals.
pub fn solve_cvrd(
    ccov: &HermitianCovariance,
    constraints: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<Solution> {
    if ccov.kind != CovarianceKind::Complex {
        return Err(Error::Validation("CVRD requires a complex-kind covariance".into()));
    }
    solve_entropy(ccov, constraints, opts)
}

fn solve_entropy(
    cov: &HermitianCovariance,
    constraints: &ConstraintSet,
    opts: &SolverOptions,
) -> Result<Solution> {
    let decomp = crate::risk_models::spectral_decomposition(cov)?;
    let obj = EntropyObjective::new(&decomp);
    maximize_on_simplex(
        |w| obj.value(w),
        |w| obj.gradient(w),
        cov.dim(),
        constraints,
        opts,
    )
}

/// Exhaustive simplex-lattice maximizer, the test oracle for the solvers.
///
/// Evaluates every point with coordinates in multiples of `resolution`
/// summing to 1; ties go to the lexicographically smallest point.
pub fn grid_search_oracle<F>(
    mut objective: F,
    m: usize,
    resolution: f64,
) -> Result<(DVector<f64>, f64)>
where
    F: FnMut(&DVector<f64>) -> f64,
{
    if m > 4 {
        return Err(Error::Refused(format!(
            "grid oracle limited to M <= 4, got {m}"
        )));
    }
    if resolution < 0.01 {
        return Err(Error::Refused(format!(
            "grid oracle resolution must be >= 0.01, got {resolution}"
        )));
    }
    let k = (1.0 / resolution).round() as usize;
    if ((k as f64) * resolution - 1.0).abs() > 1e-9 {
        return Err(Error::Refused(format!(
            "resolution {resolution} does not divide 1 evenly"
        )));
    }
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut counts = vec![0usize; m];
    enumerate_compositions(k, m, 0, &mut counts, &mut |counts| {
        let w = DVector::from_iterator(m, counts.iter().map(|&c| c as f64 / k as f64));
        let f = objective(&w);
        // Strict improvement keeps the first (lexicographically smallest)
        // maximizer from the ascending enumeration.
        if best.as_ref().is_none_or(|(_, bf)| f > *bf) {
            best = Some((w, f));
        }
    });
    Ok(best.expect("non-empty lattice"))
}

fn enumerate_compositions(
    remaining: usize,
    m: usize,
    idx: usize,
    counts: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if idx == m - 1 {
        counts[idx] = remaining;
        visit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[idx] = c;
        enumerate_compositions(remaining - c, m, idx + 1, counts, visit);
    }
}
