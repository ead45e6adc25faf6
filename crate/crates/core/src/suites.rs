//! Named verification suites shared by the command line tool and the
//! acceptance tests.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bound::{upper_bound, BoundResult, DRule};
use crate::coverage::{CoverageGrid, QuadratureConfig, TwoModelConfig};
use crate::error::Result;
use crate::linreg::RegressionProblem;
use crate::mcverify::{
    min_coverage_scan, simulate_coverage, symmetric_grid, two_model_scenario, w1_decay_scan, CoverageEstimate,
    DecayRow, ScanResult,
};
use crate::weights::WeightSpec;

pub const Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct IntegralCheck {
    pub m: usize,
    pub n: usize,
    pub rho: f64,
    pub d_rule: DRule,
    pub gamma: f64,
    pub analytic: f64,
    pub mc: CoverageEstimate,
}

impl IntegralCheck {
    pub fn z(&self) -> f64 {
        (self.mc.p_hat - self.analytic) / self.mc.se
    }

    pub fn passed(&self) -> bool {
        self.z().abs() < Z_LIMIT
    }
}

pub const INTEGRAL_GAMMAS: [f64; 4] = [0.0, 1.0, 2.0, 5.0];
pub const INTEGRAL_RHOS: [f64; 3] = [0.3, 0.7, 0.96];
pub const INTEGRAL_MS: [usize; 2] = [5, 44];

/// Analytic two-model coverage against simulation over
/// `gamma x rho x m x {AIC, BIC}`; replicate seeds differ per configuration.
pub fn integral_vs_mc(reps: u64, seed: u64, quad: &QuadratureConfig) -> Result<Vec<IntegralCheck>> {
    let gmax = INTEGRAL_GAMMAS.iter().cloned().fold(0.0, f64::max);
    let mut out = Vec::new();
    let mut k = 0u64;
    for &m in &INTEGRAL_MS {
        let n = m + 2;
        for &rho in &INTEGRAL_RHOS {
            for d_rule in [DRule::Aic, DRule::Bic] {
                let d = d_rule.d(n);
                let cfg = TwoModelConfig::new(m, n, rho, d, 0.05)?;
                let grid = CoverageGrid::for_search(cfg, gmax, quad)?;
                for &gamma in &INTEGRAL_GAMMAS {
                    let sc = two_model_scenario(m, rho, gamma, d, 0.05, reps, seed.wrapping_add(k))?;
                    k += 1;
                    let mc = simulate_coverage(&sc)?;
                    out.push(IntegralCheck { m, n, rho, d_rule, gamma, analytic: grid.coverage(gamma), mc });
                }
            }
        }
    }
    Ok(out)
}

/// `p = 4`, `q = 1` design: intercept plus three correlated covariates with
/// nonzero means, `a = e_1`.
pub fn theorem2_problem(n: usize, seed: u64) -> Result<RegressionProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, 4);
    for i in 0..n {
        let common: f64 = rng.sample(StandardNormal);
        x[(i, 0)] = 1.0;
        for j in 1..4 {
            let e: f64 = rng.sample(StandardNormal);
            x[(i, j)] = 1.0 + 0.6 * common + 0.8 * e;
        }
    }
    let mut a = DVector::zeros(4);
    a[0] = 1.0;
    RegressionProblem::new(x, None, a, 1)
}

/// Drops the negated copy of every vector: coverage at `b` and `-b` is the
/// same, because `(b, e) -> (-b, -e)` negates the data and the interval.
pub fn sign_reduced(grid: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    grid.into_iter()
        .filter(|v| match v.iter().find(|&&c| c != 0.0) {
            None => true,
            Some(&c) => c > 0.0,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Theorem2Check {
    pub d_rule: DRule,
    pub bound: BoundResult,
    pub scan: ScanResult,
}

impl Theorem2Check {
    pub fn passed(&self) -> bool {
        self.scan.min_estimate.p_hat <= self.bound.upper_bound + Z_LIMIT * self.scan.min_estimate.se
    }
}

pub const THEOREM2_N: usize = 20;

/// MC minimum coverage over `{0, +-0.5, ..., +-4}^3` against the bound, for
/// AIC and BIC.
pub fn theorem2(reps: u64, seed: u64, quad: &QuadratureConfig) -> Result<Vec<Theorem2Check>> {
    let prob = theorem2_problem(THEOREM2_N, 2016)?;
    let rho = prob.correlation_profile().rho_max_abs;
    let grid = sign_reduced(symmetric_grid(3, 0.5, 4.0));
    let (n, p) = (prob.n(), prob.p());
    [DRule::Aic, DRule::Bic]
        .into_iter()
        .map(|d_rule| {
            let d = d_rule.d(n);
            let bound = upper_bound(rho, n - p, n, d, 0.05, quad)?;
            let scan = min_coverage_scan(&prob, &WeightSpec::gic(d, n)?, 0.05, &grid, reps, seed)?;
            Ok(Theorem2Check { d_rule, bound, scan })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Theorem4Check {
    pub m: usize,
    pub eps: f64,
    pub rows: Vec<DecayRow>,
}

pub const THEOREM4_NS: [usize; 3] = [100, 1_000, 10_000];
pub const THEOREM4_GAMMAS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];

impl Theorem4Check {
    fn sup(&self, i: usize) -> CoverageEstimate {
        self.rows[i].estimates[0].1
    }

    /// Estimate at the largest `n` is below the smallest by three combined SE.
    pub fn trend_passed(&self) -> bool {
        let (first, last) = (self.sup(0), self.sup(self.rows.len() - 1));
        last.p_hat + Z_LIMIT * (first.se + last.se) < first.p_hat
    }

    /// The `gamma = 0` column is never exceeded by more than three SE.
    pub fn sup_column_passed(&self) -> bool {
        self.rows.iter().all(|row| {
            let top = row.estimates[0].1;
            row.estimates[1..].iter().all(|(_, e)| e.p_hat <= top.p_hat + Z_LIMIT * top.se.max(e.se))
        })
    }

    pub fn passed(&self) -> bool {
        self.trend_passed() && self.sup_column_passed()
    }
}

pub fn theorem4(reps: u64, seed: u64) -> Result<Theorem4Check> {
    let (m, eps) = (5, 0.01);
    let rows = w1_decay_scan(m, &THEOREM4_NS, DRule::Bic, &THEOREM4_GAMMAS, eps, reps, seed)?;
    Ok(Theorem4Check { m, eps, rows })
}
