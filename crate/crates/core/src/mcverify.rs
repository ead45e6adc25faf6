//! Monte Carlo checks of coverage and of the two-model weight.
//!
//! Replicate `r` of a run with seed `s` draws its errors from a ChaCha8
//! stream keyed by `(s, r)`, so results do not depend on thread count or
//! scheduling, and runs that share a seed share their random numbers.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, StandardNormal};
use rayon::prelude::*;

use crate::bound::DRule;
use crate::error::{MataError, Result};
use crate::linreg::{FullFit, ModelSubset, RegressionProblem, SubsetOperator};
use crate::mata::{solve_interval, MataRequest};
use crate::quadrature::CompensatedSum;
use crate::special::StudentT;
use crate::weights::{normalize_log_weights, w1, WeightSpec};

pub const MIN_REPS: u64 = 10_000;

/// One replicate in this many is re-checked through the interval solver.
pub const AUDIT_EVERY: u64 = 100;

/// Largest nuisance dimension accepted by [`min_coverage_scan`].
pub const SCAN_MAX_NUISANCE: usize = 8;

// h values this close to a target are left out of the audit comparison
const AUDIT_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SimScenario {
    pub prob: RegressionProblem,
    pub beta_over_sigma: DVector<f64>,
    pub reps: u64,
    pub seed: u64,
    pub spec: WeightSpec,
    pub alpha: f64,
    pub family: Vec<ModelSubset>,
}

impl SimScenario {
    /// Full family of all nuisance subsets.
    pub fn new(
        prob: RegressionProblem,
        beta_over_sigma: DVector<f64>,
        reps: u64,
        seed: u64,
        spec: WeightSpec,
        alpha: f64,
    ) -> Result<Self> {
        let family = ModelSubset::all(prob.q(), prob.p());
        Self::with_family(prob, beta_over_sigma, reps, seed, spec, alpha, family)
    }

    pub fn with_family(
        prob: RegressionProblem,
        beta_over_sigma: DVector<f64>,
        reps: u64,
        seed: u64,
        spec: WeightSpec,
        alpha: f64,
        family: Vec<ModelSubset>,
    ) -> Result<Self> {
        if reps < MIN_REPS {
            return Err(MataError::InvalidConfig(format!("at least {MIN_REPS} replicates are required")));
        }
        if beta_over_sigma.len() != prob.p() {
            return Err(MataError::InvalidProblem("beta/sigma has wrong length".into()));
        }
        // validates alpha and the family
        MataRequest::new(prob.with_response(DVector::zeros(prob.n()))?, Some(family.clone()), spec.clone(), alpha)?;
        Ok(Self { prob, beta_over_sigma, reps, seed, spec, alpha, family })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageEstimate {
    pub p_hat: f64,
    pub se: f64,
    pub reps: u64,
    pub seed: u64,
    /// Replicates re-checked through the interval solver.
    pub audited: u64,
}

impl CoverageEstimate {
    fn from_count(hits: u64, reps: u64, seed: u64, audited: u64) -> Self {
        let p_hat = hits as f64 / reps as f64;
        Self { p_hat, se: (p_hat * (1.0 - p_hat) / reps as f64).sqrt(), reps, seed, audited }
    }
}

fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

fn draw_errors(seed: u64, rep: u64, n: usize) -> DVector<f64> {
    let mut rng = replicate_rng(seed, rep);
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Precomputed operators for evaluating the coverage event.
struct Engine<'a> {
    prob: &'a RegressionProblem,
    family: &'a [ModelSubset],
    ops: Vec<Option<SubsetOperator>>,
    v_full: f64,
    // t distribution for each family member
    dists: Vec<StudentT>,
    spec: &'a WeightSpec,
    alpha: f64,
}

// components below this weight change h by less than rounding
const NEGLIGIBLE_WEIGHT: f64 = 1e-18;

impl<'a> Engine<'a> {
    fn new(prob: &'a RegressionProblem, family: &'a [ModelSubset], spec: &'a WeightSpec, alpha: f64) -> Result<Self> {
        let ops = family
            .iter()
            .map(|&k| if k.is_empty() { Ok(None) } else { prob.subset_operator(k).map(Some) })
            .collect::<Result<Vec<_>>>()?;
        let a = prob.a();
        let v_full = a.dot(&(prob.xtx_inv() * a));
        let m = prob.n() - prob.p();
        let dists = family.iter().map(|k| StudentT::new((m + k.len()) as f64)).collect();
        Ok(Self { prob, family, ops, v_full, dists, spec, alpha })
    }

    /// `h(theta)` for a full fit.
    fn h_at(&self, full: &FullFit, theta: f64) -> Result<f64> {
        if !(full.rss > 0.0) {
            return Err(MataError::DegenerateFit);
        }
        let mut lw = Vec::with_capacity(self.ops.len());
        let mut parts = Vec::with_capacity(self.ops.len());
        for (k, op) in self.family.iter().zip(&self.ops) {
            let (th, u, v) = match op {
                None => (self.prob.a().dot(&full.beta), 0.0, self.v_full),
                Some(op) => {
                    let st = op.apply(&full.beta);
                    (st.theta, st.u.max(0.0), op.v)
                }
            };
            lw.push(if k.is_empty() { 0.0 } else { self.spec.ln_kernel(u / full.rss, k.len())? });
            parts.push((th, u, v));
        }
        normalize_log_weights(&mut lw);
        let m = self.prob.n() - self.prob.p();
        let mut acc = CompensatedSum::default();
        for (i, (&w, &(th, u, v))) in lw.iter().zip(&parts).enumerate() {
            if w < NEGLIGIBLE_WEIGHT {
                continue;
            }
            let df = m + self.family[i].len();
            let scale = ((full.rss + u) / df as f64 * v).sqrt();
            acc.add(w * self.dists[i].cdf((th - theta) / scale));
        }
        Ok(acc.value())
    }

    fn covers(&self, h: f64) -> bool {
        self.alpha / 2.0 <= h && h <= 1.0 - self.alpha / 2.0
    }

    /// Re-derive the event from the interval endpoints.
    fn audit(&self, y: DVector<f64>, theta: f64, h: f64, rep: u64) -> Result<()> {
        let req = MataRequest::new(self.prob.with_response(y)?, Some(self.family.to_vec()), self.spec.clone(), self.alpha)?;
        let iv = solve_interval(&req)?;
        let near_edge = (h - self.alpha / 2.0).abs() < AUDIT_MARGIN || (h - (1.0 - self.alpha / 2.0)).abs() < AUDIT_MARGIN;
        if !near_edge && iv.contains(theta) != self.covers(h) {
            return Err(MataError::EventMismatch { replicate: rep });
        }
        Ok(())
    }
}

fn indicators_with_sigma(sc: &SimScenario, sigma: f64) -> Result<Vec<bool>> {
    let engine = Engine::new(&sc.prob, &sc.family, &sc.spec, sc.alpha)?;
    let beta = &sc.beta_over_sigma * sigma;
    let mean = sc.prob.x() * &beta;
    let theta = sc.prob.a().dot(&beta);
    let n = sc.prob.n();
    (0..sc.reps)
        .into_par_iter()
        .map(|r| {
            let y = &mean + draw_errors(sc.seed, r, n) * sigma;
            let full = sc.prob.solve_for(&y);
            let h = engine.h_at(&full, theta)?;
            if r % AUDIT_EVERY == 0 {
                engine.audit(y, theta, h, r)?;
            }
            Ok(engine.covers(h))
        })
        .collect()
}

/// Per-replicate coverage indicators with `sigma = 1`.
pub fn coverage_indicators(sc: &SimScenario) -> Result<Vec<bool>> {
    indicators_with_sigma(sc, 1.0)
}

/// Indicators when the data are generated with error scale `sigma` and
/// coefficients `sigma * beta_over_sigma`.
pub fn coverage_indicators_scaled(sc: &SimScenario, sigma: f64) -> Result<Vec<bool>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(MataError::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    indicators_with_sigma(sc, sigma)
}

pub fn simulate_coverage(sc: &SimScenario) -> Result<CoverageEstimate> {
    let ind = coverage_indicators(sc)?;
    let hits = ind.iter().filter(|&&b| b).count() as u64;
    Ok(CoverageEstimate::from_count(hits, sc.reps, sc.seed, sc.reps.div_ceil(AUDIT_EVERY)))
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub min_estimate: CoverageEstimate,
    /// Minimising nuisance vector `(beta_{q+1}, ..., beta_p) / sigma`.
    pub argmin: DVector<f64>,
    /// Estimates aligned with the grid.
    pub estimates: Vec<CoverageEstimate>,
}

/// Coverage over a grid of scaled nuisance vectors (length `p - q`), all
/// sharing the same replicate errors. Ties go to the earliest grid point.
pub fn min_coverage_scan(
    prob: &RegressionProblem,
    spec: &WeightSpec,
    alpha: f64,
    grid: &[DVector<f64>],
    reps: u64,
    seed: u64,
) -> Result<ScanResult> {
    let (p, q, n) = (prob.p(), prob.q(), prob.n());
    if grid.is_empty() {
        return Err(MataError::InvalidConfig("scan grid is empty".into()));
    }
    if p - q > SCAN_MAX_NUISANCE {
        return Err(MataError::TooManyNuisance { nuisance: p - q, cap: SCAN_MAX_NUISANCE });
    }
    if reps < MIN_REPS {
        return Err(MataError::InvalidConfig(format!("at least {MIN_REPS} replicates are required")));
    }
    if let Some(g) = grid.iter().find(|g| g.len() != p - q) {
        return Err(MataError::InvalidProblem(format!("grid vector has length {}, expected {}", g.len(), p - q)));
    }
    let family = ModelSubset::all(q, p);
    // validates alpha
    MataRequest::new(prob.with_response(DVector::zeros(n))?, Some(family.clone()), spec.clone(), alpha)?;
    let engine = Engine::new(prob, &family, spec, alpha)?;

    // the error part of each fit is shared by every grid point
    let noise: Vec<FullFit> = (0..reps).into_par_iter().map(|r| prob.solve_for(&draw_errors(seed, r, n))).collect();

    let estimates = grid
        .iter()
        .map(|g| {
            let mut beta = DVector::zeros(p);
            beta.rows_mut(q, p - q).copy_from(g);
            let theta = prob.a().dot(&beta);
            let hits = noise
                .par_iter()
                .enumerate()
                .map(|(r, e)| {
                    let full = FullFit { beta: &beta + &e.beta, rss: e.rss };
                    let h = engine.h_at(&full, theta)?;
                    if r as u64 % AUDIT_EVERY == 0 {
                        let y = prob.x() * &beta + draw_errors(seed, r as u64, n);
                        engine.audit(y, theta, h, r as u64)?;
                    }
                    Ok(u64::from(engine.covers(h)))
                })
                .collect::<Result<Vec<u64>>>()?
                .iter()
                .sum::<u64>();
            Ok(CoverageEstimate::from_count(hits, reps, seed, reps.div_ceil(AUDIT_EVERY)))
        })
        .collect::<Result<Vec<_>>>()?;
    let best = estimates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.p_hat.total_cmp(&b.1.p_hat))
        .map(|(i, _)| i)
        .expect("nonempty grid");
    Ok(ScanResult { min_estimate: estimates[best], argmin: grid[best].clone(), estimates })
}

/// `{0, +-step, ..., +-max}^dim`, ordered lexicographically.
pub fn symmetric_grid(dim: usize, step: f64, max: f64) -> Vec<DVector<f64>> {
    let k = (max / step).round() as i64;
    let axis: Vec<f64> = (-k..=k).map(|i| i as f64 * step).collect();
    let mut out = vec![DVector::zeros(0)];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|v| {
                axis.iter().map(move |&c| {
                    let mut w = v.clone().insert_row(v.len(), 0.0);
                    let last = w.len() - 1;
                    w[last] = c;
                    w
                })
            })
            .collect();
    }
    out
}

/// A design with `p = 2`, `q = 1`, `n = m + 2` and `corr(theta_hat, beta_hat_2) = rho`,
/// with `beta_2 / sigma` chosen so that the scaled coefficient equals `gamma`.
pub fn two_model_scenario(
    m: usize,
    rho: f64,
    gamma: f64,
    d: f64,
    alpha: f64,
    reps: u64,
    seed: u64,
) -> Result<SimScenario> {
    if !(rho.abs() < 1.0) {
        return Err(MataError::InvalidConfig(format!("rho must lie in (-1, 1), got {rho}")));
    }
    let n = m + 2;
    let nf = n as f64;
    // orthonormal columns: constant and centred index
    let mid = (nf - 1.0) / 2.0;
    let norm2 = (0..n).map(|i| (i as f64 - mid).powi(2)).sum::<f64>().sqrt();
    let qmat = nalgebra::DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 / nf.sqrt() } else { (i as f64 - mid) / norm2 });
    // X'X = n [[1, -rho], [-rho, 1]]
    let u = nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, -rho, 0.0, (1.0 - rho * rho).sqrt()]) * nf.sqrt();
    let x = qmat * u;
    let prob = RegressionProblem::new(x, None, DVector::from_vec(vec![1.0, 0.0]), 1)?;
    let v_p = prob.xtx_inv()[(1, 1)];
    let beta = DVector::from_vec(vec![0.0, gamma * v_p.sqrt()]);
    let family = vec![ModelSubset::EMPTY, ModelSubset::from_indices(&[1])];
    SimScenario::with_family(prob, beta, reps, seed, WeightSpec::gic(d, n)?, alpha, family)
}

#[derive(Debug, Clone)]
pub struct DecayRow {
    pub n: usize,
    pub d: f64,
    /// `(gamma, estimate of P(w1(gamma_hat^2) >= eps))`, aligned with the
    /// gamma grid; the `gamma = 0` entry is the theoretical supremum.
    pub estimates: Vec<(f64, CoverageEstimate)>,
}

/// Estimates of `P(w1(gamma_hat^2) >= eps)` with `gamma_hat^2 = U / (Q / m)`,
/// `U ~ chi^2_1(gamma^2)` and `Q ~ chi^2_m`, shared across `n` and `gamma`.
pub fn w1_decay_scan(
    m: usize,
    n_list: &[usize],
    d_rule: DRule,
    gamma_grid: &[f64],
    eps: f64,
    reps: u64,
    seed: u64,
) -> Result<Vec<DecayRow>> {
    if m < 1 || n_list.is_empty() || gamma_grid.is_empty() {
        return Err(MataError::InvalidConfig("decay scan needs m >= 1 and nonempty n and gamma lists".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] <= m {
        return Err(MataError::InvalidConfig("n list must be increasing and exceed m".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(MataError::InvalidConfig(format!("eps must lie in (0, 1), got {eps}")));
    }
    let chi = ChiSquared::new(m as f64).map_err(|e| MataError::InvalidConfig(e.to_string()))?;
    let draws: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let z: f64 = rng.sample(StandardNormal);
            let qv: f64 = rng.sample(chi);
            (z, qv / m as f64)
        })
        .collect();
    Ok(n_list
        .iter()
        .map(|&n| {
            let d = d_rule.d(n);
            let estimates = gamma_grid
                .iter()
                .map(|&g| {
                    let hits = draws
                        .iter()
                        .filter(|&&(z, qm)| w1((z + g).powi(2) / qm, m, n, d) >= eps)
                        .count() as u64;
                    (g, CoverageEstimate::from_count(hits, reps, seed, 0))
                })
                .collect();
            DecayRow { n, d, estimates }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linreg::test_support::random_problem;

    fn problem_without_y(n: usize, p: usize, q: usize, seed: u64) -> RegressionProblem {
        let pr = random_problem(n, p, q, seed);
        RegressionProblem::new(pr.x().clone(), None, pr.a().clone(), q).unwrap()
    }

    #[test]
    fn single_model_family_is_exact() {
        let prob = problem_without_y(20, 4, 2, 3);
        let beta = DVector::from_vec(vec![0.3, -1.0, 2.0, 0.5]);
        let sc = SimScenario::with_family(prob, beta, 20_000, 9, WeightSpec::aic(20), 0.05, vec![ModelSubset::EMPTY])
            .unwrap();
        let est = simulate_coverage(&sc).unwrap();
        assert!((est.p_hat - 0.95).abs() < 3.0 * est.se, "{est:?}");
        assert_eq!(est.audited, 200);
    }

    #[test]
    fn event_forms_agree_on_random_instance() {
        // every replicate audited
        let prob = problem_without_y(25, 5, 2, 17);
        let beta = DVector::from_vec(vec![1.0, 0.5, 0.4, -0.3, 0.8]);
        let sc = SimScenario::new(prob, beta, 10_000, 4, WeightSpec::aic(25), 0.05).unwrap();
        let engine = Engine::new(&sc.prob, &sc.family, &sc.spec, sc.alpha).unwrap();
        let mean = sc.prob.x() * &sc.beta_over_sigma;
        let theta = sc.prob.a().dot(&sc.beta_over_sigma);
        for r in 0..2_000 {
            let y = &mean + draw_errors(sc.seed, r, 25);
            let h = engine.h_at(&sc.prob.solve_for(&y), theta).unwrap();
            engine.audit(y, theta, h, r).unwrap();
        }
    }

    #[test]
    fn scaling_beta_and_sigma_keeps_indicators() {
        let prob = problem_without_y(15, 4, 1, 8);
        let beta = DVector::from_vec(vec![0.0, 0.7, -0.4, 1.2]);
        let sc = SimScenario::new(prob, beta, 10_000, 21, WeightSpec::bic(15), 0.05).unwrap();
        let a = coverage_indicators(&sc).unwrap();
        let b = coverage_indicators_scaled(&sc, 2.0).unwrap();
        assert_eq!(a, b);
        let c = coverage_indicators_scaled(&sc, 0.37).unwrap();
        let diff = a.iter().zip(&c).filter(|(x, y)| x != y).count();
        assert!(diff <= 2, "{diff}");
    }

    #[test]
    fn reproducible_and_scan_ties() {
        let prob = problem_without_y(12, 3, 1, 5);
        let spec = WeightSpec::aic(12);
        let g = vec![DVector::from_vec(vec![0.5, 1.0]), DVector::from_vec(vec![0.5, 1.0]), DVector::zeros(2)];
        let r = min_coverage_scan(&prob, &spec, 0.05, &g, 10_000, 3).unwrap();
        assert_eq!(r.estimates[0], r.estimates[1]);
        let again = min_coverage_scan(&prob, &spec, 0.05, &g, 10_000, 3).unwrap();
        assert_eq!(r.estimates, again.estimates);
        assert!(r.estimates[2].p_hat > 0.9);
        assert!(min_coverage_scan(&prob, &spec, 0.05, &[], 10_000, 3).is_err());
    }

    #[test]
    fn scan_matches_direct_simulation() {
        let prob = problem_without_y(14, 3, 1, 6);
        let spec = WeightSpec::aic(14);
        let nuis = DVector::from_vec(vec![-1.5, 0.5]);
        let scan = min_coverage_scan(&prob, &spec, 0.05, &[nuis.clone()], 10_000, 77).unwrap();
        let beta = DVector::from_vec(vec![0.0, -1.5, 0.5]);
        let sc = SimScenario::new(prob, beta, 10_000, 77, spec, 0.05).unwrap();
        let direct = simulate_coverage(&sc).unwrap();
        assert!((scan.min_estimate.p_hat - direct.p_hat).abs() <= 2e-4);
    }

    #[test]
    fn two_model_design_has_requested_correlation() {
        let sc = two_model_scenario(5, 0.7, 1.0, 2.0, 0.05, 10_000, 1).unwrap();
        let prof = sc.prob.correlation_profile();
        assert!((prof.rho[0] - 0.7).abs() < 1e-12);
        assert_eq!(sc.prob.n(), 7);
        let v_p = sc.prob.xtx_inv()[(1, 1)];
        assert!((sc.beta_over_sigma[1] / v_p.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_grid_shape() {
        let g = symmetric_grid(3, 0.5, 4.0);
        assert_eq!(g.len(), 17 * 17 * 17);
        assert_eq!(g[0], DVector::from_vec(vec![-4.0, -4.0, -4.0]));
        assert!(g.iter().any(|v| v.iter().all(|&c| c == 0.0)));
    }

    #[test]
    fn decay_scan_properties() {
        let rows = w1_decay_scan(5, &[100, 10_000], DRule::Bic, &[0.0, 2.0], 0.01, 20_000, 5).unwrap();
        let (p0, p2) = (rows[0].estimates[0].1, rows[0].estimates[1].1);
        assert!(p2.p_hat <= p0.p_hat + 3.0 * p0.se.max(p2.se));
        let far = rows[1].estimates[0].1;
        assert!(far.p_hat + 3.0 * (far.se + p0.se) < p0.p_hat);
        // d = 0 never gives w1 >= 1/2 for positive z
        let zero = w1_decay_scan(5, &[50], DRule::Fixed(0.0), &[0.0, 1.0], 0.5, 10_000, 5).unwrap();
        assert!(zero[0].estimates.iter().all(|(_, e)| e.p_hat == 0.0));
        assert!(w1_decay_scan(5, &[100, 50], DRule::Bic, &[0.0], 0.01, 100, 5).is_err());
    }

    #[test]
    fn scenario_validation() {
        let prob = problem_without_y(12, 3, 1, 5);
        let b = DVector::zeros(3);
        assert!(SimScenario::new(prob.clone(), b.clone(), 100, 1, WeightSpec::aic(12), 0.05).is_err());
        assert!(SimScenario::new(prob.clone(), DVector::zeros(2), 10_000, 1, WeightSpec::aic(12), 0.05).is_err());
        assert!(SimScenario::new(prob, b, 10_000, 1, WeightSpec::aic(12), 0.9).is_err());
    }
}
