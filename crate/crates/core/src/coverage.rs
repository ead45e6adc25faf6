//! Exact coverage of the two-model interval.
//!
//! With the family `{{}, {p}}` the coverage of the MATA interval depends on
//! the data only through a scaled estimate `x` of `gamma = beta_p / (sigma
//! sqrt(v_p))` and `y = sigma_hat / sigma`, whose density is `f_m`. For each
//! `(x, y)` the endpoints are characterised by `delta_u(x, y)`, the root of a
//! two-component mixture of t cdfs, and the coverage is
//!
//! ```text
//! C(gamma) = int int [Phi((d_hi - rho (x - gamma)) / s) - Phi((d_lo - rho (x - gamma)) / s)]
//!                    phi(x - gamma) f_m(y) dx dy,        s = sqrt(1 - rho^2)
//! ```
//!
//! with `d_lo = delta_{alpha/2}` and `d_hi = delta_{1 - alpha/2}`.

use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{MataError, Result};
use crate::linreg::RegressionProblem;
use crate::quadrature::{pairwise_sum, GaussLegendre};
use crate::roots::{brent, BrentOptions};
use crate::special::{norm_interval_prob, norm_pdf, StudentT};
use crate::weights::w1;

pub const RHO_CLAMP: f64 = 1.0 - 1e-9;

/// Largest change under node doubling accepted by [`coverage_probability`].
pub const DOUBLING_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModelConfig {
    pub m: usize,
    pub n: usize,
    pub rho: f64,
    pub d: f64,
    pub alpha: f64,
}

impl TwoModelConfig {
    /// `rho` is clamped to `[-RHO_CLAMP, RHO_CLAMP]`.
    pub fn new(m: usize, n: usize, rho: f64, d: f64, alpha: f64) -> Result<Self> {
        if m < 1 {
            return Err(MataError::InvalidConfig("m must be at least 1".into()));
        }
        if n <= m {
            return Err(MataError::InvalidConfig(format!("n = {n} must exceed m = {m}")));
        }
        if !(rho.abs() < 1.0) {
            return Err(MataError::InvalidConfig(format!("rho must lie in (-1, 1), got {rho}")));
        }
        if !(d >= 0.0 && d.is_finite()) {
            return Err(MataError::InvalidConfig(format!("d must be finite and nonnegative, got {d}")));
        }
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(MataError::InvalidConfig(format!("alpha must lie in (0, 0.5], got {alpha}")));
        }
        Ok(Self { m, n, rho: rho.clamp(-RHO_CLAMP, RHO_CLAMP), d, alpha })
    }

    /// Two-model family `{{}, {p}}` of `prob`: `rho = corr(theta_hat, beta_hat_p)`.
    pub fn from_problem(prob: &RegressionProblem, d: f64, alpha: f64) -> Result<Self> {
        if prob.q() >= prob.p() {
            return Err(MataError::InvalidConfig("problem has no nuisance coefficient".into()));
        }
        let profile = prob.correlation_profile();
        let rho = *profile.rho.last().expect("at least one nuisance column");
        Self::new(prob.n() - prob.p(), prob.n(), rho.clamp(-RHO_CLAMP, RHO_CLAMP), d, alpha)
    }

    fn s(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub x_halfwidth: f64,
    pub y_lo_quantile: f64,
    pub y_hi_quantile: f64,
    pub nodes_x: usize,
    pub nodes_y: usize,
    pub delta_tol: f64,
    pub gamma_grid_max: f64,
    pub gamma_refine_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            x_halfwidth: 8.0,
            y_lo_quantile: 1e-10,
            y_hi_quantile: 1.0 - 1e-10,
            nodes_x: 200,
            nodes_y: 200,
            delta_tol: 1e-10,
            gamma_grid_max: 12.0,
            gamma_refine_tol: 1e-6,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.x_halfwidth, self.delta_tol, self.gamma_grid_max, self.gamma_refine_tol];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(MataError::InvalidConfig("quadrature settings must be positive and finite".into()));
        }
        if !(self.y_lo_quantile > 0.0 && self.y_lo_quantile < self.y_hi_quantile && self.y_hi_quantile < 1.0) {
            return Err(MataError::InvalidConfig("y quantiles must satisfy 0 < lo < hi < 1".into()));
        }
        if self.nodes_x < 20 || self.nodes_y < 20 {
            return Err(MataError::InvalidConfig("at least 20 nodes per axis are required".into()));
        }
        Ok(())
    }

    pub fn doubled(&self) -> Self {
        Self { nodes_x: 2 * self.nodes_x, nodes_y: 2 * self.nodes_y, ..*self }
    }
}

/// Density of `sqrt(Q / m)` with `Q ~ chi^2_m`.
pub fn f_m_pdf(y: f64, m: usize) -> Result<f64> {
    if !(y > 0.0) {
        return Err(MataError::DomainError(format!("f_m needs y > 0, got {y}")));
    }
    let mf = m as f64;
    let half = 0.5 * mf;
    let ln = std::f64::consts::LN_2 + half * half.ln() + (mf - 1.0) * y.ln() - half * y * y - libm::lgamma(half);
    Ok(ln.exp())
}

/// Quantile of `f_m`, by bisection on `ln y` against the log tail area
/// (the library chi-square inverse is unreliable deep in the lower tail).
pub fn f_m_quantile(p: f64, m: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(MataError::DomainError(format!("quantile level must lie in (0, 1), got {p}")));
    }
    let chi = ChiSquared::new(m as f64).map_err(|e| MataError::DomainError(e.to_string()))?;
    let mf = m as f64;
    // increasing in t
    let g = |t: f64| {
        let q = mf * (2.0 * t).exp();
        if p < 0.5 {
            chi.cdf(q).ln() - p.ln()
        } else {
            (1.0 - p).ln() - chi.sf(q).ln()
        }
    };
    let (mut lo, mut hi) = (-60.0f64, 5.0f64);
    if g(lo) > 0.0 || g(hi) < 0.0 {
        return Err(MataError::DomainError(format!("f_m quantile at {p} out of range")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Root finder for `delta_u` at a fixed `u`.
#[derive(Debug, Clone)]
pub struct DeltaSolver {
    cfg: TwoModelConfig,
    u: f64,
    tol: f64,
    g_m: StudentT,
    g_m1: StudentT,
    q_m: f64,
    q_m1: f64,
}

impl DeltaSolver {
    pub fn new(cfg: TwoModelConfig, u: f64, tol: f64) -> Result<Self> {
        if !(u > 0.0 && u < 1.0) {
            return Err(MataError::DomainError(format!("u must lie in (0, 1), got {u}")));
        }
        let g_m = StudentT::new(cfg.m as f64);
        let g_m1 = StudentT::new(cfg.m as f64 + 1.0);
        let q_m = g_m.inverse_cdf(u);
        let q_m1 = g_m1.inverse_cdf(u);
        Ok(Self { cfg, u, tol, g_m, g_m1, q_m, q_m1 })
    }

    fn parts(&self, x: f64, y: f64) -> (f64, f64) {
        let c = &self.cfg;
        let mf = c.m as f64;
        let weight = w1(x * x / (y * y), c.m, c.n, c.d);
        let scale = ((mf + 1.0) / (x * x + mf * y * y)).sqrt() / c.s();
        (weight, scale)
    }

    /// Left side of the defining equation.
    pub fn lhs(&self, x: f64, y: f64, delta: f64) -> f64 {
        let (w, a) = self.parts(x, y);
        self.lhs_with(x, y, delta, w, a)
    }

    fn lhs_with(&self, x: f64, y: f64, delta: f64, w: f64, a: f64) -> f64 {
        w * self.g_m1.cdf(a * (delta - self.cfg.rho * x)) + (1.0 - w) * self.g_m.cdf(delta / y)
    }

    /// Returns `(delta, |lhs - u|)`.
    ///
    /// The root lies between the two pure-model roots; a weight below
    /// `tol / 10` moves the left side by less than that, so the pure root of
    /// the dominant model is already within tolerance.
    pub fn solve(&self, x: f64, y: f64) -> (f64, f64) {
        let (w, a) = self.parts(x, y);
        let d0 = y * self.q_m;
        let d1 = self.cfg.rho * x + self.q_m1 / a;
        let f = |d: f64| self.lhs_with(x, y, d, w, a) - self.u;
        if w < 0.1 * self.tol {
            return (d0, f(d0).abs());
        }
        if 1.0 - w < 0.1 * self.tol {
            return (d1, f(d1).abs());
        }
        let (lo, hi) = (d0.min(d1), d0.max(d1));
        let pad = 0.2 * (hi - lo) + 1e-12 * (1.0 + hi.abs().max(lo.abs()));
        let (mut lo, mut hi) = (lo - pad, hi + pad);
        let (flo, fhi) = (f(lo), f(hi));
        if !(flo < 0.0 && fhi > 0.0) {
            // both ends round to u: the bracket is already below resolution
            let mid = 0.5 * (lo + hi);
            return (mid, f(mid).abs());
        }
        let slope = |d: f64| w * a * self.g_m1.pdf(a * (d - self.cfg.rho * x)) + (1.0 - w) * self.g_m.pdf(d / y) / y;
        let ftol = 0.1 * self.tol;
        let mut d = w * d1 + (1.0 - w) * d0;
        for _ in 0..100 {
            let fd = f(d);
            if fd.abs() <= ftol {
                return (d, fd.abs());
            }
            if fd < 0.0 {
                lo = d;
            } else {
                hi = d;
            }
            let step = fd / slope(d);
            let next = d - step;
            d = if next > lo && next < hi && step.is_finite() { next } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * (1.0 + d.abs()) {
                break;
            }
        }
        let opts = BrentOptions { xtol: 1e-15 * (1.0 + hi.abs()), ftol, max_iter: 200 };
        match brent(f, lo, hi, opts) {
            Ok(r) => (r.x, r.fx.abs()),
            Err(_) => (d, f(d).abs()),
        }
    }
}

/// `delta_u(x, y)` solved to `|lhs - u| < 1e-10`.
pub fn delta_u(x: f64, y: f64, u: f64, cfg: &TwoModelConfig) -> Result<f64> {
    if !(y > 0.0) {
        return Err(MataError::DomainError(format!("delta_u needs y > 0, got {y}")));
    }
    Ok(DeltaSolver::new(*cfg, u, 1e-10)?.solve(x, y).0)
}

/// Both `delta` endpoints on a fixed tensor-product node grid.
///
/// The grid does not depend on `gamma`, so one grid serves every `gamma`
/// whose window `[gamma - x_halfwidth, gamma + x_halfwidth]` it covers.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    cfg: TwoModelConfig,
    x_lo: f64,
    x_hi: f64,
    xs: Vec<f64>,
    wx: Vec<f64>,
    // y weight times f_m(y)
    wy: Vec<f64>,
    d_lo: Vec<f64>,
    d_hi: Vec<f64>,
    max_residual: f64,
    min_gap: f64,
}

impl CoverageGrid {
    pub fn new(cfg: TwoModelConfig, x_lo: f64, x_hi: f64, nx: usize, quad: &QuadratureConfig) -> Result<Self> {
        quad.validate()?;
        if !(x_hi > x_lo) {
            return Err(MataError::InvalidConfig("empty x range".into()));
        }
        let y_lo = f_m_quantile(quad.y_lo_quantile, cfg.m)?;
        let y_hi = f_m_quantile(quad.y_hi_quantile, cfg.m)?;
        if !(y_lo > 0.0 && y_hi > y_lo && y_hi.is_finite()) {
            return Err(MataError::DomainError(format!("bad y range [{y_lo}, {y_hi}]")));
        }
        let (xs, wx) = GaussLegendre::new(nx).on_interval(x_lo, x_hi);
        let (ys, wy) = GaussLegendre::new(quad.nodes_y).on_interval(y_lo, y_hi);
        let wy = ys.iter().zip(&wy).map(|(&y, &w)| Ok(w * f_m_pdf(y, cfg.m)?)).collect::<Result<Vec<_>>>()?;

        let lower = DeltaSolver::new(cfg, cfg.alpha / 2.0, quad.delta_tol)?;
        let upper = DeltaSolver::new(cfg, 1.0 - cfg.alpha / 2.0, quad.delta_tol)?;
        // row-major in x; each row is one x node
        let rows: Vec<(Vec<f64>, Vec<f64>, f64, f64)> = xs
            .par_iter()
            .map(|&x| {
                let mut lo = Vec::with_capacity(ys.len());
                let mut hi = Vec::with_capacity(ys.len());
                let mut resid: f64 = 0.0;
                let mut gap = f64::INFINITY;
                for &y in &ys {
                    let (a, ra) = lower.solve(x, y);
                    let (b, rb) = upper.solve(x, y);
                    resid = resid.max(ra).max(rb);
                    gap = gap.min(b - a);
                    lo.push(a);
                    hi.push(b);
                }
                (lo, hi, resid, gap)
            })
            .collect();
        let mut d_lo = Vec::with_capacity(xs.len() * ys.len());
        let mut d_hi = Vec::with_capacity(xs.len() * ys.len());
        let mut max_residual: f64 = 0.0;
        let mut min_gap = f64::INFINITY;
        for (lo, hi, r, g) in rows {
            d_lo.extend(lo);
            d_hi.extend(hi);
            max_residual = max_residual.max(r);
            min_gap = min_gap.min(g);
        }
        Ok(Self { cfg, x_lo, x_hi, xs, wx, wy, d_lo, d_hi, max_residual, min_gap })
    }

    /// Grid on `[gamma - x_halfwidth, gamma + x_halfwidth]` with `nodes_x` nodes.
    pub fn centered(gamma: f64, cfg: TwoModelConfig, quad: &QuadratureConfig) -> Result<Self> {
        let hw = quad.x_halfwidth;
        Self::new(cfg, gamma - hw, gamma + hw, quad.nodes_x, quad)
    }

    /// Grid on `[-x_halfwidth, gamma_max + x_halfwidth]`, keeping the node
    /// density of a centered grid.
    pub fn for_search(cfg: TwoModelConfig, gamma_max: f64, quad: &QuadratureConfig) -> Result<Self> {
        let hw = quad.x_halfwidth;
        let (lo, hi) = (-hw, gamma_max + hw);
        let nx = ((quad.nodes_x as f64) * (hi - lo) / (2.0 * hw)).ceil() as usize;
        Self::new(cfg, lo, hi, nx.max(quad.nodes_x), quad)
    }

    pub fn config(&self) -> &TwoModelConfig {
        &self.cfg
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    /// Largest `|lhs - u|` over all node solves.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// Smallest `delta_hi - delta_lo` over the grid.
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    pub fn coverage(&self, gamma: f64) -> f64 {
        let rho = self.cfg.rho;
        let s = self.cfg.s();
        let ny = self.wy.len();
        let rows: Vec<f64> = self
            .xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let shift = rho * (x - gamma);
                let lo = &self.d_lo[i * ny..(i + 1) * ny];
                let hi = &self.d_hi[i * ny..(i + 1) * ny];
                let terms: Vec<f64> = (0..ny)
                    .map(|j| self.wy[j] * norm_interval_prob((lo[j] - shift) / s, (hi[j] - shift) / s))
                    .collect();
                self.wx[i] * norm_pdf(x - gamma) * pairwise_sum(&terms)
            })
            .collect();
        pairwise_sum(&rows)
    }
}

/// Coverage at `gamma` on the default centered rule, rejected with
/// `QuadratureError` when doubling both node counts moves it by more than
/// [`DOUBLING_TOL`].
pub fn coverage_probability(gamma: f64, cfg: &TwoModelConfig, quad: &QuadratureConfig) -> Result<f64> {
    let (value, change) = coverage_with_doubling(gamma, cfg, quad)?;
    if change > DOUBLING_TOL {
        return Err(MataError::QuadratureError { change });
    }
    Ok(value)
}

/// `(coverage, |coverage - coverage with doubled nodes|)`.
pub fn coverage_with_doubling(gamma: f64, cfg: &TwoModelConfig, quad: &QuadratureConfig) -> Result<(f64, f64)> {
    if !gamma.is_finite() {
        return Err(MataError::DomainError(format!("gamma must be finite, got {gamma}")));
    }
    let base = CoverageGrid::centered(gamma, *cfg, quad)?.coverage(gamma);
    let fine = CoverageGrid::centered(gamma, *cfg, &quad.doubled())?.coverage(gamma);
    Ok((base, (fine - base).abs()))
}
