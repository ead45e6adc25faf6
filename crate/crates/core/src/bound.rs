//! Upper bound on the minimum coverage of the full-family interval.
//!
//! The bound is the minimum over `gamma >= 0` of the two-model coverage with
//! `rho` set to `|rho|_max`. The search runs on one cached node grid: a
//! coarse pass over `0, 0.25, ..., gamma_grid_max`, then golden-section
//! refinement around the best coarse point.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::coverage::{coverage_with_doubling, CoverageGrid, QuadratureConfig, TwoModelConfig, DOUBLING_TOL};
use crate::error::{MataError, Result};
use crate::roots::golden_section;

pub const COARSE_STEP: f64 = 0.25;

/// How the GIC penalty `d` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DRule {
    Aic,
    Bic,
    Fixed(f64),
}

impl DRule {
    pub fn d(&self, n: usize) -> f64 {
        match *self {
            DRule::Aic => 2.0,
            DRule::Bic => (n as f64).ln(),
            DRule::Fixed(d) => d,
        }
    }
}

impl FromStr for DRule {
    type Err = MataError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "aic" => Ok(DRule::Aic),
            "bic" => Ok(DRule::Bic),
            _ => {
                let v = lower
                    .strip_prefix("fixed:")
                    .ok_or_else(|| MataError::InvalidConfig(format!("unknown d-rule '{s}'")))?;
                let d: f64 =
                    v.parse().map_err(|_| MataError::InvalidConfig(format!("bad fixed d value '{v}'")))?;
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(MataError::InvalidConfig(format!("d must be finite and nonnegative, got {d}")));
                }
                Ok(DRule::Fixed(d))
            }
        }
    }
}

impl fmt::Display for DRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DRule::Aic => write!(f, "aic"),
            DRule::Bic => write!(f, "bic"),
            DRule::Fixed(d) => write!(f, "fixed:{d}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundResult {
    pub upper_bound: f64,
    pub gamma_star: f64,
    pub rho_max_abs: f64,
    pub cfg: TwoModelConfig,
    /// Coarse-grid `(gamma, coverage)` evaluations.
    pub diagnostics: Vec<(f64, f64)>,
    /// Change in coverage at `gamma_star` when both node counts are doubled.
    pub doubling_change: f64,
    pub gamma_grid_max: f64,
}

pub fn upper_bound(
    rho_max_abs: f64,
    m: usize,
    n: usize,
    d: f64,
    alpha: f64,
    quad: &QuadratureConfig,
) -> Result<BoundResult> {
    if !(0.0..1.0).contains(&rho_max_abs) {
        return Err(MataError::InvalidConfig(format!("|rho|_max must lie in [0, 1), got {rho_max_abs}")));
    }
    let cfg = TwoModelConfig::new(m, n, rho_max_abs, d, alpha)?;
    quad.validate()?;

    let mut gmax = quad.gamma_grid_max;
    let mut attempt = 0;
    let (gamma_star, value, diagnostics) = loop {
        let grid = CoverageGrid::for_search(cfg, gmax, quad)?;
        let steps = (gmax / COARSE_STEP).round() as usize;
        let diagnostics: Vec<(f64, f64)> = (0..=steps)
            .into_par_iter()
            .map(|i| {
                let g = (i as f64 * COARSE_STEP).min(gmax);
                (g, grid.coverage(g))
            })
            .collect();
        let best = diagnostics
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i)
            .expect("nonempty coarse grid");
        if best == steps && attempt == 0 {
            attempt += 1;
            gmax *= 2.0;
            continue;
        }
        let lo = diagnostics[best.saturating_sub(1)].0;
        let hi = diagnostics[(best + 1).min(steps)].0;
        let refined = golden_section(|g| grid.coverage(g), lo, hi, quad.gamma_refine_tol);
        let (g, v) = if refined.fx <= diagnostics[best].1 {
            (refined.x, refined.fx)
        } else {
            diagnostics[best]
        };
        break (g, v, diagnostics);
    };

    let (_, change) = coverage_with_doubling(gamma_star, &cfg, quad)?;
    if change > DOUBLING_TOL {
        return Err(MataError::QuadratureError { change });
    }
    Ok(BoundResult {
        upper_bound: value,
        gamma_star,
        rho_max_abs,
        cfg,
        diagnostics,
        doubling_change: change,
        gamma_grid_max: gmax,
    })
}

/// One row of a bound-versus-`|rho|_max` table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub n: usize,
    pub m: usize,
    pub d: f64,
    pub alpha: f64,
    pub rho_max_abs: f64,
    pub gamma_star: f64,
    pub upper_bound: f64,
}

impl CurveRow {
    pub const HEADER: [&'static str; 7] = ["n", "m", "d", "alpha", "rho_max_abs", "gamma_star", "upper_bound"];

    pub fn from_result(r: &BoundResult) -> Self {
        Self {
            n: r.cfg.n,
            m: r.cfg.m,
            d: r.cfg.d,
            alpha: r.cfg.alpha,
            rho_max_abs: r.rho_max_abs,
            gamma_star: r.gamma_star,
            upper_bound: r.upper_bound,
        }
    }
}

/// Per-`(m, n)` curve with its largest upward step in `|rho|_max`.
#[derive(Debug, Clone)]
pub struct Curve {
    pub m: usize,
    pub n: usize,
    pub rows: Vec<CurveRow>,
    /// `max_i (bound_{i+1} - bound_i)`; nonpositive for a nonincreasing curve.
    pub max_increase: f64,
}

pub fn bound_curve(
    rho_grid: &[f64],
    m_n_pairs: &[(usize, usize)],
    d_rule: DRule,
    alpha: f64,
    quad: &QuadratureConfig,
) -> Result<Vec<Curve>> {
    if rho_grid.is_empty() || m_n_pairs.is_empty() {
        return Err(MataError::InvalidConfig("curve needs at least one rho and one (m, n)".into()));
    }
    m_n_pairs
        .iter()
        .map(|&(m, n)| {
            let d = d_rule.d(n);
            let rows = rho_grid
                .iter()
                .map(|&rho| upper_bound(rho, m, n, d, alpha, quad).map(|r| CurveRow::from_result(&r)))
                .collect::<Result<Vec<_>>>()?;
            let max_increase = rows
                .windows(2)
                .map(|w| w[1].upper_bound - w[0].upper_bound)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(Curve { m, n, rows, max_increase })
        })
        .collect()
}
