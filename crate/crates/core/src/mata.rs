//! The model-averaged tail area interval.
//!
//! For data `y` the interval `[lower, upper]` solves `h(lower) = 1 - alpha/2`
//! and `h(upper) = alpha/2`, where
//!
//! ```text
//! h(z) = sum_K w(K) G_{n-p+|K|}((a' beta_K - z) / (S_K sqrt(v(K))))
//! ```
//!
//! is a weighted mixture of t tail areas and is continuous and strictly
//! decreasing in `z`.

use crate::error::{MataError, Result};
use crate::linreg::{ModelFit, ModelSubset, RegressionProblem};
use crate::quadrature::CompensatedSum;
use crate::roots::{brent, expand_bracket, BrentOptions};
use crate::special::StudentT;
use crate::weights::{model_weights, WeightSpec};

/// Target accuracy of `|h(endpoint) - target|`.
pub const H_TOL: f64 = 1e-10;

const MAX_DOUBLINGS: usize = 100;

#[derive(Debug, Clone)]
pub struct MataRequest {
    prob: RegressionProblem,
    family: Vec<ModelSubset>,
    spec: WeightSpec,
    alpha: f64,
}

impl MataRequest {
    /// `family = None` averages over every subset of the nuisance columns.
    pub fn new(
        prob: RegressionProblem,
        family: Option<Vec<ModelSubset>>,
        spec: WeightSpec,
        alpha: f64,
    ) -> Result<Self> {
        if prob.y().is_none() {
            return Err(MataError::MissingResponse);
        }
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(MataError::InvalidConfig(format!("alpha must lie in (0, 0.5], got {alpha}")));
        }
        let family = family.unwrap_or_else(|| ModelSubset::all(prob.q(), prob.p()));
        if !family.contains(&ModelSubset::EMPTY) {
            return Err(MataError::InvalidConfig("model family must contain the full model".into()));
        }
        let mut sorted = family.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != family.len() {
            return Err(MataError::InvalidConfig("model family has duplicate members".into()));
        }
        for k in &family {
            k.validate(prob.q(), prob.p())?;
        }
        Ok(Self { prob, family, spec, alpha })
    }

    pub fn problem(&self) -> &RegressionProblem {
        &self.prob
    }

    pub fn family(&self) -> &[ModelSubset] {
        &self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }
}

#[derive(Debug, Clone)]
pub struct MataInterval {
    pub lower: f64,
    pub upper: f64,
    /// Family members and their weights, aligned.
    pub subsets: Vec<ModelSubset>,
    pub weights: Vec<f64>,
    /// `(|h(lower) - (1 - alpha/2)|, |h(upper) - alpha/2|)`.
    pub h_residuals: (f64, f64),
}

impl MataInterval {
    pub fn contains(&self, z: f64) -> bool {
        self.lower <= z && z <= self.upper
    }

    /// The `k` heaviest models, heaviest first; ties keep family order.
    pub fn top_weights(&self, k: usize) -> Vec<(ModelSubset, f64)> {
        let mut pairs: Vec<(ModelSubset, f64)> =
            self.subsets.iter().copied().zip(self.weights.iter().copied()).collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        pairs.truncate(k);
        pairs
    }
}

#[derive(Debug, Clone, Copy)]
struct Component {
    weight: f64,
    center: f64,
    scale: f64,
    dist: usize,
}

/// The function `h` for one data set, with every per-model constant resolved.
#[derive(Debug, Clone)]
pub struct TailAreaMixture {
    components: Vec<Component>,
    dists: Vec<StudentT>,
    center: f64,
    max_scale: f64,
}

impl TailAreaMixture {
    pub fn new(fits: &[ModelFit], weights: &[f64]) -> Result<Self> {
        if fits.len() != weights.len() || fits.is_empty() {
            return Err(MataError::InvalidConfig("fits and weights must be non-empty and aligned".into()));
        }
        if fits.iter().any(|f| !(f.s2 > 0.0)) {
            return Err(MataError::DegenerateFit);
        }
        Self::from_parts(
            fits.iter()
                .zip(weights)
                .map(|(f, &w)| (w, f.theta, (f.s2 * f.v).sqrt(), f.df)),
        )
    }

    /// From `(weight, a' beta_K, S_K sqrt(v(K)), df)` per model.
    pub fn from_parts<I: IntoIterator<Item = (f64, f64, f64, usize)>>(parts: I) -> Result<Self> {
        let mut dists: Vec<StudentT> = Vec::new();
        let mut components = Vec::new();
        let mut center = CompensatedSum::default();
        let mut max_scale: f64 = 0.0;
        for (w, theta, scale, df) in parts {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(MataError::DegenerateFit);
            }
            let dist = match dists.iter().position(|d| d.df() == df as f64) {
                Some(i) => i,
                None => {
                    dists.push(StudentT::new(df as f64));
                    dists.len() - 1
                }
            };
            center.add(w * theta);
            max_scale = max_scale.max(scale);
            if w > 0.0 {
                components.push(Component { weight: w, center: theta, scale, dist });
            }
        }
        if components.is_empty() {
            return Err(MataError::InvalidConfig("no model carries positive weight".into()));
        }
        Ok(Self { components, dists, center: center.value(), max_scale })
    }

    /// Weighted center `sum_K w(K) a' beta_K`.
    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn h(&self, z: f64) -> f64 {
        let mut acc = CompensatedSum::default();
        for c in &self.components {
            acc.add(c.weight * self.dists[c.dist].cdf((c.center - z) / c.scale));
        }
        acc.value()
    }

    /// Solve `h(z) = target`; returns `(z, |h(z) - target|)`.
    pub fn solve(&self, target: f64) -> Result<(f64, f64)> {
        let f = |z: f64| self.h(z) - target;
        let (lo, hi) = expand_bracket(f, self.center, self.max_scale, MAX_DOUBLINGS)?;
        let opts = BrentOptions { xtol: 1e-13 * self.max_scale, ftol: 0.1 * H_TOL, max_iter: 300 };
        let root = brent(f, lo, hi, opts)?;
        if root.fx.abs() > 1e3 * H_TOL {
            return Err(MataError::Inconsistent(format!(
                "h could not be solved to tolerance: residual {:.3e}",
                root.fx.abs()
            )));
        }
        Ok((root.x, root.fx.abs()))
    }

    pub fn interval(&self, alpha: f64) -> Result<(f64, f64, (f64, f64))> {
        let (lower, rl) = self.solve(1.0 - alpha / 2.0)?;
        let (upper, ru) = self.solve(alpha / 2.0)?;
        Ok((lower, upper, (rl, ru)))
    }
}

/// `h(z, y; family)` for precomputed fits and weights.
pub fn h_value(z: f64, fits: &[ModelFit], weights: &[f64]) -> Result<f64> {
    Ok(TailAreaMixture::new(fits, weights)?.h(z))
}

/// Interval from explicit fits and weights (weights need not come from a
/// kernel, which makes degenerate mixtures easy to test).
pub fn solve_interval_with_weights(fits: &[ModelFit], weights: &[f64], alpha: f64) -> Result<MataInterval> {
    let mix = TailAreaMixture::new(fits, weights)?;
    let (lower, upper, h_residuals) = mix.interval(alpha)?;
    Ok(MataInterval {
        lower,
        upper,
        subsets: fits.iter().map(|f| f.subset).collect(),
        weights: weights.to_vec(),
        h_residuals,
    })
}

pub fn solve_interval(req: &MataRequest) -> Result<MataInterval> {
    let full = req.prob.fit_full()?;
    let yy = req.prob.y().map_or(0.0, |y| y.norm_squared());
    if !(full.rss > 1e-20 * yy) {
        return Err(MataError::DegenerateFit);
    }
    let fits = req.prob.fit_family(&req.family)?;
    let weights = model_weights(&fits, full.rss, &req.spec)?;
    solve_interval_with_weights(&fits, &weights, req.alpha)
}
