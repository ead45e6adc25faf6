//! Data-based model weights.
//!
//! Weights are formed from the ratios `x_K = U_K / RSS` through a kernel
//! `r(x, |K|)`; the full model always carries the unnormalized weight 1. All
//! arithmetic is done on `ln r` with a max-shift, so neither large `n` nor a
//! large family overflows.

use std::fmt;
use std::sync::Arc;

use crate::error::{MataError, Result};
use crate::linreg::ModelFit;
use crate::quadrature::CompensatedSum;

type KernelFn = dyn Fn(f64, usize) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Kernel {
    /// Weight proportional to `exp(-GIC(K)/2)`, i.e.
    /// `r(x, k) = exp(d k / 2) / (1 + x)^(n/2)`.
    Gic { d: f64 },
    Custom(Arc<KernelFn>),
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Gic { d } => write!(f, "Gic {{ d: {d} }}"),
            Kernel::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightSpec {
    kernel: Kernel,
    n: usize,
}

impl WeightSpec {
    pub fn gic(d: f64, n: usize) -> Result<Self> {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(MataError::InvalidConfig(format!("penalty d must be finite and >= 0, got {d}")));
        }
        Ok(Self { kernel: Kernel::Gic { d }, n })
    }

    pub fn aic(n: usize) -> Self {
        Self { kernel: Kernel::Gic { d: 2.0 }, n }
    }

    pub fn bic(n: usize) -> Self {
        Self { kernel: Kernel::Gic { d: (n as f64).ln() }, n }
    }

    /// Register a custom kernel after probing C1 and C2 for `k = 1..=max_k`.
    pub fn custom<F>(kernel: F, n: usize, max_k: usize) -> Result<Self>
    where
        F: Fn(f64, usize) -> f64 + Send + Sync + 'static,
    {
        probe_c1(&kernel, max_k)?;
        probe_c2(&kernel, max_k)?;
        Ok(Self { kernel: Kernel::Custom(Arc::new(kernel)), n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// The GIC penalty, if this is a GIC spec.
    pub fn d(&self) -> Option<f64> {
        match self.kernel {
            Kernel::Gic { d } => Some(d),
            Kernel::Custom(_) => None,
        }
    }

    /// `ln r(x, k)` for `k >= 1`.
    pub fn ln_kernel(&self, x: f64, k: usize) -> Result<f64> {
        debug_assert!(k >= 1);
        match &self.kernel {
            Kernel::Gic { d } => Ok(0.5 * d * k as f64 - 0.5 * self.n as f64 * x.ln_1p()),
            Kernel::Custom(f) => {
                let r = f(x, k);
                if !(r > 0.0 && r.is_finite()) {
                    return Err(MataError::InvalidKernel(format!("r({x}, {k}) = {r}")));
                }
                Ok(r.ln())
            }
        }
    }
}

/// The C1/C2 probe grid: 0 followed by log-spaced points up to 1e6.
fn probe_grid() -> Vec<f64> {
    std::iter::once(0.0).chain((0..=120).map(|i| 10f64.powf(-6.0 + 0.1 * i as f64))).collect()
}

/// C1: decreasing in `x` for each `k`, and negligible by `x = 1e6`.
pub fn probe_c1<F: Fn(f64, usize) -> f64>(kernel: &F, max_k: usize) -> Result<()> {
    let grid = probe_grid();
    for k in 1..=max_k {
        let vals: Vec<f64> = grid.iter().map(|&x| kernel(x, k)).collect();
        if vals.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(MataError::InvalidKernel(format!("non-positive or non-finite value for k = {k}")));
        }
        if vals.windows(2).any(|w| w[1] > w[0]) {
            return Err(MataError::InvalidKernel(format!("C1: r(x, {k}) increases in x")));
        }
        if vals[vals.len() - 1] >= vals[0] * 1e-6 {
            return Err(MataError::InvalidKernel(format!("C1: r(x, {k}) does not vanish as x grows")));
        }
    }
    Ok(())
}

/// C2: nondecreasing in `k` for each probed `x`.
pub fn probe_c2<F: Fn(f64, usize) -> f64>(kernel: &F, max_k: usize) -> Result<()> {
    for x in probe_grid() {
        let vals: Vec<f64> = (1..=max_k).map(|k| kernel(x, k)).collect();
        if vals.windows(2).any(|w| w[1] < w[0]) {
            return Err(MataError::InvalidKernel(format!("C2: r({x}, k) decreases in k")));
        }
    }
    Ok(())
}

/// `n ln(RSS_K) + d (p - |K|)`.
pub fn gic(rss_k: f64, card_k: usize, p: usize, spec: &WeightSpec) -> Result<f64> {
    let d = spec
        .d()
        .ok_or_else(|| MataError::InvalidConfig("GIC needs a GIC weight spec".into()))?;
    if !(rss_k > 0.0) {
        return Err(MataError::DegenerateFit);
    }
    Ok(spec.n as f64 * rss_k.ln() + d * (p as f64 - card_k as f64))
}

/// Turn log unnormalized weights into normalized weights in place.
pub(crate) fn normalize_log_weights(lw: &mut [f64]) {
    let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for v in lw.iter_mut() {
        *v = (*v - max).exp();
    }
    let total: CompensatedSum = lw.iter().copied().collect();
    let total = total.value();
    for v in lw.iter_mut() {
        *v /= total;
    }
}

/// Weights aligned with `fits`. `fits` must contain the full model.
pub fn model_weights(fits: &[ModelFit], rss_full: f64, spec: &WeightSpec) -> Result<Vec<f64>> {
    if !fits.iter().any(|f| f.subset.is_empty()) {
        return Err(MataError::InvalidProblem("model family must contain the full model".into()));
    }
    if !(rss_full > 0.0) {
        return Err(MataError::DegenerateFit);
    }
    let mut lw = fits
        .iter()
        .map(|f| {
            if f.subset.is_empty() {
                Ok(0.0)
            } else {
                if f.u < 0.0 {
                    return Err(MataError::Inconsistent(format!("negative U_K for {}", f.subset)));
                }
                spec.ln_kernel(f.u / rss_full, f.subset.len())
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    normalize_log_weights(&mut lw);
    Ok(lw)
}

/// Two-model weight on the submodel as a function of the squared scaled
/// coefficient estimate `z`.
pub fn w1(z: f64, m: usize, n: usize, d: f64) -> f64 {
    let e = 0.5 * n as f64 * (z / m as f64).ln_1p() - 0.5 * d;
    1.0 / (1.0 + e.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linreg::test_support::random_problem;
    use crate::linreg::ModelSubset;

    #[test]
    fn gic_values() {
        let spec = WeightSpec::gic(1.7, 30).unwrap();
        assert!((gic(1.0, 2, 6, &spec).unwrap() - 1.7 * 4.0).abs() < 1e-15);
        let bic60 = WeightSpec::bic(60);
        let v = gic(std::f64::consts::E, 0, 16, &bic60).unwrap();
        assert!((v - (60.0 + 60f64.ln() * 16.0)).abs() < 1e-12);
        assert_eq!(gic(0.0, 1, 4, &spec).unwrap_err(), MataError::DegenerateFit);
        let d0 = WeightSpec::gic(0.0, 20).unwrap();
        assert!(gic(2.0, 1, 3, &d0).unwrap() < gic(3.0, 2, 3, &d0).unwrap());
        assert!(WeightSpec::gic(-1.0, 10).is_err());
    }

    #[test]
    fn single_model_family_has_unit_weight() {
        let prob = random_problem(20, 4, 1, 2);
        let fits = prob.fit_family(&[ModelSubset::EMPTY]).unwrap();
        let w = model_weights(&fits, fits[0].rss, &WeightSpec::aic(20)).unwrap();
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn gic_kernel_matches_exp_gic_form() {
        let prob = random_problem(25, 4, 2, 7);
        let family = ModelSubset::all(2, 4);
        let fits = prob.fit_family(&family).unwrap();
        let rss = fits[0].rss;
        for spec in [WeightSpec::aic(25), WeightSpec::bic(25), WeightSpec::gic(0.3, 25).unwrap()] {
            let w = model_weights(&fits, rss, &spec).unwrap();
            let g: Vec<f64> = fits
                .iter()
                .map(|f| gic(rss + f.u, f.subset.len(), 4, &spec).unwrap())
                .collect();
            let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
            let e: Vec<f64> = g.iter().map(|v| (-(v - gmin) / 2.0).exp()).collect();
            let total: f64 = e.iter().sum();
            for (wi, ei) in w.iter().zip(&e) {
                assert!((wi - ei / total).abs() <= 1e-12 * wi.max(1e-300));
            }
            // ratio form on a two-model pair
            assert!(((w[1] / w[0]) / (e[1] / e[0]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_u_drives_weight_to_zero() {
        let prob = random_problem(20, 3, 2, 2);
        let mut fits = prob.fit_family(&ModelSubset::all(2, 3)).unwrap();
        let rss = fits[0].rss;
        let spec = WeightSpec::aic(20);
        let mut last = 1.0;
        for scale in [1.0, 10.0, 1e3, 1e6, 1e12] {
            fits[1].u = scale * rss;
            let w = model_weights(&fits, rss, &spec).unwrap();
            assert!(w[1] <= last);
            last = w[1];
        }
        assert!(last < 1e-100);
    }

    #[test]
    fn custom_kernel_probes() {
        // AICc-like but valid kernel
        let ok = WeightSpec::custom(|x, k| (k as f64).exp() / (1.0 + x).powi(5), 30, 4);
        assert!(ok.is_ok());
        let not_decreasing = WeightSpec::custom(|x, k| (1.0 + x) * k as f64, 30, 4);
        assert!(matches!(not_decreasing, Err(MataError::InvalidKernel(_))));
        let not_vanishing = WeightSpec::custom(|x, k| k as f64 * (1.0 + 1.0 / (1.0 + x)), 30, 4);
        assert!(matches!(not_vanishing, Err(MataError::InvalidKernel(_))));
        let c2_fail = WeightSpec::custom(|x, k| 1.0 / (k as f64 * (1.0 + x).powi(3)), 30, 4);
        assert!(matches!(c2_fail, Err(MataError::InvalidKernel(_))));
    }

    #[test]
    fn custom_kernel_gic_equivalent() {
        let n = 25;
        let d = 2.0;
        let custom =
            WeightSpec::custom(move |x: f64, k| (0.5 * d * k as f64).exp() / (1.0 + x).powf(n as f64 / 2.0), n, 2)
                .unwrap();
        let prob = random_problem(n, 4, 2, 19);
        let fits = prob.fit_family(&ModelSubset::all(2, 4)).unwrap();
        let a = model_weights(&fits, fits[0].rss, &custom).unwrap();
        let b = model_weights(&fits, fits[0].rss, &WeightSpec::aic(n)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gic_kernel_passes_probes() {
        for n in [5usize, 20, 60] {
            for spec in [WeightSpec::aic(n), WeightSpec::bic(n)] {
                let f = |x: f64, k: usize| spec.ln_kernel(x, k).unwrap().exp();
                probe_c1(&f, 12).unwrap();
                probe_c2(&f, 12).unwrap();
            }
        }
    }

    #[test]
    fn w1_shape() {
        let (m, n) = (44, 60);
        for d in [0.0, 2.0, 60f64.ln()] {
            assert!((w1(0.0, m, n, d) - 1.0 / (1.0 + (-d / 2.0).exp())).abs() < 1e-15);
            let mut prev = w1(0.0, m, n, d);
            for i in 1..200 {
                let z = 0.1 * i as f64;
                let cur = w1(z, m, n, d);
                assert!(cur < prev);
                prev = cur;
            }
            assert!(w1(1e12, m, n, d) < 1e-300);
        }
        let extreme = w1(1e12, 1, 1_000_000, 2.0);
        assert!(extreme.is_finite() && extreme == 0.0);
        assert!(w1(1e-3, 5, 1_000_000, 1e6f64.ln()).is_finite());
        // d = 0 gives w1 < 1/2 everywhere on z > 0
        assert!(w1(1e-9, 5, 100, 0.0) < 0.5);
    }

    #[test]
    fn two_model_weight_matches_w1() {
        let prob = random_problem(30, 5, 4, 12);
        let family = [ModelSubset::EMPTY, ModelSubset::from_indices(&[4])];
        let fits = prob.fit_family(&family).unwrap();
        let full = prob.fit_full().unwrap();
        let m = 25;
        let sigma2 = full.rss / m as f64;
        let vp = prob.xtx_inv()[(4, 4)];
        let z = full.beta[4] * full.beta[4] / (sigma2 * vp);
        for spec in [WeightSpec::aic(30), WeightSpec::bic(30)] {
            let w = model_weights(&fits, full.rss, &spec).unwrap();
            let expect = w1(z, m, 30, spec.d().unwrap());
            assert!((w[1] - expect).abs() < 1e-12);
        }
    }
}
