//! Distribution functions used throughout the crate.
//!
//! The Student t cdf is evaluated through the regularized incomplete beta
//! function with a modified-Lentz continued fraction. Both the value and its
//! complement are produced directly so that neither tail suffers from
//! cancellation. Standard normal functions wrap `libm::erfc`.

use libm::{erfc, lgamma as ln_gamma};

use crate::roots::{brent, BrentOptions};

const CF_EPS: f64 = 4.0 * f64::EPSILON;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 1000;

/// Continued fraction for I_x(a, b), valid (fast) for x < (a + 1)/(a + b + 2).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `(I_x(a,b), 1 - I_x(a,b))`.
///
/// `x_c` must equal `1 - x`; callers that can form it without cancellation
/// should do so.
pub fn beta_inc_pair(a: f64, b: f64, x: f64, x_c: f64, ln_beta_ab: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x_c <= 0.0 {
        return (1.0, 0.0);
    }
    beta_inc_pair_logs(a, b, x, x_c, x.ln(), x_c.ln(), ln_beta_ab)
}

/// As [`beta_inc_pair`] with `ln x` and `ln(1 - x)` supplied by the caller;
/// for large `a` the front factor `x^a` amplifies any error in `ln x`.
fn beta_inc_pair_logs(a: f64, b: f64, x: f64, x_c: f64, ln_x: f64, ln_xc: f64, ln_beta_ab: f64) -> (f64, f64) {
    let ln_front = a * ln_x + b * ln_xc - ln_beta_ab;
    if x < (a + 1.0) / (a + b + 2.0) {
        let v = (ln_front.exp() * beta_cf(a, b, x) / a).clamp(0.0, 1.0);
        (v, 1.0 - v)
    } else {
        let v = (ln_front.exp() * beta_cf(b, a, x_c) / b).clamp(0.0, 1.0);
        (1.0 - v, v)
    }
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln Gamma(a + 1/2) - ln Gamma(a)`, without the cancellation of two large
/// log-gamma values when `a` is large.
fn ln_gamma_half_ratio(a: f64) -> f64 {
    if a < 10.0 {
        return ln_gamma(a + 0.5) - ln_gamma(a);
    }
    // Stirling series tail S(z) = sum B_2k / (2k (2k-1) z^(2k-1))
    fn tail(z: f64) -> f64 {
        let z2 = z * z;
        (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / (1188.0 * z2)) / z2) / z2) / z2) / z
    }
    0.5 * a.ln() + a * (0.5 / a).ln_1p() - 0.5 + tail(a + 0.5) - tail(a)
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    beta_inc_pair(a, b, x, 1.0 - x, ln_beta(a, b)).0
}

/// Student t distribution with `df` degrees of freedom.
///
/// `ln B(df/2, 1/2)` is cached at construction; the cdf is on the hot path of
/// every root solve in the crate.
#[derive(Debug, Clone, Copy)]
pub struct StudentT {
    df: f64,
    half_df: f64,
    ln_beta: f64,
}

impl StudentT {
    pub fn new(df: f64) -> Self {
        assert!(df > 0.0 && df.is_finite(), "degrees of freedom must be positive");
        let half_df = 0.5 * df;
        // B(a, 1/2) = Gamma(a) Gamma(1/2) / Gamma(a + 1/2)
        let ln_beta = 0.5 * std::f64::consts::PI.ln() - ln_gamma_half_ratio(half_df);
        Self { df, half_df, ln_beta }
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        if t == f64::INFINITY {
            return 1.0;
        }
        if t == f64::NEG_INFINITY {
            return 0.0;
        }
        if t == 0.0 {
            return 0.5;
        }
        let t2 = t * t;
        let denom = self.df + t2;
        let r = t2 / self.df;
        let ln_x = -r.ln_1p();
        let ln_xc = r.ln() + ln_x;
        // tail = P(T > |t|) = I_x(df/2, 1/2) / 2 with x = df/(df + t^2)
        let (ix, _) = beta_inc_pair_logs(self.half_df, 0.5, self.df / denom, t2 / denom, ln_x, ln_xc, self.ln_beta);
        let tail = 0.5 * ix;
        if t > 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }

    /// Upper tail `1 - cdf(t)` without cancellation.
    pub fn sf(&self, t: f64) -> f64 {
        self.cdf(-t)
    }

    pub fn pdf(&self, t: f64) -> f64 {
        let ln_pdf = -(self.half_df + 0.5) * (t * t / self.df).ln_1p()
            - 0.5 * self.df.ln()
            - self.ln_beta;
        ln_pdf.exp()
    }

    /// Quantile function, accurate to roughly 1e-13 in probability.
    pub fn inverse_cdf(&self, p: f64) -> f64 {
        assert!(p > 0.0 && p < 1.0, "probability must lie in (0, 1)");
        if p == 0.5 {
            return 0.0;
        }
        // solve on the lower half and reflect
        let target = p.min(1.0 - p);
        let mut hi = 0.0;
        let mut lo = -1.0;
        while self.cdf(lo) > target {
            hi = lo;
            lo *= 2.0;
            if lo < -1e300 {
                return if p < 0.5 { f64::NEG_INFINITY } else { f64::INFINITY };
            }
        }
        let opts = BrentOptions { xtol: 1e-15, ftol: 1e-16, max_iter: 300 };
        let root = brent(|t| self.cdf(t) - target, lo, hi, opts)
            .map(|r| r.x)
            .unwrap_or(0.5 * (lo + hi));
        if p < 0.5 {
            root
        } else {
            -root
        }
    }
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal cdf.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal pdf.
pub fn norm_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `Phi(b) - Phi(a)` for `a <= b`, evaluated in whichever tail avoids
/// cancellation.
pub fn norm_interval_prob(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        norm_cdf(-a) - norm_cdf(-b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    }
}
