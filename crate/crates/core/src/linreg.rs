//! Full and restricted least-squares fits.
//!
//! A [`RegressionProblem`] factors its design once (Householder QR) and keeps
//! `(X'X)^{-1} = R^{-1} R^{-T}`. Every subset restriction `beta_i = 0, i in K`
//! is then handled by a [`SubsetOperator`], which holds only design-dependent
//! quantities. Applying an operator to a full fit costs `O(p |K|)`, which is
//! what makes exhaustive enumeration of 2^(p-q) models and Monte Carlo
//! replication cheap.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{MataError, Result};

/// Largest supported `p - q`.
pub const MAX_NUISANCE: usize = 30;

/// Smallest admissible `min |R_jj| / max |R_jj|` before the design is
/// declared rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// A subset `K` of the nuisance columns, as a bitmask over 0-based column
/// indices. The empty mask is the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ModelSubset(u64);

impl ModelSubset {
    pub const EMPTY: ModelSubset = ModelSubset(0);

    pub fn from_mask(mask: u64) -> Self {
        ModelSubset(mask)
    }

    /// Build from 0-based column indices.
    pub fn from_indices(indices: &[usize]) -> Self {
        ModelSubset(indices.iter().fold(0u64, |m, &i| m | (1u64 << i)))
    }

    pub fn mask(&self) -> u64 {
        self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(&self, col: usize) -> bool {
        col < 64 && self.0 & (1u64 << col) != 0
    }

    pub fn is_subset_of(&self, other: &ModelSubset) -> bool {
        self.0 & !other.0 == 0
    }

    /// 0-based column indices in increasing order.
    pub fn indices(&self) -> Vec<usize> {
        (0..64).filter(|&i| self.contains(i)).collect()
    }

    /// Every subset of columns `q..p` (0-based), ordered by mask value.
    pub fn all(q: usize, p: usize) -> Vec<ModelSubset> {
        assert!(q < p && p - q <= MAX_NUISANCE);
        (0..(1u64 << (p - q))).map(|m| ModelSubset(m << q)).collect()
    }

    /// Check the subset only touches nuisance columns `q..p`.
    pub fn validate(&self, q: usize, p: usize) -> Result<()> {
        let allowed = ((1u64 << (p - q)) - 1) << q;
        if self.0 & !allowed != 0 {
            return Err(MataError::InvalidProblem(format!(
                "subset {:#x} touches columns outside {}..{}",
                self.0,
                q + 1,
                p
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for ModelSubset {
    /// 1-based, e.g. `{2,5}`; the full model prints as `{}`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let cols: Vec<String> = self.indices().iter().map(|i| (i + 1).to_string()).collect();
        write!(f, "{{{}}}", cols.join(","))
    }
}

/// Unconstrained least-squares fit.
#[derive(Debug, Clone)]
pub struct FullFit {
    pub beta: DVector<f64>,
    pub rss: f64,
}

/// Least-squares fit under the restriction `beta_i = 0, i in K`.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub subset: ModelSubset,
    pub beta: DVector<f64>,
    /// `a' beta_K`.
    pub theta: f64,
    pub rss: f64,
    /// `rss / (n - p + |K|)`.
    pub s2: f64,
    /// Increase in RSS from imposing the restriction.
    pub u: f64,
    /// `var(a' beta_K) / sigma^2` under the restricted model.
    pub v: f64,
    /// Residual degrees of freedom `n - p + |K|`.
    pub df: usize,
}

#[derive(Debug, Clone)]
pub struct CorrelationProfile {
    /// `corr(theta_hat, beta_hat_j)` for the nuisance columns, in column order.
    pub rho: Vec<f64>,
    pub rho_max_abs: f64,
    /// 0-based column index achieving `rho_max_abs` (smallest on ties).
    pub argmax: usize,
}

/// Linear model `y = X beta + eps` with interest parameter `theta = a' beta`.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    x: DMatrix<f64>,
    y: Option<DVector<f64>>,
    a: DVector<f64>,
    q: usize,
    q_factor: DMatrix<f64>,
    r_factor: DMatrix<f64>,
    xtx_inv: DMatrix<f64>,
}

impl RegressionProblem {
    /// `q` is the number of leading coefficients that are never restricted;
    /// `a[q..]` must be exactly zero.
    pub fn new(x: DMatrix<f64>, y: Option<DVector<f64>>, a: DVector<f64>, q: usize) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 || n <= p {
            return Err(MataError::InvalidProblem(format!("need n > p >= 1, got n = {n}, p = {p}")));
        }
        if q < 1 || q >= p {
            return Err(MataError::InvalidProblem(format!("need 1 <= q < p, got q = {q}, p = {p}")));
        }
        if p - q > MAX_NUISANCE {
            return Err(MataError::TooManyNuisance { nuisance: p - q, cap: MAX_NUISANCE });
        }
        if a.len() != p {
            return Err(MataError::InvalidProblem(format!("a has length {}, expected {p}", a.len())));
        }
        if let Some(y) = &y {
            if y.len() != n {
                return Err(MataError::InvalidProblem(format!("y has length {}, expected {n}", y.len())));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(MataError::InvalidProblem("y contains non-finite values".into()));
            }
        }
        if x.iter().chain(a.iter()).any(|v| !v.is_finite()) {
            return Err(MataError::InvalidProblem("X or a contains non-finite values".into()));
        }
        if a.iter().all(|&v| v == 0.0) {
            return Err(MataError::InvalidProblem("a must be non-zero".into()));
        }
        if a.iter().skip(q).any(|&v| v != 0.0) {
            return Err(MataError::InvalidProblem(format!(
                "components {}..{} of a must be zero",
                q + 1,
                p
            )));
        }

        let qr = x.clone().qr();
        let r_factor = qr.r();
        let q_factor = qr.q();
        let diag: Vec<f64> = (0..p).map(|j| r_factor[(j, j)].abs()).collect();
        let rmax = diag.iter().cloned().fold(0.0, f64::max);
        let rmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let ratio = if rmax > 0.0 { rmin / rmax } else { 0.0 };
        if ratio < RANK_TOL {
            return Err(MataError::RankDeficient { ratio });
        }
        let r_inv = r_factor
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .ok_or(MataError::RankDeficient { ratio })?;
        let mut xtx_inv = &r_inv * r_inv.transpose();
        // exact symmetry for the downstream Cholesky factors
        for i in 0..p {
            for j in 0..i {
                let s = 0.5 * (xtx_inv[(i, j)] + xtx_inv[(j, i)]);
                xtx_inv[(i, j)] = s;
                xtx_inv[(j, i)] = s;
            }
        }
        Ok(Self { x, y, a, q, q_factor, r_factor, xtx_inv })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> Option<&DVector<f64>> {
        self.y.as_ref()
    }

    pub fn a(&self) -> &DVector<f64> {
        &self.a
    }

    /// `(X'X)^{-1}`.
    pub fn xtx_inv(&self) -> &DMatrix<f64> {
        &self.xtx_inv
    }

    /// Same design and interest vector with a new response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(MataError::InvalidProblem(format!("y has length {}, expected {}", y.len(), self.n())));
        }
        let mut out = self.clone();
        out.y = Some(y);
        Ok(out)
    }

    /// Least-squares coefficients for an arbitrary response, via `R b = Q'y`.
    pub fn solve_for(&self, y: &DVector<f64>) -> FullFit {
        let qty = self.q_factor.transpose() * y;
        let beta = self
            .r_factor
            .solve_upper_triangular(&qty)
            .expect("R is nonsingular after the rank check");
        let resid = y - &self.x * &beta;
        FullFit { rss: resid.norm_squared(), beta }
    }

    pub fn fit_full(&self) -> Result<FullFit> {
        let y = self.y.as_ref().ok_or(MataError::MissingResponse)?;
        Ok(self.solve_for(y))
    }

    /// Design-only operator for the restriction `H_K beta = 0`.
    pub fn subset_operator(&self, subset: ModelSubset) -> Result<SubsetOperator> {
        subset.validate(self.q, self.p())?;
        SubsetOperator::new(&self.xtx_inv, &self.a, subset)
    }

    pub fn fit_restricted(&self, subset: ModelSubset) -> Result<ModelFit> {
        let full = self.fit_full()?;
        let op = self.subset_operator(subset)?;
        self.restricted_from(&full, &op)
    }

    /// Restricted fit built from an existing full fit; the RSS is computed from
    /// residuals and checked against `rss + u_K`.
    pub fn restricted_from(&self, full: &FullFit, op: &SubsetOperator) -> Result<ModelFit> {
        let y = self.y.as_ref().ok_or(MataError::MissingResponse)?;
        let stats = op.apply(&full.beta);
        let beta = op.restricted_beta(&full.beta);
        let resid = y - &self.x * &beta;
        let rss = resid.norm_squared();
        let implied = full.rss + stats.u;
        let tol = 1e-8 * rss.max(implied) + 1e-12 * y.norm_squared();
        if (rss - implied).abs() > tol {
            return Err(MataError::Inconsistent(format!(
                "RSS_K = {rss:e} but RSS + U_K = {implied:e} for subset {}",
                op.subset
            )));
        }
        let df = self.n() - self.p() + op.subset.len();
        Ok(ModelFit {
            subset: op.subset,
            beta,
            theta: stats.theta,
            rss,
            s2: rss / df as f64,
            u: stats.u,
            v: op.v,
            df,
        })
    }

    /// Fits for every subset in `family`, in the given order.
    pub fn fit_family(&self, family: &[ModelSubset]) -> Result<Vec<ModelFit>> {
        let full = self.fit_full()?;
        family
            .par_iter()
            .map(|&k| {
                let op = self.subset_operator(k)?;
                self.restricted_from(&full, &op)
            })
            .collect()
    }

    pub fn correlation_profile(&self) -> CorrelationProfile {
        let s = &self.xtx_inv;
        let sa = s * &self.a;
        let v_theta = self.a.dot(&sa);
        let rho: Vec<f64> = (self.q..self.p())
            .map(|j| (sa[j] / (v_theta * s[(j, j)]).sqrt()).clamp(-1.0, 1.0))
            .collect();
        let mut argmax = self.q;
        let mut best = -1.0;
        for (k, r) in rho.iter().enumerate() {
            // values within rounding of the current best count as ties
            if r.abs() > best + 1e-12 {
                best = r.abs();
                argmax = self.q + k;
            }
        }
        CorrelationProfile { rho, rho_max_abs: best, argmax }
    }

    /// `(1/2) b' (H_K (X'X)^{-1} H_K')^{-1} b` with `b = H_K beta / sigma`.
    pub fn noncentrality(&self, subset: ModelSubset, beta_over_sigma: &DVector<f64>) -> Result<f64> {
        if subset.is_empty() {
            return Err(MataError::EmptySubset);
        }
        if beta_over_sigma.len() != self.p() {
            return Err(MataError::InvalidProblem("beta/sigma has wrong length".into()));
        }
        let op = self.subset_operator(subset)?;
        Ok(0.5 * op.quadratic_form(beta_over_sigma))
    }
}

/// Per-response summary produced by a [`SubsetOperator`].
#[derive(Debug, Clone, Copy)]
pub struct RestrictedStats {
    pub theta: f64,
    pub u: f64,
}

/// Design-dependent pieces of the restricted estimator
/// `beta_K = (I - S H' (H S H')^{-1} H) beta_hat` with `S = (X'X)^{-1}`.
#[derive(Debug, Clone)]
pub struct SubsetOperator {
    pub subset: ModelSubset,
    idx: Vec<usize>,
    chol: Option<Cholesky<f64, Dyn>>,
    /// `S H' (H S H')^{-1}`, p x |K|.
    gain: DMatrix<f64>,
    /// `gain' a`.
    a_gain: DVector<f64>,
    a: DVector<f64>,
    /// `var(a' beta_K) / sigma^2`.
    pub v: f64,
}

impl SubsetOperator {
    pub fn new(xtx_inv: &DMatrix<f64>, a: &DVector<f64>, subset: ModelSubset) -> Result<Self> {
        let p = xtx_inv.nrows();
        let idx = subset.indices();
        let k = idx.len();
        let sa = xtx_inv * a;
        let v_full = a.dot(&sa);
        if k == 0 {
            return Ok(Self {
                subset,
                idx,
                chol: None,
                gain: DMatrix::zeros(p, 0),
                a_gain: DVector::zeros(0),
                a: a.clone(),
                v: v_full,
            });
        }
        let c = DMatrix::from_fn(k, k, |i, j| xtx_inv[(idx[i], idx[j])]);
        let chol = Cholesky::new(c).ok_or(MataError::SingularRestriction { mask: subset.mask() })?;
        let s_h = DMatrix::from_fn(p, k, |i, j| xtx_inv[(i, idx[j])]);
        // gain' = C^{-1} (S H')'
        let gain_t = chol.solve(&s_h.transpose());
        let gain = gain_t.transpose();
        let a_gain = gain.transpose() * a;
        let b = DVector::from_fn(k, |i, _| sa[idx[i]]);
        let v = v_full - a_gain.dot(&b);
        if !(v > 0.0) {
            return Err(MataError::SingularRestriction { mask: subset.mask() });
        }
        Ok(Self { subset, idx, chol: Some(chol), gain, a_gain, a: a.clone(), v })
    }

    fn sub(&self, beta: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.idx.len(), |i, _| beta[self.idx[i]])
    }

    /// `b' (H S H')^{-1} b` with `b = H beta`.
    pub fn quadratic_form(&self, beta: &DVector<f64>) -> f64 {
        match &self.chol {
            None => 0.0,
            Some(ch) => {
                let mut z = self.sub(beta);
                ch.l_dirty().solve_lower_triangular_mut(&mut z);
                // l_dirty holds garbage above the diagonal; the lower solve ignores it
                z.norm_squared()
            }
        }
    }

    /// `(a' beta_K, U_K)` for the full-fit coefficients `beta_hat`.
    pub fn apply(&self, beta_hat: &DVector<f64>) -> RestrictedStats {
        let theta_full = self.a.dot(beta_hat);
        if self.idx.is_empty() {
            return RestrictedStats { theta: theta_full, u: 0.0 };
        }
        let b = self.sub(beta_hat);
        RestrictedStats { theta: theta_full - self.a_gain.dot(&b), u: self.quadratic_form(beta_hat) }
    }

    pub fn restricted_beta(&self, beta_hat: &DVector<f64>) -> DVector<f64> {
        if self.idx.is_empty() {
            return beta_hat.clone();
        }
        let mut out = beta_hat - &self.gain * self.sub(beta_hat);
        for &i in &self.idx {
            out[i] = 0.0;
        }
        out
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_design_interpolates() {
        let x = DMatrix::identity(3, 3);
        let x = DMatrix::from_fn(4, 3, |i, j| if i < 3 { x[(i, j)] } else { 0.0 });
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 0.0]);
        let a = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let prob = RegressionProblem::new(x, Some(y), a, 1).unwrap();
        let fit = prob.fit_full().unwrap();
        assert!((fit.beta - DVector::from_vec(vec![1.0, 2.0, 3.0])).norm() < 1e-14);
        assert!(fit.rss < 1e-28);
    }

    #[test]
    fn orthonormal_design_gives_xty() {
        let prob = random_problem(12, 4, 1, 3);
        let qf = prob.x().clone().qr().q();
        let y = prob.y().unwrap().clone();
        let ortho = RegressionProblem::new(qf.clone(), Some(y.clone()), DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]), 1)
            .unwrap();
        let fit = ortho.fit_full().unwrap();
        assert!((fit.beta - qf.transpose() * y).norm() < 1e-12);
    }

    #[test]
    fn full_fit_matches_normal_equations() {
        let prob = random_problem(20, 4, 2, 11);
        let fit = prob.fit_full().unwrap();
        let (beta, rss) = reduced_refit(&prob, &[]);
        assert!((&fit.beta - &beta).norm() / beta.norm() < 1e-10);
        assert!((fit.rss - rss).abs() / rss < 1e-10);
    }

    #[test]
    fn missing_response_and_rank_deficiency() {
        let prob = random_problem(10, 3, 1, 1);
        let no_y = RegressionProblem::new(prob.x().clone(), None, prob.a().clone(), 1).unwrap();
        assert_eq!(no_y.fit_full().unwrap_err(), MataError::MissingResponse);

        let mut x = prob.x().clone();
        let c0 = x.column(0).clone_owned();
        x.set_column(2, &(c0 * 2.0));
        let err = RegressionProblem::new(x, None, prob.a().clone(), 1).unwrap_err();
        assert!(matches!(err, MataError::RankDeficient { .. }));
    }

    #[test]
    fn invalid_interest_vector_rejected() {
        let prob = random_problem(10, 3, 1, 1);
        let a = DVector::from_vec(vec![1.0, 0.0, 0.2]);
        assert!(RegressionProblem::new(prob.x().clone(), None, a, 1).is_err());
        let zero = DVector::zeros(3);
        assert!(RegressionProblem::new(prob.x().clone(), None, zero, 1).is_err());
    }

    #[test]
    fn subset_cap_enforced() {
        let x = DMatrix::from_fn(40, 33, |i, j| ((i * 7 + j * 13) % 11) as f64 + if i == j { 5.0 } else { 0.0 });
        let mut a = DVector::zeros(33);
        a[0] = 1.0;
        let err = RegressionProblem::new(x, None, a, 2).unwrap_err();
        assert_eq!(err, MataError::TooManyNuisance { nuisance: 31, cap: 30 });
    }

    #[test]
    fn empty_subset_is_full_fit() {
        let prob = random_problem(25, 5, 2, 5);
        let full = prob.fit_full().unwrap();
        let fit = prob.fit_restricted(ModelSubset::EMPTY).unwrap();
        assert_eq!(fit.u, 0.0);
        assert!((&fit.beta - &full.beta).norm() < 1e-15);
        let v = prob.a().dot(&(prob.xtx_inv() * prob.a()));
        assert!((fit.v - v).abs() < 1e-15);
        assert_eq!(fit.df, 20);
    }

    #[test]
    fn orthogonal_design_decouples() {
        let base = random_problem(16, 4, 1, 8);
        let qf = base.x().clone().qr().q() * DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 3.0, 0.5]));
        let prob = RegressionProblem::new(qf, base.y().cloned(), DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]), 1).unwrap();
        let full = prob.fit_full().unwrap();
        let fit = prob.fit_restricted(ModelSubset::from_indices(&[3])).unwrap();
        let mut expect = full.beta.clone();
        expect[3] = 0.0;
        assert!((fit.beta - expect).norm() < 1e-12);
        let profile = prob.correlation_profile();
        assert!(profile.rho_max_abs < 1e-12);
    }

    #[test]
    fn restricted_matches_reduced_refit() {
        let prob = random_problem(30, 5, 3, 21);
        let full = prob.fit_full().unwrap();
        // K = {4, 5} in 1-based terms
        let fit = prob.fit_restricted(ModelSubset::from_indices(&[3, 4])).unwrap();
        let (beta, rss) = reduced_refit(&prob, &[3, 4]);
        assert!((&fit.beta - &beta).norm() < 1e-9 * beta.norm());
        assert!((fit.rss - rss).abs() < 1e-9 * rss);
        assert!((fit.rss - full.rss - fit.u).abs() < 1e-9 * fit.rss);
        assert_eq!(fit.beta[3], 0.0);
        assert_eq!(fit.beta[4], 0.0);
    }

    #[test]
    fn restricted_variance_matches_reduced_design() {
        let prob = random_problem(30, 5, 2, 4);
        let keep = [0usize, 1, 3];
        let xr = DMatrix::from_fn(30, 3, |i, j| prob.x()[(i, keep[j])]);
        let inv = (xr.transpose() * &xr).try_inverse().unwrap();
        let ar = DVector::from_vec(vec![prob.a()[0], prob.a()[1], prob.a()[3]]);
        let v_direct = ar.dot(&(&inv * &ar));
        let fit = prob.fit_restricted(ModelSubset::from_indices(&[2, 4])).unwrap();
        assert!((fit.v - v_direct).abs() < 1e-12 * v_direct);
    }

    #[test]
    fn subset_outside_nuisance_rejected() {
        let prob = random_problem(20, 4, 2, 4);
        assert!(prob.fit_restricted(ModelSubset::from_indices(&[1])).is_err());
    }

    #[test]
    fn noncentrality_values() {
        let prob = random_problem(20, 4, 1, 9);
        let k = ModelSubset::from_indices(&[2, 3]);
        let mut b = DVector::from_vec(vec![3.0, -1.0, 0.0, 0.0]);
        assert_eq!(prob.noncentrality(k, &b).unwrap(), 0.0);
        b[2] = 0.7;
        b[3] = -0.4;
        let l1 = prob.noncentrality(k, &b).unwrap();
        let l2 = prob.noncentrality(k, &(&b * 2f64.sqrt())).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12 * l1);
        assert_eq!(prob.noncentrality(ModelSubset::EMPTY, &b).unwrap_err(), MataError::EmptySubset);

        // X'X = I: lambda = b_p^2 / 2
        let x = DMatrix::from_fn(6, 3, |i, j| if i == j { 1.0 } else { 0.0 });
        let id = RegressionProblem::new(x, None, DVector::from_vec(vec![1.0, 0.0, 0.0]), 1).unwrap();
        let lam = id.noncentrality(ModelSubset::from_indices(&[2]), &DVector::from_vec(vec![0.0, 0.0, 2.0])).unwrap();
        assert!((lam - 2.0).abs() < 1e-14);
    }

    #[test]
    fn correlation_profile_scale_free() {
        let prob = random_problem(30, 6, 2, 17);
        let base = prob.correlation_profile();
        assert!(base.rho_max_abs <= 1.0);
        for col in 0..6 {
            let mut x = prob.x().clone();
            x.column_mut(col).scale_mut(10.0);
            let mut a = prob.a().clone();
            // coefficient of a column scaled by c scales by 1/c
            a[col] *= 10.0;
            let scaled = RegressionProblem::new(x, None, a * 3.0, 2).unwrap().correlation_profile();
            assert_eq!(scaled.argmax, base.argmax, "col {col}: {:?} vs {:?}", base.rho, scaled.rho);
            for (r0, r1) in base.rho.iter().zip(&scaled.rho) {
                assert!((r0 - r1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn correlation_ties_pick_smallest_index() {
        // columns 2 and 3 identical in distribution relative to column 1
        let x = DMatrix::from_row_slice(5, 3, &[
            1.0, 1.0, 1.0, //
            1.0, 0.0, 0.0, //
            1.0, 0.0, 0.0, //
            1.0, 1.0, 0.0, //
            1.0, 0.0, 1.0,
        ]);
        let prob = RegressionProblem::new(x, None, DVector::from_vec(vec![1.0, 0.0, 0.0]), 1).unwrap();
        let prof = prob.correlation_profile();
        assert!((prof.rho[0].abs() - prof.rho[1].abs()).abs() < 1e-14);
        assert_eq!(prof.argmax, 1);
    }

    #[test]
    fn near_collinear_column_gives_rho_near_one() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let n = 40;
        let z: Vec<f64> = (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => z[i],
            1 => rng.sample::<f64, _>(rand_distr::StandardNormal),
            _ => z[i] + 0.05 * rng.sample::<f64, _>(rand_distr::StandardNormal),
        });
        let prob = RegressionProblem::new(x.clone(), None, DVector::from_vec(vec![1.0, 0.0, 0.0]), 1).unwrap();
        let prof = prob.correlation_profile();
        assert_eq!(prof.argmax, 2);
        assert!(prof.rho_max_abs > 0.99);

        // simulated covariance of the LS estimators
        let reps = 100_000;
        let (mut s00, mut s22, mut s02, mut m0, mut m2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..reps {
            let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let b = prob.solve_for(&y).beta;
            m0 += b[0];
            m2 += b[2];
            s00 += b[0] * b[0];
            s22 += b[2] * b[2];
            s02 += b[0] * b[2];
        }
        let r = reps as f64;
        let (m0, m2) = (m0 / r, m2 / r);
        let corr = (s02 / r - m0 * m2) / ((s00 / r - m0 * m0) * (s22 / r - m2 * m2)).sqrt();
        // se of a sample correlation is about (1 - rho^2) / sqrt(reps)
        let se = (1.0 - corr * corr) / r.sqrt();
        assert!((corr - prof.rho[1]).abs() < 3.0 * se + 1e-6, "{corr} vs {}", prof.rho[1]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn rss_identity_and_superset_monotonicity(seed in 0u64..10_000, mask_a in 0u64..16, mask_b in 0u64..16) {
            let prob = random_problem(22, 6, 2, seed);
            let full = prob.fit_full().unwrap();
            let ka = ModelSubset::from_mask(mask_a << 2);
            let kb = ModelSubset::from_mask((mask_a | mask_b) << 2);
            let fa = prob.fit_restricted(ka).unwrap();
            let fb = prob.fit_restricted(kb).unwrap();
            prop_assert!(fa.u >= 0.0);
            prop_assert!((fa.rss - full.rss - fa.u).abs() <= 1e-9 * fa.rss);
            prop_assert!(fa.u <= fb.u * (1.0 + 1e-12) + 1e-12);
            let (beta, _) = reduced_refit(&prob, &kb.indices());
            prop_assert!((&fb.beta - &beta).norm() <= 1e-9 * beta.norm().max(1.0));
        }
    }
}
