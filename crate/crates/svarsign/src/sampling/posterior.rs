//! Natural-conjugate (normal-inverse-Wishart) posterior over the reduced-form
//! VAR parameters, with Minnesota-style shrinkage, plus a plug-in point mode.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::stats::ln_multivariate_gamma;
use crate::var::VarParams;

/// Minnesota shrinkage hyperparameters for the coefficient prior.
#[derive(Debug, Clone, Copy)]
pub struct MinnesotaHyper {
    /// Overall shrinkage; prior variance of a lag-j coefficient is
    /// lambda^2 / j^2.
    pub lambda: f64,
    /// Prior standard deviation of the intercept.
    pub intercept_scale: f64,
    /// Prior mean of the first own lag.
    pub own_lag_mean: f64,
}

impl Default for MinnesotaHyper {
    fn default() -> Self {
        Self { lambda: 0.2, intercept_scale: 100.0, own_lag_mean: 0.9 }
    }
}

impl MinnesotaHyper {
    pub fn with_lambda(lambda: f64) -> Self {
        Self { lambda, ..Self::default() }
    }
}

/// Normal-inverse-Wishart posterior: coefficients are matric-variate normal
/// with mean `m_bar`, row scale `v_bar` and column scale Sigma, while Sigma
/// is inverse-Wishart with scale `s_bar` and `nu_bar` degrees of freedom.
#[derive(Debug, Clone)]
pub struct NiwPosterior {
    pub n: usize,
    pub p: usize,
    pub m_bar: DMatrix<f64>,
    pub v_bar: DMatrix<f64>,
    pub s_bar: DMatrix<f64>,
    pub nu_bar: f64,
    // factors reused on every draw
    chol_v: DMatrix<f64>,
    chol_s_inv: DMatrix<f64>,
}

impl NiwPosterior {
    pub fn new(
        n: usize,
        p: usize,
        m_bar: DMatrix<f64>,
        v_bar: DMatrix<f64>,
        s_bar: DMatrix<f64>,
        nu_bar: f64,
    ) -> Result<Self> {
        let k = n * p + 1;
        if m_bar.nrows() != k || m_bar.ncols() != n || v_bar.nrows() != k || s_bar.nrows() != n {
            return Err(Error::Dimension("posterior matrices have inconsistent shapes".into()));
        }
        if nu_bar <= (n + 1) as f64 {
            return Err(Error::Config(format!("nu_bar must exceed n+1 = {}", n + 1)));
        }
        let chol_v = v_bar.clone().cholesky().ok_or(Error::NotPositiveDefinite)?.l();
        let s_inv = s_bar
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .inverse();
        let chol_s_inv = s_inv.cholesky().ok_or(Error::NotPositiveDefinite)?.l();
        Ok(Self { n, p, m_bar, v_bar, s_bar, nu_bar, chol_v, chol_s_inv })
    }

    /// One independent draw of (A, Sigma).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> VarParams {
        let n = self.n;
        // Sigma ~ IW(s_bar, nu_bar) via the Bartlett decomposition of the
        // Wishart(s_bar^{-1}, nu_bar) precision draw.
        let mut bartlett = DMatrix::zeros(n, n);
        for i in 0..n {
            let chi = ChiSquared::new(self.nu_bar - i as f64).unwrap();
            bartlett[(i, i)] = chi.sample(rng).sqrt();
            for j in 0..i {
                bartlett[(i, j)] = StandardNormal.sample(rng);
            }
        }
        let b = &self.chol_s_inv * bartlett; // lower triangular
        let precision = &b * b.transpose();
        let sigma = precision
            .cholesky()
            .expect("wishart draw is positive definite")
            .inverse();
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let chol_sigma = sigma.clone().cholesky().expect("sigma draw").l();

        // coefficients ~ MN(m_bar, v_bar, sigma)
        let k = n * self.p + 1;
        let z = DMatrix::from_fn(k, n, |_, _| StandardNormal.sample(rng));
        let coeffs = &self.m_bar + &self.chol_v * z * chol_sigma.transpose();
        params_from_coeffs(&coeffs, n, self.p, sigma)
    }
}

/// Assemble VarParams from a k x n coefficient matrix (row 0 intercept, then
/// p blocks of n rows, one per lag).
fn params_from_coeffs(coeffs: &DMatrix<f64>, n: usize, p: usize, sigma: DMatrix<f64>) -> VarParams {
    let intercept = DVector::from_fn(n, |q, _| coeffs[(0, q)]);
    let lag_coeffs = (0..p)
        .map(|j| DMatrix::from_fn(n, n, |q, r| coeffs[(1 + j * n + r, q)]))
        .collect();
    VarParams { n, p, intercept, lag_coeffs, sigma }
}

/// Posterior over the reduced-form parameters: either the conjugate posterior
/// or a fixed plug-in point (used for distribution-equivalence studies).
#[derive(Debug, Clone)]
pub enum Posterior {
    Conjugate(NiwPosterior),
    Point(VarParams),
}

/// Source of independent reduced-form parameter draws.
pub trait PosteriorDraws {
    fn n(&self) -> usize;
    fn draw_params<R: Rng + ?Sized>(&self, rng: &mut R) -> VarParams;
}

impl PosteriorDraws for Posterior {
    fn n(&self) -> usize {
        match self {
            Posterior::Conjugate(p) => p.n,
            Posterior::Point(p) => p.n,
        }
    }

    fn draw_params<R: Rng + ?Sized>(&self, rng: &mut R) -> VarParams {
        match self {
            Posterior::Conjugate(p) => p.sample(rng),
            Posterior::Point(p) => p.clone(),
        }
    }
}

struct Design {
    y: DMatrix<f64>,
    x: DMatrix<f64>,
}

fn build_design(data: &DMatrix<f64>, p: usize) -> Result<Design> {
    let t = data.nrows();
    let n = data.ncols();
    let k = n * p + 1;
    if t <= n * p + 1 {
        return Err(Error::InsufficientObservations { needed: n * p + 1, got: t });
    }
    let rows = t - p;
    let y = DMatrix::from_fn(rows, n, |r, i| data[(r + p, i)]);
    let x = DMatrix::from_fn(rows, k, |r, c| {
        if c == 0 {
            1.0
        } else {
            let j = (c - 1) / n; // lag index, 0-based
            let v = (c - 1) % n;
            data[(r + p - 1 - j, v)]
        }
    });
    Ok(Design { y, x })
}

/// Residual variance of a univariate AR(p) fit with intercept, per variable.
fn ar_residual_variances(data: &DMatrix<f64>, p: usize) -> Result<Vec<f64>> {
    let t = data.nrows();
    let rows = t - p;
    let mut out = Vec::with_capacity(data.ncols());
    for v in 0..data.ncols() {
        let y = DVector::from_fn(rows, |r, _| data[(r + p, v)]);
        let x = DMatrix::from_fn(rows, p + 1, |r, c| {
            if c == 0 { 1.0 } else { data[(r + p - c, v)] }
        });
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &y;
        let chol = xtx.cholesky().ok_or(Error::RankDeficient)?;
        let beta = chol.solve(&xty);
        let resid = y - x * beta;
        let dof = (rows as isize - (p + 1) as isize).max(1) as f64;
        out.push((resid.norm_squared() / dof).max(1e-12));
    }
    Ok(out)
}

/// Fit the natural-conjugate posterior with Minnesota shrinkage.
///
/// Prior: coefficients MN(M0, V0, Sigma) with M0 zero except the first own
/// lag at `own_lag_mean`; V0 diagonal with intercept variance
/// `intercept_scale^2` and lag-j entries `lambda^2 / j^2`; Sigma IW(S0, n+2)
/// with S0 diagonal from univariate AR residual variances.
pub fn fit_posterior(data: &DMatrix<f64>, p: usize, hyper: MinnesotaHyper) -> Result<NiwPosterior> {
    if hyper.lambda < 0.0 {
        return Err(Error::Config("shrinkage lambda must be >= 0".into()));
    }
    let design = build_design(data, p)?;
    let n = data.ncols();
    let k = n * p + 1;

    let mut m0 = DMatrix::zeros(k, n);
    for v in 0..n {
        m0[(1 + v, v)] = hyper.own_lag_mean;
    }
    // lambda = 0 is the total-shrinkage limit; keep V0 invertible
    let lam2 = hyper.lambda.powi(2).max(1e-16);
    let mut v0_inv_diag = DVector::zeros(k);
    v0_inv_diag[0] = 1.0 / hyper.intercept_scale.powi(2);
    for c in 1..k {
        let j = ((c - 1) / n + 1) as f64;
        v0_inv_diag[c] = j * j / lam2;
    }

    let s0_diag = ar_residual_variances(data, p)?;
    let s0 = DMatrix::from_fn(n, n, |i, j| if i == j { s0_diag[i] } else { 0.0 });
    let nu0 = (n + 2) as f64;

    let xtx = design.x.transpose() * &design.x;
    let xty = design.x.transpose() * &design.y;
    let mut kmat = xtx; // V0^{-1} + X'X
    for c in 0..k {
        kmat[(c, c)] += v0_inv_diag[c];
    }
    let chol_k = kmat.clone().cholesky().ok_or(Error::RankDeficient)?;
    let mut rhs = xty;
    for c in 0..k {
        for q in 0..n {
            rhs[(c, q)] += v0_inv_diag[c] * m0[(c, q)];
        }
    }
    let m_bar = chol_k.solve(&rhs);
    let v_bar = chol_k.inverse();
    let v_bar = (&v_bar + v_bar.transpose()) * 0.5;

    let yty = design.y.transpose() * &design.y;
    let m0_term = {
        let mut scaled = m0.clone();
        for c in 0..k {
            for q in 0..n {
                scaled[(c, q)] *= v0_inv_diag[c];
            }
        }
        m0.transpose() * scaled
    };
    let s_bar = s0 + yty + m0_term - m_bar.transpose() * &kmat * &m_bar;
    let s_bar = (&s_bar + s_bar.transpose()) * 0.5;
    let nu_bar = nu0 + design.y.nrows() as f64;

    NiwPosterior::new(n, p, m_bar, v_bar, s_bar, nu_bar)
}

/// Plug-in reduced-form estimate: OLS coefficients with the degrees-of-
/// freedom-adjusted residual covariance.
pub fn fit_ols_params(data: &DMatrix<f64>, p: usize) -> Result<VarParams> {
    let design = build_design(data, p)?;
    let n = data.ncols();
    let k = n * p + 1;
    let xtx = design.x.transpose() * &design.x;
    let xty = design.x.transpose() * &design.y;
    let chol = xtx.cholesky().ok_or(Error::RankDeficient)?;
    let beta = chol.solve(&xty);
    let resid = &design.y - &design.x * &beta;
    let dof = (design.y.nrows() as isize - k as isize).max(1) as f64;
    let sigma = resid.transpose() * &resid / dof;
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    Ok(params_from_coeffs(&beta, n, p, sigma))
}

/// Closed-form log marginal likelihood of the natural-conjugate model, up to
/// terms common across shrinkage values. Used for coarse grid selection.
pub fn log_marginal_likelihood(data: &DMatrix<f64>, p: usize, hyper: MinnesotaHyper) -> Result<f64> {
    let design = build_design(data, p)?;
    let n = data.ncols();
    let k = n * p + 1;
    let t_used = design.y.nrows() as f64;

    let lam2 = hyper.lambda.powi(2).max(1e-16);
    let mut ln_det_v0 = (hyper.intercept_scale.powi(2)).ln();
    for c in 1..k {
        let j = ((c - 1) / n + 1) as f64;
        ln_det_v0 += (lam2 / (j * j)).ln();
    }
    let s0_diag = ar_residual_variances(data, p)?;
    let ln_det_s0: f64 = s0_diag.iter().map(|v| v.ln()).sum();
    let nu0 = (n + 2) as f64;

    let post = fit_posterior(data, p, hyper)?;
    let ln_det_v_bar = 2.0 * post
        .v_bar
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?
        .l()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>();
    let ln_det_s_bar = 2.0 * post
        .s_bar
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?
        .l()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>();

    Ok(-t_used * n as f64 / 2.0 * std::f64::consts::PI.ln()
        + ln_multivariate_gamma(n, post.nu_bar / 2.0)
        - ln_multivariate_gamma(n, nu0 / 2.0)
        + nu0 / 2.0 * ln_det_s0
        - post.nu_bar / 2.0 * ln_det_s_bar
        + n as f64 / 2.0 * (ln_det_v_bar - ln_det_v0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::master_stream;
    use crate::var::simulate_dgp;
    use crate::var::DgpSpec;
    use crate::restrictions::parse_restrictions;

    fn white_noise(t: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = master_stream(seed);
        DMatrix::from_fn(t, n, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn flat_prior_posterior_mean_matches_ols() {
        let data = white_noise(400, 3, 31);
        let post = fit_posterior(
            &data,
            1,
            MinnesotaHyper { lambda: 1e4, intercept_scale: 1e4, own_lag_mean: 0.9 },
        )
        .unwrap();
        let ols = fit_ols_params(&data, 1).unwrap();
        // compare the first lag matrix; OLS standard errors here are ~0.05
        for q in 0..3 {
            for r in 0..3 {
                let diff = (post.m_bar[(1 + r, q)] - ols.lag_coeffs[0][(q, r)]).abs();
                assert!(diff < 1e-3, "coefficient ({q},{r}) differs by {diff}");
            }
        }
    }

    #[test]
    fn total_shrinkage_returns_prior_mean() {
        let data = white_noise(300, 2, 32);
        let post = fit_posterior(&data, 2, MinnesotaHyper::with_lambda(0.0)).unwrap();
        for q in 0..2 {
            for c in 1..post.m_bar.nrows() {
                let want = if c == 1 + q { 0.9 } else { 0.0 };
                assert!((post.m_bar[(c, q)] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn plugin_mode_is_deterministic_point() {
        let data = white_noise(200, 2, 33);
        let point = Posterior::Point(fit_ols_params(&data, 1).unwrap());
        let mut rng = master_stream(1);
        let a = point.draw_params(&mut rng);
        let b = point.draw_params(&mut rng);
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_row_scale_concentrates_on_mean() {
        let data = white_noise(300, 2, 34);
        let mut post = fit_posterior(&data, 1, MinnesotaHyper::default()).unwrap();
        post = NiwPosterior::new(
            post.n,
            post.p,
            post.m_bar.clone(),
            post.v_bar.clone() * 1e-12,
            post.s_bar.clone(),
            post.nu_bar,
        )
        .unwrap();
        let mut rng = master_stream(2);
        let draw = post.sample(&mut rng);
        for q in 0..2 {
            assert!((draw.intercept[q] - post.m_bar[(0, q)]).abs() < 1e-5);
            for r in 0..2 {
                assert!((draw.lag_coeffs[0][(q, r)] - post.m_bar[(1 + r, q)]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn sigma_draws_match_inverse_wishart_mean() {
        let n = 3;
        let data = white_noise(300, n, 35);
        let post = fit_posterior(&data, 1, MinnesotaHyper::default()).unwrap();
        let expect = &post.s_bar / (post.nu_bar - n as f64 - 1.0);
        let mut rng = master_stream(3);
        let reps = 10_000;
        let mut mean = DMatrix::zeros(n, n);
        let mut sq = DMatrix::zeros(n, n);
        for _ in 0..reps {
            let s = post.sample(&mut rng).sigma;
            mean += &s;
            sq += s.component_mul(&s);
        }
        mean /= reps as f64;
        sq /= reps as f64;
        for i in 0..n {
            for j in 0..n {
                let var = (sq[(i, j)] - mean[(i, j)].powi(2)).max(0.0);
                let se = (var / reps as f64).sqrt();
                let diff = (mean[(i, j)] - expect[(i, j)]).abs();
                assert!(diff < 3.0 * se + 1e-12, "entry ({i},{j}): diff={diff} se={se}");
            }
        }
    }

    #[test]
    fn posterior_sampling_is_reproducible() {
        let data = white_noise(200, 2, 36);
        let post = fit_posterior(&data, 1, MinnesotaHyper::default()).unwrap();
        let a = post.sample(&mut master_stream(9));
        let b = post.sample(&mut master_stream(9));
        assert_eq!(a, b);
    }

    #[test]
    fn insufficient_observations_is_rejected() {
        let data = white_noise(10, 4, 37);
        assert!(matches!(
            fit_posterior(&data, 5, MinnesotaHyper::default()),
            Err(Error::InsufficientObservations { .. })
        ));
    }

    #[test]
    fn marginal_likelihood_prefers_moderate_shrinkage_over_extremes() {
        // data from a persistent VAR: tiny lambda (prior mean only) should
        // not dominate a moderate lambda
        let mut text = String::from("kind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\n");
        text.push_str("sign,1,1,,,+1,,0\nsign,2,2,,,+1,,0\n");
        let set = parse_restrictions(&text).unwrap();
        let mut set = set;
        set.resize(3, 2).unwrap();
        let spec = DgpSpec::new(3, 2, 1, 150, &set);
        let (_, _, data) = simulate_dgp(&spec, &mut master_stream(8)).unwrap();
        let ml_mid = log_marginal_likelihood(&data, 1, MinnesotaHyper::with_lambda(0.2)).unwrap();
        let ml_tiny = log_marginal_likelihood(&data, 1, MinnesotaHyper::with_lambda(1e-6)).unwrap();
        assert!(ml_mid > ml_tiny);
    }
}
