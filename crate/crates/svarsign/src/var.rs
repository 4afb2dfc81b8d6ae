//! Reduced-form VAR representation, impulse responses and the simulation DGP.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::restrictions::{ColumnFit, RestrictionSet};

/// Reduced-form VAR(p): y_t = a_0 + A_1 y_{t-1} + ... + A_p y_{t-p} + u_t,
/// with error covariance `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarParams {
    pub n: usize,
    pub p: usize,
    pub intercept: DVector<f64>,
    pub lag_coeffs: Vec<DMatrix<f64>>,
    pub sigma: DMatrix<f64>,
}

impl VarParams {
    pub fn new(
        intercept: DVector<f64>,
        lag_coeffs: Vec<DMatrix<f64>>,
        sigma: DMatrix<f64>,
    ) -> Result<Self> {
        let n = intercept.len();
        let p = lag_coeffs.len();
        if n < 2 {
            return Err(Error::Dimension(format!("need n >= 2 variables, got {n}")));
        }
        if p < 1 {
            return Err(Error::Dimension("need at least one lag matrix".into()));
        }
        for (s, a) in lag_coeffs.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::Dimension(format!(
                    "lag matrix {} is {}x{}, expected {n}x{n}",
                    s + 1,
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::Dimension(format!(
                "sigma is {}x{}, expected {n}x{n}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 {
                    return Err(Error::NotPositiveDefinite);
                }
            }
        }
        if sigma.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { n, p, intercept, lag_coeffs, sigma })
    }

    /// Coefficient count per equation, k = np + 1.
    pub fn k(&self) -> usize {
        self.n * self.p + 1
    }
}

/// Impulse responses f_{i,j,h} for variables i, shocks j, horizons 0..=h_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfTensor {
    pub n: usize,
    pub m: usize,
    pub h_max: usize,
    /// Layout: index (i, j, h) at `(h * m + j) * n + i`.
    pub values: Vec<f64>,
}

impl IrfTensor {
    pub fn zeros(n: usize, m: usize, h_max: usize) -> Self {
        Self { n, m, h_max, values: vec![0.0; n * m * (h_max + 1)] }
    }

    #[inline]
    pub fn response(&self, i: usize, j: usize, h: usize) -> f64 {
        self.values[(h * self.m + j) * self.n + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, h: usize, v: f64) {
        self.values[(h * self.m + j) * self.n + i] = v;
    }
}

/// Impulse responses by the MA-coefficient recursion:
/// Theta_0 = I, Theta_h = sum_{s=1}^{min(h,p)} A_s Theta_{h-s},
/// f[:, j, h] = Theta_h * impact[:, j].
///
/// Only the first `m` columns of `impact` are read; horizon-0 responses are
/// copied from `impact` without arithmetic.
pub fn compute_irf(
    params: &VarParams,
    impact: &DMatrix<f64>,
    m: usize,
    h_max: usize,
) -> Result<IrfTensor> {
    let n = params.n;
    if impact.nrows() != n || impact.ncols() != n {
        return Err(Error::Dimension(format!(
            "impact is {}x{}, expected {n}x{n}",
            impact.nrows(),
            impact.ncols()
        )));
    }
    if m == 0 || m > n {
        return Err(Error::Dimension(format!("shock count m={m} out of range 1..={n}")));
    }
    let mut irf = IrfTensor::zeros(n, m, h_max);
    for j in 0..m {
        for i in 0..n {
            irf.set(i, j, 0, impact[(i, j)]);
        }
    }
    let mut thetas: Vec<DMatrix<f64>> = vec![DMatrix::identity(n, n)];
    for h in 1..=h_max {
        let mut theta = DMatrix::zeros(n, n);
        for s in 1..=h.min(params.p) {
            theta += &params.lag_coeffs[s - 1] * &thetas[h - s];
        }
        let resp = &theta * impact.columns(0, m);
        for j in 0..m {
            for i in 0..n {
                irf.set(i, j, h, resp[(i, j)]);
            }
        }
        thetas.push(theta);
    }
    Ok(irf)
}

/// Largest eigenvalue modulus of the np x np companion matrix.
pub fn companion_spectral_radius(params: &VarParams) -> f64 {
    let n = params.n;
    let p = params.p;
    let mut companion = DMatrix::zeros(n * p, n * p);
    for (s, a) in params.lag_coeffs.iter().enumerate() {
        companion.view_mut((0, s * n), (n, n)).copy_from(a);
    }
    for i in 0..n * (p - 1) {
        companion[(n + i, i)] = 1.0;
    }
    // Gelfand's formula with repeated squaring: rho = ||A^(2^k)||^(1/2^k).
    // The norm's polynomial over-estimation factor vanishes under the
    // 2^k-th root, so a few dozen squarings give the radius to machine
    // precision without an eigenvalue solver.
    let norm0 = companion.norm();
    if norm0 == 0.0 {
        return 0.0;
    }
    let mut b = companion / norm0; // A^(2^k) scaled to unit norm
    let mut log_norm = norm0.ln(); // ln ||A^(2^k)||
    let mut exponent = 1.0f64; // 2^k
    for _ in 0..48 {
        let sq = &b * &b;
        let sq_norm = sq.norm();
        if sq_norm == 0.0 {
            return 0.0; // nilpotent
        }
        log_norm = sq_norm.ln() + 2.0 * log_norm;
        exponent *= 2.0;
        b = sq / sq_norm;
    }
    (log_norm / exponent).exp()
}

/// Configuration of the simulation data-generating process.
#[derive(Debug, Clone)]
pub struct DgpSpec<'a> {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub t_obs: usize,
    pub stability_bound: f64,
    /// Restriction set the true impact matrix must satisfy at horizon 0.
    pub restrictions: &'a RestrictionSet,
    /// Redraw cap for the impact matrix and for the stability screen.
    pub redraw_cap: usize,
}

impl<'a> DgpSpec<'a> {
    pub fn new(n: usize, m: usize, p: usize, t_obs: usize, restrictions: &'a RestrictionSet) -> Self {
        Self { n, m, p, t_obs, stability_bound: 0.999, restrictions, redraw_cap: 100_000 }
    }

    fn validate(&self) -> Result<()> {
        if self.t_obs <= self.n * self.p + 1 {
            return Err(Error::InsufficientObservations {
                needed: self.n * self.p + 1,
                got: self.t_obs,
            });
        }
        if self.m == 0 || self.m > self.n {
            return Err(Error::Dimension(format!(
                "shock count m={} out of range 1..={}",
                self.m, self.n
            )));
        }
        if !(self.stability_bound > 0.0 && self.stability_bound <= 1.0) {
            return Err(Error::Config("stability_bound must lie in (0,1]".into()));
        }
        if self.restrictions.n != self.n || self.restrictions.m != self.m {
            return Err(Error::Dimension(format!(
                "restriction set is for (n={}, m={}), DGP is (n={}, m={})",
                self.restrictions.n, self.restrictions.m, self.n, self.m
            )));
        }
        Ok(())
    }
}

const BURN_IN: usize = 100;

/// Simulate a dataset from the VAR. Returns the true parameters, the true
/// impact matrix (consistent with the referenced restrictions at horizon 0)
/// and a `t_obs x n` data matrix.
pub fn simulate_dgp<R: Rng>(
    spec: &DgpSpec,
    rng: &mut R,
) -> Result<(VarParams, DMatrix<f64>, DMatrix<f64>)> {
    spec.validate()?;
    let n = spec.n;
    let p = spec.p;

    let unit = Uniform::new(-1.0, 1.0);
    let intercept = DVector::from_fn(n, |_, _| unit.sample(rng));

    // Redraw lag coefficients until the companion matrix is stable.
    let diag1 = Uniform::new(0.0, 0.5);
    let off1 = Uniform::new(-0.2, 0.2);
    let mut lag_coeffs = Vec::new();
    let mut stable = false;
    for _ in 0..spec.redraw_cap {
        lag_coeffs = (1..=p)
            .map(|s| {
                if s == 1 {
                    DMatrix::from_fn(n, n, |i, j| {
                        if i == j { diag1.sample(rng) } else { off1.sample(rng) }
                    })
                } else {
                    let sd = 0.1 / s as f64;
                    let dist = Normal::new(0.0, sd).unwrap();
                    DMatrix::from_fn(n, n, |_, _| dist.sample(rng))
                }
            })
            .collect();
        let probe = VarParams {
            n,
            p,
            intercept: intercept.clone(),
            lag_coeffs: lag_coeffs.clone(),
            sigma: DMatrix::identity(n, n),
        };
        if companion_spectral_radius(&probe) < spec.stability_bound {
            stable = true;
            break;
        }
    }
    if !stable {
        return Err(Error::InfeasibleImpact(spec.redraw_cap));
    }

    let impact = draw_true_impact(spec, rng)?;
    let sigma = &impact * impact.transpose();
    let params = VarParams { n, p, intercept: intercept.clone(), lag_coeffs, sigma };

    // Simulate with a zero initial condition and a burn-in.
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let total = BURN_IN + spec.t_obs;
    let mut history: Vec<DVector<f64>> = Vec::with_capacity(total);
    for t in 0..total {
        let mut y = intercept.clone();
        for s in 1..=p {
            if t >= s {
                y += &params.lag_coeffs[s - 1] * &history[t - s];
            }
        }
        let v = DVector::from_fn(n, |_, _| std_normal.sample(rng));
        y += &impact * v;
        history.push(y);
    }
    let data = DMatrix::from_fn(spec.t_obs, n, |t, i| history[BURN_IN + t][i]);
    Ok((params, impact, data))
}

/// Draw a true impact matrix whose first m columns satisfy every horizon-0
/// restriction. For pure sign schemes the element signs are flipped directly;
/// ranking restrictions require redrawing the whole matrix.
fn draw_true_impact<R: Rng>(spec: &DgpSpec, rng: &mut R) -> Result<DMatrix<f64>> {
    let n = spec.n;
    let set = spec.restrictions;
    let diag = Uniform::new(0.5, 1.5);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let pure_sign = set.is_pure_sign();
    for _ in 0..spec.redraw_cap {
        let mut b0 = DMatrix::from_fn(n, n, |i, j| {
            if i == j { diag.sample(rng) } else { std_normal.sample(rng) }
        });
        if pure_sign {
            for (j, recs) in set.impact_single.iter().enumerate() {
                for r in recs {
                    let cur: f64 = b0[(r.var_i, j)];
                    b0[(r.var_i, j)] = r.sign * cur.abs();
                }
            }
        }
        if impact_consistent(set, &b0) {
            return Ok(b0);
        }
    }
    Err(Error::InfeasibleImpact(spec.redraw_cap))
}

fn impact_consistent(set: &RestrictionSet, b0: &DMatrix<f64>) -> bool {
    for j in 0..set.m {
        let fit = set.column_satisfies(j, &b0.column(j).into_owned());
        if !matches!(fit, ColumnFit::Plus | ColumnFit::Both) {
            return false;
        }
    }
    set.check_cross_shock(b0)
}

/// Write a data matrix as CSV: header of variable names, then one row per
/// observation. Values use the shortest exact decimal representation, so a
/// round trip is lossless.
pub fn write_data_csv(data: &DMatrix<f64>, names: Option<&[String]>) -> String {
    let n = data.ncols();
    let header: Vec<String> = match names {
        Some(ns) => ns.to_vec(),
        None => (1..=n).map(|i| format!("V{i}")).collect(),
    };
    let mut out = header.join(",");
    out.push('\n');
    for t in 0..data.nrows() {
        let row: Vec<String> = (0..n).map(|i| format!("{}", data[(t, i)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parse a data matrix from CSV. Returns the matrix and the variable names.
pub fn read_data_csv(text: &str) -> Result<(DMatrix<f64>, Vec<String>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or(Error::Csv { line: 1, msg: "empty file".into() })?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let n = names.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n {
            return Err(Error::Csv {
                line: idx + 1,
                msg: format!("expected {n} fields, got {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(n);
        for f in fields {
            row.push(f.trim().parse::<f64>().map_err(|e| Error::Csv {
                line: idx + 1,
                msg: format!("bad number {f:?}: {e}"),
            })?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv { line: 2, msg: "no data rows".into() });
    }
    let data = DMatrix::from_fn(rows.len(), n, |t, i| rows[t][i]);
    Ok((data, names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::restrictions::parse_restrictions;
    use crate::rng::master_stream;

    fn params_zero_dynamics(n: usize) -> VarParams {
        VarParams::new(
            DVector::zeros(n),
            vec![DMatrix::zeros(n, n)],
            DMatrix::identity(n, n),
        )
        .unwrap()
    }

    #[test]
    fn irf_zero_dynamics_is_impact_then_zero() {
        let params = params_zero_dynamics(2);
        let irf = compute_irf(&params, &DMatrix::identity(2, 2), 2, 2).unwrap();
        for j in 0..2 {
            for i in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_eq!(irf.response(i, j, 0), e);
                assert_eq!(irf.response(i, j, 1), 0.0);
                assert_eq!(irf.response(i, j, 2), 0.0);
            }
        }
    }

    #[test]
    fn irf_diagonal_geometric_decay() {
        let params = VarParams::new(
            DVector::zeros(2),
            vec![DMatrix::identity(2, 2) * 0.5],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let irf = compute_irf(&params, &DMatrix::identity(2, 2), 2, 5).unwrap();
        for h in 0..=5 {
            for i in 0..2 {
                assert!((irf.response(i, i, h) - 0.5f64.powi(h as i32)).abs() < 1e-14);
            }
        }
    }

    /// Path-difference oracle: simulate the VAR forward without noise, once
    /// with v_0 = e_j and once with v_0 = 0, and difference the paths.
    fn irf_oracle(params: &VarParams, impact: &DMatrix<f64>, j: usize, h_max: usize) -> Vec<DVector<f64>> {
        let n = params.n;
        let simulate = |shock: DVector<f64>| -> Vec<DVector<f64>> {
            let mut path: Vec<DVector<f64>> = Vec::new();
            for t in 0..=h_max {
                let mut y = params.intercept.clone();
                for s in 1..=params.p {
                    if t >= s {
                        y += &params.lag_coeffs[s - 1] * &path[t - s];
                    }
                }
                if t == 0 {
                    y += impact * &shock;
                }
                path.push(y);
            }
            path
        };
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        let shocked = simulate(e);
        let base = simulate(DVector::zeros(n));
        shocked.iter().zip(base.iter()).map(|(a, b)| a - b).collect()
    }

    #[test]
    fn irf_matches_path_difference_oracle() {
        let mut rng = master_stream(11);
        for _ in 0..20 {
            let n = 3;
            let p = 2;
            let intercept = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let lags: Vec<DMatrix<f64>> = (0..p)
                .map(|_| DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.4..0.4)))
                .collect();
            let params = VarParams::new(intercept, lags, DMatrix::identity(n, n)).unwrap();
            let impact = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let irf = compute_irf(&params, &impact, n, 5).unwrap();
            for j in 0..n {
                let oracle = irf_oracle(&params, &impact, j, 5);
                for h in 0..=5 {
                    for i in 0..n {
                        assert!(
                            (irf.response(i, j, h) - oracle[h][i]).abs() < 1e-10,
                            "mismatch at i={i} j={j} h={h}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn irf_linearity_in_impact() {
        let mut rng = master_stream(12);
        let n = 3;
        let params = VarParams::new(
            DVector::zeros(n),
            vec![DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.3..0.3))],
            DMatrix::identity(n, n),
        )
        .unwrap();
        let impact = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let scaled = &impact * 3.5;
        let a = compute_irf(&params, &impact, n, 4).unwrap();
        let b = compute_irf(&params, &scaled, n, 4).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!((y - 3.5 * x).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn companion_radius_diagonal_case() {
        let params = VarParams::new(
            DVector::zeros(2),
            vec![DMatrix::identity(2, 2) * 0.5],
            DMatrix::identity(2, 2),
        )
        .unwrap();
        assert!((companion_spectral_radius(&params) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn companion_radius_zero_lags() {
        let params = params_zero_dynamics(3);
        assert!(companion_spectral_radius(&params) < 1e-12);
    }

    /// Power-iteration oracle: rho(A) = lim ||A^k x|| ^ (1/k).
    #[test]
    fn companion_radius_matches_power_iteration() {
        let mut rng = master_stream(13);
        let n = 3;
        let p = 2;
        let lags: Vec<DMatrix<f64>> = (0..p)
            .map(|_| DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.5..0.5)))
            .collect();
        let params =
            VarParams::new(DVector::zeros(n), lags.clone(), DMatrix::identity(n, n)).unwrap();

        let mut companion = DMatrix::zeros(n * p, n * p);
        for (s, a) in lags.iter().enumerate() {
            companion.view_mut((0, s * n), (n, n)).copy_from(a);
        }
        for i in 0..n * (p - 1) {
            companion[(n + i, i)] = 1.0;
        }
        let mut x = DVector::from_element(n * p, 1.0);
        let mut rho = 0.0;
        for _ in 0..2000 {
            x = &companion * x;
            rho = x.norm();
            if rho == 0.0 {
                break;
            }
            x /= rho;
        }
        assert!((companion_spectral_radius(&params) - rho).abs() < 1e-8);
    }

    fn diag_plus_scheme(n: usize, m: usize) -> RestrictionSet {
        let mut text = String::from("kind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\n");
        for j in 1..=m {
            text.push_str(&format!("sign,{j},{j},,,+1,,0\n"));
        }
        let mut set = parse_restrictions(&text).unwrap();
        set.resize(n, m).unwrap();
        set
    }

    #[test]
    fn simulate_dgp_shapes_and_stability() {
        let set = diag_plus_scheme(10, 5);
        let spec = DgpSpec::new(10, 5, 5, 200, &set);
        let mut rng = master_stream(42);
        let (params, impact, data) = simulate_dgp(&spec, &mut rng).unwrap();
        assert_eq!(data.nrows(), 200);
        assert_eq!(data.ncols(), 10);
        assert!(companion_spectral_radius(&params) < spec.stability_bound);
        // sigma = B0 B0'
        let diff = (&params.sigma - &impact * impact.transpose()).abs().max();
        assert!(diff < 1e-12);
    }

    #[test]
    fn simulate_dgp_forces_diagonal_signs() {
        let set = diag_plus_scheme(4, 4);
        let spec = DgpSpec::new(4, 4, 1, 50, &set);
        let mut rng = master_stream(5);
        let (_, impact, _) = simulate_dgp(&spec, &mut rng).unwrap();
        for j in 0..4 {
            assert!(impact[(j, j)] > 0.0);
        }
    }

    #[test]
    fn simulate_dgp_is_deterministic() {
        let set = diag_plus_scheme(4, 2);
        let spec = DgpSpec::new(4, 2, 2, 60, &set);
        let a = simulate_dgp(&spec, &mut master_stream(9)).unwrap();
        let b = simulate_dgp(&spec, &mut master_stream(9)).unwrap();
        assert_eq!(a.2, b.2);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn simulate_dgp_rejects_short_sample() {
        let set = diag_plus_scheme(10, 5);
        let mut spec = DgpSpec::new(10, 5, 5, 200, &set);
        spec.t_obs = 10;
        assert!(matches!(
            simulate_dgp(&spec, &mut master_stream(1)),
            Err(Error::InsufficientObservations { .. })
        ));
    }

    #[test]
    fn data_csv_round_trip_is_exact() {
        let set = diag_plus_scheme(3, 2);
        let spec = DgpSpec::new(3, 2, 1, 40, &set);
        let (_, _, data) = simulate_dgp(&spec, &mut master_stream(77)).unwrap();
        let text = write_data_csv(&data, None);
        let (back, names) = read_data_csv(&text).unwrap();
        assert_eq!(names, vec!["V1", "V2", "V3"]);
        assert_eq!(back, data);
    }
}
