//! Benchmark harness and sampler-equivalence study.
//!
//! The bench runs each algorithm over a grid of model sizes under a shared
//! candidate or wall-clock budget and reports acceptance probabilities and
//! admissible draws per second. The equivalence study checks that the
//! column-search sampler and the classical baseline target the same
//! distribution of impulse responses.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::restrictions::{parse_restrictions, RestrictionSet};
use crate::rng::master_stream;
use crate::sampling::{
    collect_draws, fit_posterior, Algorithm, DrawConfig, DrawStats, MinnesotaHyper, Posterior,
    PosteriorDraws,
};
use crate::stats::{bootstrap_quantile_se, ks_two_sample, quantile_sorted};
use crate::var::{compute_irf, simulate_dgp, DgpSpec, VarParams};

/// One grid point of the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchCell {
    pub n: usize,
    pub m: usize,
    pub restriction_count: usize,
}

/// Stopping rule shared by all algorithms within a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    /// Total candidate pairs to evaluate.
    Candidates(u64),
    /// Wall-clock seconds.
    Seconds(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub cells: Vec<BenchCell>,
    pub algorithms: Vec<Algorithm>,
    pub budget: Budget,
    pub seed: u64,
    #[serde(default = "default_lag_order")]
    pub p: usize,
    #[serde(default = "default_t_obs")]
    pub t_obs: usize,
}

fn default_lag_order() -> usize {
    5
}

fn default_t_obs() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    pub restriction_count: usize,
    pub algorithm: Algorithm,
    pub candidates: u64,
    pub admissible: u64,
    pub acceptance_probability: f64,
    pub admissible_per_second: f64,
    pub elapsed_seconds: f64,
}

/// A cell the benchmark had to skip, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchFailure {
    pub cell: BenchCell,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    #[serde(default)]
    pub failures: Vec<BenchFailure>,
}

impl BenchResult {
    /// Grid summary as CSV, one row per (cell, algorithm).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,m,restrictions,algorithm,candidates,admissible,acceptance,admissible_per_second,elapsed_seconds\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.6e},{:.4},{:.4}\n",
                r.n,
                r.m,
                r.restriction_count,
                r.algorithm,
                r.candidates,
                r.admissible,
                r.acceptance_probability,
                r.admissible_per_second,
                r.elapsed_seconds
            ));
        }
        out
    }
}

/// Build a satisfiable pure sign scheme with `count` restrictions spread
/// round-robin over the `m` shocks, redrawing the generating signs until the
/// pairwise identifiability conditions hold.
pub fn generate_scheme<R: Rng>(
    n: usize,
    m: usize,
    count: usize,
    rng: &mut R,
) -> Result<RestrictionSet> {
    if count < m {
        return Err(Error::Config(format!(
            "need at least one restriction per shock: count={count} < m={m}"
        )));
    }
    let per_shock = count.div_ceil(m);
    if per_shock > n {
        return Err(Error::Config(format!(
            "cannot place {count} restrictions on {m} shocks with only {n} variables"
        )));
    }
    let diag = Uniform::new(0.5, 1.5);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    for _ in 0..10_000 {
        let probe = DMatrix::from_fn(n, m, |i, j| {
            if i == j {
                diag.sample(rng)
            } else {
                std_normal.sample(rng)
            }
        });
        let mut text = String::from("kind,var_i,shock_j,var_k,shock_l,sign,lambda,horizon\n");
        for r in 0..count {
            let j = r % m;
            let i = r / m;
            let sg = if probe[(i, j)] >= 0.0 { "+1" } else { "-1" };
            text.push_str(&format!("sign,{},{},,,{sg},,0\n", i + 1, j + 1));
        }
        let mut set = parse_restrictions(&text)?;
        set.resize(n, m)?;
        if set.check_assumptions().holds {
            return Ok(set);
        }
    }
    Err(Error::Config(format!(
        "no identifiable scheme found for (n={n}, m={m}, count={count})"
    )))
}

/// Run one algorithm against one posterior until the budget is spent.
pub fn run_under_budget<P: PosteriorDraws, R: Rng + ?Sized>(
    algorithm: Algorithm,
    posterior: &P,
    set: &RestrictionSet,
    budget: Budget,
    rng: &mut R,
) -> Result<DrawStats> {
    let started = std::time::Instant::now();
    let mut stats = DrawStats::default();
    loop {
        let batch = match budget {
            Budget::Candidates(total) => {
                if stats.candidates >= total {
                    break;
                }
                total - stats.candidates
            }
            Budget::Seconds(limit) => {
                if started.elapsed().as_secs_f64() >= limit {
                    break;
                }
                10_000
            }
        };
        let config = DrawConfig { cap: batch, ..DrawConfig::default() };
        match crate::sampling::draw_once(algorithm, posterior, set, rng, &config) {
            Ok(d) => stats.absorb(&d.counters, true),
            Err(Error::CapExhausted { cap, .. }) => {
                stats.candidates += cap;
                stats.rejected_impact += cap;
                if matches!(budget, Budget::Candidates(_)) {
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    stats.elapsed_seconds = started.elapsed().as_secs_f64();
    Ok(stats)
}

/// Run the full benchmark grid. Per cell: generate a scheme, simulate a
/// dataset, fit the conjugate posterior, then time each algorithm under the
/// shared budget. Fully determined by `config.seed`.
pub fn run_bench(config: &BenchConfig) -> Result<BenchResult> {
    if config.algorithms.is_empty() {
        return Err(Error::Config("bench config lists no algorithms".into()));
    }
    if config.cells.is_empty() {
        return Err(Error::Config("bench config lists no cells".into()));
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (c, cell) in config.cells.iter().enumerate() {
        match run_cell(config, c, cell) {
            Ok(mut cell_rows) => rows.append(&mut cell_rows),
            Err(e) => failures.push(BenchFailure { cell: *cell, message: e.to_string() }),
        }
    }
    Ok(BenchResult { rows, failures })
}

/// One grid cell: scheme generation, simulation, posterior fit and timed
/// runs for every algorithm.
fn run_cell(config: &BenchConfig, index: usize, cell: &BenchCell) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    let mut rng = master_stream(config.seed.wrapping_add(index as u64));
    let set = generate_scheme(cell.n, cell.m, cell.restriction_count, &mut rng)?;
    let dgp = DgpSpec::new(cell.n, cell.m, config.p, config.t_obs, &set);
    let (_, _, data) = simulate_dgp(&dgp, &mut rng)?;
    let niw = fit_posterior(&data, config.p, MinnesotaHyper::default())?;
    let posterior = Posterior::Conjugate(niw);
    {
        for &algorithm in &config.algorithms {
            let stats = run_under_budget(algorithm, &posterior, &set, config.budget, &mut rng)?;
            rows.push(BenchRow {
                n: cell.n,
                m: cell.m,
                restriction_count: cell.restriction_count,
                algorithm,
                candidates: stats.candidates,
                admissible: stats.admissible,
                acceptance_probability: stats.acceptance_probability(),
                admissible_per_second: if stats.elapsed_seconds > 0.0 {
                    stats.admissible as f64 / stats.elapsed_seconds
                } else {
                    0.0
                },
                elapsed_seconds: stats.elapsed_seconds,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct EquivalenceConfig {
    /// Admissible draws per algorithm.
    pub draws: usize,
    pub h_max: usize,
    pub quantiles: Vec<f64>,
    pub seed: u64,
    pub bootstrap_reps: usize,
    /// Family-wise KS level before the Bonferroni correction.
    pub alpha: f64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self {
            draws: 2000,
            h_max: 8,
            quantiles: vec![0.16, 0.5, 0.84],
            seed: 7,
            bootstrap_reps: 200,
            alpha: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub draws: usize,
    pub comparisons: usize,
    /// Largest absolute quantile gap over all (variable, shock, horizon,
    /// quantile) entries.
    pub max_gap: f64,
    /// Bootstrap standard error of the quantile gap at the max-gap entry.
    pub max_gap_se: f64,
    pub min_ks_p: f64,
    /// Per-comparison KS level after the Bonferroni correction.
    pub ks_threshold: f64,
    pub quantile_pass: bool,
    pub ks_pass: bool,
}

/// Draw from both samplers and compare the impulse-response distributions
/// entry by entry: two-sample KS tests with a Bonferroni-corrected level,
/// and quantile gaps against twice the bootstrap standard error of the gap
/// at the worst entry.
pub fn equivalence_study<P: PosteriorDraws + Sync>(
    posterior: &P,
    set: &RestrictionSet,
    config: &EquivalenceConfig,
) -> Result<EquivalenceReport> {
    let draw_config = DrawConfig::default();
    let a = collect_draws(
        Algorithm::Proposed,
        posterior,
        set,
        config.draws,
        config.seed,
        1,
        &draw_config,
    )?;
    let b = collect_draws(
        Algorithm::Rwz,
        posterior,
        set,
        config.draws,
        config.seed.wrapping_add(1),
        1,
        &draw_config,
    )?;
    if a.exhausted || b.exhausted {
        return Err(Error::CapExhausted {
            cap: draw_config.cap,
            admissible: a.draws.len().min(b.draws.len()) as u64,
        });
    }

    let n = set.n;
    let m = set.m;
    let h_max = config.h_max;
    let responses = |coll: &crate::sampling::Collection| -> Result<Vec<Vec<f64>>> {
        let mut per_entry = vec![Vec::with_capacity(coll.draws.len()); n * m * (h_max + 1)];
        for d in &coll.draws {
            let irf = compute_irf(&d.params, &d.impact, m, h_max)?;
            for h in 0..=h_max {
                for j in 0..m {
                    for i in 0..n {
                        per_entry[(h * m + j) * n + i].push(irf.response(i, j, h));
                    }
                }
            }
        }
        Ok(per_entry)
    };
    let ra = responses(&a)?;
    let rb = responses(&b)?;

    let comparisons = ra.len();
    let ks_threshold = config.alpha / comparisons as f64;
    let mut min_ks_p = 1.0f64;
    let mut max_gap = 0.0f64;
    let mut max_entry = (0usize, 0.5f64);
    for (e, (xa, xb)) in ra.iter().zip(rb.iter()).enumerate() {
        let ks = ks_two_sample(xa, xb);
        min_ks_p = min_ks_p.min(ks.p_value);
        let mut sa = xa.clone();
        let mut sb = xb.clone();
        sa.sort_by(|x, y| x.total_cmp(y));
        sb.sort_by(|x, y| x.total_cmp(y));
        for &q in &config.quantiles {
            let gap = (quantile_sorted(&sa, q) - quantile_sorted(&sb, q)).abs();
            if gap > max_gap {
                max_gap = gap;
                max_entry = (e, q);
            }
        }
    }

    // Both samplers contribute Monte Carlo noise to the gap, so compare it
    // against the bootstrap SE of the difference of the two quantile
    // estimates at the worst entry.
    let mut boot_rng = master_stream(config.seed.wrapping_add(2));
    let se_a =
        bootstrap_quantile_se(&ra[max_entry.0], max_entry.1, config.bootstrap_reps, &mut boot_rng);
    let se_b =
        bootstrap_quantile_se(&rb[max_entry.0], max_entry.1, config.bootstrap_reps, &mut boot_rng);
    let max_gap_se = se_a.hypot(se_b);

    Ok(EquivalenceReport {
        draws: config.draws,
        comparisons,
        max_gap,
        max_gap_se,
        min_ks_p,
        ks_threshold,
        quantile_pass: max_gap < 2.0 * max_gap_se,
        ks_pass: min_ks_p >= ks_threshold,
    })
}

/// Convenience: equivalence study on a plug-in posterior at fixed reduced-form
/// parameters.
pub fn equivalence_study_point(
    params: &VarParams,
    set: &RestrictionSet,
    config: &EquivalenceConfig,
) -> Result<EquivalenceReport> {
    equivalence_study(&Posterior::Point(params.clone()), set, config)
}
