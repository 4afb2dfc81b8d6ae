//! Command-line front end: validate identification schemes, simulate
//! datasets, estimate identified impulse responses and run the sampler
//! benchmark. Every command writes machine-readable outputs plus a
//! manifest for reproduction.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use svarsign::harness::{run_bench, BenchConfig};
use svarsign::restrictions::{parse_restrictions, RestrictionSet};
use svarsign::rng::master_stream;
use svarsign::sampling::{
    collect_draws, fit_posterior, log_marginal_likelihood, Algorithm, Collection, DrawConfig,
    MinnesotaHyper, Posterior,
};
use svarsign::stats::quantile_sorted;
use svarsign::var::{compute_irf, read_data_csv, simulate_dgp, write_data_csv, DgpSpec};

use manifest::{write_atomic, RunManifest};

const SHRINKAGE_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.4, 0.8];

#[derive(Parser)]
#[command(name = "svarsign", version, about = "Sign- and ranking-identified structural VARs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a restriction file: parse, partition and test the pairwise
    /// identifiability conditions.
    Validate(ValidateArgs),
    /// Simulate a dataset whose true impact matrix satisfies a scheme.
    Simulate(SimulateArgs),
    /// Draw restriction-consistent impulse responses from the posterior.
    Estimate(EstimateArgs),
    /// Acceptance-rate benchmark over a grid of model sizes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Restriction CSV file.
    restrictions: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Restriction CSV the true impact matrix must satisfy.
    #[arg(long)]
    restrictions: PathBuf,
    /// Variable count; defaults to the scheme's. May only grow it.
    #[arg(long)]
    n: Option<usize>,
    /// Lag order of the generating VAR.
    #[arg(long, default_value_t = 5)]
    p: usize,
    /// Observations to keep after burn-in.
    #[arg(long, default_value_t = 200)]
    t_obs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Data CSV: header of variable names, one row per observation.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    restrictions: PathBuf,
    #[arg(long, default_value_t = 4)]
    lags: usize,
    /// Admissible draws to collect.
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long, default_value = "proposed")]
    algorithm: Algorithm,
    /// Impulse-response horizon H (responses at 0..=H).
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    /// Minnesota shrinkage: a number, or "grid" to pick the marginal-
    /// likelihood maximizer over {0.05, 0.1, 0.2, 0.4, 0.8}.
    #[arg(long, default_value = "0.2")]
    shrinkage: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results are identical for any value.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Candidate-pair cap per requested draw.
    #[arg(long, default_value_t = 10_000_000)]
    cap: u64,
    /// Quantile levels for irf_quantiles.csv, in percent.
    #[arg(long, value_delimiter = ',', default_values_t = [16.0, 50.0, 84.0])]
    quantiles: Vec<f64>,
    /// Also dump every draw's IRF tensor to irf_draws.bin.
    #[arg(long)]
    dump_draws: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark grid config (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Simulate(args) => cmd_simulate(&args).map(|_| 0),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Bench(args) => cmd_bench(&args).map(|_| 0),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_restrictions(path: &Path) -> Result<RestrictionSet> {
    let text =
        fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
    parse_restrictions(&text).with_context(|| format!("parse {}", path.display()))
}

fn cmd_validate(args: &ValidateArgs) -> Result<u8> {
    let set = load_restrictions(&args.restrictions)?;
    println!(
        "scheme: {} variables, {} shocks, {} restrictions",
        set.n,
        set.m,
        set.len()
    );
    println!(
        "partitions: {} single-shock impact, {} cross-shock, {} dynamic (max horizon {})",
        set.impact_single.iter().map(Vec::len).sum::<usize>(),
        set.cross_shock.len(),
        set.dynamic.len(),
        set.max_dynamic_horizon()
    );
    match set.validate_strict() {
        Ok(()) => println!("strict mode: every shock carries an impact restriction"),
        Err(e) => println!("strict mode: not eligible ({e})"),
    }

    let report = set.check_assumptions();
    for pair in &report.pairs {
        let names = (
            set.shock_names[pair.shock_j].as_str(),
            set.shock_names[pair.shock_l].as_str(),
        );
        match &pair.witness {
            Some(w) if w.condition == 1 => println!(
                "pair {}/{}: condition 1 (same sign on {}, opposite on {})",
                names.0, names.1, set.variable_names[w.i1], set.variable_names[w.i2]
            ),
            Some(w) => println!(
                "pair {}/{}: condition 2 (matched ranking of {} against {})",
                names.0, names.1, set.variable_names[w.i1], set.variable_names[w.i2]
            ),
            None => println!("pair {}/{}: indistinguishable", names.0, names.1),
        }
    }
    if report.holds {
        println!("identifiability conditions hold");
        Ok(0)
    } else {
        println!("identifiability conditions FAIL; only the fallback sampler applies");
        Ok(1)
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut set = load_restrictions(&args.restrictions)?;
    if let Some(n) = args.n {
        set.resize(n, set.m)?;
    }
    let mut config = RunManifest::new(
        "simulate",
        Some(args.seed),
        json!({
            "restrictions": args.restrictions.display().to_string(),
            "n": set.n, "m": set.m, "p": args.p, "t_obs": args.t_obs,
        }),
    );
    config.add_input(&args.restrictions)?;

    let spec = DgpSpec::new(set.n, set.m, args.p, args.t_obs, &set);
    let mut rng = master_stream(args.seed);
    let (params, impact, data) = simulate_dgp(&spec, &mut rng)?;

    fs::create_dir_all(&args.out)?;
    let csv = write_data_csv(&data, Some(&set.variable_names));
    write_atomic(&args.out.join("data.csv"), csv.as_bytes())?;
    let truth = json!({
        "intercept": params.intercept.as_slice(),
        "lag_coeffs": params.lag_coeffs.iter()
            .map(|a| (0..a.nrows()).map(|i| a.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "impact": (0..impact.nrows())
            .map(|i| impact.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
        "sigma": (0..params.sigma.nrows())
            .map(|i| params.sigma.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    write_atomic(
        &args.out.join("true_params.json"),
        serde_json::to_string_pretty(&truth)?.as_bytes(),
    )?;
    config.finish();
    config.write(&args.out)?;
    println!(
        "wrote {} rows x {} variables to {}",
        data.nrows(),
        data.ncols(),
        args.out.join("data.csv").display()
    );
    Ok(())
}

fn resolve_shrinkage(spec: &str, data: &nalgebra::DMatrix<f64>, p: usize) -> Result<f64> {
    if spec == "grid" {
        let mut best = (f64::NEG_INFINITY, SHRINKAGE_GRID[0]);
        for &lambda in &SHRINKAGE_GRID {
            let ml = log_marginal_likelihood(data, p, MinnesotaHyper::with_lambda(lambda))?;
            if ml > best.0 {
                best = (ml, lambda);
            }
        }
        println!("shrinkage grid: selected lambda = {}", best.1);
        return Ok(best.1);
    }
    let lambda: f64 = spec.parse().context("shrinkage must be a number or \"grid\"")?;
    if lambda <= 0.0 {
        bail!("shrinkage must be positive");
    }
    Ok(lambda)
}

fn cmd_estimate(args: &EstimateArgs) -> Result<u8> {
    let set = load_restrictions(&args.restrictions)?;
    let text = fs::read_to_string(&args.data)
        .with_context(|| format!("read {}", args.data.display()))?;
    let (data, names) = read_data_csv(&text)?;
    if data.ncols() != set.n {
        bail!(
            "data has {} variables but the scheme expects {}",
            data.ncols(),
            set.n
        );
    }
    if args.horizon < set.max_dynamic_horizon() {
        bail!(
            "horizon {} is below the scheme's max dynamic horizon {}",
            args.horizon,
            set.max_dynamic_horizon()
        );
    }
    let mut levels: Vec<f64> = args.quantiles.iter().map(|q| q / 100.0).collect();
    levels.sort_by(|a, b| a.total_cmp(b));
    if levels.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
        bail!("quantile levels must lie in [0, 100]");
    }

    let lambda = resolve_shrinkage(&args.shrinkage, &data, args.lags)?;
    let posterior =
        Posterior::Conjugate(fit_posterior(&data, args.lags, MinnesotaHyper::with_lambda(lambda))?);

    let mut manifest = RunManifest::new(
        "estimate",
        Some(args.seed),
        json!({
            "data": args.data.display().to_string(),
            "restrictions": args.restrictions.display().to_string(),
            "lags": args.lags, "draws": args.draws,
            "algorithm": args.algorithm.to_string(),
            "horizon": args.horizon, "shrinkage": lambda,
            "threads": args.threads, "cap": args.cap,
            "quantiles": levels, "dump_draws": args.dump_draws,
        }),
    );
    manifest.add_input(&args.data)?;
    manifest.add_input(&args.restrictions)?;

    let config = DrawConfig { cap: args.cap, ..DrawConfig::default() };
    let coll = collect_draws(
        args.algorithm,
        &posterior,
        &set,
        args.draws,
        args.seed,
        args.threads,
        &config,
    )?;
    println!(
        "collected {} / {} admissible draws from {} candidates",
        coll.draws.len(),
        args.draws,
        coll.stats.candidates
    );

    fs::create_dir_all(&args.out)?;
    write_estimate_outputs(&args.out, &set, &names, &coll, args.horizon, &levels, args.dump_draws)?;
    manifest.stats = Some(coll.stats);
    manifest.finish();
    manifest.write(&args.out)?;

    if coll.exhausted {
        eprintln!("candidate cap exhausted: outputs are partial");
        return Ok(1);
    }
    Ok(0)
}

fn write_estimate_outputs(
    out: &Path,
    set: &RestrictionSet,
    names: &[String],
    coll: &Collection,
    horizon: usize,
    levels: &[f64],
    dump_draws: bool,
) -> Result<()> {
    let n = set.n;
    let m = set.m;
    let irfs: Vec<_> = coll
        .draws
        .iter()
        .map(|d| compute_irf(&d.params, &d.impact, m, horizon))
        .collect::<std::result::Result<_, _>>()?;

    let mut csv = String::from("variable,shock");
    csv.push_str(",horizon");
    for q in levels {
        csv.push_str(&format!(",q{:02}", (q * 100.0).round() as u32));
    }
    csv.push_str(",mean\n");
    let mut sample = Vec::with_capacity(irfs.len());
    if !irfs.is_empty() {
        for i in 0..n {
            for j in 0..m {
                for h in 0..=horizon {
                    sample.clear();
                    sample.extend(irfs.iter().map(|t| t.response(i, j, h)));
                    sample.sort_by(|a, b| a.total_cmp(b));
                    csv.push_str(&format!("{},{},{h}", names[i], set.shock_names[j]));
                    for &q in levels {
                        csv.push_str(&format!(",{}", quantile_sorted(&sample, q)));
                    }
                    let mean = sample.iter().sum::<f64>() / sample.len() as f64;
                    csv.push_str(&format!(",{mean}\n"));
                }
            }
        }
    }
    write_atomic(&out.join("irf_quantiles.csv"), csv.as_bytes())?;

    if dump_draws {
        // draw-major, then variable, shock, horizon; 64-bit little-endian
        let mut bytes =
            Vec::with_capacity(irfs.len() * n * m * (horizon + 1) * std::mem::size_of::<f64>());
        for t in &irfs {
            for i in 0..n {
                for j in 0..m {
                    for h in 0..=horizon {
                        bytes.extend_from_slice(&t.response(i, j, h).to_le_bytes());
                    }
                }
            }
        }
        write_atomic(&out.join("irf_draws.bin"), &bytes)?;
    }

    let stats = json!({
        "stats": coll.stats,
        "acceptance_probability": coll.stats.acceptance_probability(),
        "collected": coll.draws.len(),
        "exhausted": coll.exhausted,
    });
    write_atomic(&out.join("stats.json"), serde_json::to_string_pretty(&stats)?.as_bytes())?;
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("read {}", args.config.display()))?;
    let config: BenchConfig = serde_json::from_str(&text)
        .with_context(|| format!("parse {}", args.config.display()))?;
    let mut manifest = RunManifest::new("bench", Some(config.seed), serde_json::to_value(&config)?);
    manifest.add_input(&args.config)?;

    let result = run_bench(&config)?;
    for f in &result.failures {
        eprintln!(
            "cell (n={}, m={}, restrictions={}) skipped: {}",
            f.cell.n, f.cell.m, f.cell.restriction_count, f.message
        );
    }
    fs::create_dir_all(&args.out)?;
    write_atomic(
        &args.out.join("bench.json"),
        serde_json::to_string_pretty(&result)?.as_bytes(),
    )?;
    write_atomic(&args.out.join("bench.csv"), result.to_csv().as_bytes())?;
    manifest.finish();
    manifest.write(&args.out)?;
    println!(
        "{} rows written to {}",
        result.rows.len(),
        args.out.join("bench.csv").display()
    );
    Ok(())
}
