//! Command-line driver: `cumulants`, `simulate`, `distance`, `rates`,
//! and `stein-check` over an experiment grid described by a flat
//! key–value config file.
//!
//! Exit codes: 0 on success, 2 for domain/config errors, 3 for
//! capacity/runtime errors. All randomness flows from the single config
//! seed (optionally overridden by `--seed`); every output file embeds
//! the config hash and seed for reproducibility.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hermite_variations::config::ExperimentConfig;
use hermite_variations::covariance::VariationSpec;
use hermite_variations::diagrams::{self, CumulantReport, ExactCaps};
use hermite_variations::distances;
use hermite_variations::error::Error;
use hermite_variations::rates;
use hermite_variations::sampler;
use hermite_variations::stein;
use hermite_variations::Result;

#[derive(Parser)]
#[command(
    name = "hermite-variations",
    about = "Exact cumulants, simulation, and normal-approximation distances for Hermite variations of fractional Gaussian noise",
    version
)]
struct Cli {
    /// Path to a key = value config file (defaults apply if omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Master seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory, overriding the config file.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact cumulants κ₂, κ₃, κ₄ and M for every spec on the grid.
    Cumulants,
    /// Dump raw F_n replicates per spec (binary + CSV).
    Simulate,
    /// Monte Carlo distance reports (TV, Kolmogorov, trig bounds).
    Distance,
    /// Rate fits and the sandwich table (rates_summary.csv, sandwich.csv).
    Rates,
    /// Verify the Stein-equation constants and bounds; JSON certificate.
    SteinCheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Domain(_) | Error::Unsupported(_) | Error::Config(_) => ExitCode::from(2),
                Error::Capacity(_) | Error::Covariance(_) | Error::Io(_) => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(output) = &cli.output {
        cfg.output_dir = output.clone();
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::config("--jobs must be ≥ 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::config(format!("cannot size the worker pool: {e}")))?;
    }
    diagrams::validate_diagram_weights();
    std::fs::create_dir_all(&cfg.output_dir)?;

    match cli.command {
        Command::Cumulants => cmd_cumulants(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Distance => cmd_distance(&cfg),
        Command::Rates => cmd_rates(&cfg),
        Command::SteinCheck => cmd_stein_check(&cfg),
    }
}

fn caps(cfg: &ExperimentConfig) -> ExactCaps {
    ExactCaps {
        k4_loop_cap: cfg.exact_n_cap,
        ..ExactCaps::default()
    }
}

fn specs(cfg: &ExperimentConfig) -> Result<Vec<VariationSpec>> {
    let mut out = Vec::new();
    for &q in &cfg.qs {
        for &h in &cfg.hs {
            for &n in &cfg.n_grid {
                out.push(VariationSpec::new(q, h, n)?);
            }
        }
    }
    Ok(out)
}

/// `# config_hash=… seed=…` provenance line for CSV artifacts.
fn provenance(cfg: &ExperimentConfig) -> String {
    format!("# config_hash={} seed={}", cfg.hash(), cfg.seed)
}

/// Write `content` via a temp file + rename so partial jobs never leave
/// a truncated artifact behind.
fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    // Append rather than with_extension: artifact names contain dots
    // (H0.6), and with_extension would truncate at the wrong one.
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn cmd_cumulants(cfg: &ExperimentConfig) -> Result<()> {
    let caps = caps(cfg);
    let mut csv = String::new();
    csv.push_str(&provenance(cfg));
    csv.push('\n');
    csv.push_str("q,h,n,kappa2,kappa3,kappa4,m_stat\n");
    let mut reports: Vec<CumulantReport> = Vec::new();
    for spec in specs(cfg)? {
        let (report, _se) = rates::cumulants_for_rates(&spec, &caps, cfg.seed)?;
        csv.push_str(&format!(
            "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            spec.q, spec.h, spec.n, report.kappa2, report.kappa3, report.kappa4, report.m_stat
        ));
        reports.push(report);
    }
    write_atomic(&cfg.output_dir.join("cumulants.csv"), csv.as_bytes())?;
    let json = serde_json::json!({
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "reports": reports,
    });
    write_atomic(
        &cfg.output_dir.join("cumulants.json"),
        serde_json::to_string_pretty(&json)
            .map_err(|e| Error::config(format!("serialization failed: {e}")))?
            .as_bytes(),
    )?;
    println!("wrote {} cumulant rows to {}", reports.len(), cfg.output_dir.display());
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.replicates == 0 {
        return Err(Error::config("replicates must be ≥ 1 for simulate"));
    }
    for spec in specs(cfg)? {
        let batch = sampler::sample_fn(&spec, cfg.replicates, cfg.seed)?;
        // Labels contain dots (H0.6), so build full names rather than
        // using with_extension, which would truncate at the first dot.
        let bin = cfg.output_dir.join(format!("samples_{}.bin", spec.label()));
        let csv = cfg.output_dir.join(format!("samples_{}.csv", spec.label()));
        sampler::write_batch_binary(&bin, &batch)?;
        sampler::write_batch_csv(&csv, &batch)?;
        println!(
            "{}: {} replicates (config_hash={} seed={})",
            spec.label(),
            batch.count,
            cfg.hash(),
            cfg.seed
        );
    }
    Ok(())
}

fn cmd_distance(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate_for_distance()?;
    // N-vs-N self test: the estimator must show only its bias floor on
    // exact standard normal samples before any report is trusted.
    let null = distances::calibrate_null(
        cfg.replicates.max(100_000),
        cfg.seed ^ 0x4e55_4c4c, // distinct stream for the null self-test
        cfg.tv_method,
    )?;
    let allowance = distances::bias_allowance(cfg.replicates, null);
    if null > 2.0 * distances::null_threshold(cfg.replicates.max(100_000)) {
        return Err(Error::covariance(format!(
            "TV null self-test failed: bias {null:.4} exceeds allowance {allowance:.4}"
        )));
    }
    let caps = caps(cfg);
    let mut csv = String::new();
    csv.push_str(&provenance(cfg));
    csv.push('\n');
    csv.push_str(
        "q,h,n,tv_density,tv_uncertainty,kolmogorov,kolmogorov_uncertainty,sin_gap,sin_gap_se,cos_gap,cos_gap_se,tv_lower_trig,fmt_upper,fmt_upper_simple,sandwich_ratio\n",
    );
    for spec in specs(cfg)? {
        let (cumulants, _) = rates::cumulants_for_rates(&spec, &caps, cfg.seed)?;
        let batch = sampler::sample_fn(&spec, cfg.replicates, cfg.seed)?;
        let report = distances::distance_report(
            &batch,
            cumulants.kappa4.max(0.0),
            cumulants.m_stat,
            cfg.tv_method,
        )?;
        csv.push_str(&format!(
            "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}\n",
            spec.q,
            spec.h,
            spec.n,
            report.tv_density.value,
            report.tv_density.uncertainty,
            report.kolmogorov.value,
            report.kolmogorov.uncertainty,
            report.sin_gap.value,
            report.sin_gap.uncertainty,
            report.cos_gap.value,
            report.cos_gap.uncertainty,
            report.tv_lower_trig,
            report.fmt_upper,
            report.fmt_upper_simple,
            report.sandwich_ratio,
        ));
        let json = serde_json::json!({
            "config_hash": cfg.hash(),
            "seed": cfg.seed,
            "null_bias": null,
            "bias_allowance": allowance,
            "report": report,
        });
        write_atomic(
            &cfg.output_dir.join(format!("distance_{}.json", spec.label())),
            serde_json::to_string_pretty(&json)
                .map_err(|e| Error::config(format!("serialization failed: {e}")))?
                .as_bytes(),
        )?;
    }
    write_atomic(&cfg.output_dir.join("distances.csv"), csv.as_bytes())?;
    println!(
        "distance reports written to {} (null bias {:.4} ≤ allowance {:.4})",
        cfg.output_dir.display(),
        null,
        allowance
    );
    Ok(())
}

fn cmd_rates(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.n_grid.len() < 2 {
        return Err(Error::config(
            "rate fitting needs an n_grid with at least two points",
        ));
    }
    let plan = rates::RatesPlan {
        q_values: cfg.qs.clone(),
        h_values: cfg.hs.clone(),
        n_grid: cfg.n_grid.clone(),
        replicates: cfg.replicates,
        seed: cfg.seed,
        tv_method: cfg.tv_method,
        caps: caps(cfg),
    };
    let out = rates::run_grid(&plan)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let summary_path = cfg.output_dir.join("rates_summary.csv");
    let sandwich_path = cfg.output_dir.join("sandwich.csv");
    // Prepend the provenance line to the module-written CSVs.
    rates::write_rates_summary(&summary_path, &out.fits)?;
    rates::write_sandwich(&sandwich_path, &out.sandwich)?;
    for path in [&summary_path, &sandwich_path] {
        let body = std::fs::read_to_string(path)?;
        write_atomic(path, format!("{}\n{}", provenance(cfg), body).as_bytes())?;
    }
    println!(
        "{} fits, {} sandwich rows -> {}",
        out.fits.len(),
        out.sandwich.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_stein_check(cfg: &ExperimentConfig) -> Result<()> {
    let constants = stein::fsin_constants()?;
    let grid = stein::default_grid();
    let mut dictionary_checks = Vec::new();
    let mut all_ok = true;
    for (name, g) in stein::dictionary() {
        let solution = stein::stein_solve(&*g, &grid)?;
        let (sup_ratio, lip_ratio) = stein::stein_bound_check(&solution);
        let ok = sup_ratio <= (std::f64::consts::PI / 2.0).sqrt() + 1e-6 && lip_ratio <= 2.0 + 1e-6;
        all_ok &= ok;
        dictionary_checks.push(serde_json::json!({
            "g": name,
            "sup_ratio": sup_ratio,
            "lipschitz_ratio": lip_ratio,
            "ok": ok,
        }));
    }
    let m2_ok = (constants.m2 - (-0.5f64).exp() / 3.0).abs() <= 1e-6;
    let m3_ok = constants.m3.abs() <= 1e-6;
    let sup_ok = constants.sup2 <= 2.0 + 1e-4 && constants.sup3 <= 2.0 + 1e-4;
    all_ok &= m2_ok && m3_ok && sup_ok;

    let certificate = serde_json::json!({
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "fsin": {
            "second_derivative_mean": constants.m2,
            "second_derivative_mean_expected": (-0.5f64).exp() / 3.0,
            "third_derivative_mean": constants.m3,
            "sup_second_derivative": constants.sup2,
            "sup_third_derivative": constants.sup3,
            "mean_checks_ok": m2_ok && m3_ok,
            "sup_checks_ok": sup_ok,
        },
        "dictionary": dictionary_checks,
        "all_ok": all_ok,
    });
    let text = serde_json::to_string_pretty(&certificate)
        .map_err(|e| Error::config(format!("serialization failed: {e}")))?;
    write_atomic(&cfg.output_dir.join("stein_certificate.json"), text.as_bytes())?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{text}")?;
    if all_ok {
        Ok(())
    } else {
        Err(Error::covariance(
            "Stein certificate checks failed; see stein_certificate.json",
        ))
    }
}
