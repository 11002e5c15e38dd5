//! Command-line front end. Each subcommand is a thin wrapper over one library
//! entry point, so everything the binary can do is equally reachable through
//! the library. Exit codes: 0 success, 1 failure, 2 usage.

use crate::error::{Error, Result};
use crate::gff::{apply_drift, sample_prior, ModelParams};
use crate::harness::config::{ChainRunConfig, ExperimentConfig};
use crate::harness::persist::{
    field_csv_string, histogram_csv_string, parse_field_csv, spectrum_csv_string,
    trace_csv_string, write_atomic, TraceSidecar,
};
use crate::harness::{load_manifest, run_sweep};
use crate::lattice::LatticeShape;
use crate::localtime::local_time_histogram;
use crate::mcmc::diagnostics::trace_diagnostics;
use crate::mcmc::run_chain;
use crate::observables::{fit_scaling_exponent, theoretical_exponents, FitPoint};
use crate::spectral::build_spectrum_1d;
use crate::verify::{run_verify, VerifyLevel};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "manifold-mc", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the spectrum of the box Laplacian as CSV
    Spectrum {
        /// Lattice half-width N; the box is [-N, N]^d
        #[arg(long)]
        n: usize,
        /// Lattice dimension d
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Directory to write spectrum.csv into (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw one free-field configuration and write it as CSV
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Number of field components D
        #[arg(long = "range-dim", default_value_t = 1)]
        range_dim: usize,
        /// Inverse temperature of the elastic term
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Linear tilt a added to the sample (0 keeps the plain free field)
        #[arg(long, default_value_t = 0.0)]
        drift: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory to write field.csv into (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Histogram the integer local time of a stored field
    Localtime {
        /// Field CSV as written by `sample`
        #[arg(long)]
        input: PathBuf,
        /// Directory to write localtime.csv into (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a single chain described by a JSON run file
    Mcmc {
        /// ChainRunConfig JSON: lattice, parameters, and schedule
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for trace.csv and trace.json
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the replica sweep described by an experiment config
    Sweep {
        /// ExperimentConfig JSON: lattice sizes, replicas, and schedule
        #[arg(long)]
        config: PathBuf,
        /// Directory for traces and manifest.json
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = one per core)
        #[arg(long, env = "MANIFOLD_MC_JOBS", default_value_t = 0)]
        jobs: usize,
        /// Override the master seed in the config
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-derive the identities the library rests on
    Verify {
        #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
        level: LevelArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory to also write verify.json into
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-fit the scaling exponent from a sweep manifest
    Fit {
        /// manifest.json written by `sweep`
        #[arg(long)]
        manifest: PathBuf,
        /// Fixed coefficient of the log log N term in the fit
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

impl From<LevelArg> for VerifyLevel {
    fn from(l: LevelArg) -> VerifyLevel {
        match l {
            LevelArg::Quick => VerifyLevel::Quick,
            LevelArg::Full => VerifyLevel::Full,
        }
    }
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help and version land on stdout and are not failures
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Spectrum { n, dim, out } => cmd_spectrum(n, dim, out.as_deref()),
        Cmd::Sample {
            n,
            dim,
            range_dim,
            beta,
            drift,
            seed,
            out,
        } => cmd_sample(n, dim, range_dim, beta, drift, seed, out.as_deref()),
        Cmd::Localtime { input, out } => cmd_localtime(&input, out.as_deref()),
        Cmd::Mcmc { config, seed, out } => cmd_mcmc(&config, seed, &out),
        Cmd::Sweep {
            config,
            out,
            jobs,
            seed,
        } => cmd_sweep(&config, &out, jobs, seed),
        Cmd::Verify { level, seed, out } => cmd_verify(level.into(), seed, out.as_deref()),
        Cmd::Fit { manifest, rho } => cmd_fit(&manifest, rho),
    }
}

/// Write `text` as `name` under `dir` when given, or to stdout.
fn emit(dir: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            write_atomic(&path, text.as_bytes())?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_spectrum(n: usize, dim: usize, out: Option<&Path>) -> Result<()> {
    let shape = LatticeShape::new(n, dim)?;
    let spec = build_spectrum_1d(n)?;
    emit(out, "spectrum.csv", &spectrum_csv_string(&spec, &shape)?)
}

fn cmd_sample(
    n: usize,
    dim: usize,
    range_dim: usize,
    beta: f64,
    drift: f64,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let shape = LatticeShape::new(n, dim)?;
    let mut params = ModelParams::new(shape, range_dim, beta, 0.0)?;
    let spec = build_spectrum_1d(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, mut field) = sample_prior(&params, &spec, &mut rng)?;
    if drift != 0.0 {
        params.drift_a = drift;
        apply_drift(&mut field, &shape, drift)?;
    }
    emit(out, "field.csv", &field_csv_string(&field, &params, seed))
}

fn cmd_localtime(input: &Path, out: Option<&Path>) -> Result<()> {
    let stored = parse_field_csv(&fs::read_to_string(input)?)?;
    let d = stored.field.range_dim();
    // tightest window that still sees every site
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for (c, comp) in stored.field.components().enumerate() {
        for &v in comp {
            let z = (v + 0.5).floor() as i64;
            lo[c] = lo[c].min(z);
            hi[c] = hi[c].max(z);
        }
    }
    let hist = local_time_histogram(&stored.field, &lo, &hi)?;
    emit(out, "localtime.csv", &histogram_csv_string(&hist))
}

fn cmd_mcmc(config: &Path, seed: u64, out: &Path) -> Result<()> {
    let cfg = ChainRunConfig::from_json_file(config)?;
    let params = cfg.params()?;
    let (trace, _) = run_chain(&params, &cfg.schedule, seed)?;
    let diagnostics = trace_diagnostics(&trace)?;
    fs::create_dir_all(out)?;
    write_atomic(&out.join("trace.csv"), trace_csv_string(&trace).as_bytes())?;
    let sidecar = TraceSidecar {
        params,
        schedule: cfg.schedule,
        seed,
        diagnostics,
        final_sigma_site: trace.final_sigma_site,
        counters: trace.counters,
        aborted: trace.aborted.clone(),
    };
    write_atomic(
        &out.join("trace.json"),
        serde_json::to_string_pretty(&sidecar)?.as_bytes(),
    )?;
    println!("wrote {}", out.join("trace.csv").display());
    println!("wrote {}", out.join("trace.json").display());
    let d = &sidecar.diagnostics;
    println!(
        "energy {:.4} +/- {:.4}  radius {:.4} +/- {:.4}  ess {:.0}",
        d.energy.mean, d.energy.stderr, d.radius.mean, d.radius.stderr, d.radius.ess
    );
    if d.low_confidence {
        println!("warning: run too short for its autocorrelation time");
    }
    Ok(())
}

fn cmd_sweep(config: &Path, out: &Path, jobs: usize, seed: Option<u64>) -> Result<()> {
    let mut cfg = ExperimentConfig::from_json_file(config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let manifest = run_sweep(&cfg, out, jobs)?;
    for p in &manifest.aggregated {
        println!(
            "n {:>4}  radius {:.4} +/- {:.4}  ess {:>7.0}  chains {}",
            p.n, p.mean_radius, p.stderr, p.total_ess, p.chains_used
        );
    }
    println!(
        "exponent {:.4} +/- {:.4}  (r^2 {:.4}, rho {})",
        manifest.fit.exponent,
        manifest.fit.exponent_stderr,
        manifest.fit.r_squared,
        manifest.fit.rho
    );
    if let Some((lower, upper)) = manifest.target_exponents {
        println!("predicted exponent window [{lower:.4}, {upper:.4}]");
    }
    for w in &manifest.warnings {
        println!("warning: {w}");
    }
    println!("wrote {}", out.join("manifest.json").display());
    Ok(())
}

fn cmd_verify(level: VerifyLevel, seed: u64, out: Option<&Path>) -> Result<()> {
    let report = run_verify(level, seed);
    for c in &report.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        println!(
            "{mark} {:<34} {:>12.4e} {} {:>9.1e}  {}",
            c.name, c.observed, c.op, c.threshold, c.details
        );
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let path = dir.join("verify.json");
        write_atomic(&path, serde_json::to_string_pretty(&report)?.as_bytes())?;
        println!("wrote {}", path.display());
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Error::InconsistentState(format!(
            "{failed} of {} verification checks failed",
            report.checks.len()
        )));
    }
    println!("all {} checks passed", report.checks.len());
    Ok(())
}

fn cmd_fit(manifest: &Path, rho: f64) -> Result<()> {
    let manifest = load_manifest(manifest)?;
    let points: Vec<FitPoint> = manifest
        .aggregated
        .iter()
        .map(|p| FitPoint {
            n: p.n as f64,
            value: p.mean_radius,
            stderr: p.stderr,
        })
        .collect();
    let fit = fit_scaling_exponent(&points, rho)?;
    let targets = theoretical_exponents(manifest.config.dim, manifest.config.range_dim).ok();
    let doc = serde_json::json!({
        "fit": fit,
        "target_exponents": targets,
        "points": points,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}
