//! `rnp`: runs the coupled condensate model, the scalar Oono model and the
//! entropy-inequality harness from plain-text configs.
//!
//! Exit codes: 0 all asserted invariants pass, 1 an invariant failed,
//! 2 usage or configuration error, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use rnp_core::cho::{cho_invariants, cho_run};
use rnp_core::config::{load_config, render, ModelConfig, ParsedConfig};
use rnp_core::diagnostics::{verify_mz, InvariantReport, MzParams, PiecewiseConstantSampler};
use rnp_core::grid::Grid;
use rnp_core::output::{ChoCsvSink, CsvSink};
use rnp_core::stepper::run;
use rnp_core::Error;

#[derive(Parser)]
#[command(name = "rnp", version, about = "Condensate phase-field simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the coupled phase / protein / RNA system from an [rnp] config.
    Run {
        config: PathBuf,
        /// Output directory for diagnostics.csv, manifest.conf and snapshots.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the scalar Cahn-Hilliard-Oono model from a [cho] config.
    Cho {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sample random phase fields and check the entropy gradient inequality.
    VerifyMz {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cells per side of the sample grid.
        #[arg(long, default_value_t = 32)]
        n: usize,
        /// Constant blocks per side.
        #[arg(long, default_value_t = 8)]
        blocks: usize,
        /// Largest acceptable constant.
        #[arg(long, default_value_t = 1e3)]
        ceiling: f64,
    },
    /// Validate a config and print the resolved manifest.
    CheckConfig { config: PathBuf },
}

enum Failure {
    Usage(String),
    Invariant(Vec<&'static str>),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() || matches!(e, Error::Domain(_)) {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

fn manifest_header(parsed: &ParsedConfig) -> String {
    let model = match parsed.model {
        ModelConfig::Rnp(_) => "rnp",
        ModelConfig::Cho(_) => "cho",
    };
    format!("# rnp {} manifest ({model})\n", env!("CARGO_PKG_VERSION"))
}

fn write_manifest(
    out: &Path,
    parsed: &ParsedConfig,
    started: f64,
    summary: &Result<InvariantReport, Failure>,
) -> Result<(), Failure> {
    let mut text = manifest_header(parsed);
    text.push_str(&format!("# started_unix = {started:.3}\n# finished_unix = {:.3}\n", unix_now()));
    match summary {
        Ok(rep) => {
            for f in &rep.families {
                text.push_str(&format!("# invariant {} {}: {}\n", f.name, f.status.as_str(), f.detail));
            }
        }
        Err(Failure::Numerical(msg)) | Err(Failure::Usage(msg)) => {
            text.push_str(&format!("# aborted: {msg}\n"));
        }
        Err(Failure::Invariant(_)) => {}
    }
    text.push_str(&render(parsed));
    let path = out.join("manifest.conf");
    fs::write(&path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load(config: &Path) -> Result<ParsedConfig, Failure> {
    load_config(config).map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))
}

fn report(rep: &InvariantReport) -> Result<(), Failure> {
    for f in &rep.families {
        println!("{:<16} {:<7} {}", f.name, f.status.as_str(), f.detail);
    }
    if rep.all_passed() {
        Ok(())
    } else {
        Err(Failure::Invariant(rep.failing()))
    }
}

fn prepare_out(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))
}

fn cmd_run(config: &Path, out: &Path) -> Result<(), Failure> {
    let parsed = load(config)?;
    let ModelConfig::Rnp(cfg) = &parsed.model else {
        return Err(Failure::Usage(format!("{}: `run` needs an [rnp] config", config.display())));
    };
    prepare_out(out)?;
    let started = unix_now();
    let summary = (|| {
        let mut sink = CsvSink::create(out)?;
        let outcome = run(cfg, &mut sink)?;
        sink.finish()?;
        eprintln!(
            "{} steps, {} Newton and {} CG iterations; tau_max = {:e}",
            cfg.n_steps(),
            outcome.newton_iterations,
            outcome.cg_iterations,
            cfg.tau_max()
        );
        Ok::<_, Error>(outcome.invariants)
    })()
    .map_err(Failure::from);
    write_manifest(out, &parsed, started, &summary)?;
    report(&summary?)
}

fn cmd_cho(config: &Path, out: &Path) -> Result<(), Failure> {
    let parsed = load(config)?;
    let ModelConfig::Cho(cfg) = &parsed.model else {
        return Err(Failure::Usage(format!("{}: `cho` needs a [cho] config", config.display())));
    };
    prepare_out(out)?;
    let started = unix_now();
    let summary = (|| {
        let mut sink = ChoCsvSink::create(out)?;
        let outcome = cho_run(cfg, &mut sink)?;
        let records = sink.finish()?;
        let r = outcome.final_record;
        eprintln!(
            "t = {}: mean {:?}, discrete {:?}, continuum {:?}",
            r.t, r.mean, r.mean_discrete, r.mean_continuum
        );
        Ok::<_, Error>(cho_invariants(cfg, &outcome, &records))
    })()
    .map_err(Failure::from);
    write_manifest(out, &parsed, started, &summary)?;
    report(&summary?)
}

fn cmd_verify_mz(trials: usize, seed: u64, n: usize, blocks: usize, ceiling: f64) -> Result<(), Failure> {
    if trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    if !(ceiling > 0.0) {
        return Err(Failure::Usage(format!("--ceiling must be positive, got {ceiling}")));
    }
    let grid = Grid::unit_square(n)?;
    let params = MzParams {
        ceiling,
        ..MzParams::default()
    };
    let mut sampler = PiecewiseConstantSampler::new(seed, blocks);
    let rep = verify_mz(&mut sampler, &grid, trials, &params)?;
    println!("trials = {}", rep.trials);
    println!("evaluated = {}", rep.evaluated);
    println!("skipped = {}", rep.skipped);
    println!("c_psi = {:?}", params.c_psi);
    println!("required_C = {:?}", rep.required_c);
    match rep.worst_trial {
        Some(k) => println!("worst_trial = {k}"),
        None => println!("worst_trial = none"),
    }
    println!("ceiling = {:?}", params.ceiling);
    println!("violations = {}", rep.violations.len());
    if rep.passed() {
        Ok(())
    } else {
        Err(Failure::Invariant(vec!["mz"]))
    }
}

fn cmd_check_config(config: &Path) -> Result<(), Failure> {
    let parsed = load(config)?;
    print!("{}{}", manifest_header(&parsed), render(&parsed));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run { config, out } => cmd_run(config, out),
        Command::Cho { config, out } => cmd_cho(config, out),
        Command::VerifyMz {
            trials,
            seed,
            n,
            blocks,
            ceiling,
        } => cmd_verify_mz(*trials, *seed, *n, *blocks, *ceiling),
        Command::CheckConfig { config } => cmd_check_config(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invariant(names)) => {
            eprintln!("invariant failure: {}", names.join(", "));
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
